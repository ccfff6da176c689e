//! Small vertex sets as 64-bit masks.
//!
//! Every graph assigns its vertices indices `0..n` (label-sorted), and all
//! derived graphs share the same index space, so sets from a graph and its
//! subgraphs compare directly.

use std::fmt;

/// A set of vertex indices, backed by a `u64` bitmask.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VSet(u64);

pub const MAX_VERTICES: usize = 64;

impl VSet {
    pub const EMPTY: VSet = VSet(0);

    pub fn singleton(v: u32) -> Self {
        VSet(1u64 << v)
    }

    pub fn full(n: usize) -> Self {
        if n == 64 {
            VSet(!0)
        } else {
            VSet((1u64 << n) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> Self {
        VSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, v: u32) -> bool {
        self.0 & (1u64 << v) != 0
    }

    pub fn insert(&mut self, v: u32) {
        self.0 |= 1u64 << v;
    }

    pub fn remove(&mut self, v: u32) {
        self.0 &= !(1u64 << v);
    }

    pub fn with(self, v: u32) -> Self {
        VSet(self.0 | (1u64 << v))
    }

    pub fn without(self, v: u32) -> Self {
        VSet(self.0 & !(1u64 << v))
    }

    pub fn union(self, other: VSet) -> Self {
        VSet(self.0 | other.0)
    }

    pub fn inter(self, other: VSet) -> Self {
        VSet(self.0 & other.0)
    }

    pub fn minus(self, other: VSet) -> Self {
        VSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: VSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: VSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Lowest-index member, if any.
    pub fn first(self) -> Option<u32> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros())
        }
    }

    /// Iterate members in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = u32> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros();
                bits &= bits - 1;
                Some(v)
            }
        })
    }

    /// Pack an assignment (one bit per global index in `values`) into a dense
    /// index over this set's members, ascending.
    pub fn pack(self, values: u64) -> usize {
        let mut idx = 0usize;
        for (pos, v) in self.iter().enumerate() {
            if values & (1u64 << v) != 0 {
                idx |= 1 << pos;
            }
        }
        idx
    }

    /// Inverse of [`pack`](Self::pack): spread a dense index back onto global bits.
    pub fn unpack(self, idx: usize) -> u64 {
        let mut bits = 0u64;
        for (pos, v) in self.iter().enumerate() {
            if idx & (1 << pos) != 0 {
                bits |= 1u64 << v;
            }
        }
        bits
    }

    /// All subsets of this set (ascending mask order; includes empty and self).
    pub fn subsets(self) -> impl Iterator<Item = VSet> {
        let full = self.0;
        let mut cur = 0u64;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = VSet(cur);
            if cur == full {
                done = true;
            } else {
                cur = (cur.wrapping_sub(full)) & full;
            }
            Some(out)
        })
    }
}

impl FromIterator<u32> for VSet {
    fn from_iter<I: IntoIterator<Item = u32>>(iter: I) -> Self {
        let mut s = VSet::EMPTY;
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Debug for VSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VSet{{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Dense indices `0..2^k` ordered by ascending popcount, ties by value.
pub fn indices_by_popcount(k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..(1usize << k)).collect();
    idx.sort_by_key(|&i| (i.count_ones(), i));
    idx
}
