//! Intrinsic sets, recursive heads and tails, and the head partition.
//!
//! A bidirected-connected set is intrinsic when it is a fixed point of the
//! alternating district/ancestor restriction; every bidirected-connected set
//! has a unique smallest intrinsic superset (its closure). Intrinsic sets
//! index the recursive factorization: each contributes one head (its
//! childless vertices) with a tail (the rest plus parents), and any vertex
//! set partitions into maximal heads.

use crate::error::{Error, Result};
use crate::graph::Cadmg;
use crate::set::VSet;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// An intrinsic set `C` with its recursive head and tail, all as index sets
/// of the host graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntrinsicSet {
    /// The set C itself.
    pub members: VSet,
    /// rh(C): vertices of C childless in the induced subgraph on C.
    pub head: VSet,
    /// (C ∪ Pa(C)) \ head; context parents included.
    pub tail: VSet,
}

impl IntrinsicSet {
    fn compute(g: &Cadmg, members: VSet) -> IntrinsicSet {
        let head: VSet = members
            .iter()
            .filter(|&x| g.ch(x).inter(members).is_empty())
            .collect();
        let tail = members.union(g.pa_of_set(members)).minus(head);
        IntrinsicSet { members, head, tail }
    }
}

/// All intrinsic sets of one graph, with head lookup. Built once per graph
/// and cached.
#[derive(Debug, Default)]
pub struct IntrinsicTable {
    sets: Vec<IntrinsicSet>,
    by_members: HashMap<VSet, usize>,
    by_head: HashMap<VSet, usize>,
    /// Two distinct intrinsic sets sharing a head would make the
    /// parameterization ambiguous; recorded and surfaced as an error.
    ambiguous_head: Option<VSet>,
}

impl IntrinsicTable {
    pub fn sets(&self) -> &[IntrinsicSet] {
        &self.sets
    }

    pub fn contains(&self, members: VSet) -> bool {
        self.by_members.contains_key(&members)
    }

    pub fn get(&self, members: VSet) -> Option<&IntrinsicSet> {
        self.by_members.get(&members).map(|&i| &self.sets[i])
    }

    pub fn by_head(&self, head: VSet) -> Option<&IntrinsicSet> {
        self.by_head.get(&head).map(|&i| &self.sets[i])
    }

    /// Heads of all intrinsic sets (RH(G)).
    pub fn heads(&self) -> impl Iterator<Item = VSet> + '_ {
        self.sets.iter().map(|s| s.head)
    }
}

/// The intrinsic closure of a bidirected-connected set: alternate district
/// restriction and ancestral restriction seeded by `s` until the vertex set
/// stabilizes.
pub fn intrinsic_closure(g: &Cadmg, s: VSet) -> Result<IntrinsicSet> {
    if !s.is_subset(g.random()) {
        let x = s.minus(g.random()).first().unwrap();
        return Err(Error::UnknownVertex(g.labels().label(x).to_string()));
    }
    if !g.is_bidirected_connected(s) {
        return Err(Error::NotBidirectedConnected(
            g.labels().fmt_set(s).trim_matches(['{', '}']).to_string(),
        ));
    }
    Ok(IntrinsicSet::compute(g, closure_members(g, s)))
}

fn closure_members(g: &Cadmg, s: VSet) -> VSet {
    let mut a = g.random();
    loop {
        let d = g.district_in(a, s);
        let next = g.ancestors_in(d, s);
        if next == a {
            return a;
        }
        a = next;
    }
}

/// Fixed-point test: `s` is intrinsic iff it is bidirected-connected and its
/// own closure.
pub fn is_intrinsic(g: &Cadmg, s: VSet) -> bool {
    s.is_subset(g.random()) && g.is_bidirected_connected(s) && closure_members(g, s) == s
}

fn build_table(g: &Cadmg) -> IntrinsicTable {
    // Closures of singletons, then saturate: the closure of every
    // bidirected-connected union of two known sets is intrinsic.
    let mut known: BTreeMap<VSet, ()> = BTreeMap::new();
    let mut queue: Vec<VSet> = Vec::new();
    for x in g.random().iter() {
        let c = closure_members(g, VSet::singleton(x));
        if known.insert(c, ()).is_none() {
            queue.push(c);
        }
    }
    while let Some(a) = queue.pop() {
        let current: Vec<VSet> = known.keys().copied().collect();
        for b in current {
            let u = a.union(b);
            if known.contains_key(&u) || !g.is_bidirected_connected(u) {
                continue;
            }
            let c = closure_members(g, u);
            if known.insert(c, ()).is_none() {
                queue.push(c);
            }
        }
    }
    let mut table = IntrinsicTable::default();
    for (&members, _) in known.iter() {
        debug_assert!(is_intrinsic(g, members));
        let info = IntrinsicSet::compute(g, members);
        let idx = table.sets.len();
        table.by_members.insert(members, idx);
        if table.by_head.insert(info.head, idx).is_some() {
            table.ambiguous_head = Some(info.head);
        }
        table.sets.push(info);
    }
    table
}

/// I(G): every intrinsic set of `g`, cached on the graph.
pub fn all_intrinsic_sets(g: &Cadmg) -> Result<&IntrinsicTable> {
    let table = g.caches().intrinsic.get_or_init(|| build_table(g));
    if let Some(h) = table.ambiguous_head {
        return Err(Error::Structural(format!(
            "two intrinsic sets share the head {}",
            g.labels().fmt_set(h)
        )));
    }
    Ok(table)
}

/// ⟦B⟧: partition `b` into recursive heads by repeatedly removing the heads
/// maximal under inclusion of their intrinsic sets.
pub fn head_partition(g: &Cadmg, b: VSet) -> Result<Arc<Vec<VSet>>> {
    if let Some(hit) = g.caches().head_partition.lock().unwrap().get(&b) {
        return Ok(hit.clone());
    }
    let table = all_intrinsic_sets(g)?;
    let mut blocks: Vec<VSet> = Vec::new();
    let mut residue = b;
    while !residue.is_empty() {
        let candidates: Vec<&IntrinsicSet> = table
            .sets()
            .iter()
            .filter(|i| i.head.is_subset(residue))
            .collect();
        let mut layer: Vec<VSet> = Vec::new();
        for c in &candidates {
            let dominated = candidates
                .iter()
                .any(|o| o.members != c.members && c.members.is_subset(o.members));
            if !dominated {
                layer.push(c.head);
            }
        }
        if layer.is_empty() {
            return Err(Error::Structural(format!(
                "head partition stalled: no recursive head inside {}",
                g.labels().fmt_set(residue)
            )));
        }
        let mut removed = VSet::EMPTY;
        for h in &layer {
            if h.intersects(removed) {
                return Err(Error::Structural(format!(
                    "maximal heads overlap inside {}",
                    g.labels().fmt_set(residue)
                )));
            }
            removed = removed.union(*h);
        }
        blocks.extend(layer);
        residue = residue.minus(removed);
    }
    debug_assert_eq!(blocks.iter().fold(VSet::EMPTY, |a, h| a.union(*h)), b);
    blocks.sort();
    let arc = Arc::new(blocks);
    g.caches()
        .head_partition
        .lock()
        .unwrap()
        .insert(b, arc.clone());
    Ok(arc)
}

/// H_x: intrinsic sets of the latent projection onto V \ {x} whose members
/// have `x` as a parent in the original graph. Heads and tails are those of
/// the projected graph.
pub fn heads_with_parent(g: &Cadmg, x: u32) -> Result<Vec<IntrinsicSet>> {
    if !g.random().contains(x) {
        return Err(Error::UnknownVertex(g.labels().label(x).to_string()));
    }
    let projected = g.project_out_one(x)?;
    let table = all_intrinsic_sets(&projected)?;
    Ok(table
        .sets()
        .iter()
        .filter(|i| {
            i.members.iter().any(|m| g.pa(m).contains(x))
        })
        .cloned()
        .collect())
}
