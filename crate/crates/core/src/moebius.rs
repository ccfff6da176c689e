//! The binary q-parameterization and the generalized Möbius transform.
//!
//! A model over a CADMG is parameterized by one function per recursive head:
//! `q_H(tail)` is the probability that every head variable is 0 given the
//! tail, read causally as a conditional interventional distribution. The
//! transform maps q parameters to probabilities by an alternating sum over
//! supersets of the zero set; the memoized fast variant splits on districts
//! and heads instead and is numerically identical.

use crate::error::{Error, Result};
use crate::graph::{Cadmg, LabelTable};
use crate::intrinsic::{all_intrinsic_sets, head_partition, IntrinsicSet};
use crate::scalar::{total, Scalar};
use crate::set::{indices_by_popcount, VSet};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Total or partial assignment of {0,1} values to vertices.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Assignment {
    domain: VSet,
    bits: u64,
}

impl Assignment {
    pub const EMPTY: Assignment = Assignment {
        domain: VSet::EMPTY,
        bits: 0,
    };

    pub fn new(domain: VSet, bits: u64) -> Self {
        Assignment {
            domain,
            bits: bits & domain.bits(),
        }
    }

    /// Assignment over `domain` decoded from a dense index (member order).
    pub fn from_index(domain: VSet, idx: usize) -> Self {
        Assignment {
            domain,
            bits: domain.unpack(idx),
        }
    }

    pub fn domain(&self) -> VSet {
        self.domain
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, v: u32) -> Option<bool> {
        self.domain.contains(v).then(|| self.bits & (1 << v) != 0)
    }

    pub fn with(mut self, v: u32, value: bool) -> Self {
        self.domain.insert(v);
        if value {
            self.bits |= 1 << v;
        } else {
            self.bits &= !(1 << v);
        }
        self
    }

    /// ν(T): restriction to a subset of the domain.
    pub fn restrict(&self, t: VSet) -> Assignment {
        Assignment::new(self.domain.inter(t), self.bits)
    }

    /// ν⁻¹(0): zero-assigned vertices.
    pub fn zeros(&self) -> VSet {
        self.domain.minus(VSet::from_bits(self.bits))
    }

    pub fn ones(&self) -> VSet {
        self.domain.inter(VSet::from_bits(self.bits))
    }

    /// Combined assignment; overlapping domains must agree.
    pub fn merged(&self, other: &Assignment) -> Assignment {
        debug_assert_eq!(
            self.bits & self.domain.inter(other.domain).bits(),
            other.bits & self.domain.inter(other.domain).bits(),
            "conflicting assignment merge"
        );
        Assignment {
            domain: self.domain.union(other.domain),
            bits: self.bits | other.bits,
        }
    }

    pub fn agrees_with(&self, other: &Assignment) -> bool {
        let shared = self.domain.inter(other.domain).bits();
        self.bits & shared == other.bits & shared
    }

    /// Dense index of this assignment over `set` (requires `set ⊆ domain`).
    pub fn index_over(&self, set: VSet) -> usize {
        debug_assert!(set.is_subset(self.domain));
        set.pack(self.bits)
    }

    pub fn is_zero_on(&self, set: VSet) -> bool {
        self.bits & set.bits() == 0
    }
}

/// `x2=0 x4=1` in label order.
pub fn fmt_assignment(labels: &LabelTable, a: &Assignment) -> String {
    a.domain
        .iter()
        .map(|v| format!("{}={}", labels.label(v), u64::from(a.get(v).unwrap())))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Explicit distribution over binary assignments of `vars`, with an optional
/// fixed context assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbTable<T> {
    labels: Arc<LabelTable>,
    vars: VSet,
    context: Assignment,
    values: Vec<T>,
}

impl<T: Scalar> ProbTable<T> {
    /// Validates length, clamps negative noise to zero, rejects anything more
    /// negative, and checks normalization.
    pub fn new(
        labels: Arc<LabelTable>,
        vars: VSet,
        context: Assignment,
        mut values: Vec<T>,
    ) -> Result<Self> {
        if values.len() != 1usize << vars.len() {
            return Err(Error::Structural(format!(
                "table over {} vars needs {} entries, got {}",
                vars.len(),
                1usize << vars.len(),
                values.len()
            )));
        }
        let floor = -T::noise_floor();
        for v in values.iter_mut() {
            if *v < T::zero() {
                if *v >= floor {
                    *v = T::zero();
                } else {
                    return Err(Error::InvalidParameters(format!("{v}")));
                }
            }
        }
        if !crate::scalar::is_normalized(&values) {
            return Err(Error::NotNormalized(format!("{}", total(&values))));
        }
        Ok(ProbTable {
            labels,
            vars,
            context,
            values,
        })
    }

    pub fn labels(&self) -> &Arc<LabelTable> {
        &self.labels
    }

    pub fn vars(&self) -> VSet {
        self.vars
    }

    pub fn context(&self) -> &Assignment {
        &self.context
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, a: &Assignment) -> &T {
        debug_assert!(self.vars.is_subset(a.domain()));
        debug_assert!(a.agrees_with(&self.context));
        &self.values[a.index_over(self.vars)]
    }

    /// Probability of the event fixing `partial` (summing the rest out).
    pub fn event_prob(&self, partial: &Assignment) -> T {
        let fixed = partial.domain().inter(self.vars);
        let mut acc = T::zero();
        for (idx, v) in self.values.iter().enumerate() {
            let a = Assignment::from_index(self.vars, idx);
            if a.restrict(fixed).agrees_with(partial) {
                acc = acc + v.clone();
            }
        }
        acc
    }

    /// Marginal table over `keep ∩ vars`.
    pub fn marginalize(&self, keep: VSet) -> ProbTable<T> {
        let kept = self.vars.inter(keep);
        let mut values = vec![T::zero(); 1 << kept.len()];
        for (idx, v) in self.values.iter().enumerate() {
            let bits = self.vars.unpack(idx);
            values[kept.pack(bits)] = values[kept.pack(bits)].clone() + v.clone();
        }
        ProbTable {
            labels: self.labels.clone(),
            vars: kept,
            context: self.context,
            values,
        }
    }

    pub fn assignments(&self) -> impl Iterator<Item = (Assignment, &T)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (Assignment::from_index(self.vars, i).merged(&self.context), v))
    }

    pub fn uniform(labels: Arc<LabelTable>, vars: VSet) -> ProbTable<T> {
        let n = 1usize << vars.len();
        ProbTable {
            labels,
            vars,
            context: Assignment::EMPTY,
            values: vec![T::from_ratio(1, n as i64); n],
        }
    }
}

/// One head's parameters: the generating intrinsic set, its tail, and a
/// dense value per tail assignment. Slots inconsistent with a context pin
/// are absent.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadEntry<T> {
    pub intrinsic: VSet,
    pub tail: VSet,
    values: Vec<Option<T>>,
}

impl<T: Scalar> HeadEntry<T> {
    pub fn value_at(&self, idx: usize) -> Option<&T> {
        self.values[idx].as_ref()
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, &T)> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().map(|v| (i, v)))
    }
}

/// The parameter set Ω: one entry per recursive head of the host graph.
#[derive(Clone, Debug, PartialEq)]
pub struct QParamSet<T> {
    labels: Arc<LabelTable>,
    entries: BTreeMap<VSet, HeadEntry<T>>,
    pinned: Assignment,
}

impl<T: Scalar> QParamSet<T> {
    /// Builds a complete parameter set for `g`, calling `f` once per head and
    /// tail assignment.
    pub fn from_fn(
        g: &Cadmg,
        mut f: impl FnMut(&IntrinsicSet, &Assignment) -> Result<T>,
    ) -> Result<QParamSet<T>> {
        let table = all_intrinsic_sets(g)?;
        let mut entries = BTreeMap::new();
        for info in table.sets() {
            let mut values = Vec::with_capacity(1 << info.tail.len());
            for idx in 0..(1usize << info.tail.len()) {
                let t = Assignment::from_index(info.tail, idx);
                let v = f(info, &t)?;
                if v < T::zero() || v > T::one() {
                    return Err(Error::ParameterOutOfRange {
                        head: g.labels().fmt_set(info.head),
                        tail: fmt_assignment(g.labels(), &t),
                        value: format!("{v}"),
                    });
                }
                values.push(Some(v));
            }
            entries.insert(
                info.head,
                HeadEntry {
                    intrinsic: info.members,
                    tail: info.tail,
                    values,
                },
            );
        }
        Ok(QParamSet {
            labels: g.labels().clone(),
            entries,
            pinned: Assignment::EMPTY,
        })
    }

    pub fn labels(&self) -> &Arc<LabelTable> {
        &self.labels
    }

    pub fn entries(&self) -> &BTreeMap<VSet, HeadEntry<T>> {
        &self.entries
    }

    pub fn entry(&self, head: VSet) -> Option<&HeadEntry<T>> {
        self.entries.get(&head)
    }

    /// Context pins carried by a restricted set.
    pub fn pinned(&self) -> &Assignment {
        &self.pinned
    }

    /// Number of stored values.
    pub fn len(&self) -> usize {
        self.entries.values().map(|e| e.present().count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `q_H(ν(tail(H)))` with full diagnostics on absence.
    pub fn lookup(&self, head: VSet, nu: &Assignment) -> Result<&T> {
        let miss = |tail: String| Error::MissingParameter {
            head: self.labels.fmt_set(head),
            tail,
        };
        let entry = self
            .entries
            .get(&head)
            .ok_or_else(|| miss("(no such head)".into()))?;
        if !entry.tail.is_subset(nu.domain()) {
            return Err(miss(format!(
                "assignment does not cover tail {}",
                self.labels.fmt_set(entry.tail)
            )));
        }
        let idx = nu.index_over(entry.tail);
        entry.values[idx]
            .as_ref()
            .ok_or_else(|| miss(fmt_assignment(&self.labels, &nu.restrict(entry.tail))))
    }

    /// Like [`lookup`](Self::lookup) but also checks the head's generating
    /// intrinsic set, so parameters from a different graph cannot be
    /// silently misread.
    pub fn lookup_checked(&self, head: VSet, intrinsic: VSet, nu: &Assignment) -> Result<&T> {
        if let Some(entry) = self.entries.get(&head) {
            if entry.intrinsic != intrinsic {
                return Err(Error::ParameterMismatch(format!(
                    "head {} is generated by {} here but by {} in the parameter set",
                    self.labels.fmt_set(head),
                    self.labels.fmt_set(intrinsic),
                    self.labels.fmt_set(entry.intrinsic),
                )));
            }
        }
        self.lookup(head, nu)
    }

    /// Assembles a parameter set entry by entry (used by the elimination
    /// engine when rebuilding Ω after a marginalization step).
    pub fn assemble(
        labels: Arc<LabelTable>,
        pinned: Assignment,
        entries: impl IntoIterator<Item = (IntrinsicSet, Vec<Option<T>>)>,
    ) -> Result<QParamSet<T>> {
        let mut map = BTreeMap::new();
        for (info, values) in entries {
            if values.len() != 1 << info.tail.len() {
                return Err(Error::Structural(format!(
                    "entry for head {} has the wrong arity",
                    labels.fmt_set(info.head)
                )));
            }
            map.insert(
                info.head,
                HeadEntry {
                    intrinsic: info.members,
                    tail: info.tail,
                    values,
                },
            );
        }
        Ok(QParamSet {
            labels,
            entries: map,
            pinned,
        })
    }
}

/// Σ_H 2^|tail(H)|: the dimension of the parameterization.
pub fn q_count(g: &Cadmg) -> Result<usize> {
    Ok(all_intrinsic_sets(g)?
        .sets()
        .iter()
        .map(|i| 1usize << i.tail.len())
        .sum())
}

/// Def.-11 generalized Möbius transform: alternating sum over supersets of
/// the zero set, one head-partition product per subset.
pub fn gmt<T: Scalar>(g: &Cadmg, omega: &QParamSet<T>, nu: &Assignment) -> Result<T> {
    if !g.vertices().is_subset(nu.domain()) {
        let v = g.vertices().minus(nu.domain()).first().unwrap();
        return Err(Error::Structural(format!(
            "assignment must cover V and W; `{}` missing",
            g.labels().label(v)
        )));
    }
    let table = all_intrinsic_sets(g)?;
    let zeros = nu.zeros().inter(g.random());
    let ones = g.random().minus(zeros);
    let mut acc = T::zero();
    for extra in ones.subsets() {
        let b = zeros.union(extra);
        let mut term = T::one();
        for &h in head_partition(g, b)?.iter() {
            let members = table.by_head(h).expect("head from partition").members;
            term = term * omega.lookup_checked(h, members, nu)?.clone();
        }
        if extra.len() % 2 == 1 {
            acc = acc - term;
        } else {
            acc = acc + term;
        }
    }
    Ok(acc)
}

/// Memo for the fast transform, keyed by the subproblem's vertex split and
/// the assignment restricted to it. Shared across an entire query.
#[derive(Debug)]
pub struct FgmtMemo<T> {
    map: HashMap<(VSet, VSet, u64), T>,
    pub hits: u64,
}

impl<T> FgmtMemo<T> {
    pub fn new() -> Self {
        FgmtMemo {
            map: HashMap::new(),
            hits: 0,
        }
    }

    /// Distinct memoized inputs so far.
    pub fn distinct(&self) -> usize {
        self.map.len()
    }
}

impl<T> Default for FgmtMemo<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Fast generalized Möbius transform: recurses on districts, peels all-zero
/// heads, and resolves one-valued head vertices by a two-call difference.
/// Numerically equal to [`gmt`] on every input.
pub fn fgmt<T: Scalar>(
    g: &Cadmg,
    omega: &QParamSet<T>,
    mu: &Assignment,
    memo: &mut FgmtMemo<T>,
) -> Result<T> {
    if !g.vertices().is_subset(mu.domain()) {
        let v = g.vertices().minus(mu.domain()).first().unwrap();
        return Err(Error::Structural(format!(
            "assignment must cover V and W; `{}` missing",
            g.labels().label(v)
        )));
    }
    fgmt_rec(g, omega, g.random(), g.context(), mu.bits(), memo)
}

fn fgmt_rec<T: Scalar>(
    host: &Cadmg,
    omega: &QParamSet<T>,
    v: VSet,
    w: VSet,
    mu_bits: u64,
    memo: &mut FgmtMemo<T>,
) -> Result<T> {
    if v.is_empty() {
        return Ok(T::one());
    }
    let key = (v, w, mu_bits & v.union(w).bits());
    if let Some(hit) = memo.map.get(&key) {
        memo.hits += 1;
        return Ok(hit.clone());
    }
    // Districts of the induced subgraph on v ∪ w.
    let mut districts: Vec<VSet> = Vec::new();
    let mut rest = v;
    while let Some(x) = rest.first() {
        let d = host.district_in(v, VSet::singleton(x));
        districts.push(d);
        rest = rest.minus(d);
    }
    let result = if districts.len() > 1 {
        let mut acc = T::one();
        for d in districts {
            let ctx = pa_in(host, v.union(w), d).minus(d);
            acc = acc * fgmt_rec(host, omega, d, ctx, mu_bits, memo)?;
        }
        acc
    } else {
        let d = districts[0];
        debug_assert_eq!(d, v);
        // Recursive head of the single district within the current subgraph.
        let head: VSet = d.iter().filter(|&x| host.ch(x).inter(d).is_empty()).collect();
        let tail = d.union(pa_in(host, v.union(w), d)).minus(head);
        if mu_bits & head.bits() == 0 {
            // All head variables are zero: peel the head factor.
            let nu = Assignment::new(head.union(tail), mu_bits);
            let q = omega.lookup_checked(head, d, &nu)?.clone();
            let rest = fgmt_rec(host, omega, d.minus(head), w, mu_bits, memo)?;
            rest * q
        } else {
            // First head vertex assigned one, in topological order.
            let y = *host
                .topological_order()
                .iter()
                .find(|&&u| head.contains(u) && mu_bits & (1 << u) != 0)
                .expect("some head bit is one");
            let without = fgmt_rec(host, omega, d.without(y), w, mu_bits, memo)?;
            let flipped = fgmt_rec(host, omega, d, w, mu_bits & !(1u64 << y), memo)?;
            without - flipped
        }
    };
    memo.map.insert(key, result.clone());
    Ok(result)
}

fn pa_in(host: &Cadmg, scope: VSet, s: VSet) -> VSet {
    s.iter()
        .fold(VSet::EMPTY, |acc, x| acc.union(host.pa(x)))
        .inter(scope)
}

/// Statistics from assembling a table through the memoized transform.
#[derive(Clone, Debug, Default)]
pub struct FgmtStats {
    pub distinct_inputs: usize,
    pub hits: u64,
}

/// Evaluates the full table over V for one context assignment, processing
/// assignments in ascending popcount order with a single shared memo.
pub fn table_with_context<T: Scalar>(
    g: &Cadmg,
    omega: &QParamSet<T>,
    context: &Assignment,
) -> Result<(ProbTable<T>, FgmtStats)> {
    const GUARD: usize = 25;
    if g.vertices().len() > GUARD {
        return Err(Error::SizeGuard(g.vertices().len(), GUARD));
    }
    if context.domain() != g.context() {
        return Err(Error::Structural(
            "context assignment must cover exactly W".into(),
        ));
    }
    if !context.agrees_with(omega.pinned()) {
        return Err(Error::Structural(
            "context assignment conflicts with the parameter set's pins".into(),
        ));
    }
    let vars = g.random();
    let mut memo = FgmtMemo::new();
    let mut values = vec![T::zero(); 1 << vars.len()];
    for idx in indices_by_popcount(vars.len()) {
        let nu = Assignment::from_index(vars, idx).merged(context);
        values[idx] = fgmt(g, omega, &nu, &mut memo)?;
    }
    let stats = FgmtStats {
        distinct_inputs: memo.distinct(),
        hits: memo.hits,
    };
    let table = ProbTable::new(g.labels().clone(), vars, *context, values)?;
    Ok((table, stats))
}

/// Table over V; the context (if any) must be fully pinned in Ω.
pub fn table_from_params<T: Scalar>(g: &Cadmg, omega: &QParamSet<T>) -> Result<ProbTable<T>> {
    let ctx = omega.pinned().restrict(g.context());
    if ctx.domain() != g.context() {
        return Err(Error::Structural(
            "graph has unpinned context vertices; supply a context assignment".into(),
        ));
    }
    table_with_context(g, omega, &ctx).map(|(t, _)| t)
}

/// Ω(V* | x): the restriction of a parameter set to the subgraph G[V*] with
/// intervention values pinned. Every intrinsic set of G[V*] must already be
/// intrinsic in the host graph (the caller checks this); each is matched
/// against Ω by head *and* generating set, and only tail assignments
/// consistent with `x` survive.
pub fn restrict<T: Scalar>(
    omega: &QParamSet<T>,
    g: &Cadmg,
    v_star: VSet,
    x: &Assignment,
) -> Result<QParamSet<T>> {
    let g_star = g.restrict(v_star)?;
    let table = all_intrinsic_sets(&g_star)?;
    let pinned = omega.pinned().merged(&x.restrict(g_star.context()));
    let mut entries = BTreeMap::new();
    for info in table.sets() {
        let src = omega.entry(info.head).filter(|e| e.intrinsic == info.members);
        let src = src.ok_or_else(|| Error::MissingParameter {
            head: g.labels().fmt_set(info.head),
            tail: format!(
                "head of G[V*] (intrinsic set {}) has no matching parameter",
                g.labels().fmt_set(info.members)
            ),
        })?;
        if src.tail != info.tail {
            return Err(Error::ParameterMismatch(format!(
                "tail of head {} changed under restriction",
                g.labels().fmt_set(info.head)
            )));
        }
        let mut values = vec![None; 1 << info.tail.len()];
        for idx in 0..values.len() {
            let t = Assignment::from_index(info.tail, idx);
            if t.agrees_with(&pinned) {
                values[idx] = Some(
                    src.value_at(idx)
                        .ok_or_else(|| Error::MissingParameter {
                            head: g.labels().fmt_set(info.head),
                            tail: fmt_assignment(g.labels(), &t),
                        })?
                        .clone(),
                );
            }
        }
        entries.insert(
            info.head,
            HeadEntry {
                intrinsic: info.members,
                tail: info.tail,
                values,
            },
        );
    }
    Ok(QParamSet {
        labels: omega.labels.clone(),
        entries,
        pinned,
    })
}

// ---------------------------------------------------------------------------
// Kernel algebra: q parameters from an observed table.
// ---------------------------------------------------------------------------

/// A nonnegative function of `vars` given `ctx` values, dense over the whole
/// scope. Used to run the alternating district/ancestor construction on an
/// explicit table.
#[derive(Clone, Debug)]
struct Kernel<T> {
    vars: VSet,
    ctx: VSet,
    values: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    fn scope(&self) -> VSet {
        self.vars.union(self.ctx)
    }

    fn get(&self, bits: u64) -> &T {
        &self.values[self.scope().pack(bits)]
    }

    fn from_table(p: &ProbTable<T>) -> Kernel<T> {
        Kernel {
            vars: p.vars(),
            ctx: VSet::EMPTY,
            values: p.values().to_vec(),
        }
    }

    /// Sum out `vars \ keep`.
    fn marginalize(&self, keep: VSet) -> Kernel<T> {
        let kept = self.vars.inter(keep);
        let new_scope = kept.union(self.ctx);
        let mut values = vec![T::zero(); 1 << new_scope.len()];
        for (idx, v) in self.values.iter().enumerate() {
            let bits = self.scope().unpack(idx);
            let j = new_scope.pack(bits);
            values[j] = values[j].clone() + v.clone();
        }
        Kernel {
            vars: kept,
            ctx: self.ctx,
            values,
        }
    }

    /// Extract the kernel of district `d`: the product over members of their
    /// conditionals given all preceding variables (and the full context),
    /// following the host's topological order. Remaining variables become
    /// context.
    fn district_extract(&self, host: &Cadmg, d: VSet) -> Result<Kernel<T>> {
        debug_assert!(d.is_subset(self.vars));
        let order: Vec<u32> = host
            .topological_order()
            .iter()
            .copied()
            .filter(|&u| self.vars.contains(u))
            .collect();
        // Prefix marginals: for each member of d, the kernel marginalized to
        // its predecessors (within vars) with and without the member.
        let mut numers: Vec<(u32, Kernel<T>, Kernel<T>)> = Vec::new();
        let mut prefix = VSet::EMPTY;
        for &u in &order {
            if d.contains(u) {
                let incl = self.marginalize(prefix.with(u));
                let excl = self.marginalize(prefix);
                numers.push((u, incl, excl));
            }
            prefix.insert(u);
        }
        let new_ctx = self.ctx.union(self.vars.minus(d));
        let scope = d.union(new_ctx);
        let mut values = Vec::with_capacity(1 << scope.len());
        for idx in 0..(1usize << scope.len()) {
            let bits = scope.unpack(idx);
            let mut acc = T::one();
            for (u, incl, excl) in &numers {
                let den = excl.get(bits).clone();
                if den.is_zero() {
                    return Err(Error::ZeroConditioningEvent(format!(
                        "district kernel at `{}`",
                        host.labels().label(*u)
                    )));
                }
                acc = acc * incl.get(bits).clone() / den;
            }
            values.push(acc);
        }
        Ok(Kernel {
            vars: d,
            ctx: new_ctx,
            values,
        })
    }
}

/// Recovers the q parameters of an observed joint that r-factorizes with
/// respect to `g`: for each intrinsic set, run the alternating
/// district/ancestor construction on the table and read the head
/// conditional. A non-r-factorizing input surfaces as a round-trip residual,
/// not an error here.
pub fn params_from_table<T: Scalar>(g: &Cadmg, p: &ProbTable<T>) -> Result<QParamSet<T>> {
    if !g.is_admg() {
        return Err(Error::Structural(
            "parameter recovery expects an ADMG (no context vertices)".into(),
        ));
    }
    if p.vars() != g.random() {
        return Err(Error::Structural(
            "table must cover exactly the graph's vertices".into(),
        ));
    }
    let base = Kernel::from_table(p);
    QParamSet::from_fn(g, |info, t| {
        let mut scope = g.random();
        let mut kernel = base.clone();
        loop {
            let district = g.district_in(scope, info.members);
            if district != scope {
                kernel = kernel.district_extract(g, district)?;
                scope = district;
            }
            let anc = g.ancestors_in(scope, info.members);
            if anc == scope && district == scope {
                break;
            }
            if anc != scope {
                kernel = kernel.marginalize(anc);
                scope = anc;
            }
        }
        debug_assert_eq!(scope, info.members);
        // q = K(head = 0, rest = t | ctx from t, 0 elsewhere).
        let fill = kernel.scope().minus(info.members).minus(t.domain());
        let nu = t.merged(&Assignment::new(fill, 0));
        let mut num = T::zero();
        let mut den = T::zero();
        for h_idx in 0..(1usize << info.head.len()) {
            let h = Assignment::from_index(info.head, h_idx);
            let full = nu.merged(&h);
            let v = kernel.get(full.bits()).clone();
            if h_idx == 0 {
                num = v.clone();
            }
            den = den + v;
        }
        if den.is_zero() {
            return Err(Error::ZeroConditioningEvent(format!(
                "head {} at {}",
                g.labels().fmt_set(info.head),
                fmt_assignment(g.labels(), t)
            )));
        }
        Ok(num / den)
    })
}

// ---------------------------------------------------------------------------
// Parameter file format.
// ---------------------------------------------------------------------------

/// Serializes a parameter set: one `q {head} | tail : value` line per stored
/// entry, preceded by `context` pins when present. Stable order.
pub fn write_params<T: Scalar>(omega: &QParamSet<T>) -> String {
    let labels = omega.labels();
    let mut out = String::new();
    if !omega.pinned().domain().is_empty() {
        out.push_str(&format!(
            "context {}\n",
            fmt_assignment(labels, omega.pinned())
        ));
    }
    for (head, entry) in omega.entries() {
        for (idx, value) in entry.present() {
            let t = Assignment::from_index(entry.tail, idx);
            out.push_str(&format!(
                "q {} | {} : {}\n",
                labels.fmt_set(*head),
                fmt_assignment(labels, &t),
                value
            ));
        }
    }
    out
}

/// Parses a parameter file against its graph, validating every head, tail,
/// value range, and completeness (relative to any context pins).
pub fn parse_params<T: Scalar>(text: &str, g: &Cadmg) -> Result<QParamSet<T>> {
    let labels = g.labels().clone();
    let table = all_intrinsic_sets(g)?;
    let mut pinned = Assignment::EMPTY;
    let mut entries: BTreeMap<VSet, HeadEntry<T>> = BTreeMap::new();
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("context ") {
            for tok in rest.split_whitespace() {
                let (l, v) = parse_eq(tok).map_err(|m| err(line_no, m))?;
                let idx = labels
                    .index_of(l)
                    .map_err(|e| err(line_no, e.to_string()))?;
                pinned = pinned.with(idx, v);
            }
            continue;
        }
        let body = line
            .strip_prefix('q')
            .ok_or_else(|| err(line_no, "expected `q {head} | tail : value`".into()))?
            .trim();
        let (head_part, rest) = body
            .split_once('}')
            .ok_or_else(|| err(line_no, "missing `}` after head".into()))?;
        let head_part = head_part
            .trim()
            .strip_prefix('{')
            .ok_or_else(|| err(line_no, "head must be written in braces".into()))?;
        let head_labels: Vec<&str> = head_part
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let head = labels
            .set_from_labels(&head_labels)
            .map_err(|e| err(line_no, e.to_string()))?;
        let (tail_part, value_part) = rest
            .rsplit_once(':')
            .ok_or_else(|| err(line_no, "missing `:` before value".into()))?;
        let tail_part = tail_part.trim().trim_start_matches('|').trim();
        let mut t = Assignment::EMPTY;
        for tok in tail_part.split_whitespace() {
            let (l, v) = parse_eq(tok).map_err(|m| err(line_no, m))?;
            let idx = labels
                .index_of(l)
                .map_err(|e| err(line_no, e.to_string()))?;
            t = t.with(idx, v);
        }
        let value = T::parse_value(value_part.trim())
            .ok_or_else(|| err(line_no, format!("bad value `{}`", value_part.trim())))?;
        if value < T::zero() || value > T::one() {
            return Err(Error::ParameterOutOfRange {
                head: labels.fmt_set(head),
                tail: fmt_assignment(&labels, &t),
                value: format!("{value}"),
            });
        }
        let info = table
            .by_head(head)
            .ok_or_else(|| err(line_no, format!("{} is not a recursive head", labels.fmt_set(head))))?;
        if t.domain() != info.tail {
            return Err(err(
                line_no,
                format!(
                    "tail of {} must assign exactly {}",
                    labels.fmt_set(head),
                    labels.fmt_set(info.tail)
                ),
            ));
        }
        let entry = entries.entry(head).or_insert_with(|| HeadEntry {
            intrinsic: info.members,
            tail: info.tail,
            values: vec![None; 1 << info.tail.len()],
        });
        let idx = t.index_over(info.tail);
        if entry.values[idx].replace(value).is_some() {
            return Err(err(line_no, "duplicate parameter entry".into()));
        }
    }
    // Completeness: every head, every pin-consistent tail assignment.
    for info in table.sets() {
        let entry = entries.get(&info.head).ok_or_else(|| Error::MissingParameter {
            head: labels.fmt_set(info.head),
            tail: "(entire head missing)".into(),
        })?;
        for idx in 0..(1usize << info.tail.len()) {
            let t = Assignment::from_index(info.tail, idx);
            if t.agrees_with(&pinned) && entry.values[idx].is_none() {
                return Err(Error::MissingParameter {
                    head: labels.fmt_set(info.head),
                    tail: fmt_assignment(&labels, &t),
                });
            }
        }
    }
    Ok(QParamSet {
        labels,
        entries,
        pinned,
    })
}

fn parse_eq(tok: &str) -> std::result::Result<(&str, bool), String> {
    let (l, v) = tok
        .split_once('=')
        .ok_or_else(|| format!("expected `name=0|1`, got `{tok}`"))?;
    match v {
        "0" => Ok((l, false)),
        "1" => Ok((l, true)),
        _ => Err(format!("value of `{l}` must be 0 or 1")),
    }
}
