//! The complete recursive identification algorithm.
//!
//! `id` either builds a symbolic effect expression for `P(y | do(x))` in
//! terms of the observed joint, or stops with a hedge witness (a nested pair
//! of c-forests) certifying non-identifiability. Expressions stay fully
//! explicit: the distribution argument threaded through the recursion is a
//! chain of marginalization and district-conditional kernels over the
//! original joint, and evaluation materializes those kernels numerically
//! against any supplied table. No algebraic simplification is attempted;
//! efficient evaluation is the elimination engine's job.

use crate::error::{Error, Result};
use crate::graph::Cadmg;
use crate::moebius::{Assignment, ProbTable};
use crate::scalar::Scalar;
use crate::set::VSet;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Where a vertex occurrence takes its value at evaluation time.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ValRef {
    /// Outcome slot: the queried y value.
    FreeY,
    /// Intervention slot: the do(x) value.
    FreeX,
    /// A line-3 intervention with an arbitrary value (0 by default).
    Arbitrary,
    /// Bound by an enclosing summation.
    Bound(u32),
}

type KernelId = usize;

/// One conditional factor of a district kernel: the child given its
/// in-domain predecessors (variables of the new kernel) and fixed values for
/// predecessors outside.
#[derive(Clone, Debug)]
struct CFactorTerm {
    child: u32,
    given_inside: VSet,
    given_outside: Vec<(u32, ValRef)>,
}

/// The distribution argument of one recursion stage, as a transformation of
/// the original joint.
#[derive(Clone, Debug)]
enum KernelDef {
    /// The observed joint P(V).
    Joint { domain: VSet },
    /// Sum of the parent kernel over everything outside `keep`.
    Marginal { parent: KernelId, keep: VSet },
    /// Product of parent conditionals over a district, with out-of-district
    /// predecessors fixed to referenced values.
    CFactor {
        parent: KernelId,
        domain: VSet,
        terms: Vec<CFactorTerm>,
    },
}

impl KernelDef {
    fn domain(&self) -> VSet {
        match self {
            KernelDef::Joint { domain } => *domain,
            KernelDef::Marginal { keep, .. } => *keep,
            KernelDef::CFactor { domain, .. } => *domain,
        }
    }
}

#[derive(Clone, Debug)]
enum Expr {
    /// Σ over fresh binders of the body.
    Sum { binders: Vec<(u32, u32)>, body: Box<Expr> },
    Product(Vec<Expr>),
    /// A conditional of a kernel: P_k(child | π-predecessors).
    Factor {
        kernel: KernelId,
        child: u32,
        child_ref: ValRef,
        given: Vec<(u32, ValRef)>,
    },
    /// Marginal of a kernel evaluated at referenced values.
    Marginal {
        kernel: KernelId,
        at: Vec<(u32, ValRef)>,
    },
}

/// A symbolic effect expression: evaluates against any joint table over the
/// query graph's vertices. Free value slots are exactly y (plus the do(x)
/// values).
#[derive(Clone, Debug)]
pub struct EffectExpr {
    labels: std::sync::Arc<crate::graph::LabelTable>,
    vertices: VSet,
    y: VSet,
    x: VSet,
    kernels: Vec<KernelDef>,
    /// Env signature per kernel: external references its table depends on.
    kernel_sigs: Vec<Vec<(u32, ValRef)>>,
    n_binders: u32,
    root: Expr,
}

/// A pair of nested c-forests witnessing non-identifiability of the
/// sub-query (blocked_x, blocked_y).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HedgeWitness {
    pub f: VSet,
    pub f_prime: VSet,
    pub root_set: VSet,
    pub blocked_x: VSet,
    pub blocked_y: VSet,
}

#[derive(Clone, Debug)]
pub enum IdOutcome {
    Identified(EffectExpr),
    Hedge(HedgeWitness),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IdStats {
    /// How often the district split fired (at most once per query).
    pub line4_invocations: u32,
}

enum Stop {
    Hedge(HedgeWitness),
    Fail(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Fail(e)
    }
}

struct Builder<'g> {
    host: &'g Cadmg,
    kernels: Vec<KernelDef>,
    n_binders: u32,
    stats: IdStats,
}

impl<'g> Builder<'g> {
    fn fresh_binders(&mut self, over: VSet) -> Vec<(u32, u32)> {
        over.iter()
            .map(|v| {
                let id = self.n_binders;
                self.n_binders += 1;
                (v, id)
            })
            .collect()
    }

    fn push_kernel(&mut self, def: KernelDef) -> KernelId {
        self.kernels.push(def);
        self.kernels.len() - 1
    }

    /// Predecessors of `v` in the host's global topological order,
    /// restricted to `within`.
    fn preds(&self, v: u32, within: VSet) -> VSet {
        self.host.predecessors(v).inter(within)
    }
}

type Env = HashMap<u32, ValRef>;

/// The identification algorithm: a symbolic expression for `P(y | do(x))`
/// or a hedge witness.
pub fn id(y: VSet, x: VSet, g: &Cadmg) -> Result<IdOutcome> {
    id_with_stats(y, x, g).map(|(outcome, _)| outcome)
}

/// [`id`] plus recursion diagnostics.
pub fn id_with_stats(y: VSet, x: VSet, g: &Cadmg) -> Result<(IdOutcome, IdStats)> {
    if !g.is_admg() {
        return Err(Error::Structural("identification runs on plain ADMGs".into()));
    }
    if y.is_empty() {
        return Err(Error::Structural("outcome set must be nonempty".into()));
    }
    for s in [y, x] {
        if let Some(v) = s.minus(g.vertices()).first() {
            return Err(Error::UnknownVertex(g.labels().label(v).to_string()));
        }
    }
    if let Some(v) = y.inter(x).first() {
        return Err(Error::NotDisjoint(g.labels().label(v).to_string()));
    }
    let mut builder = Builder {
        host: g,
        kernels: Vec::new(),
        n_binders: 0,
        stats: IdStats::default(),
    };
    let kernel = builder.push_kernel(KernelDef::Joint { domain: g.vertices() });
    let mut env: Env = Env::new();
    for v in y.iter() {
        env.insert(v, ValRef::FreeY);
    }
    for v in x.iter() {
        env.insert(v, ValRef::FreeX);
    }
    match id_rec(&mut builder, g.clone(), y, x, kernel, &env) {
        Ok(root) => {
            let kernel_sigs = kernel_signatures(&builder.kernels);
            let expr = EffectExpr {
                labels: g.labels().clone(),
                vertices: g.vertices(),
                y,
                x,
                kernels: builder.kernels,
                kernel_sigs,
                n_binders: builder.n_binders,
                root,
            };
            Ok((IdOutcome::Identified(expr), builder.stats))
        }
        Err(Stop::Hedge(h)) => Ok((IdOutcome::Hedge(h), builder.stats)),
        Err(Stop::Fail(e)) => Err(e),
    }
}

fn id_rec(
    b: &mut Builder,
    g: Cadmg,
    y: VSet,
    x: VSet,
    kernel: KernelId,
    env: &Env,
) -> std::result::Result<Expr, Stop> {
    let vertices = g.vertices();
    debug_assert_eq!(b.kernels[kernel].domain(), vertices);

    // Line 1: no interventions left; sum the kernel down to y.
    if x.is_empty() {
        let at = y.iter().map(|v| (v, env[&v])).collect();
        return Ok(Expr::Marginal { kernel, at });
    }

    // Line 2: restrict to ancestors of y, marginalizing the kernel.
    let an_y = g.ancestors(y).map_err(Error::from)?;
    if an_y != vertices {
        let marg = b.push_kernel(KernelDef::Marginal { parent: kernel, keep: an_y });
        let g2 = g.induced(an_y).map_err(Error::from)?;
        return id_rec(b, g2, y, x.inter(an_y), marg, env);
    }

    // Line 3: intervene (with arbitrary values) on everything that cannot
    // reach y once x is cut.
    let reach = g.ancestors_in(vertices.minus(x), y);
    let extend = vertices.minus(x).minus(reach);
    if !extend.is_empty() {
        let mut env2 = env.clone();
        for v in extend.iter() {
            env2.insert(v, ValRef::Arbitrary);
        }
        return id_rec(b, g, y, x.union(extend), kernel, &env2);
    }

    // Districts of G[V \ X].
    let live = vertices.minus(x);
    let mut parts: Vec<VSet> = Vec::new();
    let mut rest = live;
    while let Some(v) = rest.first() {
        let d = g.district_in(live, VSet::singleton(v));
        parts.push(d);
        rest = rest.minus(d);
    }

    // Line 4: independent subproblems per district, summed over everything
    // that is neither outcome nor intervention.
    if parts.len() > 1 {
        b.stats.line4_invocations += 1;
        let binders = b.fresh_binders(live.minus(y));
        let by_vertex: HashMap<u32, u32> = binders.iter().copied().collect();
        let ref_of = |v: u32| -> ValRef {
            match by_vertex.get(&v) {
                Some(&id) => ValRef::Bound(id),
                None => env[&v],
            }
        };
        let mut factors = Vec::with_capacity(parts.len());
        for s_i in parts {
            let mut env_i = Env::new();
            for v in vertices.iter() {
                env_i.insert(v, ref_of(v));
            }
            factors.push(id_rec(b, g.clone(), s_i, vertices.minus(s_i), kernel, &env_i)?);
        }
        let body = Expr::Product(factors);
        return Ok(if binders.is_empty() {
            body
        } else {
            Expr::Sum { binders, body: Box::new(body) }
        });
    }

    let s = parts[0];
    let top_districts = g.districts();

    // Line 5: the whole graph is one district; the query is blocked.
    if top_districts.len() == 1 && top_districts[0] == vertices {
        let root_set: VSet = s.iter().filter(|&v| g.ch(v).inter(s).is_empty()).collect();
        return Err(Stop::Hedge(HedgeWitness {
            f: s,
            f_prime: vertices,
            root_set,
            blocked_x: x,
            blocked_y: y,
        }));
    }

    // Line 6: the live part is its own district of G; truncate.
    if top_districts.contains(&s) {
        let binders = b.fresh_binders(s.minus(y));
        let by_vertex: HashMap<u32, u32> = binders.iter().copied().collect();
        let ref_of = |v: u32| -> ValRef {
            match by_vertex.get(&v) {
                Some(&id) => ValRef::Bound(id),
                None => env[&v],
            }
        };
        let mut factors = Vec::new();
        for v in s.iter() {
            let given = b
                .preds(v, vertices)
                .iter()
                .map(|u| (u, ref_of(u)))
                .collect();
            factors.push(Expr::Factor {
                kernel,
                child: v,
                child_ref: ref_of(v),
                given,
            });
        }
        let body = Expr::Product(factors);
        return Ok(if binders.is_empty() {
            body
        } else {
            Expr::Sum { binders, body: Box::new(body) }
        });
    }

    // Line 7: recurse into the strictly larger district containing s, with
    // the kernel replaced by that district's conditional product.
    let s_prime = *top_districts
        .iter()
        .find(|d| s.is_subset(**d))
        .expect("s lies inside one district");
    debug_assert!(s != s_prime);
    let mut terms = Vec::new();
    for v in s_prime.iter() {
        let preds = b.preds(v, vertices);
        let given_outside = preds
            .minus(s_prime)
            .iter()
            .map(|u| (u, env[&u]))
            .collect();
        terms.push(CFactorTerm {
            child: v,
            given_inside: preds.inter(s_prime),
            given_outside,
        });
    }
    let sub = b.push_kernel(KernelDef::CFactor {
        parent: kernel,
        domain: s_prime,
        terms,
    });
    let g2 = g.induced(s_prime).map_err(Error::from)?;
    id_rec(b, g2, y, x.inter(s_prime), sub, env)
}

fn kernel_signatures(kernels: &[KernelDef]) -> Vec<Vec<(u32, ValRef)>> {
    let mut sigs: Vec<Vec<(u32, ValRef)>> = Vec::with_capacity(kernels.len());
    for def in kernels {
        let mut sig: Vec<(u32, ValRef)> = match def {
            KernelDef::Joint { .. } => Vec::new(),
            KernelDef::Marginal { parent, .. } => sigs[*parent].clone(),
            KernelDef::CFactor { parent, terms, .. } => {
                let mut s = sigs[*parent].clone();
                for t in terms {
                    s.extend(t.given_outside.iter().copied());
                }
                s
            }
        };
        sig.sort_by_key(|&(v, r)| (v, discriminant_key(r)));
        sig.dedup();
        sigs.push(sig);
    }
    sigs
}

fn discriminant_key(r: ValRef) -> u64 {
    match r {
        ValRef::FreeY => 0,
        ValRef::FreeX => 1,
        ValRef::Arbitrary => 2,
        ValRef::Bound(i) => 3 + i as u64,
    }
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

struct EvalCtx<'a, T> {
    expr: &'a EffectExpr,
    joint: &'a ProbTable<T>,
    y: &'a Assignment,
    x: &'a Assignment,
    arbitrary: bool,
    bound: Vec<bool>,
    bound_set: u64,
    tables: HashMap<(KernelId, u64), ProbTable<T>>,
}

impl<'a, T: Scalar> EvalCtx<'a, T> {
    fn resolve(&self, v: u32, r: ValRef) -> bool {
        match r {
            ValRef::FreeY => self.y.get(v).expect("y value supplied"),
            ValRef::FreeX => self.x.get(v).expect("x value supplied"),
            ValRef::Arbitrary => self.arbitrary,
            ValRef::Bound(i) => {
                debug_assert!(self.bound_set & (1 << i) != 0, "binder resolved in scope");
                self.bound[i as usize]
            }
        }
    }

    fn sig_key(&self, kernel: KernelId) -> u64 {
        let mut key = 0u64;
        for (i, &(v, r)) in self.expr.kernel_sigs[kernel].iter().enumerate() {
            if self.resolve(v, r) {
                key |= 1 << i;
            }
        }
        key
    }

    fn kernel_table(&mut self, kernel: KernelId) -> Result<ProbTable<T>> {
        let key = (kernel, self.sig_key(kernel));
        if let Some(t) = self.tables.get(&key) {
            return Ok(t.clone());
        }
        let table = match &self.expr.kernels[kernel] {
            KernelDef::Joint { .. } => self.joint.clone(),
            KernelDef::Marginal { parent, keep } => {
                self.kernel_table(*parent)?.marginalize(*keep)
            }
            KernelDef::CFactor { parent, domain, terms } => {
                let terms = terms.clone();
                let domain = *domain;
                let parent = self.kernel_table(*parent)?;
                let mut values = Vec::with_capacity(1 << domain.len());
                for idx in 0..(1usize << domain.len()) {
                    let a = Assignment::from_index(domain, idx);
                    let mut p = T::one();
                    for t in &terms {
                        let mut given = a.restrict(t.given_inside);
                        for &(u, r) in &t.given_outside {
                            given = given.with(u, self.resolve(u, r));
                        }
                        let den = parent.event_prob(&given);
                        if den.is_zero() {
                            return Err(Error::ZeroConditioningEvent(format!(
                                "factor for `{}`",
                                self.expr.labels.label(t.child)
                            )));
                        }
                        let num =
                            parent.event_prob(&given.with(t.child, a.get(t.child).unwrap()));
                        p = p * num / den;
                    }
                    values.push(p);
                }
                ProbTable::new(self.expr.labels.clone(), domain, Assignment::EMPTY, values)?
            }
        };
        Ok(self.tables.entry(key).or_insert(table).clone())
    }

    fn eval(&mut self, e: &Expr) -> Result<T> {
        match e {
            Expr::Sum { binders, body } => {
                let mut acc = T::zero();
                for mask in 0..(1usize << binders.len()) {
                    for (pos, &(_, id)) in binders.iter().enumerate() {
                        self.bound[id as usize] = mask & (1 << pos) != 0;
                        self.bound_set |= 1 << id;
                    }
                    acc = acc + self.eval(body)?;
                }
                for &(_, id) in binders {
                    self.bound_set &= !(1 << id);
                }
                Ok(acc)
            }
            Expr::Product(fs) => {
                let mut acc = T::one();
                for f in fs {
                    acc = acc * self.eval(f)?;
                }
                Ok(acc)
            }
            Expr::Factor { kernel, child, child_ref, given } => {
                let table = self.kernel_table(*kernel)?;
                let mut cond = Assignment::EMPTY;
                for &(u, r) in given {
                    cond = cond.with(u, self.resolve(u, r));
                }
                let den = table.event_prob(&cond);
                if den.is_zero() {
                    return Err(Error::ZeroConditioningEvent(format!(
                        "conditional for `{}`",
                        self.expr.labels.label(*child)
                    )));
                }
                let num = table.event_prob(&cond.with(*child, self.resolve(*child, *child_ref)));
                Ok(num / den)
            }
            Expr::Marginal { kernel, at } => {
                let table = self.kernel_table(*kernel)?;
                let mut event = Assignment::EMPTY;
                for &(u, r) in at {
                    event = event.with(u, self.resolve(u, r));
                }
                Ok(table.event_prob(&event))
            }
        }
    }
}

impl EffectExpr {
    pub fn y(&self) -> VSet {
        self.y
    }

    pub fn x(&self) -> VSet {
        self.x
    }

    /// Evaluates against a joint table over the query graph's vertices, with
    /// line-3 arbitrary values fixed to 0.
    pub fn evaluate<T: Scalar>(
        &self,
        joint: &ProbTable<T>,
        y_values: &Assignment,
        x_values: &Assignment,
    ) -> Result<T> {
        self.evaluate_with(joint, y_values, x_values, false)
    }

    /// Evaluation with an explicit choice for the arbitrary values; the
    /// result does not depend on it, which tests assert.
    pub fn evaluate_with<T: Scalar>(
        &self,
        joint: &ProbTable<T>,
        y_values: &Assignment,
        x_values: &Assignment,
        arbitrary: bool,
    ) -> Result<T> {
        if joint.vars() != self.vertices {
            return Err(Error::Structural(
                "joint table must cover exactly the query graph's vertices".into(),
            ));
        }
        if !self.y.is_subset(y_values.domain()) || !self.x.is_subset(x_values.domain()) {
            return Err(Error::Structural("missing y or x values".into()));
        }
        let mut ctx = EvalCtx {
            expr: self,
            joint,
            y: y_values,
            x: x_values,
            arbitrary,
            bound: vec![false; self.n_binders as usize],
            bound_set: 0,
            tables: HashMap::new(),
        };
        ctx.eval(&self.root)
    }

    /// Rebinds chosen FreeY slots to fresh summation binders, producing
    /// Σ_{over} of this expression.
    fn summed_over(&self, over: VSet) -> EffectExpr {
        let mut out = self.clone();
        let binders: Vec<(u32, u32)> = over
            .iter()
            .enumerate()
            .map(|(i, v)| (v, out.n_binders + i as u32))
            .collect();
        out.n_binders += binders.len() as u32;
        let map: HashMap<u32, u32> = binders.iter().copied().collect();
        let subst = |v: u32, r: ValRef| -> ValRef {
            match (r, map.get(&v)) {
                (ValRef::FreeY, Some(&id)) => ValRef::Bound(id),
                _ => r,
            }
        };
        fn walk(e: &mut Expr, subst: &dyn Fn(u32, ValRef) -> ValRef) {
            match e {
                Expr::Sum { body, .. } => walk(body, subst),
                Expr::Product(fs) => fs.iter_mut().for_each(|f| walk(f, subst)),
                Expr::Factor { child, child_ref, given, .. } => {
                    *child_ref = subst(*child, *child_ref);
                    for (u, r) in given {
                        *r = subst(*u, *r);
                    }
                }
                Expr::Marginal { at, .. } => {
                    for (u, r) in at {
                        *r = subst(*u, *r);
                    }
                }
            }
        }
        walk(&mut out.root, &subst);
        for def in out.kernels.iter_mut() {
            if let KernelDef::CFactor { terms, .. } = def {
                for t in terms {
                    for (u, r) in t.given_outside.iter_mut() {
                        *r = subst(*u, *r);
                    }
                }
            }
        }
        out.kernel_sigs = kernel_signatures(&out.kernels);
        out.y = self.y.minus(over);
        out.root = Expr::Sum { binders, body: Box::new(out.root.clone()) };
        out
    }
}

/// Numerator and denominator of a conditional effect
/// `P(y | z, do(x)) = P(y, z | do(x)) / P(z | do(x))`.
#[derive(Clone, Debug)]
pub struct ConditionalExpr {
    pub numerator: EffectExpr,
    pub denominator: EffectExpr,
}

#[derive(Clone, Debug)]
pub enum ConditionalOutcome {
    Identified(ConditionalExpr),
    Hedge(HedgeWitness),
}

/// Conditional effects by one final conditioning: identify the joint
/// `P(y ∪ z | do(x))` and divide by its z-marginal.
pub fn id_conditional(y: VSet, z: VSet, x: VSet, g: &Cadmg) -> Result<ConditionalOutcome> {
    if let Some(v) = y.inter(z).union(y.inter(x)).union(z.inter(x)).first() {
        return Err(Error::NotDisjoint(g.labels().label(v).to_string()));
    }
    match id(y.union(z), x, g)? {
        IdOutcome::Hedge(h) => Ok(ConditionalOutcome::Hedge(h)),
        IdOutcome::Identified(numerator) => {
            let denominator = numerator.summed_over(y);
            Ok(ConditionalOutcome::Identified(ConditionalExpr {
                numerator,
                denominator,
            }))
        }
    }
}

impl ConditionalExpr {
    /// `P(y | z, do(x))`; errors when `P(z | do(x))` is zero.
    pub fn evaluate<T: Scalar>(
        &self,
        joint: &ProbTable<T>,
        y_values: &Assignment,
        z_values: &Assignment,
        x_values: &Assignment,
    ) -> Result<T> {
        let yz = y_values.merged(z_values);
        let num = self.numerator.evaluate(joint, &yz, x_values)?;
        let den = self.denominator.evaluate(joint, z_values, x_values)?;
        if den.is_zero() {
            return Err(Error::UndefinedConditional);
        }
        Ok(num / den)
    }
}

// ---------------------------------------------------------------------------
// Hedges.
// ---------------------------------------------------------------------------

/// Direct structural check of the c-forest/hedge definition.
pub fn validate_hedge(g: &Cadmg, h: &HedgeWitness) -> Result<()> {
    let fail = |msg: &str| Err(Error::Structural(format!("invalid hedge: {msg}")));
    if !(h.f.is_subset(h.f_prime) && h.f != h.f_prime) {
        return fail("F must be a strict subset of F'");
    }
    if !h.root_set.is_subset(h.f) || h.root_set.is_empty() {
        return fail("R must be a nonempty subset of F");
    }
    for (name, set) in [("F", h.f), ("F'", h.f_prime)] {
        if !g.is_bidirected_connected(set) {
            return fail(&format!("{name} is not bidirected-connected"));
        }
        // R-rooted: every vertex reaches R by a directed path inside the set.
        let mut reach = h.root_set;
        loop {
            let grow: VSet = set
                .minus(reach)
                .iter()
                .filter(|&v| g.ch(v).inter(set).intersects(reach))
                .collect();
            if grow.is_empty() {
                break;
            }
            reach = reach.union(grow);
        }
        if reach != set {
            return fail(&format!("{name} is not R-rooted"));
        }
    }
    let an = g.ancestors_in(g.vertices().minus(h.blocked_x), h.blocked_y);
    if !h.root_set.is_subset(an) {
        return fail("R must lie within An(y) of the intervened graph");
    }
    if !h.blocked_x.intersects(h.f_prime) || h.blocked_x.intersects(h.f) {
        return fail("X must meet F' \\ F and avoid F");
    }
    Ok(())
}

/// Runs identification and returns the line-5 witness, re-validated against
/// the structural definition, or `None` when the effect is identifiable.
pub fn find_hedge(g: &Cadmg, x: VSet, y: VSet) -> Result<Option<HedgeWitness>> {
    match id(y, x, g)? {
        IdOutcome::Identified(_) => Ok(None),
        IdOutcome::Hedge(h) => {
            validate_hedge(g, &h)?;
            Ok(Some(h))
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty printing.
// ---------------------------------------------------------------------------

impl EffectExpr {
    fn symbol(&self, v: u32, r: ValRef) -> String {
        let l = self.labels.label(v);
        match r {
            ValRef::FreeY => l.to_string(),
            ValRef::FreeX => format!("{l}*"),
            ValRef::Arbitrary => format!("{l}~"),
            ValRef::Bound(_) => format!("{l}'"),
        }
    }

    fn render(&self, e: &Expr, out: &mut String) {
        match e {
            Expr::Sum { binders, body } => {
                let names: Vec<String> = binders
                    .iter()
                    .map(|&(v, id)| self.symbol(v, ValRef::Bound(id)))
                    .collect();
                let _ = write!(out, "Σ_{{{}}} [ ", names.join(","));
                self.render(body, out);
                out.push_str(" ]");
            }
            Expr::Product(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let wrap = matches!(f, Expr::Sum { .. });
                    if wrap {
                        out.push('(');
                    }
                    self.render(f, out);
                    if wrap {
                        out.push(')');
                    }
                }
            }
            Expr::Factor { kernel, child, child_ref, given } => {
                self.render_conditional(*kernel, *child, *child_ref, given, out);
            }
            Expr::Marginal { kernel, at } => {
                self.render_event(*kernel, at, out);
            }
        }
    }

    /// Event probability of a kernel at fixed slots, expanding marginal and
    /// district kernels into sums and conditional products of the base
    /// joint.
    fn render_event(&self, kernel: KernelId, at: &[(u32, ValRef)], out: &mut String) {
        match &self.kernels[kernel] {
            KernelDef::Joint { .. } | KernelDef::Marginal { .. } => {
                // A marginal of a marginal of the joint is still written P(·).
                let base = self.base_of(kernel);
                if base == kernel || matches!(self.kernels[base], KernelDef::Joint { .. }) {
                    let syms: Vec<String> =
                        at.iter().map(|&(v, r)| self.symbol(v, r)).collect();
                    let _ = write!(out, "P({})", syms.join(","));
                } else {
                    self.render_event(base, at, out);
                }
            }
            KernelDef::CFactor { parent, domain, terms } => {
                let fixed: VSet = at.iter().map(|&(v, _)| v).collect();
                let summed = domain.minus(fixed);
                let lookup = |v: u32| -> ValRef {
                    at.iter()
                        .find(|&&(u, _)| u == v)
                        .map(|&(_, r)| r)
                        .unwrap_or(ValRef::Bound(u32::MAX))
                };
                if !summed.is_empty() {
                    let names: Vec<String> = summed
                        .iter()
                        .map(|v| self.symbol(v, ValRef::Bound(0)))
                        .collect();
                    let _ = write!(out, "(Σ_{{{}}} ", names.join(","));
                }
                let parent = *parent;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let mut given: Vec<(u32, ValRef)> = t
                        .given_inside
                        .iter()
                        .map(|u| (u, lookup(u)))
                        .collect();
                    given.extend(t.given_outside.iter().copied());
                    self.render_conditional(parent, t.child, lookup(t.child), &given, out);
                }
                if !summed.is_empty() {
                    out.push(')');
                }
            }
        }
    }

    fn render_conditional(
        &self,
        kernel: KernelId,
        child: u32,
        child_ref: ValRef,
        given: &[(u32, ValRef)],
        out: &mut String,
    ) {
        let base = self.base_of(kernel);
        let name = if matches!(self.kernels[base], KernelDef::Joint { .. }) {
            "P".to_string()
        } else {
            format!("Q{base}")
        };
        // Bound(u32::MAX) marks a locally-summed slot in rendered kernels.
        let sym = |v: u32, r: ValRef| {
            if r == ValRef::Bound(u32::MAX) {
                format!("{}'", self.labels.label(v))
            } else {
                self.symbol(v, r)
            }
        };
        let mut givens: Vec<(u32, String)> =
            given.iter().map(|&(u, r)| (u, sym(u, r))).collect();
        // Conditioning side printed in reverse topological position order.
        givens.sort_by_key(|&(u, _)| std::cmp::Reverse(u));
        let givens: Vec<String> = givens.into_iter().map(|(_, s)| s).collect();
        if givens.is_empty() {
            let _ = write!(out, "{name}({})", sym(child, child_ref));
        } else {
            let _ = write!(out, "{name}({} | {})", sym(child, child_ref), givens.join(","));
        }
    }

    /// Follows marginal links down to the underlying joint or district
    /// kernel.
    fn base_of(&self, kernel: KernelId) -> KernelId {
        match &self.kernels[kernel] {
            KernelDef::Marginal { parent, .. } => self.base_of(*parent),
            _ => kernel,
        }
    }
}

impl std::fmt::Display for EffectExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        self.render(&self.root, &mut out);
        write!(f, "{out}")
    }
}
