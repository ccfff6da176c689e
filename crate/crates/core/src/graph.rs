//! Mixed graphs: ADMGs, conditional ADMGs, and latent-labeled DAGs.
//!
//! A CADMG has random vertices `V` and context vertices `W`; context vertices
//! never have incoming directed or bidirected edges. A plain ADMG is a CADMG
//! with empty context. Graphs are immutable after construction and every
//! derived graph (restriction, induced subgraph, latent projection) shares
//! its parent's label table, so vertex sets from related graphs compare
//! directly as bitmasks.

use crate::error::{Error, Result};
use crate::intrinsic::IntrinsicTable;
use crate::set::{VSet, MAX_VERTICES};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// Immutable label-to-index table, sorted so index order is label order.
#[derive(Debug, PartialEq, Eq)]
pub struct LabelTable {
    labels: Vec<String>,
}

impl LabelTable {
    pub fn new(mut labels: Vec<String>) -> Result<Arc<Self>> {
        labels.sort();
        for pair in labels.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateVertex(pair[0].clone()));
            }
        }
        if labels.len() > MAX_VERTICES {
            return Err(Error::TooManyVertices(MAX_VERTICES));
        }
        for l in &labels {
            if l.is_empty() || !l.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
                return Err(Error::InvalidLabel(l.clone()));
            }
        }
        Ok(Arc::new(LabelTable { labels }))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<u32> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .map(|i| i as u32)
            .map_err(|_| Error::UnknownVertex(label.to_string()))
    }

    pub fn label(&self, v: u32) -> &str {
        &self.labels[v as usize]
    }

    pub fn set_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<VSet> {
        let mut s = VSet::EMPTY;
        for l in labels {
            s.insert(self.index_of(l.as_ref())?);
        }
        Ok(s)
    }

    /// `{a,b,c}` in label order.
    pub fn fmt_set(&self, s: VSet) -> String {
        let mut out = String::from("{");
        for (i, v) in s.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(self.label(v));
        }
        out.push('}');
        out
    }
}

#[derive(Default)]
pub(crate) struct GraphCaches {
    pub(crate) topo: OnceLock<Vec<u32>>,
    pub(crate) intrinsic: OnceLock<IntrinsicTable>,
    pub(crate) head_partition: Mutex<HashMap<VSet, Arc<Vec<VSet>>>>,
}

/// Conditional acyclic directed mixed graph. `Admg` is the same type with an
/// empty context.
#[derive(Clone)]
pub struct Cadmg {
    labels: Arc<LabelTable>,
    v: VSet,
    w: VSet,
    pa: Vec<VSet>,
    ch: Vec<VSet>,
    sp: Vec<VSet>,
    caches: Arc<GraphCaches>,
}

pub type Admg = Cadmg;

impl PartialEq for Cadmg {
    fn eq(&self, other: &Self) -> bool {
        *self.labels == *other.labels
            && self.v == other.v
            && self.w == other.w
            && self.pa == other.pa
            && self.sp == other.sp
    }
}

impl fmt::Debug for Cadmg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cadmg(V={}", self.labels.fmt_set(self.v))?;
        if !self.w.is_empty() {
            write!(f, ", W={}", self.labels.fmt_set(self.w))?;
        }
        for (x, y) in self.directed_edges() {
            write!(f, ", {}->{}", self.labels.label(x), self.labels.label(y))?;
        }
        for (x, y) in self.bidirected_edges() {
            write!(f, ", {}<->{}", self.labels.label(x), self.labels.label(y))?;
        }
        write!(f, ")")
    }
}

impl Cadmg {
    /// Plain ADMG from label lists.
    pub fn admg<S: AsRef<str>>(
        labels: &[S],
        directed: &[(S, S)],
        bidirected: &[(S, S)],
    ) -> Result<Cadmg> {
        Self::new(labels, &[], directed, bidirected)
    }

    /// CADMG from label lists; `context` names the W vertices.
    pub fn new<S: AsRef<str>>(
        labels: &[S],
        context: &[S],
        directed: &[(S, S)],
        bidirected: &[(S, S)],
    ) -> Result<Cadmg> {
        let mut all: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        for (a, b) in directed.iter().chain(bidirected.iter()) {
            all.push(a.as_ref().to_string());
            all.push(b.as_ref().to_string());
        }
        for c in context {
            all.push(c.as_ref().to_string());
        }
        all.sort();
        all.dedup();
        let table = LabelTable::new(all)?;
        let w = table.set_from_labels(context)?;
        let v = VSet::full(table.len()).minus(w);
        let n = table.len();
        let (mut pa, mut ch, mut sp) = (vec![VSet::EMPTY; n], vec![VSet::EMPTY; n], vec![VSet::EMPTY; n]);
        for (a, b) in directed {
            let (x, y) = (table.index_of(a.as_ref())?, table.index_of(b.as_ref())?);
            pa[y as usize].insert(x);
            ch[x as usize].insert(y);
        }
        for (a, b) in bidirected {
            let (x, y) = (table.index_of(a.as_ref())?, table.index_of(b.as_ref())?);
            sp[x as usize].insert(y);
            sp[y as usize].insert(x);
        }
        Self::from_parts(table, v, w, pa, ch, sp)
    }

    /// Assembles and validates a CADMG over an existing label table.
    pub fn from_parts(
        labels: Arc<LabelTable>,
        v: VSet,
        w: VSet,
        pa: Vec<VSet>,
        ch: Vec<VSet>,
        sp: Vec<VSet>,
    ) -> Result<Cadmg> {
        if let Some(x) = v.inter(w).first() {
            return Err(Error::NotDisjoint(labels.label(x).to_string()));
        }
        let present = v.union(w);
        for x in present.iter() {
            if pa[x as usize].contains(x) || sp[x as usize].contains(x) {
                return Err(Error::SelfLoop(labels.label(x).to_string()));
            }
            if !pa[x as usize].is_subset(present)
                || !ch[x as usize].is_subset(present)
                || !sp[x as usize].is_subset(present)
            {
                return Err(Error::UnknownVertex(format!(
                    "edge endpoint outside graph at `{}`",
                    labels.label(x)
                )));
            }
        }
        for x in w.iter() {
            if !pa[x as usize].is_empty() || !sp[x as usize].is_empty() {
                return Err(Error::ContextWithIncoming(labels.label(x).to_string()));
            }
        }
        let g = Cadmg {
            labels,
            v,
            w,
            pa,
            ch,
            sp,
            caches: Arc::new(GraphCaches::default()),
        };
        if !g.directed_part_acyclic() {
            return Err(Error::DirectedCycle);
        }
        Ok(g)
    }

    pub fn labels(&self) -> &Arc<LabelTable> {
        &self.labels
    }

    /// Random vertices V.
    pub fn random(&self) -> VSet {
        self.v
    }

    /// Context vertices W.
    pub fn context(&self) -> VSet {
        self.w
    }

    /// All vertices V ∪ W.
    pub fn vertices(&self) -> VSet {
        self.v.union(self.w)
    }

    pub fn is_admg(&self) -> bool {
        self.w.is_empty()
    }

    pub fn pa(&self, x: u32) -> VSet {
        self.pa[x as usize]
    }

    pub fn ch(&self, x: u32) -> VSet {
        self.ch[x as usize]
    }

    pub fn sp(&self, x: u32) -> VSet {
        self.sp[x as usize]
    }

    /// Union of parents of members of `s` (not excluding `s` itself).
    pub fn pa_of_set(&self, s: VSet) -> VSet {
        s.iter().fold(VSet::EMPTY, |acc, x| acc.union(self.pa(x)))
    }

    pub fn directed_edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for x in self.vertices().iter() {
            for y in self.ch(x).iter() {
                out.push((x, y));
            }
        }
        out
    }

    pub fn bidirected_edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for x in self.vertices().iter() {
            for y in self.sp(x).iter() {
                if y > x {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.directed_edges().len() + self.bidirected_edges().len()
    }

    fn directed_part_acyclic(&self) -> bool {
        self.try_topological_order().is_some()
    }

    fn try_topological_order(&self) -> Option<Vec<u32>> {
        let present = self.vertices();
        let mut placed = VSet::EMPTY;
        let mut order = Vec::with_capacity(present.len());
        while placed != present {
            let mut advanced = false;
            for x in present.minus(placed).iter() {
                if self.pa(x).minus(placed).is_empty() {
                    order.push(x);
                    placed.insert(x);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return None;
            }
        }
        Some(order)
    }

    /// Topological order over V ∪ W, parents first, ties broken by label.
    /// Cached; this is the single π used everywhere an ordering is needed.
    pub fn topological_order(&self) -> &[u32] {
        self.caches
            .topo
            .get_or_init(|| self.try_topological_order().expect("validated acyclic"))
    }

    /// Vertices preceding `x` in the topological order.
    pub fn predecessors(&self, x: u32) -> VSet {
        let mut out = VSet::EMPTY;
        for &u in self.topological_order() {
            if u == x {
                break;
            }
            out.insert(u);
        }
        out
    }

    fn check_members(&self, s: VSet) -> Result<()> {
        if let Some(x) = s.minus(self.vertices()).first() {
            return Err(Error::UnknownVertex(self.labels.label(x).to_string()));
        }
        Ok(())
    }

    /// An(S): reflexive ancestral closure via directed edges, context included.
    pub fn ancestors(&self, s: VSet) -> Result<VSet> {
        self.check_members(s)?;
        Ok(self.ancestors_in(self.vertices(), s))
    }

    /// Ancestral closure of `seed` within the induced subgraph on `within`.
    pub(crate) fn ancestors_in(&self, within: VSet, seed: VSet) -> VSet {
        let mut out = seed.inter(within);
        let mut frontier = out;
        while !frontier.is_empty() {
            let mut next = VSet::EMPTY;
            for x in frontier.iter() {
                next = next.union(self.pa(x).inter(within));
            }
            frontier = next.minus(out);
            out = out.union(next);
        }
        out
    }

    /// De(S): reflexive descendant closure.
    pub fn descendants(&self, s: VSet) -> Result<VSet> {
        self.check_members(s)?;
        let mut out = s;
        let mut frontier = s;
        while !frontier.is_empty() {
            let mut next = VSet::EMPTY;
            for x in frontier.iter() {
                next = next.union(self.ch(x));
            }
            frontier = next.minus(out);
            out = out.union(next);
        }
        Ok(out)
    }

    /// Maximal bidirected-connected subsets of V; context vertices belong to
    /// no district. Sorted by lowest member.
    pub fn districts(&self) -> Vec<VSet> {
        let mut seen = VSet::EMPTY;
        let mut out = Vec::new();
        for x in self.v.iter() {
            if !seen.contains(x) {
                let d = self.district_in(self.v, VSet::singleton(x));
                seen = seen.union(d);
                out.push(d);
            }
        }
        out
    }

    /// Union of the districts of `seed`'s members within the induced subgraph
    /// on `within` (context never joins a district).
    pub(crate) fn district_in(&self, within: VSet, seed: VSet) -> VSet {
        let scope = within.inter(self.v).union(seed.inter(self.v));
        let mut out = seed.inter(scope);
        let mut frontier = out;
        while !frontier.is_empty() {
            let mut next = VSet::EMPTY;
            for x in frontier.iter() {
                next = next.union(self.sp(x).inter(scope));
            }
            frontier = next.minus(out);
            out = out.union(next);
        }
        out
    }

    /// True iff `s` forms a district in G[S] (nonempty and bidirected-connected
    /// within itself).
    pub fn is_bidirected_connected(&self, s: VSet) -> bool {
        match s.first() {
            None => false,
            Some(x) => self.district_in(s, VSet::singleton(x)) == s,
        }
    }

    /// G[S]: the CADMG with random vertices S, context Pa(S)\S, and exactly
    /// the edges within S plus directed edges from Pa(S)\S into S.
    pub fn restrict(&self, s: VSet) -> Result<Cadmg> {
        self.check_members(s)?;
        if !s.is_subset(self.v) {
            let x = s.minus(self.v).first().unwrap();
            return Err(Error::Structural(format!(
                "G[S] requires S within the random vertices; `{}` is context",
                self.labels.label(x)
            )));
        }
        let ctx = self.pa_of_set(s).minus(s);
        let present = s.union(ctx);
        let n = self.labels.len();
        let (mut pa, mut ch, mut sp) = (vec![VSet::EMPTY; n], vec![VSet::EMPTY; n], vec![VSet::EMPTY; n]);
        for x in s.iter() {
            pa[x as usize] = self.pa(x).inter(present);
            sp[x as usize] = self.sp(x).inter(s);
        }
        for x in present.iter() {
            ch[x as usize] = self.ch(x).inter(s);
        }
        Cadmg::from_parts(self.labels.clone(), s, ctx, pa, ch, sp)
    }

    /// Induced subgraph on `a`: keeps vertices of `a` with their V/W status
    /// and every edge with both endpoints in `a`.
    pub fn induced(&self, a: VSet) -> Result<Cadmg> {
        self.check_members(a)?;
        let n = self.labels.len();
        let (mut pa, mut ch, mut sp) = (vec![VSet::EMPTY; n], vec![VSet::EMPTY; n], vec![VSet::EMPTY; n]);
        for x in a.iter() {
            pa[x as usize] = self.pa(x).inter(a);
            ch[x as usize] = self.ch(x).inter(a);
            sp[x as usize] = self.sp(x).inter(a);
        }
        Cadmg::from_parts(self.labels.clone(), self.v.inter(a), self.w.inter(a), pa, ch, sp)
    }

    /// Latent projection removing the single random vertex `x`: parents of
    /// `x` gain edges to its children, children pair up with bidirected
    /// edges, and spouses of `x` become spouses of its children.
    pub fn project_out_one(&self, x: u32) -> Result<Cadmg> {
        self.check_members(VSet::singleton(x))?;
        if !self.v.contains(x) {
            return Err(Error::Structural(format!(
                "cannot project out context vertex `{}`",
                self.labels.label(x)
            )));
        }
        let rest = self.vertices().without(x);
        let n = self.labels.len();
        let (mut pa, mut ch, mut sp) = (vec![VSet::EMPTY; n], vec![VSet::EMPTY; n], vec![VSet::EMPTY; n]);
        for u in rest.iter() {
            pa[u as usize] = self.pa(u).without(x);
            ch[u as usize] = self.ch(u).without(x);
            sp[u as usize] = self.sp(u).without(x);
        }
        let (paren, child, spouse) = (self.pa(x), self.ch(x), self.sp(x));
        for p in paren.iter() {
            for c in child.iter() {
                pa[c as usize].insert(p);
                ch[p as usize].insert(c);
            }
        }
        for a in child.iter() {
            for b in child.iter() {
                if a != b {
                    sp[a as usize].insert(b);
                }
            }
        }
        for s in spouse.iter() {
            for c in child.iter() {
                if s != c {
                    sp[s as usize].insert(c);
                    sp[c as usize].insert(s);
                }
            }
        }
        Cadmg::from_parts(self.labels.clone(), self.v.without(x), self.w, pa, ch, sp)
    }

    /// Latent projection onto `keep ∪ W`: projects out every random vertex
    /// not in `keep`, lowest label first (the result is order-independent).
    pub fn project_onto(&self, keep: VSet) -> Result<Cadmg> {
        self.check_members(keep)?;
        let mut g = self.clone();
        for x in self.v.minus(keep).iter() {
            g = g.project_out_one(x)?;
        }
        Ok(g)
    }

    /// m-separation of `x` from `y` given `z`, by reachability over
    /// (vertex, entered-through-arrowhead) states.
    pub fn m_separated(&self, x: VSet, y: VSet, z: VSet) -> Result<bool> {
        self.check_members(x.union(y).union(z))?;
        for (a, b) in [(x, y), (x, z), (y, z)] {
            if let Some(u) = a.inter(b).first() {
                return Err(Error::NotDisjoint(self.labels.label(u).to_string()));
            }
        }
        // Colliders open iff some descendant is in z.
        let opens = {
            let mut out = VSet::EMPTY;
            for u in self.vertices().iter() {
                if self.descendants(VSet::singleton(u))?.intersects(z) {
                    out.insert(u);
                }
            }
            out
        };
        // State: (vertex, arrived through an arrowhead at that vertex).
        let mut visited_head = VSet::EMPTY;
        let mut visited_tail = VSet::EMPTY;
        let mut queue: Vec<(u32, bool)> = Vec::new();
        let push = |q: &mut Vec<(u32, bool)>, vh: &mut VSet, vt: &mut VSet, t: u32, head: bool| {
            let seen = if head { vh } else { vt };
            if !seen.contains(t) {
                seen.insert(t);
                q.push((t, head));
            }
        };
        for s in x.iter() {
            for c in self.ch(s).iter() {
                push(&mut queue, &mut visited_head, &mut visited_tail, c, true);
            }
            for p in self.pa(s).iter() {
                push(&mut queue, &mut visited_head, &mut visited_tail, p, false);
            }
            for t in self.sp(s).iter() {
                push(&mut queue, &mut visited_head, &mut visited_tail, t, true);
            }
        }
        while let Some((m, arrived_head)) = queue.pop() {
            if y.contains(m) {
                return Ok(false);
            }
            // Each step leaves m with a head or tail mark at m and arrives at
            // the neighbor with its own mark; collider at m iff both marks at
            // m are heads.
            let steps = self
                .ch(m)
                .iter()
                .map(|c| (c, false, true))
                .chain(self.pa(m).iter().map(|p| (p, true, false)))
                .chain(self.sp(m).iter().map(|s| (s, true, true)))
                .collect::<Vec<_>>();
            for (next, departs_head, arrives_head) in steps {
                let collider = arrived_head && departs_head;
                let passable = if collider { opens.contains(m) } else { !z.contains(m) };
                if passable {
                    push(&mut queue, &mut visited_head, &mut visited_tail, next, arrives_head);
                }
            }
        }
        Ok(true)
    }

    /// True iff `a` is ancestrally closed (within V ∪ W).
    pub fn is_ancestral(&self, a: VSet) -> bool {
        self.ancestors_in(self.vertices(), a) == a
    }

    pub(crate) fn caches(&self) -> &GraphCaches {
        &self.caches
    }

    /// Graph text serialization (`node`, `->`, `<->` statements).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let labels: Vec<&str> = self.vertices().iter().map(|v| self.labels.label(v)).collect();
        out.push_str(&format!("node {}\n", labels.join(" ")));
        if !self.w.is_empty() {
            let ctx: Vec<&str> = self.w.iter().map(|v| self.labels.label(v)).collect();
            out.push_str(&format!("# context: {}\n", ctx.join(" ")));
        }
        for (a, b) in self.directed_edges() {
            out.push_str(&format!("{} -> {}\n", self.labels.label(a), self.labels.label(b)));
        }
        for (a, b) in self.bidirected_edges() {
            out.push_str(&format!("{} <-> {}\n", self.labels.label(a), self.labels.label(b)));
        }
        out
    }
}

/// A DAG with a subset of vertices labeled latent.
#[derive(Clone, Debug)]
pub struct LatentDag {
    graph: Cadmg,
    latent: VSet,
}

impl LatentDag {
    pub fn new<S: AsRef<str>>(labels: &[S], latent: &[S], directed: &[(S, S)]) -> Result<LatentDag> {
        let graph = Cadmg::admg(labels, directed, &[])?;
        let latent = graph.labels().set_from_labels(latent)?;
        Ok(LatentDag { graph, latent })
    }

    pub fn from_admg(graph: Cadmg, latent: VSet) -> Result<LatentDag> {
        if !graph.is_admg() || !graph.bidirected_edges().is_empty() {
            return Err(Error::Structural(
                "a latent DAG has no context and no bidirected edges".into(),
            ));
        }
        Ok(LatentDag { graph, latent })
    }

    pub fn labels(&self) -> &Arc<LabelTable> {
        self.graph.labels()
    }

    pub fn latent(&self) -> VSet {
        self.latent
    }

    pub fn observed(&self) -> VSet {
        self.graph.vertices().minus(self.latent)
    }

    /// The underlying DAG viewed as an ADMG over all vertices.
    pub fn as_admg(&self) -> &Cadmg {
        &self.graph
    }

    /// Latent projection onto `o`: directed edge for every directed path
    /// through latent intermediates, bidirected edge for every collider-free
    /// trek with arrowheads at both ends and intermediates outside `o`.
    pub fn latent_projection(&self, o: VSet) -> Result<Cadmg> {
        if let Some(x) = o.inter(self.latent).first() {
            return Err(Error::LatentNotObserved(self.labels().label(x).to_string()));
        }
        self.graph.project_onto(o)
    }
}
