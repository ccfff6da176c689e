//! Brute-force ground truth from explicit latent-variable DAG models.
//!
//! A [`CptModel`] is a latent DAG with full conditional probability tables.
//! Joints and truncated (g-formula) distributions come from exhaustive
//! enumeration, and q parameters come straight from their causal reading as
//! conditional interventional probabilities. Nothing here shares code with
//! the transform or elimination machinery it is used to check.

use crate::error::{Error, Result};
use crate::graph::{Cadmg, LatentDag};
use crate::moebius::{Assignment, ProbTable, QParamSet};
use crate::scalar::{total, Scalar};
use crate::set::VSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Positivity floor for generated conditional probabilities.
pub const DELTA_PCT: u32 = 5;

const VERTEX_GUARD: usize = 20;
const STATE_GUARD: usize = 1 << 22;

/// A latent DAG with one CPT per vertex. Observed vertices are binary;
/// latents may have up to four states.
#[derive(Clone, Debug)]
pub struct CptModel<T> {
    dag: LatentDag,
    card: Vec<u32>,
    /// Per vertex: rows indexed by the mixed-radix parent assignment, each a
    /// distribution over the vertex's states.
    cpts: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> CptModel<T> {
    pub fn new(dag: LatentDag, card: Vec<u32>, cpts: Vec<Vec<Vec<T>>>) -> Result<CptModel<T>> {
        let n = dag.labels().len();
        if card.len() != n || cpts.len() != n {
            return Err(Error::Structural(
                "cardinalities and CPTs must cover every vertex".into(),
            ));
        }
        for v in dag.as_admg().vertices().iter() {
            let c = card[v as usize];
            let observed = !dag.latent().contains(v);
            if observed && c != 2 {
                return Err(Error::Structural(format!(
                    "observed vertex `{}` must be binary",
                    dag.labels().label(v)
                )));
            }
            if !(2..=4).contains(&c) {
                return Err(Error::Structural(format!(
                    "cardinality of `{}` must be 2..=4",
                    dag.labels().label(v)
                )));
            }
            let rows = &cpts[v as usize];
            let expect: usize = dag
                .as_admg()
                .pa(v)
                .iter()
                .map(|p| card[p as usize] as usize)
                .product();
            if rows.len() != expect {
                return Err(Error::Structural(format!(
                    "CPT of `{}` needs {} rows",
                    dag.labels().label(v),
                    expect
                )));
            }
            for row in rows {
                if row.len() != c as usize || !crate::scalar::is_normalized(row) {
                    return Err(Error::NotNormalized(format!(
                        "CPT row of `{}`",
                        dag.labels().label(v)
                    )));
                }
            }
        }
        Ok(CptModel { dag, card, cpts })
    }

    /// All-binary model from `P(v = 0 | parent assignment)` values.
    pub fn binary(dag: LatentDag, mut p_zero: impl FnMut(u32, usize) -> T) -> Result<CptModel<T>> {
        let n = dag.labels().len();
        let mut cpts = Vec::with_capacity(n);
        for v in 0..n as u32 {
            let rows = 1usize << dag.as_admg().pa(v).len();
            let mut table = Vec::with_capacity(rows);
            for row in 0..rows {
                let p0 = p_zero(v, row);
                table.push(vec![p0.clone(), T::one() - p0]);
            }
            cpts.push(table);
        }
        CptModel::new(dag, vec![2; n], cpts)
    }

    pub fn dag(&self) -> &LatentDag {
        &self.dag
    }

    pub fn observed(&self) -> VSet {
        self.dag.observed()
    }

    /// Latent projection of the model's DAG onto its observed vertices.
    pub fn projection(&self) -> Result<Cadmg> {
        self.dag.latent_projection(self.observed())
    }

    fn parent_row(&self, v: u32, states: &[u32]) -> usize {
        let mut idx = 0usize;
        for p in self.dag.as_admg().pa(v).iter() {
            idx = idx * self.card[p as usize] as usize + states[p as usize] as usize;
        }
        idx
    }

    fn state_count(&self, free: VSet) -> usize {
        free.iter().map(|v| self.card[v as usize] as usize).product()
    }

    /// Truncated-formula distribution over `observed \ x` with `x` fixed:
    /// intervened factors dropped, latents summed out. `truncated` with an
    /// empty assignment is the observed joint.
    pub fn truncated(&self, x: &Assignment) -> Result<ProbTable<T>> {
        if !x.domain().is_subset(self.observed()) {
            return Err(Error::Structural(
                "interventions must target observed vertices".into(),
            ));
        }
        let all = self.dag.as_admg().vertices();
        if all.len() > VERTEX_GUARD {
            return Err(Error::SizeGuard(all.len(), VERTEX_GUARD));
        }
        let free = all.minus(x.domain());
        if self.state_count(free) > STATE_GUARD {
            return Err(Error::SizeGuard(self.state_count(free), STATE_GUARD));
        }
        let out_vars = self.observed().minus(x.domain());
        let mut values = vec![T::zero(); 1 << out_vars.len()];
        let mut states: Vec<u32> = vec![0; self.card.len()];
        for v in x.domain().iter() {
            states[v as usize] = u32::from(x.get(v).unwrap());
        }
        let free_list: Vec<u32> = free.iter().collect();
        loop {
            let mut p = T::one();
            for v in all.minus(x.domain()).iter() {
                let row = self.parent_row(v, &states);
                p = p * self.cpts[v as usize][row][states[v as usize] as usize].clone();
            }
            let mut bits = 0u64;
            for v in out_vars.iter() {
                bits |= u64::from(states[v as usize]) << v;
            }
            let slot = out_vars.pack(bits);
            values[slot] = values[slot].clone() + p;
            // Mixed-radix odometer over the free vertices.
            let mut pos = 0;
            loop {
                if pos == free_list.len() {
                    let table =
                        ProbTable::new(self.dag.labels().clone(), out_vars, *x, values)?;
                    return Ok(table);
                }
                let v = free_list[pos] as usize;
                states[v] += 1;
                if states[v] < self.card[v] {
                    break;
                }
                states[v] = 0;
                pos += 1;
            }
        }
    }

    /// Observed joint distribution (latents summed out).
    pub fn joint(&self) -> Result<ProbTable<T>> {
        self.truncated(&Assignment::EMPTY)
    }

    /// q parameters read off the model per their causal interpretation:
    /// q_H(t) = P(X_H = 0 | X_{C\H} = t, do(X_{Pa(C)\C} = t)), with the
    /// interventional distribution computed by the truncation formula.
    pub fn q_params(&self, g: &Cadmg) -> Result<QParamSet<T>> {
        if g.random() != self.observed() || !g.is_admg() {
            return Err(Error::Structural(
                "graph must be the latent projection onto the observed vertices".into(),
            ));
        }
        let mut cache: HashMap<Assignment, ProbTable<T>> = HashMap::new();
        QParamSet::from_fn(g, |info, t| {
            let do_part = t.restrict(t.domain().minus(info.members));
            let table = match cache.get(&do_part) {
                Some(t) => t,
                None => {
                    let t = self.truncated(&do_part)?;
                    cache.entry(do_part).or_insert(t)
                }
            };
            let rest = t.restrict(info.members);
            let den = table.event_prob(&rest);
            if den.is_zero() {
                return Err(Error::ZeroConditioningEvent(format!(
                    "oracle conditional for head {}",
                    g.labels().fmt_set(info.head)
                )));
            }
            let zeros = Assignment::new(info.head, 0);
            let num = table.event_prob(&rest.merged(&zeros));
            Ok(num / den)
        })
    }
}

/// Reproducible random model: a latent DAG whose latents are roots with at
/// least two observed children (so each projects to bidirected edges), with
/// CPT entries bounded away from 0 and 1.
pub fn random_model<T: Scalar>(
    seed: u64,
    n_observed: usize,
    n_latent: usize,
    edge_density: f64,
    latent_card: u32,
) -> Result<CptModel<T>> {
    if n_observed == 0 || (n_latent > 0 && n_observed < 2) {
        return Err(Error::Generation(
            "latents need at least two observed vertices".into(),
        ));
    }
    if !(2..=4).contains(&latent_card) {
        return Err(Error::Generation("latent cardinality must be 2..=4".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (1..=n_observed)
        .map(|i| format!("v{i:02}"))
        .chain((1..=n_latent).map(|i| format!("u{i:02}")))
        .collect();
    let labels: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let latents: Vec<&str> = labels[n_observed..].to_vec();

    let mut edges: Vec<(String, String)> = Vec::new();
    // Observed part: edges respect label order, so acyclicity is free.
    for i in 1..=n_observed {
        for j in (i + 1)..=n_observed {
            if rng.gen_bool(edge_density) {
                edges.push((format!("v{i:02}"), format!("v{j:02}")));
            }
        }
    }
    for i in 1..=n_latent {
        let k = rng.gen_range(2..=3.min(n_observed));
        let mut targets: Vec<usize> = (1..=n_observed).collect();
        targets.shuffle(&mut rng);
        for j in targets.into_iter().take(k) {
            edges.push((format!("u{i:02}"), format!("v{j:02}")));
        }
    }
    let edge_refs: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let dag = LatentDag::new(&labels, &latents, &edge_refs)?;

    let n = dag.labels().len();
    let mut card = vec![2u32; n];
    for u in dag.latent().iter() {
        card[u as usize] = latent_card;
    }
    let mut cpts = Vec::with_capacity(n);
    for v in 0..n as u32 {
        let rows: usize = dag
            .as_admg()
            .pa(v)
            .iter()
            .map(|p| card[p as usize] as usize)
            .product();
        let c = card[v as usize] as usize;
        let mut table = Vec::with_capacity(rows);
        for _ in 0..rows {
            table.push(random_distribution::<T, _>(&mut rng, c)?);
        }
        cpts.push(table);
    }
    CptModel::new(dag, card, cpts)
}

/// A length-`c` distribution with every entry in [0.05, 0.95].
fn random_distribution<T: Scalar, R: Rng>(rng: &mut R, c: usize) -> Result<Vec<T>> {
    if c == 2 {
        let p = T::sample_unit(rng, DELTA_PCT, 100 - DELTA_PCT);
        return Ok(vec![p.clone(), T::one() - p]);
    }
    let floor = T::from_ratio(DELTA_PCT as i64, 100);
    for _ in 0..200 {
        let raw: Vec<T> = (0..c).map(|_| T::sample_unit(rng, DELTA_PCT, 95)).collect();
        let sum = total(&raw);
        let row: Vec<T> = raw.into_iter().map(|x| x / sum.clone()).collect();
        if row.iter().all(|x| *x >= floor) {
            return Ok(row);
        }
    }
    Err(Error::Generation("could not draw a bounded CPT row".into()))
}

/// Random ADMG for structural sweeps (no probabilities attached).
pub fn random_admg(seed: u64, n: usize, dir_density: f64, bi_density: f64) -> Result<Cadmg> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<String> = (1..=n).map(|i| format!("v{i:02}")).collect();
    let labels: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let mut dir = Vec::new();
    let mut bi = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(dir_density) {
                dir.push((labels[i], labels[j]));
            }
            if rng.gen_bool(bi_density) {
                bi.push((labels[i], labels[j]));
            }
        }
    }
    Cadmg::admg(&labels, &dir, &bi)
}

/// Random latent DAG with root latents, as in [`random_model`], without CPTs.
pub fn random_latent_dag(
    seed: u64,
    n_observed: usize,
    n_latent: usize,
    edge_density: f64,
) -> Result<LatentDag> {
    random_model::<f64>(seed, n_observed, n_latent, edge_density, 2).map(|m| m.dag().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::{gmt, table_from_params};

    fn assign(dag: &LatentDag, pairs: &[(&str, bool)]) -> Assignment {
        pairs.iter().fold(Assignment::EMPTY, |a, (l, v)| {
            a.with(dag.labels().index_of(l).unwrap(), *v)
        })
    }

    #[test]
    fn single_node_joint() {
        let dag = LatentDag::new(&["v"], &[], &[]).unwrap();
        let m = CptModel::binary(dag, |_, _| 0.4).unwrap();
        assert_eq!(m.joint().unwrap().values(), &[0.4, 0.6]);
    }

    #[test]
    fn independent_nodes_product() {
        let dag = LatentDag::new(&["a", "b"], &[], &[]).unwrap();
        let m = CptModel::binary(dag, |v, _| if v == 0 { 0.3 } else { 0.8 }).unwrap();
        let j = m.joint().unwrap();
        let expect = [0.3 * 0.8, 0.7 * 0.8, 0.3 * 0.2, 0.7 * 0.2];
        for (got, want) in j.values().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_empty_equals_joint() {
        let m = random_model::<f64>(3, 4, 2, 0.5, 2).unwrap();
        assert_eq!(m.joint().unwrap(), m.truncated(&Assignment::EMPTY).unwrap());
    }

    #[test]
    fn root_intervention_matches_conditioning() {
        // Intervening on a root with no latent parents is plain conditioning.
        let dag = LatentDag::new(&["a", "b"], &[], &[("a", "b")]).unwrap();
        let m = CptModel::binary(dag, |v, row| match (v, row) {
            (0, _) => 0.3,
            (_, 0) => 0.9,
            _ => 0.2,
        })
        .unwrap();
        let x = assign(m.dag(), &[("a", true)]);
        let t = m.truncated(&x).unwrap();
        assert!((t.values()[0] - 0.2).abs() < 1e-12);
        assert!((t.values()[1] - 0.8).abs() < 1e-12);
    }

    /// Latent bow: A -> Y confounded by U.
    fn bow_model(seed: u64) -> CptModel<f64> {
        let dag = LatentDag::new(
            &["a", "y", "u"],
            &["u"],
            &[("a", "y"), ("u", "a"), ("u", "y")],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CptModel::binary(dag, move |_, _| rng.gen_range(0.05..=0.95)).unwrap()
    }

    #[test]
    fn bow_confounding_separates_do_from_conditioning() {
        let m = bow_model(11);
        let a = m.dag().labels().index_of("a").unwrap();
        let y = m.dag().labels().index_of("y").unwrap();
        let x = Assignment::EMPTY.with(a, false);
        let j = m.joint().unwrap();
        let p_do = m.truncated(&x).unwrap().values()[0];
        let p_cond = j.event_prob(&x.with(y, false)) / j.event_prob(&x);
        assert!((p_do - p_cond).abs() > 1e-4, "generic bow should confound");
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = random_model::<f64>(7, 5, 2, 0.4, 2).unwrap();
        let b = random_model::<f64>(7, 5, 2, 0.4, 2).unwrap();
        assert_eq!(a.joint().unwrap(), b.joint().unwrap());
    }

    #[test]
    fn no_latents_projects_to_plain_dag() {
        let m = random_model::<f64>(5, 5, 0, 0.5, 2).unwrap();
        assert!(m.projection().unwrap().bidirected_edges().is_empty());
    }

    #[test]
    fn latents_project_to_bidirected_edges() {
        for seed in 0..100u64 {
            let m = random_model::<f64>(seed, 4, 1, 0.3, 2).unwrap();
            assert!(
                !m.projection().unwrap().bidirected_edges().is_empty(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn gmt_over_oracle_params_reproduces_joint() {
        for seed in 0..10u64 {
            let m = random_model::<f64>(seed, 5, 2, 0.4, 2).unwrap();
            let g = m.projection().unwrap();
            let omega = m.q_params(&g).unwrap();
            let joint = m.joint().unwrap();
            for (nu, want) in joint.assignments() {
                let got = gmt(&g, &omega, &nu).unwrap();
                assert!((got - want).abs() < 1e-10, "seed {seed}");
            }
        }
    }

    #[test]
    fn oracle_params_roundtrip_through_table() {
        let m = random_model::<f64>(21, 5, 2, 0.4, 2).unwrap();
        let g = m.projection().unwrap();
        let omega = m.q_params(&g).unwrap();
        let table = table_from_params(&g, &omega).unwrap();
        let joint = m.joint().unwrap();
        for (a, b) in table.values().iter().zip(joint.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn quad_latent_cardinality_still_reproduces() {
        let m = random_model::<f64>(2, 4, 2, 0.4, 4).unwrap();
        let g = m.projection().unwrap();
        let omega = m.q_params(&g).unwrap();
        let joint = m.joint().unwrap();
        for (nu, want) in joint.assignments() {
            let got = gmt(&g, &omega, &nu).unwrap();
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_rational_oracle_agrees_exactly() {
        use crate::Exact;
        let m = random_model::<Exact>(13, 4, 1, 0.5, 2).unwrap();
        let g = m.projection().unwrap();
        let omega = m.q_params(&g).unwrap();
        let joint = m.joint().unwrap();
        for (nu, want) in joint.assignments() {
            assert_eq!(&gmt(&g, &omega, &nu).unwrap(), want);
        }
    }
}
