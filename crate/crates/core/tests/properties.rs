//! Cross-module invariants checked against independent brute-force oracles.
//!
//! The oracles here (path-enumeration separation, the hedge-based intrinsic
//! test, exhaustive closure minimality) deliberately avoid the code paths
//! they certify.

use causalq::eid::{eid, EidOutcome, OrderStrategy};
use causalq::graph::Cadmg;
use causalq::ident::{find_hedge, id, id_with_stats, validate_hedge, IdOutcome};
use causalq::intrinsic::{all_intrinsic_sets, intrinsic_closure, is_intrinsic};
use causalq::moebius::{fgmt, gmt, table_from_params, Assignment, FgmtMemo};
use causalq::oracle::{random_admg, random_latent_dag, random_model};
use causalq::set::VSet;
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Brute-force separation by path enumeration.
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, PartialEq)]
enum EdgeKind {
    /// from -> to
    Out,
    /// to -> from (traversed against the arrow)
    In,
    /// from <-> to
    Bi,
}

/// Every simple path between x and y must be blocked by z.
fn m_separated_by_paths(g: &Cadmg, x: VSet, y: VSet, z: VSet) -> bool {
    let opens: VSet = g
        .vertices()
        .iter()
        .filter(|&v| g.descendants(VSet::singleton(v)).unwrap().intersects(z))
        .collect();
    fn dfs(
        g: &Cadmg,
        at: u32,
        arrived_head: Option<bool>,
        visited: VSet,
        y: VSet,
        z: VSet,
        opens: VSet,
    ) -> bool {
        // Returns true if an unblocked path to y exists from this state.
        let steps: Vec<(u32, EdgeKind)> = g
            .ch(at)
            .iter()
            .map(|c| (c, EdgeKind::Out))
            .chain(g.pa(at).iter().map(|p| (p, EdgeKind::In)))
            .chain(g.sp(at).iter().map(|s| (s, EdgeKind::Bi)))
            .collect();
        for (next, kind) in steps {
            if visited.contains(next) {
                continue;
            }
            let departs_head = matches!(kind, EdgeKind::In | EdgeKind::Bi);
            if let Some(arrived) = arrived_head {
                let collider = arrived && departs_head;
                let passable = if collider {
                    opens.contains(at)
                } else {
                    !z.contains(at)
                };
                if !passable {
                    continue;
                }
            }
            if y.contains(next) {
                return true;
            }
            let arrives_head = matches!(kind, EdgeKind::Out | EdgeKind::Bi);
            if dfs(g, next, Some(arrives_head), visited.with(next), y, z, opens) {
                return true;
            }
        }
        false
    }
    for s in x.iter() {
        if dfs(g, s, None, VSet::singleton(s), y, z, opens) {
            return false;
        }
    }
    true
}

fn three_disjoint_singletons(g: &Cadmg, picks: (u32, u32, u32)) -> Option<(VSet, VSet, VSet)> {
    let n = g.vertices().len() as u32;
    if n < 3 {
        return None;
    }
    let vs: Vec<u32> = g.vertices().iter().collect();
    let a = vs[(picks.0 % n) as usize];
    let b = vs[(picks.1 % n) as usize];
    let c = vs[(picks.2 % n) as usize];
    if a == b || b == c || a == c {
        return None;
    }
    Some((VSet::singleton(a), VSet::singleton(b), VSet::singleton(c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reachability_separation_matches_path_enumeration(
        seed in 0u64..5000,
        picks in (0u32..8, 0u32..8, 0u32..8),
    ) {
        let g = random_admg(seed, 6, 0.35, 0.25).unwrap();
        if let Some((x, y, z)) = three_disjoint_singletons(&g, picks) {
            let fast = g.m_separated(x, y, z).unwrap();
            let slow = m_separated_by_paths(&g, x, y, z);
            prop_assert_eq!(fast, slow);
        }
    }

    #[test]
    fn latent_projection_preserves_separation(
        seed in 0u64..5000,
        picks in (0u32..8, 0u32..8, 0u32..8),
        zmask in 0u64..64,
    ) {
        let dag = random_latent_dag(seed, 5, 2, 0.4).unwrap();
        let o = dag.observed();
        let proj = dag.latent_projection(o).unwrap();
        let full = dag.as_admg();
        let obs: Vec<u32> = o.iter().collect();
        let n = obs.len() as u32;
        let a = obs[(picks.0 % n) as usize];
        let b = obs[(picks.1 % n) as usize];
        if a != b {
            let mut z = VSet::EMPTY;
            for (i, &v) in obs.iter().enumerate() {
                if v != a && v != b && zmask & (1 << i) != 0 {
                    z.insert(v);
                }
            }
            let in_dag = full.m_separated(VSet::singleton(a), VSet::singleton(b), z).unwrap();
            let in_proj = proj.m_separated(VSet::singleton(a), VSet::singleton(b), z).unwrap();
            prop_assert_eq!(in_dag, in_proj);
        }
    }

    #[test]
    fn ancestors_is_a_closure_operator(seed in 0u64..5000, mask in 0u64..64, mask2 in 0u64..64) {
        let g = random_admg(seed, 6, 0.4, 0.2).unwrap();
        let s = VSet::from_bits(mask).inter(g.vertices());
        let t = VSet::from_bits(mask2).inter(g.vertices());
        let an = g.ancestors(s).unwrap();
        prop_assert!(s.is_subset(an));
        prop_assert_eq!(g.ancestors(an).unwrap(), an);
        if s.is_subset(t) {
            prop_assert!(an.is_subset(g.ancestors(t).unwrap()));
        }
    }

    #[test]
    fn districts_partition_the_random_vertices(seed in 0u64..5000) {
        let g = random_admg(seed, 7, 0.3, 0.3).unwrap();
        let parts = g.districts();
        let mut seen = VSet::EMPTY;
        for d in &parts {
            prop_assert!(!d.intersects(seen));
            prop_assert!(g.is_bidirected_connected(*d));
            seen = seen.union(*d);
            // Maximality: no other block can be merged in.
            for o in &parts {
                if o != d {
                    prop_assert!(!g.is_bidirected_connected(d.union(*o)));
                }
            }
        }
        prop_assert_eq!(seen, g.random());
    }
}

// ---------------------------------------------------------------------------
// Intrinsic sets: definitional equivalence and closure laws.
// ---------------------------------------------------------------------------

/// The identification-based test: bidirected-connected and no hedge for
/// (Pa(S) \ S, S).
fn is_intrinsic_by_hedges(g: &Cadmg, s: VSet) -> bool {
    if !g.is_bidirected_connected(s) {
        return false;
    }
    let x = g.pa_of_set(s).minus(s);
    find_hedge(g, x, s).unwrap().is_none()
}

#[test]
fn intrinsic_definitions_agree_on_random_graphs() {
    for seed in 0..150u64 {
        let g = random_admg(seed, 5, 0.35, 0.35).unwrap();
        for s in g.random().subsets() {
            if s.is_empty() {
                continue;
            }
            assert_eq!(
                is_intrinsic(&g, s),
                is_intrinsic_by_hedges(&g, s),
                "seed {seed}, set {s:?}"
            );
        }
    }
}

#[test]
fn closure_is_least_intrinsic_superset() {
    for seed in 0..80u64 {
        let g = random_admg(seed, 6, 0.35, 0.35).unwrap();
        for s in g.random().subsets() {
            if s.is_empty() || !g.is_bidirected_connected(s) {
                continue;
            }
            let c = intrinsic_closure(&g, s).unwrap();
            assert!(is_intrinsic(&g, c.members));
            assert!(s.is_subset(c.members));
            for t in g.random().subsets() {
                if s.is_subset(t) && is_intrinsic(&g, t) {
                    assert!(c.members.is_subset(t), "seed {seed}");
                }
            }
        }
    }
}

#[test]
fn saturation_equals_brute_force_enumeration() {
    for seed in 0..60u64 {
        let g = random_admg(seed, 7, 0.3, 0.3).unwrap();
        let table = all_intrinsic_sets(&g).unwrap();
        let mut count = 0usize;
        for s in g.random().subsets() {
            if !s.is_empty() && is_intrinsic(&g, s) {
                assert!(table.contains(s), "seed {seed} missing {s:?}");
                count += 1;
            }
        }
        assert_eq!(count, table.sets().len(), "seed {seed}");
    }
}

#[test]
fn ancestral_restrictions_preserve_intrinsic_sets() {
    // For ancestral A: I(G_A) = I(G) ∩ P(A ∩ V), heads and tails included.
    for seed in 0..60u64 {
        let g = random_admg(seed, 6, 0.4, 0.3).unwrap();
        let table = all_intrinsic_sets(&g).unwrap();
        for a in g.random().subsets() {
            if !g.is_ancestral(a) {
                continue;
            }
            let sub = g.induced(a).unwrap();
            let sub_table = all_intrinsic_sets(&sub).unwrap();
            let want: Vec<VSet> = table
                .sets()
                .iter()
                .map(|i| i.members)
                .filter(|m| m.is_subset(a))
                .collect();
            let got: Vec<VSet> = sub_table.sets().iter().map(|i| i.members).collect();
            assert_eq!(got, want, "seed {seed} A={a:?}");
            for i in sub_table.sets() {
                let orig = table.get(i.members).unwrap();
                assert_eq!(i.head, orig.head);
                assert_eq!(i.tail, orig.tail);
            }
        }
    }
}

#[test]
fn district_restrictions_preserve_intrinsic_sets() {
    for seed in 0..60u64 {
        let g = random_admg(seed, 6, 0.4, 0.3).unwrap();
        let table = all_intrinsic_sets(&g).unwrap();
        for d in g.districts() {
            let sub = g.restrict(d).unwrap();
            let sub_table = all_intrinsic_sets(&sub).unwrap();
            let want: Vec<VSet> = table
                .sets()
                .iter()
                .map(|i| i.members)
                .filter(|m| m.is_subset(d))
                .collect();
            let got: Vec<VSet> = sub_table.sets().iter().map(|i| i.members).collect();
            assert_eq!(got, want, "seed {seed} D={d:?}");
        }
    }
}

// ---------------------------------------------------------------------------
// Identification soundness and structural witnesses.
// ---------------------------------------------------------------------------

#[test]
fn identified_expressions_match_the_oracle() {
    for seed in 0..25u64 {
        let m = random_model::<f64>(seed, 5, 2, 0.4, 2).unwrap();
        let g = m.projection().unwrap();
        let joint = m.joint().unwrap();
        for xv in g.random().iter() {
            for yv in g.random().iter() {
                if xv == yv {
                    continue;
                }
                let outcome = id(VSet::singleton(yv), VSet::singleton(xv), &g).unwrap();
                if let IdOutcome::Identified(expr) = outcome {
                    for (xval, yval) in [(false, false), (true, false), (false, true)] {
                        let x = Assignment::EMPTY.with(xv, xval);
                        let y = Assignment::EMPTY.with(yv, yval);
                        let got = expr.evaluate(&joint, &y, &x).unwrap();
                        let want = m.truncated(&x).unwrap().event_prob(&y);
                        assert!(
                            (got - want).abs() < 1e-10,
                            "seed {seed} do({xv})->{yv}: {got} vs {want}"
                        );
                        // Line-3 arbitrary values must not influence the result.
                        let flipped = expr.evaluate_with(&joint, &y, &x, true).unwrap();
                        assert!((got - flipped).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn hedge_witnesses_always_validate() {
    let mut hedges = 0u32;
    for seed in 0..120u64 {
        let g = random_admg(seed, 5, 0.4, 0.4).unwrap();
        for xv in g.random().iter() {
            for yv in g.random().iter() {
                if xv == yv {
                    continue;
                }
                if let Some(h) = find_hedge(&g, VSet::singleton(xv), VSet::singleton(yv)).unwrap()
                {
                    validate_hedge(&g, &h).unwrap();
                    hedges += 1;
                }
            }
        }
    }
    assert!(hedges > 50, "expected plenty of non-identifiable pairs");
}

#[test]
fn district_split_fires_at_most_once_per_query() {
    for seed in 0..80u64 {
        let g = random_admg(seed, 8, 0.35, 0.3).unwrap();
        let vs: Vec<u32> = g.random().iter().collect();
        for (i, &xv) in vs.iter().enumerate() {
            let yv = vs[(i + 1) % vs.len()];
            if xv == yv {
                continue;
            }
            let (_, stats) = id_with_stats(VSet::singleton(yv), VSet::singleton(xv), &g).unwrap();
            assert!(stats.line4_invocations <= 1, "seed {seed}");
        }
    }
}

// ---------------------------------------------------------------------------
// Transforms and elimination.
// ---------------------------------------------------------------------------

#[test]
fn fast_transform_equals_slow_transform() {
    use rand::{Rng, SeedableRng};
    for seed in 0..40u64 {
        let g = random_admg(seed, 5, 0.4, 0.4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let omega =
            causalq::QParamSet::<f64>::from_fn(&g, |_, _| Ok(rng.gen_range(0.0..=1.0))).unwrap();
        let mut memo = FgmtMemo::new();
        for idx in 0..(1usize << g.random().len()) {
            let nu = Assignment::from_index(g.random(), idx);
            let slow = gmt(&g, &omega, &nu).unwrap();
            let fast = fgmt(&g, &omega, &nu, &mut memo).unwrap();
            assert!((slow - fast).abs() < 1e-12, "seed {seed} idx {idx}");
        }
    }
}

#[test]
fn normalization_holds_for_oracle_parameters() {
    for seed in 0..20u64 {
        let m = random_model::<f64>(seed, 5, 2, 0.4, 2).unwrap();
        let g = m.projection().unwrap();
        let omega = m.q_params(&g).unwrap();
        let table = table_from_params(&g, &omega).unwrap();
        let sum: f64 = table.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
    }
}

#[test]
fn eid_failures_coincide_with_hedges() {
    for seed in 0..40u64 {
        let m = random_model::<f64>(seed, 5, 2, 0.45, 2).unwrap();
        let g = m.projection().unwrap();
        let omega = m.q_params(&g).unwrap();
        for xv in g.random().iter() {
            for yv in g.random().iter() {
                if xv == yv {
                    continue;
                }
                let y = VSet::singleton(yv);
                let out = eid(
                    y,
                    &Assignment::EMPTY.with(xv, false),
                    &omega,
                    &g,
                    OrderStrategy::Greedy,
                )
                .unwrap();
                let hedge = find_hedge(&g, VSet::singleton(xv), y).unwrap();
                match out {
                    EidOutcome::Identified(_) => assert!(hedge.is_none(), "seed {seed}"),
                    EidOutcome::Fail(_) => assert!(hedge.is_some(), "seed {seed}"),
                }
            }
        }
    }
}
