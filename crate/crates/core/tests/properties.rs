use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slimfly::field::Field;
use slimfly::metrics::{bisection_heuristic, cut_size, diameter_and_avg};
use slimfly::resiliency::{survivable_fraction, FailureExperiment, FailureMetric};
use slimfly::routing::{assign_vcs, DependencyGraph, MinRoutes};
use slimfly::topology::{build_mms, from_edges, mms_delta, Topology};

const ORDERS: [u64; 14] = [2, 3, 4, 5, 7, 8, 9, 11, 13, 16, 25, 27, 32, 49];

fn field_and_elems() -> impl Strategy<Value = (u64, u32, u32, u32)> {
    prop::sample::select(ORDERS.to_vec())
        .prop_flat_map(|q| (Just(q), 0..q as u32, 0..q as u32, 0..q as u32))
}

proptest! {
    #[test]
    fn field_axioms((q, a, b, c) in field_and_elems()) {
        let f = Field::new(q).unwrap();
        prop_assert_eq!(f.add(a, b), f.add(b, a));
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.add(a, f.neg(a)), 0);
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            prop_assert_eq!(f.pow(a, q - 1), 1);
        } else {
            prop_assert!(f.inv(a).is_none());
        }
    }
}

#[test]
fn mms_invariants_hold_for_every_small_order() {
    for q in [4u64, 5, 7, 8, 9, 11, 13] {
        let topo = build_mms(q).unwrap();
        let delta = mms_delta(q).unwrap().0 as i64;
        let degree = ((3 * q as i64 - delta) / 2) as usize;
        assert_eq!(topo.num_routers(), 2 * (q * q) as usize, "q={q}");
        assert!((0..topo.num_routers() as u32).all(|r| topo.degree(r) == degree), "q={q}");
        assert_eq!(diameter_and_avg(&topo).diameter, Some(2), "q={q}");
        assert_eq!(topo.num_edges(), topo.num_routers() * degree / 2);
    }
}

/// Exhaustive minimum bisection over all balanced splits with vertex 0 fixed.
fn exhaustive_bisection(n: usize, edges: &[(u32, u32)]) -> usize {
    let mut adj = vec![0u32; n];
    for &(u, v) in edges {
        adj[u as usize] |= 1 << v;
        adj[v as usize] |= 1 << u;
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let half = n / 2;
    let mut best = usize::MAX;
    // Gosper's hack over subsets of vertices 1..n of size half - 1.
    let rest = n - 1;
    let k = half - 1;
    let mut s: u32 = if k == 0 { 0 } else { (1 << k) - 1 };
    loop {
        let side = (s << 1) | 1;
        let cut: u32 = (0..n)
            .filter(|&v| side >> v & 1 == 1)
            .map(|v| (adj[v] & !side & full).count_ones())
            .sum();
        best = best.min(cut as usize);
        if k == 0 {
            break;
        }
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
        if s >> rest != 0 {
            break;
        }
    }
    best
}

fn random_graph(n: usize, p: f64, seed: u64) -> Vec<(u32, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    edges
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn heuristic_bisection_matches_exhaustive(half in 2usize..=8, p in 0.15f64..0.6, seed in any::<u64>()) {
        let n = 2 * half;
        let edges = random_graph(n, p, seed);
        let topo = from_edges(n, &edges, 1).unwrap();
        let found = bisection_heuristic(&topo, 32, seed);
        prop_assert_eq!(found.best, exhaustive_bisection(n, &edges));
        prop_assert_eq!(found.sides.iter().filter(|&&s| s).count(), half);
        prop_assert_eq!(cut_size(&topo, &found.sides), found.best);
    }

    #[test]
    fn more_restarts_never_worsen_the_cut(seed in any::<u64>(), restarts in 1usize..12) {
        let edges = random_graph(30, 0.2, seed);
        let topo = from_edges(30, &edges, 1).unwrap();
        let fewer = bisection_heuristic(&topo, restarts, seed);
        let more = bisection_heuristic(&topo, restarts + 5, seed);
        prop_assert!(more.best <= fewer.best);
    }
}

#[test]
fn heuristic_matches_exhaustive_up_to_24_vertices() {
    let mut graphs: Vec<(usize, Vec<(u32, u32)>)> = Vec::new();
    // 4x6 grid
    let mut grid = Vec::new();
    for r in 0..4u32 {
        for c in 0..6u32 {
            let v = r * 6 + c;
            if c + 1 < 6 {
                grid.push((v, v + 1));
            }
            if r + 1 < 4 {
                grid.push((v, v + 6));
            }
        }
    }
    graphs.push((24, grid));
    // 24-cycle and a 4-regular circulant
    graphs.push((24, (0..24).map(|v| (v, (v + 1) % 24)).collect()));
    graphs.push((24, (0..24u32).flat_map(|v| [(v, (v + 1) % 24), (v, (v + 5) % 24)]).collect()));
    for seed in 0..4 {
        graphs.push((20, random_graph(20, 0.25, seed)));
        graphs.push((24, random_graph(24, 0.2, 100 + seed)));
    }
    for (n, edges) in graphs {
        let topo = from_edges(n, &edges, 1).unwrap();
        assert_eq!(bisection_heuristic(&topo, 64, 7).best, exhaustive_bisection(n, &edges), "n={n}");
    }
}

fn dependency_graph(topo: &Topology, valiant_samples: usize, seed: u64) -> DependencyGraph {
    let routes = MinRoutes::new(topo);
    let mut cdg = DependencyGraph::new();
    let n = topo.num_routers() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..n {
        for d in (0..n).filter(|&d| d != s) {
            cdg.add_route(&assign_vcs(routes.route(s, d).unwrap()).unwrap());
            for _ in 0..valiant_samples {
                let r = routes.valiant(s, d, false, &mut rng).unwrap();
                cdg.add_route(&assign_vcs(r).unwrap());
            }
        }
    }
    cdg
}

#[test]
fn hop_indexed_vcs_leave_no_dependency_cycles() {
    for (q, samples) in [(5, 8), (7, 3), (11, 1)] {
        let topo = build_mms(q).unwrap();
        let cdg = dependency_graph(&topo, samples, q);
        assert!(cdg.is_acyclic(), "q={q}");
        assert!(cdg.channels() > 0);
    }
}

#[test]
fn single_vc_minimal_routing_on_a_ring_has_a_cycle() {
    // Sanity check for the detector: a clockwise-routed ring waits on itself.
    let n = 6u32;
    let topo = from_edges(n as usize, &(0..n).map(|v| (v, (v + 1) % n)).collect::<Vec<_>>(), 1).unwrap();
    let routes = MinRoutes::new(&topo);
    let mut cdg = DependencyGraph::new();
    for s in 0..n {
        let mut r = routes.route(s, (s + 2) % n).unwrap();
        r.vcs = vec![0; r.len()];
        cdg.add_route(&r);
    }
    assert!(!cdg.is_acyclic());
}

#[test]
fn survival_curves_are_monotone_and_metrics_nest() {
    let topo = build_mms(5).unwrap();
    let exp = |metric| FailureExperiment { metric, ci_width: 0.05, seed: 3, ..Default::default() };
    let disc = survivable_fraction(&topo, &exp(FailureMetric::Disconnection)).unwrap();
    let diam = survivable_fraction(&topo, &exp(FailureMetric::DIAMETER)).unwrap();
    for report in [&disc, &diam] {
        let probs: Vec<f64> = report.curve.iter().map(|p| p.survival_probability).collect();
        assert!(probs.windows(2).all(|w| w[1] <= w[0]), "{probs:?}");
        assert!(report.curve.iter().all(|p| p.ci_low <= p.raw_probability && p.raw_probability <= p.ci_high));
    }
    // A diameter bound is a stricter survival condition than connectivity.
    assert!(disc.threshold >= diam.threshold);
}
