use std::collections::VecDeque;

use slimfly::routing::Algorithm;
use slimfly::sim::{run_sim, sweep, traffic_for, Network, SimConfig, SimError, TrafficPattern};
use slimfly::topology::{build_dragonfly, build_fat_tree, build_mms, FatTreeShape, Topology};

fn bfs(topo: &Topology, src: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; topo.num_routers()];
    let mut queue = VecDeque::from([src]);
    dist[src as usize] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in topo.neighbors(u) {
            if dist[v as usize] == u32::MAX {
                dist[v as usize] = dist[u as usize] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn quick(routing: Algorithm, load: f64) -> SimConfig {
    SimConfig { routing, injection_rate: load, measure_cycles: 3000, ..Default::default() }
}

#[test]
fn low_load_latency_matches_pipeline_arithmetic() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    let stats = run_sim(&topo, &quick(Algorithm::Min, 0.01), &traffic).unwrap();

    // Uniform traffic excludes only the source endpoint itself.
    let n = topo.num_endpoints() as u32;
    let mut total = 0.0;
    let mut pairs = 0.0;
    for s in 0..n {
        let dist = bfs(&topo, topo.router_of(s));
        for d in (0..n).filter(|&d| d != s) {
            let h = dist[topo.router_of(d) as usize] as f64;
            // injection + ejection channel, a 3-cycle pipeline per router, one cycle per link
            total += 2.0 + 3.0 * (h + 1.0) + h;
            pairs += 1.0;
        }
    }
    let expected = total / pairs;
    assert!(
        (stats.mean_latency - expected).abs() < 0.03 * expected,
        "mean {} vs {expected}",
        stats.mean_latency
    );
    assert!(stats.min_latency >= 5);
    assert!(!stats.saturated);
}

#[test]
fn credits_are_conserved_every_cycle() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    for routing in [Algorithm::Min, Algorithm::UgalLocal] {
        let mut net = Network::new(&topo, &quick(routing, 0.7), &traffic).unwrap();
        for cycle in 0..3000 {
            net.step().unwrap();
            if cycle % 7 == 0 {
                net.check_credit_conservation().unwrap();
            }
        }
        net.stop_injection();
        while net.in_network() > 0 || net.queued_at_sources() > 0 {
            net.step().unwrap();
            net.check_credit_conservation().unwrap();
        }
    }
}

#[test]
fn network_drains_without_loss() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    for routing in [Algorithm::Min, Algorithm::Valiant, Algorithm::UgalGlobal] {
        let stats = run_sim(&topo, &quick(routing, 0.3), &traffic).unwrap();
        assert!(stats.drained, "{routing}");
        assert!((stats.accepted - stats.measured_offered).abs() < 0.01, "{routing}: {stats:?}");
    }
}

#[test]
fn runs_are_reproducible() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    let cfg = quick(Algorithm::UgalLocal, 0.4);
    let a = run_sim(&topo, &cfg, &traffic).unwrap();
    let b = run_sim(&topo, &cfg, &traffic).unwrap();
    assert_eq!(a, b);
    let other = run_sim(&topo, &SimConfig { seed: 99, ..cfg.clone() }, &traffic).unwrap();
    assert_ne!(a.packets_measured, other.packets_measured);
}

#[test]
fn sweep_points_do_not_depend_on_their_neighbours() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    let cfg = quick(Algorithm::Min, 0.0);
    let both = sweep(&topo, &SimConfig { injection_rate: 0.1, ..cfg.clone() }, &traffic, &[0.2, 0.5]);
    let single = sweep(&topo, &cfg, &traffic, &[0.5]);
    assert_eq!(both[1].as_ref().unwrap(), single[0].as_ref().unwrap());
}

#[test]
fn latency_rises_with_load() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    let loads = [0.1, 0.4, 0.7];
    let res = sweep(&topo, &quick(Algorithm::Min, 0.1), &traffic, &loads);
    let lat: Vec<f64> = res.iter().map(|r| r.as_ref().unwrap().mean_latency).collect();
    assert!(lat.windows(2).all(|w| w[0] < w[1]), "{lat:?}");
}

#[test]
fn bit_patterns_use_a_power_of_two_subset() {
    let topo = build_mms(5).unwrap();
    for pattern in [TrafficPattern::Shuffle, TrafficPattern::BitReversal, TrafficPattern::BitComplement] {
        let traffic = traffic_for(&topo, pattern).unwrap();
        // Bit complement concentrates flows on a few links and saturates near 0.17.
        let stats = run_sim(&topo, &quick(Algorithm::Min, 0.1), &traffic).unwrap();
        assert_eq!(stats.active_sources, 128);
        assert!(stats.drained);
    }
}

#[test]
fn dragonfly_and_fat_tree_run_deadlock_free() {
    // One global link per group pair: Valiant saturates just under 0.3 here.
    let df = build_dragonfly(2, 4, 2, None).unwrap();
    let traffic = traffic_for(&df, TrafficPattern::Uniform).unwrap();
    for routing in [Algorithm::Min, Algorithm::Valiant, Algorithm::UgalLocal] {
        let stats = run_sim(&df, &quick(routing, 0.15), &traffic).unwrap();
        assert!(stats.drained, "{routing}");
    }

    let ft = build_fat_tree(4, FatTreeShape::KAry).unwrap();
    let traffic = traffic_for(&ft, TrafficPattern::Uniform).unwrap();
    let stats = run_sim(&ft, &quick(Algorithm::NearestCommonAncestor, 0.3), &traffic).unwrap();
    assert!(stats.drained);
    assert!(stats.mean_hops <= 4.0);
}

#[test]
fn nearest_common_ancestor_needs_a_fat_tree() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    let err = run_sim(&topo, &quick(Algorithm::NearestCommonAncestor, 0.1), &traffic).unwrap_err();
    assert!(matches!(err, SimError::Routing(_)));
}

#[test]
fn bad_configs_are_rejected() {
    let topo = build_mms(5).unwrap();
    let traffic = traffic_for(&topo, TrafficPattern::Uniform).unwrap();
    for cfg in [
        SimConfig { injection_rate: 0.0, ..Default::default() },
        SimConfig { injection_rate: 1.5, ..Default::default() },
        SimConfig { vc_count: Some(0), ..Default::default() },
        SimConfig { buffer_flits_per_port: 2, vc_count: Some(4), ..Default::default() },
        SimConfig { channel_latency: 0, ..Default::default() },
    ] {
        assert!(matches!(run_sim(&topo, &cfg, &traffic), Err(SimError::BadConfig(_))), "{cfg:?}");
    }
    // Valiant routes need more VCs than one.
    let cfg = SimConfig { routing: Algorithm::Valiant, vc_count: Some(1), ..Default::default() };
    assert!(run_sim(&topo, &cfg, &traffic).is_err());
}
