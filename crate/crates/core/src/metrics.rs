//! Structural metrics: diameter, average distance and bisection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::split_seed;
use crate::topology::{RouterId, Topology, TopologyKind};

/// Link rate used to turn a cut edge count into bandwidth.
pub const DEFAULT_LINK_GBPS: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no closed-form bisection for {0}; use the partitioning heuristic")]
    NoFormula(TopologyKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    /// `None` when the router graph is disconnected.
    pub diameter: Option<u32>,
    /// Mean router-to-router hops over ordered pairs of distinct routers.
    pub avg_distance: f64,
    /// Mean router hops between two distinct endpoints (0 when they share a
    /// router). Differs from `avg_distance` when some routers carry no endpoints.
    pub avg_endpoint_distance: f64,
}

/// Exact all-pairs BFS.
pub fn diameter_and_avg(topo: &Topology) -> DistanceSummary {
    let n = topo.num_routers();
    let counts: Vec<u64> = (0..n as RouterId).map(|r| topo.endpoint_count(r) as u64).collect();
    let (max, unreachable, sum, weighted) = (0..n as RouterId)
        .into_par_iter()
        .map(|s| {
            let dist = topo.distances_from(s);
            let mut max = 0;
            let mut unreachable = false;
            let mut sum = 0u64;
            let mut weighted = 0u64;
            for (t, &d) in dist.iter().enumerate() {
                if d == u32::MAX {
                    unreachable = true;
                    continue;
                }
                max = max.max(d);
                sum += d as u64;
                weighted += counts[s as usize] * counts[t] * d as u64;
            }
            (max, unreachable, sum, weighted)
        })
        .reduce(|| (0, false, 0, 0), |a, b| (a.0.max(b.0), a.1 || b.1, a.2 + b.2, a.3 + b.3));
    let pairs = (n * n.saturating_sub(1)) as f64;
    let e = topo.num_endpoints() as f64;
    let endpoint_pairs = e * (e - 1.0);
    DistanceSummary {
        diameter: (!unreachable).then_some(max),
        avg_distance: if unreachable { f64::INFINITY } else if pairs > 0.0 { sum as f64 / pairs } else { 0.0 },
        avg_endpoint_distance: if unreachable {
            f64::INFINITY
        } else if endpoint_pairs > 0.0 {
            weighted as f64 / endpoint_pairs
        } else {
            0.0
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    /// Smallest balanced cut found (router-to-router links).
    pub best: usize,
    pub median: usize,
    pub restarts: usize,
    /// Side of each router in the best cut.
    pub sides: Vec<bool>,
}

/// Number of links crossing a two-way partition.
pub fn cut_size(topo: &Topology, sides: &[bool]) -> usize {
    topo.edges().filter(|&(u, v)| sides[u as usize] != sides[v as usize]).count()
}

/// Multi-start Kernighan–Lin bisection. Restart `i` is seeded from `(seed, i)`
/// alone, so adding restarts can only lower the result.
pub fn bisection_heuristic(topo: &Topology, restarts: usize, seed: u64) -> Bisection {
    let restarts = restarts.max(1);
    let runs: Vec<(usize, Vec<bool>)> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, i as u64));
            kernighan_lin(topo, &mut rng)
        })
        .collect();
    let mut cuts: Vec<usize> = runs.iter().map(|r| r.0).collect();
    cuts.sort_unstable();
    let (best, sides) = runs.into_iter().min_by_key(|r| r.0).unwrap();
    Bisection { best, median: cuts[cuts.len() / 2], restarts, sides }
}

fn kernighan_lin(topo: &Topology, rng: &mut ChaCha8Rng) -> (usize, Vec<bool>) {
    let n = topo.num_routers();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut side = vec![false; n];
    for &v in &order[..n / 2] {
        side[v] = true;
    }
    if n < 2 {
        return (0, side);
    }
    // gain[v] = external - internal links of v
    let mut gain = vec![0i64; n];
    let mut locked = vec![false; n];
    loop {
        for v in 0..n {
            gain[v] = topo
                .neighbors(v as RouterId)
                .iter()
                .map(|&u| if side[u as usize] != side[v] { 1 } else { -1 })
                .sum();
        }
        locked.fill(false);
        let mut swaps = Vec::new();
        let mut total = 0i64;
        let mut best_total = 0i64;
        let mut best_len = 0;
        let steps = n / 2;
        for _ in 0..steps {
            let mut a_side: Vec<usize> = (0..n).filter(|&v| !locked[v] && side[v]).collect();
            let mut b_side: Vec<usize> = (0..n).filter(|&v| !locked[v] && !side[v]).collect();
            if a_side.is_empty() || b_side.is_empty() {
                break;
            }
            a_side.sort_by_key(|&v| (std::cmp::Reverse(gain[v]), v));
            b_side.sort_by_key(|&v| (std::cmp::Reverse(gain[v]), v));
            let mut best: Option<(i64, usize, usize)> = None;
            for &a in &a_side {
                if let Some((g, _, _)) = best {
                    if gain[a] + gain[b_side[0]] <= g {
                        break;
                    }
                }
                for &b in &b_side {
                    let bound = gain[a] + gain[b];
                    if let Some((g, _, _)) = best {
                        if bound <= g {
                            break;
                        }
                    }
                    let g = bound - if topo.has_edge(a as RouterId, b as RouterId) { 2 } else { 0 };
                    if best.is_none_or(|(bg, _, _)| g > bg) {
                        best = Some((g, a, b));
                    }
                }
            }
            let (g, a, b) = best.unwrap();
            for v in [a, b] {
                locked[v] = true;
                let from = side[v];
                side[v] = !from;
                for &u in topo.neighbors(v as RouterId) {
                    gain[u as usize] += if side[u as usize] == from { 2 } else { -2 };
                }
                gain[v] = -gain[v];
            }
            total += g;
            swaps.push((a, b));
            if total > best_total {
                best_total = total;
                best_len = swaps.len();
            }
        }
        for &(a, b) in &swaps[best_len..] {
            side[a] = !side[a];
            side[b] = !side[b];
        }
        if best_total <= 0 {
            break;
        }
    }
    (cut_size(topo, &side), side)
}

/// Closed-form bisection in endpoints for families that have one.
pub fn analytic_bisection(kind: TopologyKind, endpoints: u64, network_radix: u64, concentration: u64) -> Result<u64, MetricsError> {
    match kind {
        TopologyKind::Hypercube | TopologyKind::FatTree3 => Ok(endpoints / 2),
        TopologyKind::Torus3 | TopologyKind::Torus5 => Ok(2 * endpoints / network_radix.max(1)),
        TopologyKind::Dragonfly | TopologyKind::FlattenedButterfly3 => {
            Ok((endpoints + 2 * concentration * concentration - 1) / 4)
        }
        other => Err(MetricsError::NoFormula(other)),
    }
}

/// Long Hop hypercube bisection `⌊3N/2⌋` (formula only; the topology itself
/// is not constructed).
pub fn long_hop_bisection(endpoints: u64) -> u64 {
    3 * endpoints / 2
}

/// One row of the structural analysis table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub kind: TopologyKind,
    pub params: String,
    pub routers: usize,
    pub endpoints: usize,
    pub network_radix: u32,
    pub concentration: u32,
    pub diameter: Option<u32>,
    pub avg_distance: f64,
    pub avg_endpoint_distance: f64,
    pub bisection_links: Option<usize>,
    pub bisection_median: Option<usize>,
    pub bisection_gbps: Option<f64>,
    pub bisection_restarts: usize,
    /// Endpoint-count bisection from the closed form, where one exists.
    pub analytic_bisection: Option<u64>,
}

/// Distances plus (when `restarts > 0`) a bisection estimate.
pub fn structural_report(topo: &Topology, restarts: usize, seed: u64, link_gbps: f64) -> StructuralReport {
    let dist = diameter_and_avg(topo);
    let bis = (restarts > 0 && topo.num_routers() >= 2).then(|| bisection_heuristic(topo, restarts, seed));
    let params = topo.spec().map(|s| serde_json::to_string(s).unwrap_or_default()).unwrap_or_default();
    StructuralReport {
        kind: topo.kind(),
        params,
        routers: topo.num_routers(),
        endpoints: topo.num_endpoints(),
        network_radix: topo.network_radix(),
        concentration: topo.concentration(),
        diameter: dist.diameter,
        avg_distance: dist.avg_distance,
        avg_endpoint_distance: dist.avg_endpoint_distance,
        bisection_links: bis.as_ref().map(|b| b.best),
        bisection_median: bis.as_ref().map(|b| b.median),
        bisection_gbps: bis.as_ref().map(|b| b.best as f64 * link_gbps),
        bisection_restarts: if bis.is_some() { restarts } else { 0 },
        analytic_bisection: analytic_bisection(
            topo.kind(),
            topo.num_endpoints() as u64,
            topo.network_radix() as u64,
            topo.concentration() as u64,
        )
        .ok(),
    }
}
