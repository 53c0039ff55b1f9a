//! Reference topologies compared against Slim Fly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GraphBuilder, RouterId, RouterLabel, Topology, TopologyError, TopologyKind, TopologyParts, TopologySpec};

fn bad(kind: TopologyKind, reason: impl Into<String>) -> TopologyError {
    TopologyError::BadParams { kind, reason: reason.into() }
}

/// Balanced concentration as a function of router radix `k`.
pub fn balanced_concentration(kind: TopologyKind, k: u32) -> u32 {
    match kind {
        TopologyKind::Dragonfly => (k + 1) / 4,
        TopologyKind::FlattenedButterfly3 => (k + 3) / 4,
        TopologyKind::RandomDln => (k as f64).sqrt().floor() as u32,
        TopologyKind::FatTree3 => k / 2,
        TopologyKind::SlimFly => {
            // k = k' + ⌈k'/2⌉  ⇒  k' = ⌊2k/3⌋
            k - 2 * k / 3
        }
        _ => 1,
    }
}

/// Dragonfly with `a` routers per group, `h` global links per router, `p`
/// endpoints per router and `g` fully connected groups (default `a·h + 1`).
///
/// Groups form a clique at group level: every pair of groups is joined by
/// exactly one global link. The link between groups `i` and `j` leaves group
/// `i` from router `((j - i - 1) mod g) / h`.
pub fn build_dragonfly(p: u32, a: u32, h: u32, g: Option<u32>) -> Result<Topology, TopologyError> {
    let kind = TopologyKind::Dragonfly;
    if p == 0 || a == 0 || h == 0 {
        return Err(bad(kind, "p, a and h must be positive"));
    }
    if a < 2 * h {
        return Err(bad(kind, format!("a = {a} < 2h = {}: global channels cannot be fully used", 2 * h)));
    }
    let max_groups = a * h + 1;
    let g = g.unwrap_or(max_groups);
    if g < 2 || g > max_groups {
        return Err(bad(kind, format!("group count {g} outside 2..={max_groups}")));
    }
    let n = (a * g) as usize;
    let id = |group: u32, idx: u32| group * a + idx;
    let mut graph = GraphBuilder::new(n);
    for grp in 0..g {
        for i in 0..a {
            for j in i + 1..a {
                graph.add_edge(id(grp, i), id(grp, j));
            }
        }
    }
    for i in 0..g {
        for j in i + 1..g {
            let ci = (j + g - i - 1) % g;
            let cj = (i + g - j - 1) % g;
            graph.add_edge(id(i, ci / h), id(j, cj / h));
        }
    }
    let labels = (0..g).flat_map(|group| (0..a).map(move |index| RouterLabel::Group { group, index })).collect();
    let groups = (0..g).flat_map(|group| std::iter::repeat(group).take(a as usize)).collect();
    TopologyParts {
        kind,
        spec: Some(TopologySpec::Dragonfly { p, h: Some(h), a: Some(a), g: Some(g) }),
        graph,
        endpoints_per_router: vec![p; n],
        concentration: p,
        labels,
        groups,
        mms: None,
    }
    .finish()
}

/// Which three-level fat tree to build from router radix `k = 2p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FatTreeShape {
    /// `p` pods of `p` edge and `p` aggregation switches, `p²` cores using half
    /// of their ports: `3p²` routers, `p³` endpoints. This is the instance used
    /// for the simulations (k = 44 gives 1,452 routers and 10,648 endpoints).
    HalfPods,
    /// Full k-ary fat tree: `2p` pods, `5p²` routers, `2p³` endpoints. This is
    /// the shape charged by the cost model.
    KAry,
}

/// Three-level fat tree. Router IDs: edge switches first, then aggregation,
/// then core. Endpoints attach to edge switches only.
pub fn build_fat_tree(k: u32, shape: FatTreeShape) -> Result<Topology, TopologyError> {
    let kind = TopologyKind::FatTree3;
    if k < 2 || k % 2 != 0 {
        return Err(bad(kind, format!("router radix k = {k} must be even and at least 2")));
    }
    let p = k / 2;
    let pods = match shape {
        FatTreeShape::HalfPods => p,
        FatTreeShape::KAry => 2 * p,
    };
    let edges_total = pods * p;
    let cores = p * p;
    let n = (2 * edges_total + cores) as usize;
    let edge_id = |pod: u32, i: u32| pod * p + i;
    let agg_id = |pod: u32, i: u32| edges_total + pod * p + i;
    let core_id = |i: u32| 2 * edges_total + i;
    let mut graph = GraphBuilder::new(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for level in 0..2u8 {
        for pod in 0..pods {
            for index in 0..p {
                labels.push(RouterLabel::FatTree { level, pod, index });
                groups.push(pod);
            }
        }
    }
    for index in 0..cores {
        labels.push(RouterLabel::FatTree { level: 2, pod: 0, index });
        groups.push(pods);
    }
    for pod in 0..pods {
        for e in 0..p {
            for a in 0..p {
                graph.add_edge(edge_id(pod, e), agg_id(pod, a));
            }
        }
        for a in 0..p {
            for c in 0..p {
                graph.add_edge(agg_id(pod, a), core_id(a * p + c));
            }
        }
    }
    let mut endpoints = vec![0; n];
    endpoints[..edges_total as usize].fill(p);
    TopologyParts {
        kind,
        spec: Some(TopologySpec::FatTree3 { k, shape }),
        graph,
        endpoints_per_router: endpoints,
        concentration: p,
        labels,
        groups,
        mms: None,
    }
    .finish()
}

/// Three-level flattened butterfly: routers `(i, j, l) ∈ [p]³`, fully
/// connected along each coordinate. Group (rack) `(i, j)` holds `p` routers.
pub fn build_flattened_butterfly(p: u32) -> Result<Topology, TopologyError> {
    let kind = TopologyKind::FlattenedButterfly3;
    if p < 2 {
        return Err(bad(kind, "p must be at least 2"));
    }
    let id = |i: u32, j: u32, l: u32| (i * p + j) * p + l;
    let n = (p * p * p) as usize;
    let mut graph = GraphBuilder::new(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for i in 0..p {
        for j in 0..p {
            for l in 0..p {
                labels.push(RouterLabel::Coords { coords: vec![i, j, l] });
                groups.push(i * p + j);
                for o in l + 1..p {
                    graph.add_edge(id(i, j, l), id(i, j, o));
                }
                for o in j + 1..p {
                    graph.add_edge(id(i, j, l), id(i, o, l));
                }
                for o in i + 1..p {
                    graph.add_edge(id(i, j, l), id(o, j, l));
                }
            }
        }
    }
    TopologyParts {
        kind,
        spec: Some(TopologySpec::FlattenedButterfly3 { p }),
        graph,
        endpoints_per_router: vec![p; n],
        concentration: p,
        labels,
        groups,
        mms: None,
    }
    .finish()
}

/// Torus with wraparound in every dimension; 3 or 5 dimensions, each of size
/// at least 3, one endpoint per router. Groups are lines along dimension 0.
pub fn build_torus(dims: &[u32]) -> Result<Topology, TopologyError> {
    let kind = match dims.len() {
        3 => TopologyKind::Torus3,
        5 => TopologyKind::Torus5,
        _ => return Err(bad(TopologyKind::Torus3, format!("{} dimensions; expected 3 or 5", dims.len()))),
    };
    if dims.iter().any(|&d| d < 3) {
        return Err(bad(kind, "every dimension needs at least 3 routers"));
    }
    let n: usize = dims.iter().map(|&d| d as usize).product();
    let mut graph = GraphBuilder::new(n);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for r in 0..n {
        let mut coords = Vec::with_capacity(dims.len());
        let mut rest = r;
        for &d in dims {
            coords.push((rest % d as usize) as u32);
            rest /= d as usize;
        }
        let mut stride = 1;
        for (dim, &d) in dims.iter().enumerate() {
            let c = coords[dim] as usize;
            let next = r - c * stride + ((c + 1) % d as usize) * stride;
            graph.add_edge(r as RouterId, next as RouterId);
            stride *= d as usize;
        }
        groups.push((r / dims[0] as usize) as u32);
        labels.push(RouterLabel::Coords { coords });
    }
    TopologyParts {
        kind,
        spec: Some(TopologySpec::Torus { dims: dims.to_vec() }),
        graph,
        endpoints_per_router: vec![1; n],
        concentration: 1,
        labels,
        groups,
        mms: None,
    }
    .finish()
}

/// `n`-dimensional hypercube, one endpoint per router.
pub fn build_hypercube(n: u32) -> Result<Topology, TopologyError> {
    let kind = TopologyKind::Hypercube;
    if n == 0 || n > 24 {
        return Err(bad(kind, "dimension must be in 1..=24"));
    }
    let count = 1usize << n;
    let mut graph = GraphBuilder::new(count);
    for r in 0..count as u32 {
        for b in 0..n {
            let v = r ^ (1 << b);
            if v > r {
                graph.add_edge(r, v);
            }
        }
    }
    let rack_bits = n.saturating_sub(3);
    TopologyParts {
        kind,
        spec: Some(TopologySpec::Hypercube { n }),
        graph,
        endpoints_per_router: vec![1; count],
        concentration: 1,
        labels: (0..count as u32).map(|id| RouterLabel::Plain { id }).collect(),
        groups: (0..count as u32).map(|r| r >> rack_bits).collect(),
        mms: None,
    }
    .finish()
}

/// Ring of `routers` plus `shortcuts` random links per router, paired as a
/// random matching of link stubs. Self loops and duplicate links are redrawn.
pub fn build_random_dln(routers: u32, shortcuts: u32, seed: u64) -> Result<Topology, TopologyError> {
    let kind = TopologyKind::RandomDln;
    if routers < shortcuts + 4 {
        return Err(bad(kind, "need at least shortcuts + 4 routers"));
    }
    if (routers as u64 * shortcuts as u64) % 2 != 0 {
        return Err(bad(kind, "routers × shortcuts must be even"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = routers as usize;
    let ring = |g: &mut GraphBuilder| {
        for r in 0..routers {
            g.add_edge(r, (r + 1) % routers);
        }
    };
    'attempt: for _ in 0..200 {
        let mut graph = GraphBuilder::new(n);
        ring(&mut graph);
        let mut stubs: Vec<RouterId> =
            (0..routers).flat_map(|r| std::iter::repeat(r).take(shortcuts as usize)).collect();
        stubs.shuffle(&mut rng);
        while let Some(u) = stubs.pop() {
            let mut placed = false;
            for _ in 0..64 {
                if stubs.is_empty() {
                    break;
                }
                let i = rng.gen_range(0..stubs.len());
                let v = stubs[i];
                if v != u && !graph.has_edge(u, v) {
                    stubs.swap_remove(i);
                    graph.add_edge(u, v);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'attempt;
            }
        }
        let degree = 2 + shortcuts;
        debug_assert!((0..routers).all(|r| graph.degree(r) == degree as usize));
        let mut p = 1;
        while (p + 1) * (p + 1) <= degree + p + 1 {
            p += 1;
        }
        let group_size = (routers as f64).sqrt().ceil().max(1.0) as u32;
        return TopologyParts {
            kind,
            spec: Some(TopologySpec::RandomDln { routers, shortcuts, seed }),
            graph,
            endpoints_per_router: vec![p; n],
            concentration: p,
            labels: (0..routers).map(|id| RouterLabel::Plain { id }).collect(),
            groups: (0..routers).map(|r| r / group_size).collect(),
            mms: None,
        }
        .finish();
    }
    Err(bad(kind, "could not place random shortcuts without duplicates"))
}
