//! Minimal, Valiant and UGAL path selection plus per-hop VC assignment.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{RouterId, RouterLabel, Topology};

/// Longest route the default VC assignment accepts.
pub const MAX_HOPS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("no path from router {from} to router {to}")]
    NoPath { from: RouterId, to: RouterId },
    #[error("route of {hops} hops exceeds the {max} available virtual channels")]
    RouteTooLong { hops: usize, max: usize },
    #[error("need at least 3 routers for an intermediate hop")]
    TooFewRouters,
    #[error("{0} routing needs a fat tree")]
    NotAFatTree(Algorithm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Min,
    #[serde(rename = "val")]
    Valiant,
    #[serde(rename = "ugal_l")]
    UgalLocal,
    #[serde(rename = "ugal_g")]
    UgalGlobal,
    /// Adaptive up, deterministic down to the nearest common ancestor (fat trees).
    #[serde(rename = "anca")]
    NearestCommonAncestor,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Min => "MIN",
            Algorithm::Valiant => "VAL",
            Algorithm::UgalLocal => "UGAL-L",
            Algorithm::UgalGlobal => "UGAL-G",
            Algorithm::NearestCommonAncestor => "ANCA",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "min" => Ok(Algorithm::Min),
            "val" | "valiant" => Ok(Algorithm::Valiant),
            "ugal_l" => Ok(Algorithm::UgalLocal),
            "ugal_g" => Ok(Algorithm::UgalGlobal),
            "anca" => Ok(Algorithm::NearestCommonAncestor),
            other => Err(format!("unknown routing algorithm {other:?}")),
        }
    }
}

/// A router-level path. `hops` lists every router from source to destination
/// inclusive; `vcs[i]` is the virtual channel used on link `hops[i] → hops[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub hops: Vec<RouterId>,
    pub vcs: Vec<u8>,
    pub algorithm: Algorithm,
}

impl Route {
    fn new(hops: Vec<RouterId>, algorithm: Algorithm) -> Self {
        Route { hops, vcs: Vec::new(), algorithm }
    }

    /// Number of router-to-router links traversed.
    pub fn len(&self) -> usize {
        self.hops.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn links(&self) -> impl Iterator<Item = (RouterId, RouterId)> + '_ {
        self.hops.windows(2).map(|w| (w[0], w[1]))
    }
}

/// VC `i` on hop `i`, for routes of at most [`MAX_HOPS`] hops.
pub fn assign_vcs(route: Route) -> Result<Route, RoutingError> {
    assign_vcs_limit(route, MAX_HOPS)
}

/// VC `i` on hop `i` with an explicit VC budget.
pub fn assign_vcs_limit(mut route: Route, max_vcs: usize) -> Result<Route, RoutingError> {
    if route.len() > max_vcs {
        return Err(RoutingError::RouteTooLong { hops: route.len(), max: max_vcs });
    }
    route.vcs = (0..route.len() as u8).collect();
    Ok(route)
}

/// Deterministic minimal path on any connected graph: at each router take the
/// lowest-ID neighbour one hop closer to the destination. On a diameter-2 graph
/// this is the direct link or the lowest-ID common neighbour.
pub fn min_route(topo: &Topology, src: RouterId, dst: RouterId) -> Result<Route, RoutingError> {
    if src == dst {
        return Ok(Route::new(vec![src], Algorithm::Min));
    }
    if topo.has_edge(src, dst) {
        return Ok(Route::new(vec![src, dst], Algorithm::Min));
    }
    let dist = topo.distances_from(dst);
    walk_down(topo, src, dst, |v| dist[v as usize])
}

fn walk_down(
    topo: &Topology,
    src: RouterId,
    dst: RouterId,
    dist_to_dst: impl Fn(RouterId) -> u32,
) -> Result<Route, RoutingError> {
    if dist_to_dst(src) == u32::MAX {
        return Err(RoutingError::NoPath { from: src, to: dst });
    }
    let mut hops = vec![src];
    let mut at = src;
    while at != dst {
        let want = dist_to_dst(at) - 1;
        at = *topo.neighbors(at).iter().find(|&&v| dist_to_dst(v) == want).expect("BFS distances are consistent");
        hops.push(at);
    }
    Ok(Route::new(hops, Algorithm::Min))
}

/// All-pairs hop distances with the same deterministic minimal paths as
/// [`min_route`], for repeated queries.
pub struct MinRoutes<'a> {
    topo: &'a Topology,
    n: usize,
    dist: Vec<u8>,
}

impl<'a> MinRoutes<'a> {
    pub fn new(topo: &'a Topology) -> Self {
        use rayon::prelude::*;
        let n = topo.num_routers();
        let rows: Vec<Vec<u8>> = (0..n as RouterId)
            .into_par_iter()
            .map(|d| topo.distances_from(d).into_iter().map(|x| x.min(u8::MAX as u32) as u8).collect())
            .collect();
        MinRoutes { topo, n, dist: rows.concat() }
    }

    pub fn topology(&self) -> &'a Topology {
        self.topo
    }

    /// Hop distance; `u8::MAX` when unreachable.
    pub fn distance(&self, from: RouterId, to: RouterId) -> u8 {
        self.dist[to as usize * self.n + from as usize]
    }

    pub fn route(&self, src: RouterId, dst: RouterId) -> Result<Route, RoutingError> {
        let row = &self.dist[dst as usize * self.n..(dst as usize + 1) * self.n];
        walk_down(self.topo, src, dst, |v| if row[v as usize] == u8::MAX { u32::MAX } else { row[v as usize] as u32 })
    }

    /// Valiant route through a uniformly random intermediate router other than
    /// the endpoints. With `cap_three` the intermediate is redrawn until the
    /// whole route has at most three hops.
    pub fn valiant<R: Rng + ?Sized>(
        &self,
        src: RouterId,
        dst: RouterId,
        cap_three: bool,
        rng: &mut R,
    ) -> Result<Route, RoutingError> {
        let n = self.n as RouterId;
        let excluded = if src == dst { 1 } else { 2 };
        if self.n < excluded + 1 {
            return Err(RoutingError::TooFewRouters);
        }
        loop {
            let mid = pick_intermediate(n, src, dst, rng);
            if cap_three && self.distance(src, mid) as u32 + self.distance(mid, dst) as u32 > 3 {
                continue;
            }
            return self.through(src, mid, dst);
        }
    }

    /// Minimal to `mid`, then minimal to `dst`.
    pub fn through(&self, src: RouterId, mid: RouterId, dst: RouterId) -> Result<Route, RoutingError> {
        let mut first = self.route(src, mid)?;
        let second = self.route(mid, dst)?;
        first.hops.extend_from_slice(&second.hops[1..]);
        first.algorithm = Algorithm::Valiant;
        Ok(first)
    }
}

fn pick_intermediate<R: Rng + ?Sized>(n: RouterId, src: RouterId, dst: RouterId, rng: &mut R) -> RouterId {
    // Uniform over the routers other than src and dst.
    let (lo, hi) = (src.min(dst), src.max(dst));
    let skip = if src == dst { 1 } else { 2 };
    let mut r = rng.gen_range(0..n - skip);
    if r >= lo {
        r += 1;
    }
    if src != dst && r >= hi {
        r += 1;
    }
    r
}

/// Valiant routing through a uniformly random intermediate router.
pub fn valiant_route<R: Rng + ?Sized>(
    topo: &Topology,
    src: RouterId,
    dst: RouterId,
    rng: &mut R,
) -> Result<Route, RoutingError> {
    if topo.num_routers() < 3 {
        return Err(RoutingError::TooFewRouters);
    }
    let mid = pick_intermediate(topo.num_routers() as RouterId, src, dst, rng);
    let mut first = min_route(topo, src, mid)?;
    let second = min_route(topo, mid, dst)?;
    first.hops.extend_from_slice(&second.hops[1..]);
    first.algorithm = Algorithm::Valiant;
    Ok(first)
}

/// Which queues an adaptive decision may look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueScope {
    /// Only the output queues of this router.
    Local(RouterId),
    Global,
}

/// Output-queue occupancy (flits, summed over VCs) per router port.
pub trait QueueView {
    fn port_occupancy(&self, router: RouterId, port: usize) -> u32;
}

/// A frozen copy of per-port occupancies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSnapshot {
    pub scope: QueueScope,
    offsets: Vec<usize>,
    /// Per `(router, port, vc)` flit counts, router-major.
    occupancy: Vec<u32>,
    vcs: usize,
}

impl QueueSnapshot {
    pub fn empty(topo: &Topology, vcs: usize, scope: QueueScope) -> Self {
        let mut offsets = Vec::with_capacity(topo.num_routers() + 1);
        offsets.push(0);
        for r in 0..topo.num_routers() as RouterId {
            offsets.push(offsets.last().unwrap() + topo.degree(r));
        }
        let total = *offsets.last().unwrap() * vcs.max(1);
        QueueSnapshot { scope, offsets, occupancy: vec![0; total], vcs: vcs.max(1) }
    }

    pub fn set(&mut self, router: RouterId, port: usize, vc: usize, flits: u32) {
        let i = (self.offsets[router as usize] + port) * self.vcs + vc;
        self.occupancy[i] = flits;
    }

    pub fn get(&self, router: RouterId, port: usize, vc: usize) -> u32 {
        self.occupancy[(self.offsets[router as usize] + port) * self.vcs + vc]
    }
}

impl QueueView for QueueSnapshot {
    fn port_occupancy(&self, router: RouterId, port: usize) -> u32 {
        if let QueueScope::Local(r) = self.scope {
            assert_eq!(r, router, "local view of router {r} queried for router {router}");
        }
        (0..self.vcs).map(|vc| self.get(router, port, vc)).sum()
    }
}

fn first_port(topo: &Topology, route: &Route) -> Option<usize> {
    route.links().next().map(|(u, v)| topo.port_to(u, v).expect("route follows links"))
}

/// Sum of output-queue occupancy along a route.
pub fn global_score(topo: &Topology, route: &Route, view: &dyn QueueView) -> u64 {
    route
        .links()
        .map(|(u, v)| view.port_occupancy(u, topo.port_to(u, v).expect("route follows links")) as u64)
        .sum()
}

/// Hop count times the occupancy of the first output port.
pub fn local_score(topo: &Topology, route: &Route, view: &dyn QueueView) -> u64 {
    first_port(topo, route).map_or(0, |p| route.len() as u64 * view.port_occupancy(route.hops[0], p) as u64)
}

/// UGAL: score the minimal route and `candidates` Valiant routes, return the
/// cheapest. `global` selects sum-of-queues scoring, otherwise hops × local
/// first-hop queue. Ties prefer the minimal route, then fewer hops, then
/// generation order.
pub fn ugal_select<R: Rng + ?Sized>(
    routes: &MinRoutes<'_>,
    src: RouterId,
    dst: RouterId,
    view: &dyn QueueView,
    global: bool,
    candidates: usize,
    rng: &mut R,
) -> Result<Route, RoutingError> {
    let topo = routes.topology();
    let min = routes.route(src, dst)?;
    let algorithm = if global { Algorithm::UgalGlobal } else { Algorithm::UgalLocal };
    if src == dst || topo.num_routers() < 3 {
        return Ok(Route { algorithm, ..min });
    }
    let score = |r: &Route| if global { global_score(topo, r, view) } else { local_score(topo, r, view) };
    let mut best = (score(&min), 0u8, min.len(), min);
    for _ in 0..candidates {
        let val = routes.valiant(src, dst, false, rng)?;
        let key = (score(&val), 1u8, val.len());
        if key < (best.0, best.1, best.2) {
            best = (key.0, key.1, key.2, val);
        }
    }
    Ok(Route { algorithm, ..best.3 })
}

/// Up/down route in a three-level fat tree. Upward ports are chosen by least
/// occupancy (lowest port on ties); downward ports are fixed by the destination.
pub fn fat_tree_route(topo: &Topology, src: RouterId, dst: RouterId, view: &dyn QueueView) -> Result<Route, RoutingError> {
    let level = |r: RouterId| match topo.label(r) {
        RouterLabel::FatTree { level, pod, .. } => Ok((*level, *pod)),
        _ => Err(RoutingError::NotAFatTree(Algorithm::NearestCommonAncestor)),
    };
    let (ls, ps) = level(src)?;
    let (ld, pd) = level(dst)?;
    if ls != 0 || ld != 0 {
        return min_route(topo, src, dst).map(|r| Route { algorithm: Algorithm::NearestCommonAncestor, ..r });
    }
    let mut hops = vec![src];
    if src != dst {
        let least_up = |r: RouterId, want: u8| -> RouterId {
            topo.neighbors(r)
                .iter()
                .enumerate()
                .filter(|(_, &v)| level(v).map(|l| l.0) == Ok(want))
                .min_by_key(|&(port, _)| (view.port_occupancy(r, port), port))
                .map(|(_, &v)| v)
                .expect("fat tree routers have upward links")
        };
        let agg = least_up(src, 1);
        hops.push(agg);
        if ps != pd {
            let core = least_up(agg, 2);
            hops.push(core);
            let down = *topo
                .neighbors(core)
                .iter()
                .find(|&&v| level(v) == Ok((1, pd)))
                .expect("every core reaches every pod");
            hops.push(down);
        }
        hops.push(dst);
    }
    Ok(Route::new(hops, Algorithm::NearestCommonAncestor))
}

/// Channel dependency graph over `(directed link, VC)` resources.
#[derive(Debug, Default)]
pub struct DependencyGraph {
    index: std::collections::HashMap<(RouterId, RouterId, u8), usize>,
    edges: Vec<std::collections::BTreeSet<usize>>,
}

impl DependencyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn node(&mut self, key: (RouterId, RouterId, u8)) -> usize {
        let next = self.index.len();
        let id = *self.index.entry(key).or_insert(next);
        if id == self.edges.len() {
            self.edges.push(Default::default());
        }
        id
    }

    /// Record that each channel of the route waits on the next one.
    pub fn add_route(&mut self, route: &Route) {
        let chans: Vec<_> = route.links().zip(&route.vcs).map(|((u, v), &vc)| self.node((u, v, vc))).collect();
        for w in chans.windows(2) {
            self.edges[w[0]].insert(w[1]);
        }
    }

    pub fn channels(&self) -> usize {
        self.edges.len()
    }

    /// Kahn's algorithm: true when no cyclic wait exists.
    pub fn is_acyclic(&self) -> bool {
        let n = self.edges.len();
        let mut indeg = vec![0usize; n];
        for out in &self.edges {
            for &v in out {
                indeg[v] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(u) = stack.pop() {
            seen += 1;
            for &v in &self.edges[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    stack.push(v);
                }
            }
        }
        seen == n
    }
}
