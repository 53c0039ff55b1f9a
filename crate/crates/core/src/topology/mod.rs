//! Router graphs with endpoint attachment.
//!
//! A [`Topology`] is an undirected simple graph over router IDs `0..N_r`
//! stored in CSR form with sorted neighbour lists, plus the endpoints hanging
//! off each router. Port `i` of router `r` is the link to `neighbors(r)[i]`;
//! endpoint ports follow the network ports.

mod bounds;
mod io;
mod mms;
mod reference;

pub use bounds::{
    bdf_router_count, channel_load, diam3_counts, is_balanced, moore_bound, Diam3Family,
};
pub use io::{parse_edge_list, Descriptor};
pub use mms::{build_mms, build_mms_with_concentration, mms_delta, MmsParams};
pub use reference::{
    balanced_concentration, build_dragonfly, build_fat_tree, build_flattened_butterfly,
    build_hypercube, build_random_dln, build_torus, FatTreeShape,
};

use std::collections::VecDeque;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldError;

pub type RouterId = u32;
pub type EndpointId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("invalid q = {q}: {reason}")]
    InvalidQ { q: u64, reason: String },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("MMS construction for q = {q} failed validation: {reason}")]
    ConstructionInvalid { q: u64, reason: String },
    #[error("bad parameters for {kind}: {reason}")]
    BadParams { kind: TopologyKind, reason: String },
    #[error("graph is not simple: {0}")]
    NotSimple(String),
    #[error("edge list parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    #[serde(rename = "sf")]
    SlimFly,
    #[serde(rename = "df")]
    Dragonfly,
    #[serde(rename = "ft3")]
    FatTree3,
    #[serde(rename = "fbf3")]
    FlattenedButterfly3,
    #[serde(rename = "t3d")]
    Torus3,
    #[serde(rename = "t5d")]
    Torus5,
    #[serde(rename = "hc")]
    Hypercube,
    #[serde(rename = "dln")]
    RandomDln,
    Imported,
}

impl TopologyKind {
    pub fn short_name(self) -> &'static str {
        match self {
            TopologyKind::SlimFly => "SF",
            TopologyKind::Dragonfly => "DF",
            TopologyKind::FatTree3 => "FT3",
            TopologyKind::FlattenedButterfly3 => "FBF3",
            TopologyKind::Torus3 => "T3D",
            TopologyKind::Torus5 => "T5D",
            TopologyKind::Hypercube => "HC",
            TopologyKind::RandomDln => "DLN",
            TopologyKind::Imported => "IMPORTED",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Structured coordinates of a router, per topology family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RouterLabel {
    /// `(subgraph, a, b)` with `a, b` canonical field elements.
    Mms { subgraph: u8, a: u32, b: u32 },
    Group { group: u32, index: u32 },
    FatTree { level: u8, pod: u32, index: u32 },
    Coords { coords: Vec<u32> },
    Plain { id: u32 },
}

/// Everything needed to rebuild a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopologySpec {
    #[serde(rename = "sf")]
    SlimFly { q: u64, p: Option<u32> },
    #[serde(rename = "df")]
    Dragonfly { p: u32, h: Option<u32>, a: Option<u32>, g: Option<u32> },
    #[serde(rename = "ft3")]
    FatTree3 { k: u32, shape: FatTreeShape },
    #[serde(rename = "fbf3")]
    FlattenedButterfly3 { p: u32 },
    #[serde(rename = "torus")]
    Torus { dims: Vec<u32> },
    #[serde(rename = "hc")]
    Hypercube { n: u32 },
    #[serde(rename = "dln")]
    RandomDln { routers: u32, shortcuts: u32, seed: u64 },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, TopologyError> {
        match self {
            TopologySpec::SlimFly { q, p } => match p {
                Some(p) => build_mms_with_concentration(*q, *p),
                None => build_mms(*q),
            },
            TopologySpec::Dragonfly { p, h, a, g } => {
                let h = h.unwrap_or(*p);
                let a = a.unwrap_or(2 * h);
                build_dragonfly(*p, a, h, *g)
            }
            TopologySpec::FatTree3 { k, shape } => build_fat_tree(*k, *shape),
            TopologySpec::FlattenedButterfly3 { p } => build_flattened_butterfly(*p),
            TopologySpec::Torus { dims } => build_torus(dims),
            TopologySpec::Hypercube { n } => build_hypercube(*n),
            TopologySpec::RandomDln { routers, shortcuts, seed } => {
                build_random_dln(*routers, *shortcuts, *seed)
            }
        }
    }
}

#[derive(Clone)]
pub struct Topology {
    kind: TopologyKind,
    spec: Option<TopologySpec>,
    offsets: Vec<u32>,
    targets: Vec<RouterId>,
    endpoint_offsets: Vec<u32>,
    endpoint_router: Vec<RouterId>,
    concentration: u32,
    labels: Vec<RouterLabel>,
    groups: Vec<u32>,
    mms: Option<MmsParams>,
}

impl fmt::Debug for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Topology")
            .field("kind", &self.kind)
            .field("routers", &self.num_routers())
            .field("edges", &self.num_edges())
            .field("network_radix", &self.network_radix())
            .field("concentration", &self.concentration)
            .field("endpoints", &self.num_endpoints())
            .finish()
    }
}

/// Accumulates adjacency and validates simplicity before freezing into CSR.
pub(crate) struct GraphBuilder {
    adj: Vec<Vec<RouterId>>,
}

impl GraphBuilder {
    pub fn new(n: usize) -> Self {
        GraphBuilder { adj: vec![Vec::new(); n] }
    }

    pub fn from_lists(adj: Vec<Vec<RouterId>>) -> Self {
        GraphBuilder { adj }
    }

    pub fn add_edge(&mut self, u: RouterId, v: RouterId) {
        self.adj[u as usize].push(v);
        self.adj[v as usize].push(u);
    }

    pub fn has_edge(&self, u: RouterId, v: RouterId) -> bool {
        self.adj[u as usize].contains(&v)
    }

    pub fn degree(&self, u: RouterId) -> usize {
        self.adj[u as usize].len()
    }

    pub fn into_csr(mut self) -> Result<(Vec<u32>, Vec<RouterId>), TopologyError> {
        let mut offsets = Vec::with_capacity(self.adj.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for (u, list) in self.adj.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(TopologyError::NotSimple(format!("duplicate edge {u}-{}", w[0])));
            }
            if list.binary_search(&(u as RouterId)).is_ok() {
                return Err(TopologyError::NotSimple(format!("self loop at {u}")));
            }
            targets.extend_from_slice(list);
            offsets.push(targets.len() as u32);
        }
        Ok((offsets, targets))
    }
}

pub(crate) struct TopologyParts {
    pub kind: TopologyKind,
    pub spec: Option<TopologySpec>,
    pub graph: GraphBuilder,
    /// Endpoints attached to each router.
    pub endpoints_per_router: Vec<u32>,
    pub concentration: u32,
    pub labels: Vec<RouterLabel>,
    pub groups: Vec<u32>,
    pub mms: Option<MmsParams>,
}

impl TopologyParts {
    pub fn finish(self) -> Result<Topology, TopologyError> {
        let n = self.graph.adj.len();
        assert_eq!(self.endpoints_per_router.len(), n);
        assert_eq!(self.labels.len(), n);
        assert_eq!(self.groups.len(), n);
        let (offsets, targets) = self.graph.into_csr()?;
        let mut topo = Topology {
            kind: self.kind,
            spec: self.spec,
            offsets,
            targets,
            endpoint_offsets: Vec::new(),
            endpoint_router: Vec::new(),
            concentration: self.concentration,
            labels: self.labels,
            groups: self.groups,
            mms: self.mms,
        };
        topo.attach_endpoints(&self.endpoints_per_router);
        Ok(topo)
    }
}

impl Topology {
    fn attach_endpoints(&mut self, per_router: &[u32]) {
        self.endpoint_offsets.clear();
        self.endpoint_router.clear();
        self.endpoint_offsets.push(0);
        for (r, &c) in per_router.iter().enumerate() {
            self.endpoint_router.extend(std::iter::repeat(r as RouterId).take(c as usize));
            self.endpoint_offsets.push(self.endpoint_router.len() as u32);
        }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn spec(&self) -> Option<&TopologySpec> {
        self.spec.as_ref()
    }

    pub fn num_routers(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_endpoints(&self) -> usize {
        self.endpoint_router.len()
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Nominal concentration `p` (endpoints per endpoint-bearing router).
    pub fn concentration(&self) -> u32 {
        self.concentration
    }

    /// Network radix `k'`: the maximum router-to-router degree.
    pub fn network_radix(&self) -> u32 {
        (0..self.num_routers() as RouterId).map(|r| self.degree(r) as u32).max().unwrap_or(0)
    }

    /// Router radix: the most ports any router uses, links plus endpoints.
    /// Equals `k' + p` on uniform topologies.
    pub fn router_radix(&self) -> u32 {
        (0..self.num_routers() as RouterId)
            .map(|r| self.degree(r) as u32 + self.endpoint_count(r))
            .max()
            .unwrap_or(0)
    }

    pub fn neighbors(&self, r: RouterId) -> &[RouterId] {
        let r = r as usize;
        &self.targets[self.offsets[r] as usize..self.offsets[r + 1] as usize]
    }

    pub fn degree(&self, r: RouterId) -> usize {
        let r = r as usize;
        (self.offsets[r + 1] - self.offsets[r]) as usize
    }

    pub fn has_edge(&self, u: RouterId, v: RouterId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Output port of `r` leading to neighbour `n`.
    pub fn port_to(&self, r: RouterId, n: RouterId) -> Option<usize> {
        self.neighbors(r).binary_search(&n).ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (RouterId, RouterId)> + '_ {
        (0..self.num_routers() as RouterId)
            .flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn endpoints_of(&self, r: RouterId) -> Range<EndpointId> {
        let r = r as usize;
        self.endpoint_offsets[r]..self.endpoint_offsets[r + 1]
    }

    pub fn endpoint_count(&self, r: RouterId) -> u32 {
        let range = self.endpoints_of(r);
        range.end - range.start
    }

    pub fn router_of(&self, e: EndpointId) -> RouterId {
        self.endpoint_router[e as usize]
    }

    pub fn label(&self, r: RouterId) -> &RouterLabel {
        &self.labels[r as usize]
    }

    /// Group (rack group) a router belongs to. For Slim Fly this is the
    /// subgroup pair `(0, x, ·) ∪ (1, x, ·)`.
    pub fn group_of(&self, r: RouterId) -> u32 {
        self.groups[r as usize]
    }

    pub fn groups(&self) -> &[u32] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.iter().max().map_or(0, |&g| g as usize + 1)
    }

    pub fn mms_params(&self) -> Option<&MmsParams> {
        self.mms.as_ref()
    }

    /// Replace the rack/group assignment, e.g. for imported graphs.
    pub fn with_groups(mut self, groups: Vec<u32>) -> Self {
        assert_eq!(groups.len(), self.num_routers());
        self.groups = groups;
        self
    }

    /// Replace the concentration on every endpoint-bearing router.
    /// Used for oversubscribed variants.
    pub fn with_concentration(mut self, p: u32) -> Self {
        let per_router: Vec<u32> = (0..self.num_routers() as RouterId)
            .map(|r| if self.endpoint_count(r) > 0 || self.concentration == 0 { p } else { 0 })
            .collect();
        self.concentration = p;
        self.attach_endpoints(&per_router);
        if let Some(TopologySpec::SlimFly { p: sp, .. }) = self.spec.as_mut() {
            *sp = Some(p);
        }
        self
    }

    /// Rename router `r` to `perm[r]`, carrying labels, groups and endpoints along.
    pub fn relabel(&self, perm: &[RouterId]) -> Topology {
        let n = self.num_routers();
        assert_eq!(perm.len(), n);
        let mut adj = vec![Vec::new(); n];
        let mut labels = vec![RouterLabel::Plain { id: 0 }; n];
        let mut groups = vec![0; n];
        let mut counts = vec![0; n];
        for r in 0..n {
            let nr = perm[r] as usize;
            adj[nr] = self.neighbors(r as RouterId).iter().map(|&v| perm[v as usize]).collect();
            labels[nr] = self.labels[r].clone();
            groups[nr] = self.groups[r];
            counts[nr] = self.endpoint_count(r as RouterId);
        }
        TopologyParts {
            kind: self.kind,
            spec: None,
            graph: GraphBuilder::from_lists(adj),
            endpoints_per_router: counts,
            concentration: self.concentration,
            labels,
            groups,
            mms: self.mms.clone(),
        }
        .finish()
        .expect("relabelling preserves simplicity")
    }

    /// Graph with some undirected edges removed (`keep[i]` refers to the i-th
    /// edge of [`Topology::edges`]). Endpoints and labels are kept.
    pub fn with_edges_kept(&self, keep: &[bool]) -> Topology {
        let n = self.num_routers();
        let mut g = GraphBuilder::new(n);
        for ((u, v), &k) in self.edges().zip(keep) {
            if k {
                g.add_edge(u, v);
            }
        }
        let counts = (0..n as RouterId).map(|r| self.endpoint_count(r)).collect();
        TopologyParts {
            kind: self.kind,
            spec: None,
            graph: g,
            endpoints_per_router: counts,
            concentration: self.concentration,
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            mms: self.mms.clone(),
        }
        .finish()
        .expect("subgraph of a simple graph is simple")
    }

    /// BFS hop counts from `src`; `u32::MAX` marks unreachable routers.
    pub fn distances_from(&self, src: RouterId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.num_routers()];
        let mut queue = VecDeque::new();
        dist[src as usize] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize] + 1;
            for &v in self.neighbors(u) {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = d;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.num_routers() == 0 || self.distances_from(0).iter().all(|&d| d != u32::MAX)
    }
}

/// Build a topology from a plain edge list (external graphs).
pub fn from_edges(
    routers: usize,
    edges: &[(RouterId, RouterId)],
    concentration: u32,
) -> Result<Topology, TopologyError> {
    let mut g = GraphBuilder::new(routers);
    for &(u, v) in edges {
        if u as usize >= routers || v as usize >= routers {
            return Err(TopologyError::NotSimple(format!("edge {u}-{v} out of range")));
        }
        g.add_edge(u, v);
    }
    TopologyParts {
        kind: TopologyKind::Imported,
        spec: None,
        graph: g,
        endpoints_per_router: vec![concentration; routers],
        concentration,
        labels: (0..routers as u32).map(|id| RouterLabel::Plain { id }).collect(),
        groups: vec![0; routers],
        mms: None,
    }
    .finish()
}
