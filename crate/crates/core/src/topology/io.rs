//! Plain-text edge lists and JSON descriptors.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{from_edges, RouterId, Topology, TopologyError, TopologyKind, TopologySpec};

/// Self-describing summary of a topology, including its full edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: TopologyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<TopologySpec>,
    pub routers: usize,
    pub network_radix: u32,
    pub router_radix: u32,
    pub concentration: u32,
    pub endpoints: usize,
    pub groups: Vec<u32>,
    pub edges: Vec<(RouterId, RouterId)>,
}

impl Descriptor {
    pub fn of(topo: &Topology) -> Self {
        Descriptor {
            kind: topo.kind(),
            spec: topo.spec().cloned(),
            routers: topo.num_routers(),
            network_radix: topo.network_radix(),
            router_radix: topo.router_radix(),
            concentration: topo.concentration(),
            endpoints: topo.num_endpoints(),
            groups: topo.groups().to_vec(),
            edges: topo.edges().collect(),
        }
    }
}

impl Topology {
    /// One `u v` line per undirected edge, `u < v`, sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.num_edges() * 10);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn descriptor(&self) -> Descriptor {
        Descriptor::of(self)
    }
}

/// Parse an edge list (`u v` per line, `#` comments and blank lines ignored).
/// The router count is one more than the largest ID unless `routers` is given.
pub fn parse_edge_list(
    text: &str,
    routers: Option<usize>,
    concentration: u32,
) -> Result<Topology, TopologyError> {
    let mut edges = Vec::new();
    let mut max_id = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| TopologyError::Parse { line: i + 1, reason };
        let mut fields = line.split_whitespace();
        let mut next = || -> Result<RouterId, TopologyError> {
            let f = fields.next().ok_or_else(|| parse_err("expected two router IDs".into()))?;
            f.parse().map_err(|e| parse_err(format!("{f:?}: {e}")))
        };
        let (u, v) = (next()?, next()?);
        if fields.next().is_some() {
            return Err(parse_err("trailing fields".into()));
        }
        max_id = max_id.max(Some(u.max(v)));
        edges.push((u, v));
    }
    let n = routers.unwrap_or_else(|| max_id.map_or(0, |m| m as usize + 1));
    from_edges(n, &edges, concentration)
}
