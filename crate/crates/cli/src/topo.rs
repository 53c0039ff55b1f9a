use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use slimfly::split_seed;
use slimfly::topology::{parse_edge_list, FatTreeShape, Topology, TopologySpec};

/// Seed stream used for randomly generated topologies.
pub const TOPOLOGY_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Sf,
    Df,
    Ft3,
    Fbf3,
    T3d,
    T5d,
    Hc,
    Dln,
    /// Read an edge list from `--edges`.
    Edges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeArg {
    HalfPods,
    KAry,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TopoArgs {
    #[arg(long)]
    pub kind: Option<KindArg>,
    /// Slim Fly field order.
    #[arg(long)]
    pub q: Option<u64>,
    /// Concentration (Slim Fly, Dragonfly) or butterfly arity.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long)]
    pub h: Option<u32>,
    #[arg(long)]
    pub a: Option<u32>,
    #[arg(long)]
    pub g: Option<u32>,
    /// Fat tree router radix.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    /// Torus dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<u32>,
    /// Hypercube dimension.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub routers: Option<u32>,
    #[arg(long)]
    pub shortcuts: Option<u32>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Endpoints per router, overriding the topology's balanced value.
    #[arg(long)]
    pub concentration: Option<u32>,
}

fn need<T: Copy>(v: Option<T>, flag: &str, kind: KindArg) -> Result<T> {
    match v {
        Some(v) => Ok(v),
        None => bail!(MissingParameter(format!("--{flag} is required for --kind {kind:?}").to_lowercase())),
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct MissingParameter(pub String);

impl TopoArgs {
    pub fn spec(&self, seed: u64) -> Result<Option<TopologySpec>> {
        let Some(kind) = self.kind else {
            bail!(MissingParameter("--kind is required".into()));
        };
        let spec = match kind {
            KindArg::Sf => TopologySpec::SlimFly { q: need(self.q, "q", kind)?, p: self.concentration.or(self.p) },
            KindArg::Df => TopologySpec::Dragonfly { p: need(self.p, "p", kind)?, h: self.h, a: self.a, g: self.g },
            KindArg::Ft3 => TopologySpec::FatTree3 {
                k: need(self.k, "k", kind)?,
                shape: match self.shape.unwrap_or(ShapeArg::HalfPods) {
                    ShapeArg::HalfPods => FatTreeShape::HalfPods,
                    ShapeArg::KAry => FatTreeShape::KAry,
                },
            },
            KindArg::Fbf3 => TopologySpec::FlattenedButterfly3 { p: need(self.p, "p", kind)? },
            KindArg::T3d | KindArg::T5d => {
                let want = if kind == KindArg::T3d { 3 } else { 5 };
                if self.dims.len() != want {
                    bail!(MissingParameter(format!("--dims needs {want} comma-separated sizes")));
                }
                TopologySpec::Torus { dims: self.dims.clone() }
            }
            KindArg::Hc => TopologySpec::Hypercube { n: need(self.n, "n", kind)? },
            KindArg::Dln => TopologySpec::RandomDln {
                routers: need(self.routers, "routers", kind)?,
                shortcuts: need(self.shortcuts, "shortcuts", kind)?,
                seed: split_seed(seed, TOPOLOGY_STREAM),
            },
            KindArg::Edges => return Ok(None),
        };
        Ok(Some(spec))
    }

    pub fn build(&self, seed: u64) -> Result<Topology> {
        let topo = match self.spec(seed)? {
            Some(spec) => spec.build()?,
            None => {
                let Some(path) = &self.edges else {
                    bail!(MissingParameter("--edges is required for --kind edges".into()));
                };
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                return Ok(parse_edge_list(&text, self.routers.map(|r| r as usize), self.concentration.unwrap_or(1))?);
            }
        };
        Ok(match (self.kind, self.concentration) {
            (Some(KindArg::Sf), _) | (_, None) => topo,
            (_, Some(p)) => topo.with_concentration(p),
        })
    }
}
