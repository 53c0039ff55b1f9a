//! Rack layout, cable inventory, and the cost and power models.
//!
//! Routers sit on top of 1×1×2 m racks placed on a near-square grid. Links
//! inside a rack are 1 m electric cables; links between racks are optic, as
//! long as the Manhattan distance between the racks plus 2 m of overhead.
//! Endpoint links are 1 m electric everywhere. Tori are folded and use
//! electric cables only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::is_prime;
use crate::topology::{EndpointId, RouterId, RouterLabel, Topology, TopologyKind};

pub const INTRA_RACK_CABLE_M: f64 = 1.0;
pub const GLOBAL_CABLE_OVERHEAD_M: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("no rack grouping for {kind} with q = {q}: {reason}")]
    UnsupportedGrouping { kind: TopologyKind, q: u64, reason: String },
    #[error("router cost fit is {cost:.1} at radix {k}; radix too small")]
    RadixTooSmall { k: u32, cost: f64 },
    #[error("unknown cost preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Electric,
    Optic,
}

/// `slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Price and power coefficients. Cable fits are in $ per Gb/s as a function
/// of length in metres; the router fit is in $ as a function of radix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub name: String,
    pub link_gbps: f64,
    pub electric: LinearFit,
    pub optic: LinearFit,
    pub router: LinearFit,
    pub lanes_per_port: u32,
    pub watts_per_lane: f64,
}

pub const PRESETS: &[&str] = &["fdr10"];

impl CostParams {
    /// Mellanox InfiniBand FDR10 40 Gb/s QSFP cables and FDR10 routers.
    pub fn fdr10() -> Self {
        CostParams {
            name: "fdr10".into(),
            link_gbps: 40.0,
            electric: LinearFit { slope: 0.4079, intercept: 0.5771 },
            optic: LinearFit { slope: 0.0919, intercept: 2.7452 },
            router: LinearFit { slope: 350.4, intercept: -892.3 },
            lanes_per_port: 4,
            watts_per_lane: 0.7,
        }
    }

    pub fn preset(name: &str) -> Result<Self, CostError> {
        match name {
            "fdr10" => Ok(Self::fdr10()),
            other => Err(CostError::UnknownPreset(other.to_string())),
        }
    }

    pub fn cable_cost(&self, length_m: f64, medium: Medium) -> f64 {
        let fit = match medium {
            Medium::Electric => self.electric,
            Medium::Optic => self.optic,
        };
        fit.eval(length_m) * self.link_gbps
    }

    pub fn router_cost(&self, k: u32) -> Result<f64, CostError> {
        let cost = self.router.eval(k as f64);
        if cost <= 0.0 {
            return Err(CostError::RadixTooSmall { k, cost });
        }
        Ok(cost)
    }

    pub fn port_watts(&self) -> f64 {
        self.lanes_per_port as f64 * self.watts_per_lane
    }
}

/// Cable price under the FDR10 fits.
pub fn cable_cost(length_m: f64, medium: Medium, bandwidth_gbps: f64) -> f64 {
    let p = CostParams::fdr10();
    let fit = if medium == Medium::Electric { p.electric } else { p.optic };
    fit.eval(length_m) * bandwidth_gbps
}

/// Router price under the FDR10 fit.
pub fn router_cost(k: u32) -> Result<f64, CostError> {
    CostParams::fdr10().router_cost(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rack {
    pub id: u32,
    pub row: u32,
    pub col: u32,
    pub routers: Vec<RouterId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CableEnd {
    Router(RouterId),
    Endpoint(EndpointId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cable {
    pub from: CableEnd,
    pub to: RouterId,
    pub length_m: f64,
    pub medium: Medium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub racks: Vec<Rack>,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub rack_of: Vec<u32>,
    pub cables: Vec<Cable>,
}

impl LayoutPlan {
    pub fn count(&self, medium: Medium) -> usize {
        self.cables.iter().filter(|c| c.medium == medium).count()
    }

    /// Router-to-router cables between two different racks.
    pub fn inter_rack_cables(&self) -> usize {
        self.cables
            .iter()
            .filter(|c| matches!(c.from, CableEnd::Router(u) if self.rack_of[u as usize] != self.rack_of[c.to as usize]))
            .count()
    }

    pub fn rack_distance(&self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (&self.racks[a as usize], &self.racks[b as usize]);
        ra.row.abs_diff(rb.row) + ra.col.abs_diff(rb.col)
    }
}

/// `(x, y)` with `x = ⌊√racks⌋` rows of `y = ⌊racks/x⌋` racks; any remainder
/// forms a partial extra row.
pub fn grid_shape(racks: u32) -> (u32, u32) {
    if racks == 0 {
        return (0, 0);
    }
    let x = (racks as f64).sqrt().floor() as u32;
    (x, racks / x)
}

/// Position of coordinate `c` on a folded ring of `n` routers, so ring
/// neighbours are at most two positions apart.
fn folded(c: u32, n: u32) -> u32 {
    let half = n.div_ceil(2);
    if c < half {
        2 * c
    } else {
        2 * (n - 1 - c) + 1
    }
}

/// Rack assignment and cable inventory.
///
/// Racks follow the topology's groups: a Slim Fly rack merges the subgroups
/// `(0, x, ·)` and `(1, x, ·)`; Dragonfly and random networks use one group
/// per rack; flattened butterflies use `p` routers per rack; hypercubes split
/// into 8 racks; a fat tree uses one rack per pod plus a row for the core;
/// tori hold one dimension-0 ring per rack. Racks are placed row-major by
/// group ID, except tori, whose racks are placed on folded coordinates.
pub fn build_layout(topo: &Topology) -> Result<LayoutPlan, CostError> {
    if topo.kind() == TopologyKind::SlimFly {
        let q = topo.mms_params().map_or(0, |m| m.q as u64);
        if !is_prime(q) {
            return Err(CostError::UnsupportedGrouping {
                kind: topo.kind(),
                q,
                reason: "subgroup pairing into racks is only defined for prime q".into(),
            });
        }
    }
    let torus = matches!(topo.kind(), TopologyKind::Torus3 | TopologyKind::Torus5);
    let n_racks = topo.num_groups() as u32;
    let mut racks: Vec<Rack> = (0..n_racks).map(|id| Rack { id, row: 0, col: 0, routers: Vec::new() }).collect();
    for r in 0..topo.num_routers() as RouterId {
        racks[topo.group_of(r) as usize].routers.push(r);
    }

    let (mut rows, mut cols) = grid_shape(n_racks);
    if torus {
        let dims = match topo.label(0) {
            RouterLabel::Coords { coords } => coords.len(),
            _ => 0,
        };
        let sizes: Vec<u32> = (0..dims)
            .map(|d| {
                (0..topo.num_routers() as RouterId)
                    .map(|r| match topo.label(r) {
                        RouterLabel::Coords { coords } => coords[d] + 1,
                        _ => 1,
                    })
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        rows = sizes.get(1).copied().unwrap_or(1);
        cols = sizes.iter().skip(2).product::<u32>().max(1);
        for rack in &mut racks {
            let RouterLabel::Coords { coords } = topo.label(rack.routers[0]) else { continue };
            rack.row = folded(coords[1], sizes[1]);
            let mut col = 0;
            for d in (2..dims).rev() {
                col = col * sizes[d] + folded(coords[d], sizes[d]);
            }
            rack.col = col;
        }
    } else {
        for rack in &mut racks {
            rack.row = rack.id / cols.max(1);
            rack.col = rack.id % cols.max(1);
        }
        if rows * cols < n_racks {
            rows += 1;
        }
    }

    let rack_of: Vec<u32> = topo.groups().to_vec();
    let fat_tree = topo.kind() == TopologyKind::FatTree3;
    let mut plan = LayoutPlan { racks, grid_rows: rows, grid_cols: cols, rack_of, cables: Vec::new() };
    for (u, v) in topo.edges() {
        let (a, b) = (plan.rack_of[u as usize], plan.rack_of[v as usize]);
        let (length_m, medium) = if fat_tree {
            // Central-row fat tree: fibre between layers, 1 m on average.
            (INTRA_RACK_CABLE_M, Medium::Optic)
        } else if a == b {
            (INTRA_RACK_CABLE_M, Medium::Electric)
        } else {
            let length = plan.rack_distance(a, b) as f64 + GLOBAL_CABLE_OVERHEAD_M;
            (length, if torus { Medium::Electric } else { Medium::Optic })
        };
        plan.cables.push(Cable { from: CableEnd::Router(u), to: v, length_m, medium });
    }
    for r in 0..topo.num_routers() as RouterId {
        for e in topo.endpoints_of(r) {
            plan.cables.push(Cable {
                from: CableEnd::Endpoint(e),
                to: r,
                length_m: INTRA_RACK_CABLE_M,
                medium: Medium::Electric,
            });
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub preset: String,
    pub endpoints: u64,
    pub routers: u64,
    /// Radix the routers are priced at.
    pub radix: u32,
    pub router_cost_total: f64,
    pub electric_cables: u64,
    pub optic_cables: u64,
    pub electric_cable_cost: f64,
    pub optic_cable_cost: f64,
    pub cable_cost_total: f64,
    pub total: f64,
    pub cost_per_endpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub routers: u64,
    pub radix: u32,
    pub endpoints: u64,
    pub power_total: f64,
    pub power_per_endpoint: f64,
}

/// Router and cable cost of a laid-out topology, pricing routers at `radix`.
pub fn cost_model(topo: &Topology, layout: &LayoutPlan, params: &CostParams, radix: u32) -> Result<CostReport, CostError> {
    let routers = topo.num_routers() as u64;
    let router_cost_total = params.router_cost(radix)? * routers as f64;
    let (mut ec, mut oc, mut e_cost, mut o_cost) = (0u64, 0u64, 0.0, 0.0);
    for c in &layout.cables {
        let cost = params.cable_cost(c.length_m, c.medium);
        match c.medium {
            Medium::Electric => {
                ec += 1;
                e_cost += cost;
            }
            Medium::Optic => {
                oc += 1;
                o_cost += cost;
            }
        }
    }
    let endpoints = topo.num_endpoints() as u64;
    let total = router_cost_total + e_cost + o_cost;
    Ok(CostReport {
        preset: params.name.clone(),
        endpoints,
        routers,
        radix,
        router_cost_total,
        electric_cables: ec,
        optic_cables: oc,
        electric_cable_cost: e_cost,
        optic_cable_cost: o_cost,
        cable_cost_total: e_cost + o_cost,
        total,
        cost_per_endpoint: total / endpoints.max(1) as f64,
    })
}

/// SerDes power: every port of every router drives `lanes_per_port` lanes.
pub fn power_model(routers: u64, radix: u32, endpoints: u64, params: &CostParams) -> PowerReport {
    let power_total = routers as f64 * radix as f64 * params.port_watts();
    PowerReport { routers, radix, endpoints, power_total, power_per_endpoint: power_total / endpoints.max(1) as f64 }
}

/// One row of the cost and power comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub topology: String,
    pub endpoints: u64,
    pub routers: u64,
    /// Radix used for pricing and power.
    pub radix: u32,
    /// Network ports plus endpoint ports of the built topology.
    pub structural_radix: u32,
    pub electric_cables: u64,
    pub fiber_cables: u64,
    pub cost_per_node: f64,
    pub power_per_node: f64,
}

/// Cost row for a built topology. `radix` overrides the structural router
/// radix for pricing and power. Fat trees are priced by [`fat_tree_row`].
pub fn table_row(topo: &Topology, params: &CostParams, radix: Option<u32>) -> Result<TableRow, CostError> {
    let structural = topo.router_radix();
    let k = radix.unwrap_or(structural);
    if topo.kind() == TopologyKind::FatTree3 {
        let mut row = fat_tree_row(k, params)?;
        row.structural_radix = structural;
        return Ok(row);
    }
    let layout = build_layout(topo)?;
    let cost = cost_model(topo, &layout, params, k)?;
    let power = power_model(cost.routers, k, cost.endpoints, params);
    Ok(TableRow {
        topology: topo.kind().short_name().to_string(),
        endpoints: cost.endpoints,
        routers: cost.routers,
        radix: k,
        structural_radix: structural,
        electric_cables: cost.electric_cables,
        fiber_cables: cost.optic_cables,
        cost_per_node: cost.cost_per_endpoint,
        power_per_node: power.power_per_endpoint,
    })
}

/// Three-level fat tree priced from its closed-form shape with `p = k/2`:
/// `5p²` routers, `2p³` endpoints on 1 m electric cables, and `2p³ + 2p³`
/// 1 m fibre links between the layers. Counts are rounded down, so odd radix
/// works.
pub fn fat_tree_row(k: u32, params: &CostParams) -> Result<TableRow, CostError> {
    let p = k as f64 / 2.0;
    let routers = (5.0 * p * p).floor() as u64;
    let endpoints = (2.0 * p * p * p).floor() as u64;
    let fibre = 2 * endpoints;
    let total = routers as f64 * params.router_cost(k)?
        + fibre as f64 * params.cable_cost(INTRA_RACK_CABLE_M, Medium::Optic)
        + endpoints as f64 * params.cable_cost(INTRA_RACK_CABLE_M, Medium::Electric);
    let power = power_model(routers, k, endpoints, params);
    Ok(TableRow {
        topology: TopologyKind::FatTree3.short_name().to_string(),
        endpoints,
        routers,
        radix: k,
        structural_radix: k,
        electric_cables: endpoints,
        fiber_cables: fibre,
        cost_per_node: total / endpoints as f64,
        power_per_node: power.power_per_endpoint,
    })
}

/// Comparable-size networks around a 10K-endpoint Slim Fly. The Slim Fly is
/// priced at radix 43, one below its structural `29 + 15`.
pub fn comparison_table(params: &CostParams) -> Result<Vec<TableRow>, CostError> {
    use crate::topology::{
        build_dragonfly, build_flattened_butterfly, build_hypercube, build_mms_with_concentration, build_random_dln,
        build_torus,
    };
    let built = |r: Result<Topology, crate::TopologyError>| r.expect("comparison topologies are valid");
    let mut rows = vec![
        table_row(&built(build_torus(&[22, 22, 22])), params, None)?,
        table_row(&built(build_torus(&[6, 6, 6, 6, 8])), params, None)?,
        table_row(&built(build_hypercube(13)), params, None)?,
        fat_tree_row(35, params)?,
        table_row(&built(build_random_dln(1386, 19, 1)), params, None)?,
        table_row(&built(build_flattened_butterfly(10)), params, None)?,
        table_row(&built(build_dragonfly(7, 14, 7, None)), params, None)?,
        table_row(&built(build_dragonfly(11, 22, 11, Some(45))), params, None)?,
    ];
    rows.push(table_row(&built(build_mms_with_concentration(19, 15)), params, Some(43))?);
    Ok(rows)
}
