//! Traffic patterns: destination choice per injected packet.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::MinRoutes;
use crate::topology::{EndpointId, RouterId, Topology, TopologyKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("{pattern:?} traffic needs a power-of-two number of active endpoints, got {active}")]
    BadPatternSize { pattern: TrafficPattern, active: usize },
    #[error("shift traffic needs an even number of active endpoints, got {0}")]
    OddShift(usize),
    #[error("no worst-case pattern defined for {0}")]
    NoWorstCase(TopologyKind),
    #[error("need at least two active endpoints")]
    TooFewEndpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    /// Uniformly random destination other than the source.
    Uniform,
    /// `d_i = s_{(i-1) mod b}`.
    Shuffle,
    /// `d_i = s_{b-i-1}`.
    BitReversal,
    /// `d_i = ¬s_i`.
    BitComplement,
    /// `d = (s mod N/2) + N/2` or `d = s mod N/2`, each with probability ½.
    Shift,
    /// Adversarial pattern built from the topology (see [`worst_case_pattern`]).
    #[serde(rename = "worstcase")]
    WorstCase,
}

impl std::str::FromStr for TrafficPattern {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uniform" | "random" => Ok(TrafficPattern::Uniform),
            "shuffle" => Ok(TrafficPattern::Shuffle),
            "bitreversal" | "bitrev" => Ok(TrafficPattern::BitReversal),
            "bitcomplement" | "bitcomp" => Ok(TrafficPattern::BitComplement),
            "shift" => Ok(TrafficPattern::Shift),
            "worstcase" | "worst" => Ok(TrafficPattern::WorstCase),
            other => Err(format!("unknown traffic pattern {other:?}")),
        }
    }
}

impl TrafficPattern {
    pub fn needs_power_of_two(self) -> bool {
        matches!(self, TrafficPattern::Shuffle | TrafficPattern::BitReversal | TrafficPattern::BitComplement)
    }
}

/// Destination function over a set of active endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Traffic {
    pub pattern: TrafficPattern,
    /// Endpoints `0..active` take part; the rest stay idle.
    active: usize,
    bits: u32,
    /// Fixed destination per source for table-driven patterns.
    table: Option<Vec<Option<EndpointId>>>,
}

pub fn bit_reverse(s: u64, bits: u32) -> u64 {
    if bits == 0 {
        return 0;
    }
    s.reverse_bits() >> (64 - bits)
}

pub fn bit_complement(s: u64, bits: u32) -> u64 {
    !s & ((1u64 << bits) - 1)
}

/// Rotate left by one: bit `i` of the result is bit `i-1 mod b` of `s`.
pub fn shuffle(s: u64, bits: u32) -> u64 {
    if bits == 0 {
        return 0;
    }
    let mask = (1u64 << bits) - 1;
    ((s << 1) | (s >> (bits - 1))) & mask
}

/// Destination function for `active` endpoints.
pub fn gen_traffic(pattern: TrafficPattern, active: usize) -> Result<Traffic, TrafficError> {
    if active < 2 {
        return Err(TrafficError::TooFewEndpoints);
    }
    if pattern.needs_power_of_two() && !active.is_power_of_two() {
        return Err(TrafficError::BadPatternSize { pattern, active });
    }
    if pattern == TrafficPattern::Shift && active % 2 != 0 {
        return Err(TrafficError::OddShift(active));
    }
    if pattern == TrafficPattern::WorstCase {
        return Err(TrafficError::NoWorstCase(TopologyKind::Imported));
    }
    Ok(Traffic { pattern, active, bits: active.trailing_zeros(), table: None })
}

/// Pattern sized for a topology: bit permutations use the largest power of two
/// not above `N` active endpoints, shift the largest even count, and the worst
/// case is built from the topology itself.
pub fn traffic_for(topo: &Topology, pattern: TrafficPattern) -> Result<Traffic, TrafficError> {
    let n = topo.num_endpoints();
    match pattern {
        TrafficPattern::WorstCase => worst_case_pattern(topo),
        p if p.needs_power_of_two() => gen_traffic(p, if n == 0 { 0 } else { 1 << n.ilog2() }),
        TrafficPattern::Shift => gen_traffic(pattern, n & !1),
        _ => gen_traffic(pattern, n),
    }
}

impl Traffic {
    /// Endpoints that inject.
    pub fn sources(&self) -> Vec<EndpointId> {
        match &self.table {
            Some(t) => (0..t.len()).filter(|&s| t[s].is_some()).map(|s| s as EndpointId).collect(),
            None => (0..self.active as EndpointId).collect(),
        }
    }

    pub fn active(&self) -> usize {
        self.active
    }

    /// Destination of a new packet from `src`.
    pub fn destination<R: Rng + ?Sized>(&self, src: EndpointId, rng: &mut R) -> EndpointId {
        let s = src as u64;
        let half = (self.active / 2) as u64;
        match self.pattern {
            TrafficPattern::Uniform => {
                let d = rng.gen_range(0..self.active as u64 - 1);
                (if d >= s { d + 1 } else { d }) as EndpointId
            }
            TrafficPattern::Shuffle => shuffle(s, self.bits) as EndpointId,
            TrafficPattern::BitReversal => bit_reverse(s, self.bits) as EndpointId,
            TrafficPattern::BitComplement => bit_complement(s, self.bits) as EndpointId,
            TrafficPattern::Shift => {
                let base = s % half;
                (if rng.gen_bool(0.5) { base + half } else { base }) as EndpointId
            }
            TrafficPattern::WorstCase => self.table.as_ref().and_then(|t| t[src as usize]).expect("src is a pattern source"),
        }
    }

    /// Fixed flows of a table-driven pattern, as `(src, dst)` pairs.
    pub fn flows(&self) -> Vec<(EndpointId, EndpointId)> {
        self.table
            .iter()
            .flat_map(|t| t.iter().enumerate().filter_map(|(s, d)| d.map(|d| (s as EndpointId, d))))
            .collect()
    }
}

/// Adversarial traffic for minimal routing.
///
/// Slim Fly: for every directed link `y → x`, routers whose minimal route to
/// `x` is `r → y → x` each send one flow from one of their endpoints to a
/// still-free endpoint of `x`, until `x` has no free endpoints. A router never
/// sends two flows over the same first link, and every endpoint sends and
/// receives at most once.
///
/// Dragonfly: every endpoint sends to the same position in the next group, so
/// each group's traffic shares one global link.
pub fn worst_case_pattern(topo: &Topology) -> Result<Traffic, TrafficError> {
    match topo.kind() {
        TopologyKind::SlimFly => Ok(slim_fly_worst_case(topo)),
        TopologyKind::Dragonfly => Ok(group_shift(topo)),
        other => Err(TrafficError::NoWorstCase(other)),
    }
}

fn slim_fly_worst_case(topo: &Topology) -> Traffic {
    let n = topo.num_routers();
    let routes = MinRoutes::new(topo);
    let mut table: Vec<Option<EndpointId>> = vec![None; topo.num_endpoints()];
    let mut sending = vec![false; topo.num_endpoints()];
    let mut receiving = vec![false; topo.num_endpoints()];
    let mut used_first = std::collections::HashSet::new();
    for x in 0..n as RouterId {
        for &y in topo.neighbors(x) {
            for r in 0..n as RouterId {
                if r == x || r == y || routes.distance(r, x) != 2 {
                    continue;
                }
                let route = routes.route(r, x).expect("diameter-2 graph");
                if route.hops[1] != y || used_first.contains(&(r, y)) {
                    continue;
                }
                let Some(src) = topo.endpoints_of(r).find(|&e| !sending[e as usize]) else { continue };
                let Some(dst) = topo.endpoints_of(x).find(|&e| !receiving[e as usize]) else { break };
                sending[src as usize] = true;
                receiving[dst as usize] = true;
                table[src as usize] = Some(dst);
                used_first.insert((r, y));
            }
        }
    }
    Traffic { pattern: TrafficPattern::WorstCase, active: table.iter().flatten().count(), bits: 0, table: Some(table) }
}

fn group_shift(topo: &Topology) -> Traffic {
    let groups = topo.num_groups() as u32;
    let members: Vec<Vec<RouterId>> = (0..groups)
        .map(|g| (0..topo.num_routers() as RouterId).filter(|&r| topo.group_of(r) == g).collect())
        .collect();
    let mut table = vec![None; topo.num_endpoints()];
    for g in 0..groups as usize {
        let next = &members[(g + 1) % groups as usize];
        for (i, &r) in members[g].iter().enumerate() {
            let Some(&target) = next.get(i) else { continue };
            for (e, d) in topo.endpoints_of(r).zip(topo.endpoints_of(target)) {
                table[e as usize] = Some(d);
            }
        }
    }
    Traffic { pattern: TrafficPattern::WorstCase, active: table.iter().flatten().count(), bits: 0, table: Some(table) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_dragonfly, build_mms};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_patterns() {
        assert_eq!(bit_reverse(0b001, 3), 0b100);
        assert_eq!(bit_complement(0b1010, 4), 0b0101);
        assert_eq!(shuffle(0b011, 3), 0b110);
        assert_eq!(shuffle(0b100, 3), 0b001);
        let t = gen_traffic(TrafficPattern::BitReversal, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(t.destination(1, &mut rng), 4);
    }

    #[test]
    fn pattern_size_checks() {
        assert!(matches!(gen_traffic(TrafficPattern::Shuffle, 12), Err(TrafficError::BadPatternSize { .. })));
        assert!(gen_traffic(TrafficPattern::Uniform, 12).is_ok());
        assert!(matches!(gen_traffic(TrafficPattern::Shift, 7), Err(TrafficError::OddShift(7))));
        let t = traffic_for(&build_mms(5).unwrap(), TrafficPattern::BitComplement).unwrap();
        assert_eq!(t.active(), 128);
    }

    #[test]
    fn uniform_and_shift_ranges() {
        let t = gen_traffic(TrafficPattern::Uniform, 10).unwrap();
        let s = gen_traffic(TrafficPattern::Shift, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let d = t.destination(3, &mut rng);
            assert!(d < 10 && d != 3);
            let d = s.destination(7, &mut rng);
            assert!(d == 2 || d == 7);
        }
    }

    #[test]
    fn slim_fly_worst_case_constraints() {
        let topo = build_mms(5).unwrap();
        let t = worst_case_pattern(&topo).unwrap();
        let flows = t.flows();
        let mut dsts: Vec<_> = flows.iter().map(|f| f.1).collect();
        dsts.sort_unstable();
        dsts.dedup();
        assert_eq!(dsts.len(), flows.len(), "no endpoint receives twice");
        assert_eq!(t.sources().len(), flows.len());
        // Heaviest channel under minimal routing carries p + 1 flows.
        let routes = MinRoutes::new(&topo);
        let mut load = std::collections::HashMap::new();
        for &(s, d) in &flows {
            let r = routes.route(topo.router_of(s), topo.router_of(d)).unwrap();
            for link in r.links() {
                *load.entry(link).or_insert(0) += 1;
            }
        }
        assert_eq!(load.values().max(), Some(&5));
        assert_eq!(flows.len(), 194);
    }

    #[test]
    fn dragonfly_group_shift() {
        let topo = build_dragonfly(2, 4, 2, None).unwrap();
        let t = worst_case_pattern(&topo).unwrap();
        assert_eq!(t.flows().len(), topo.num_endpoints());
        for (s, d) in t.flows() {
            let (gs, gd) = (topo.group_of(topo.router_of(s)), topo.group_of(topo.router_of(d)));
            assert_eq!(gd, (gs + 1) % 9);
        }
    }
}
