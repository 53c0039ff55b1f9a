//! Slim Fly construction on top of McKay–Miller–Širáň (MMS) graphs.
//!
//! Routers are the triples `{0,1} × GF(q) × GF(q)`; router `(s, a, b)` has ID
//! `s·q² + a·q + b`. Adjacency:
//!
//! * `(0, x, y) ~ (0, x, y')` iff `y - y' ∈ X`
//! * `(1, m, c) ~ (1, m, c')` iff `c - c' ∈ X'`
//! * `(0, x, y) ~ (1, m, c)` iff `y = m·x + c`
//!
//! with generator sets built from a primitive element ξ:
//!
//! | δ  | X                                                        | X'   |
//! |----|----------------------------------------------------------|------|
//! | 1  | `{ξ^0, ξ^2, …, ξ^(q-3)}`                                  | `ξ·X` |
//! | -1 | `{ξ^0, ξ^2, …, ξ^(2w-2)} ∪ {ξ^(2w-1), ξ^(2w+1), …, ξ^(4w-3)}` | `ξ·X` |
//! | 0  | `{ξ^0, ξ^2, …, ξ^(q-2)}`                                  | `ξ·X` |
//!
//! Every build is checked for symmetry of the generator sets, `k'`-regularity
//! and diameter 2 before it is returned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GraphBuilder, RouterId, RouterLabel, Topology, TopologyError, TopologyKind, TopologyParts, TopologySpec};
use crate::field::{prime_power, Field};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MmsParams {
    pub q: u32,
    pub w: u32,
    pub delta: i32,
    /// Primitive element ξ (canonical encoding).
    pub xi: u32,
    pub x: Vec<u32>,
    pub x_prime: Vec<u32>,
    /// Network radix `(3q - δ)/2`.
    pub network_radix: u32,
}

/// `(δ, w)` with `q = 4w + δ`, or `None` when `q ≡ 2 (mod 4)`.
pub fn mms_delta(q: u64) -> Option<(i32, u32)> {
    match q % 4 {
        0 => Some((0, (q / 4) as u32)),
        1 => Some((1, ((q - 1) / 4) as u32)),
        3 => Some((-1, ((q + 1) / 4) as u32)),
        _ => None,
    }
}

fn generator_sets(field: &Field, delta: i32, w: u32) -> (Vec<u32>, Vec<u32>) {
    let q = field.order() as u64;
    let exponents: Vec<u64> = match delta {
        1 => (0..=q - 3).step_by(2).collect(),
        -1 => {
            let w = w as u64;
            (0..=2 * w - 2).step_by(2).chain((2 * w - 1..=4 * w - 3).step_by(2)).collect()
        }
        _ => (0..=q - 2).step_by(2).collect(),
    };
    let mut x: Vec<u32> = exponents.iter().map(|&e| field.primitive_pow(e)).collect();
    let mut x_prime: Vec<u32> = exponents.iter().map(|&e| field.primitive_pow(e + 1)).collect();
    x.sort_unstable();
    x_prime.sort_unstable();
    (x, x_prime)
}

/// Slim Fly with the balanced concentration `p = ⌈k'/2⌉`.
pub fn build_mms(q: u64) -> Result<Topology, TopologyError> {
    let topo = build_mms_with_concentration(q, 0)?;
    let p = topo.network_radix().div_ceil(2);
    let mut topo = topo.with_concentration(p);
    topo.spec = Some(TopologySpec::SlimFly { q, p: None });
    Ok(topo)
}

/// Slim Fly with an explicit concentration (e.g. oversubscribed `p`).
pub fn build_mms_with_concentration(q: u64, p: u32) -> Result<Topology, TopologyError> {
    let invalid = |reason: &str| TopologyError::InvalidQ { q, reason: reason.to_string() };
    if prime_power(q).is_none() {
        return Err(invalid("not a prime power"));
    }
    if q < 4 {
        return Err(invalid("q must be at least 4"));
    }
    let (delta, w) = mms_delta(q).ok_or_else(|| invalid("q = 4w + δ has no solution with δ ∈ {-1, 0, 1}"))?;
    let field = Field::new(q)?;
    let (x, x_prime) = generator_sets(&field, delta, w);
    let qn = q as u32;
    let radix = ((3 * q as i64 - delta as i64) / 2) as u32;
    let fail = |reason: String| TopologyError::ConstructionInvalid { q, reason };

    for (name, set) in [("X", &x), ("X'", &x_prime)] {
        if let Some(&g) = set.iter().find(|&&g| set.binary_search(&field.neg(g)).is_err()) {
            return Err(fail(format!("{name} is not closed under negation ({g})")));
        }
        if set.windows(2).any(|w| w[0] == w[1]) || set.contains(&0) {
            return Err(fail(format!("{name} contains repeated or zero elements")));
        }
    }

    let id = |s: u32, a: u32, b: u32| -> RouterId { s * qn * qn + a * qn + b };
    let n = 2 * (qn * qn) as usize;
    let mut adj: Vec<Vec<RouterId>> = vec![Vec::with_capacity(radix as usize); n];
    for a in 0..qn {
        for b in 0..qn {
            for &g in &x {
                adj[id(0, a, b) as usize].push(id(0, a, field.sub(b, g)));
            }
            for &g in &x_prime {
                adj[id(1, a, b) as usize].push(id(1, a, field.sub(b, g)));
            }
        }
    }
    for xv in 0..qn {
        for y in 0..qn {
            for m in 0..qn {
                let c = field.sub(y, field.mul(m, xv));
                adj[id(0, xv, y) as usize].push(id(1, m, c));
                adj[id(1, m, c) as usize].push(id(0, xv, y));
            }
        }
    }

    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for s in 0..2u8 {
        for a in 0..qn {
            for b in 0..qn {
                labels.push(RouterLabel::Mms { subgraph: s, a, b });
                groups.push(a);
            }
        }
    }

    let params = MmsParams { q: qn, w, delta, xi: field.primitive(), x, x_prime, network_radix: radix };
    let topo = TopologyParts {
        kind: TopologyKind::SlimFly,
        spec: Some(TopologySpec::SlimFly { q, p: Some(p) }),
        graph: GraphBuilder::from_lists(adj),
        endpoints_per_router: vec![p; n],
        concentration: p,
        labels,
        groups,
        mms: Some(params),
    }
    .finish()
    .map_err(|e| fail(e.to_string()))?;

    if let Some(r) = (0..n as RouterId).find(|&r| topo.degree(r) != radix as usize) {
        return Err(fail(format!("router {r} has degree {} instead of {radix}", topo.degree(r))));
    }
    if let Some(r) = (0..n as RouterId).find(|&r| topo.neighbors(r).iter().any(|&v| !topo.has_edge(v, r))) {
        return Err(fail(format!("adjacency of router {r} is not symmetric")));
    }
    if let Some(r) = first_router_beyond_two_hops(&topo) {
        return Err(fail(format!("router {r} has routers more than two hops away")));
    }
    Ok(topo)
}

/// Bitset closed-neighbourhood check: returns a router whose two-hop ball
/// does not cover the graph, if any.
pub(crate) fn first_router_beyond_two_hops(topo: &Topology) -> Option<RouterId> {
    let n = topo.num_routers();
    let words = n.div_ceil(64);
    let rows: Vec<Vec<u64>> = (0..n as RouterId)
        .into_par_iter()
        .map(|r| {
            let mut row = vec![0u64; words];
            for &v in topo.neighbors(r) {
                row[v as usize / 64] |= 1 << (v % 64);
            }
            row
        })
        .collect();
    let full_last = if n % 64 == 0 { u64::MAX } else { (1u64 << (n % 64)) - 1 };
    (0..n as RouterId).into_par_iter().find_first(|&r| {
        let mut ball = rows[r as usize].clone();
        ball[r as usize / 64] |= 1 << (r % 64);
        for &v in topo.neighbors(r) {
            for (b, w) in ball.iter_mut().zip(&rows[v as usize]) {
                *b |= w;
            }
        }
        let (last, body) = ball.split_last().unwrap();
        !(body.iter().all(|&w| w == u64::MAX) && *last == full_last)
    })
}
