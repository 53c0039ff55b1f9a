//! Closed-form router counts: the Moore bound, diameter-3 graph families and
//! the average channel load used to pick a balanced concentration.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{TopologyError, TopologyKind};
use crate::field::prime_power;

/// Largest possible router count for network radix `k'` and diameter `d`:
/// `1 + k' Σ_{i<d} (k'-1)^i`.
pub fn moore_bound(network_radix: u64, diameter: u32) -> u128 {
    let k = network_radix as u128;
    let mut sum = 0u128;
    let mut term = 1u128;
    for _ in 0..diameter {
        sum += term;
        term *= k.saturating_sub(1);
    }
    1 + k * sum
}

/// Diameter-3 graph families with known router counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Diam3Family {
    /// Bermond–Delorme–Farhi graphs, parameterised by an odd prime power `u`
    /// with `k' = 3(u+1)/2`.
    Bdf { u: u64 },
    /// Delorme graphs, parameterised by a prime power `v` with `k' = (v+1)²`.
    Del { v: u64 },
}

/// BDF router count for network radix `k'`: `8/27 k'³ - 4/9 k'² + 2/3 k'`.
///
/// Evaluates the formula without checking that a matching `u` exists.
pub fn bdf_router_count(network_radix: u64) -> Ratio<u128> {
    let k = Ratio::from_integer(network_radix as u128);
    Ratio::new(8, 27) * k * k * k - Ratio::new(4, 9) * k * k + Ratio::new(2, 3) * k
}

/// `(k', N_r)` of a diameter-3 family member.
pub fn diam3_counts(family: Diam3Family) -> Result<(u64, u128), TopologyError> {
    let bad = |reason: String| TopologyError::BadParams { kind: TopologyKind::Imported, reason };
    match family {
        Diam3Family::Bdf { u } => {
            match prime_power(u) {
                Some((p, _)) if p != 2 => {}
                _ => return Err(bad(format!("BDF needs an odd prime power, got u = {u}"))),
            }
            let k = 3 * (u + 1) / 2;
            let n = bdf_router_count(k);
            debug_assert!(n.is_integer());
            Ok((k, n.to_integer()))
        }
        Diam3Family::Del { v } => {
            if prime_power(v).is_none() {
                return Err(bad(format!("Delorme graphs need a prime power, got v = {v}")));
            }
            let v = v as u128;
            let k = (v + 1) * (v + 1);
            Ok((k as u64, k * (v * v + 1) * (v * v + 1)))
        }
    }
}

/// Average load per router-to-router channel, `(2N_r - k' - 2) p² / k'`,
/// under uniform traffic on a diameter-2 graph.
pub fn channel_load(routers: u64, network_radix: u64, concentration: u64) -> Ratio<u64> {
    let k = network_radix.max(1);
    let numer = (2 * routers).saturating_sub(k + 2);
    Ratio::new(numer * concentration * concentration, k)
}

/// `p` does not exceed the largest integer concentration whose channel load
/// stays within the channel's capacity `p·N_r`, rounded up the same way as
/// `p = ⌈k'/2⌉`.
pub fn is_balanced(routers: u64, network_radix: u64, concentration: u64) -> bool {
    let denom = (2 * routers).saturating_sub(network_radix + 2);
    if denom == 0 || concentration == 0 {
        return true;
    }
    concentration <= (network_radix * routers).div_ceil(denom)
}
