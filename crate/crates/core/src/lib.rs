//! Slim Fly topology workbench.
//!
//! * [`field`]: arithmetic in GF(q).
//! * [`topology`]: Slim Fly (MMS) and reference topologies, router-count bounds.
//! * [`metrics`]: diameter, average distance, bisection.
//! * [`resiliency`]: random link-failure experiments.
//! * [`routing`]: MIN, Valiant, UGAL and fat-tree routes with VC assignment.
//! * [`sim`]: flit-level cycle simulator and traffic patterns.

pub mod costpower;
pub mod field;
pub mod metrics;
pub mod resiliency;
pub mod routing;
pub mod sim;
pub mod topology;

pub use field::{Field, FieldElement};
pub use topology::{Topology, TopologyError, TopologyKind, TopologySpec};

/// Derive an independent stream seed from a root seed (splitmix64 finalizer).
pub fn split_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
