//! Cycle-level simulation of input-queued routers with credit flow control.
//!
//! Packets are single flits. Each router input port holds one FIFO per
//! virtual channel; a flit that arrives at cycle `t` may request the switch
//! at `t + va_delay`, and once granted reaches its output queue after
//! `sa_delay + crossbar_delay` more cycles. Each output channel sends one flit
//! per cycle, taking `channel_latency` cycles. Credits reserve a downstream
//! slot at switch grant and come back `credit_delay + channel_latency` cycles
//! after the flit leaves the input buffer. The switch allocator runs
//! `internal_speedup` round-robin iterations per cycle.

mod engine;
mod traffic;

pub use engine::Network;
pub use traffic::{
    bit_complement, bit_reverse, gen_traffic, shuffle, traffic_for, worst_case_pattern, Traffic,
    TrafficError, TrafficPattern,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{Algorithm, RoutingError};
use crate::split_seed;
use crate::topology::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("no flit moved for {idle} cycles with {buffered} flits buffered (cycle {cycle})")]
    Deadlock { cycle: u64, idle: u64, buffered: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub routing: Algorithm,
    /// Flits per cycle per active endpoint, in (0, 1].
    pub injection_rate: f64,
    pub buffer_flits_per_port: u32,
    /// Flits an output port holds between the crossbar and the channel.
    pub output_buffer_flits: u32,
    pub credit_delay: u32,
    pub channel_latency: u32,
    pub sa_delay: u32,
    pub va_delay: u32,
    pub crossbar_delay: u32,
    pub internal_speedup: u32,
    pub io_speedup: u32,
    /// Virtual channels per port; `None` picks the longest route the routing
    /// mode can produce.
    pub vc_count: Option<u32>,
    pub ugal_candidates: usize,
    /// Redraw Valiant intermediates until the route has at most three hops.
    pub valiant_cap_three: bool,
    /// Length of each warmup window used in the convergence test.
    pub warmup_window: u64,
    /// Relative change in mean latency between windows that counts as steady.
    pub warmup_tolerance: f64,
    pub warmup_max_cycles: u64,
    pub measure_cycles: u64,
    /// Cycle cap for delivering measured packets and for the final drain.
    pub drain_max_cycles: u64,
    /// A source queue longer than this marks the run as saturated.
    pub source_queue_limit: usize,
    pub watchdog_cycles: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            routing: Algorithm::Min,
            injection_rate: 0.1,
            buffer_flits_per_port: 64,
            output_buffer_flits: 16,
            credit_delay: 2,
            channel_latency: 1,
            sa_delay: 1,
            va_delay: 1,
            crossbar_delay: 1,
            internal_speedup: 2,
            io_speedup: 1,
            vc_count: None,
            ugal_candidates: 4,
            valiant_cap_three: false,
            warmup_window: 1000,
            warmup_tolerance: 0.02,
            warmup_max_cycles: 100_000,
            measure_cycles: 5000,
            drain_max_cycles: 50_000,
            source_queue_limit: 500,
            watchdog_cycles: 10_000,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if !(self.injection_rate > 0.0 && self.injection_rate <= 1.0) {
            return bad("injection_rate must be in (0, 1]");
        }
        if [self.channel_latency, self.sa_delay, self.va_delay, self.crossbar_delay].contains(&0) {
            return bad("pipeline delays must be at least 1");
        }
        if self.output_buffer_flits == 0 {
            return bad("output_buffer_flits must be at least 1");
        }
        if self.internal_speedup == 0 || self.io_speedup == 0 {
            return bad("speedups must be at least 1");
        }
        if self.vc_count == Some(0) {
            return bad("vc_count must be at least 1");
        }
        if self.buffer_flits_per_port < self.vc_count.unwrap_or(1) {
            return bad("buffer_flits_per_port must give every VC at least one slot");
        }
        if self.warmup_window == 0 || self.measure_cycles == 0 {
            return bad("warmup_window and measure_cycles must be positive");
        }
        Ok(())
    }

    /// Zero-load latency of a packet crossing `hops` router-to-router links:
    /// injection and ejection channels, `hops + 1` router pipelines and `hops`
    /// network channels.
    pub fn zero_load_latency(&self, hops: u32) -> u32 {
        let router = self.va_delay + self.sa_delay + self.crossbar_delay;
        2 * self.channel_latency + (hops + 1) * router + hops * self.channel_latency
    }
}

/// Measured results of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub routing: Algorithm,
    pub pattern: TrafficPattern,
    /// Configured injection rate.
    pub offered: f64,
    /// Packets generated per active source per cycle during measurement.
    pub measured_offered: f64,
    /// Packets ejected per active source per cycle during measurement.
    pub accepted: f64,
    pub mean_latency: f64,
    pub p50_latency: f64,
    pub p99_latency: f64,
    pub max_latency: u64,
    pub min_latency: u64,
    pub mean_hops: f64,
    pub packets_measured: u64,
    pub active_sources: usize,
    pub warmup_cycles: u64,
    /// Warmup converged before the cap or a source queue overflowed.
    pub steady: bool,
    /// Every packet reached its destination once injection stopped.
    pub drained: bool,
    pub saturated: bool,
    /// Busiest network channel: flits per cycle during measurement.
    pub max_channel_utilization: f64,
    /// Network channels by utilization decile (`[0, 0.1)`, ..., `[0.9, 1]`).
    pub channel_utilization_histogram: Vec<u32>,
    pub total_cycles: u64,
}

/// Simulate one load point.
pub fn run_sim(topo: &Topology, config: &SimConfig, traffic: &Traffic) -> Result<SimStats, SimError> {
    config.validate()?;
    Network::new(topo, config, traffic)?.run()
}

/// Simulate every load in parallel. Each point's seed depends only on the
/// base seed and the load, so results are independent of list composition
/// and completion order.
pub fn sweep(topo: &Topology, config: &SimConfig, traffic: &Traffic, loads: &[f64]) -> Vec<Result<SimStats, SimError>> {
    loads
        .par_iter()
        .map(|&load| {
            let cfg = SimConfig { injection_rate: load, seed: split_seed(config.seed, load.to_bits()), ..config.clone() };
            run_sim(topo, &cfg, traffic)
        })
        .collect()
}

/// First load in an ascending sweep whose run saturated.
pub fn saturation_point(loads: &[f64], results: &[Result<SimStats, SimError>]) -> Option<f64> {
    loads
        .iter()
        .zip(results)
        .find(|(_, r)| r.as_ref().map_or(true, |s| s.saturated))
        .map(|(&l, _)| l)
}

/// `start:stop:step` inclusive load list.
pub fn load_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6).collect()
}
