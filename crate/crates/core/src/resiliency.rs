//! Random link-failure experiments.
//!
//! For each removal fraction (a multiple of the increment) independent trials
//! remove that share of router-to-router links uniformly at random and test a
//! survival criterion. Trials continue in fixed-size batches until the Wilson
//! interval of the survival probability is narrow enough. Endpoint links never
//! fail.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::split_seed;
use crate::topology::{RouterId, Topology, TopologyKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResiliencyError {
    #[error("no balanced {kind} variant near N = {endpoints}")]
    NoBalancedVariant { kind: TopologyKind, endpoints: u64 },
    #[error("no reference value for {0}")]
    UnknownKind(TopologyKind),
    #[error("invalid experiment: {0}")]
    BadExperiment(String),
    #[error("topology is disconnected before any link fails")]
    Disconnected,
}

/// What counts as surviving a failure trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum FailureMetric {
    /// The router graph stays connected.
    Disconnection,
    /// Connected, and the diameter grows by at most `max_increase`.
    DiameterIncrease { max_increase: u32 },
    /// Connected, and the average router distance grows by at most `max_increase`.
    AvgPathIncrease { max_increase: f64 },
}

impl FailureMetric {
    pub const DIAMETER: FailureMetric = FailureMetric::DiameterIncrease { max_increase: 2 };
    pub const AVG_PATH: FailureMetric = FailureMetric::AvgPathIncrease { max_increase: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureExperiment {
    pub metric: FailureMetric,
    /// Step between removal fractions.
    pub increment: f64,
    /// Two-sided confidence level of the stopping interval.
    pub confidence: f64,
    /// Trials stop once the interval is at most this wide (as a probability).
    pub ci_width: f64,
    /// A fraction is survivable when the survival probability reaches this.
    pub cutoff: f64,
    pub batch: usize,
    pub max_trials: usize,
    pub seed: u64,
}

impl Default for FailureExperiment {
    fn default() -> Self {
        FailureExperiment {
            metric: FailureMetric::Disconnection,
            increment: 0.05,
            confidence: 0.95,
            ci_width: 0.02,
            cutoff: 0.5,
            batch: 256,
            max_trials: 40_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub links_removed: usize,
    /// Survival probability after monotone smoothing.
    pub survival_probability: f64,
    /// Raw estimate before smoothing.
    pub raw_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    /// Smoothing changed this point.
    pub adjusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResiliencyReport {
    pub experiment: FailureExperiment,
    pub links: usize,
    /// Largest survivable removal fraction.
    pub threshold: f64,
    pub curve: Vec<CurvePoint>,
}

/// Two-sided standard normal quantile for a confidence level.
fn normal_quantile(confidence: f64) -> f64 {
    // Acklam's rational approximation of the inverse normal CDF.
    let p = 1.0 - (1.0 - confidence) / 2.0;
    let a = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383577518672690e2, -3.066479806614716e1, 2.506628277459239];
    let b = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    let c = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    let d = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let plow = 0.02425;
    if p > 1.0 - plow {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = normal_quantile(confidence);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Clamping to phat absorbs rounding at 0 and 1 successes.
    ((centre - half).clamp(0.0, phat), (centre + half).clamp(phat, 1.0))
}

/// Weighted pool-adjacent-violators fit of a non-increasing sequence.
pub fn isotonic_non_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w.max(f64::MIN_POSITIVE), 1));
        while blocks.len() > 1 {
            let (v2, w2, c2) = blocks[blocks.len() - 1];
            let (v1, w1, c1) = blocks[blocks.len() - 2];
            if v1 >= v2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(v, _, c)| std::iter::repeat(v).take(c)).collect()
}

struct UnionFind {
    parent: Vec<u32>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), components: n }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra as usize] = rb;
            self.components -= 1;
        }
    }
}

/// Adjacency lists with a removal mask, cheaper than rebuilding a topology.
struct Damaged {
    adj: Vec<Vec<RouterId>>,
}

impl Damaged {
    fn new(n: usize, edges: &[(RouterId, RouterId)], removed: &[bool]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (&(u, v), &r) in edges.iter().zip(removed) {
            if !r {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
        Damaged { adj }
    }

    /// `(diameter, average distance)` or `None` when disconnected.
    fn distances(&self) -> Option<(u32, f64)> {
        let n = self.adj.len();
        let mut dist = vec![u32::MAX; n];
        let mut queue = Vec::with_capacity(n);
        let mut max = 0;
        let mut sum = 0u64;
        for s in 0..n {
            dist.fill(u32::MAX);
            dist[s] = 0;
            queue.clear();
            queue.push(s as RouterId);
            let mut head = 0;
            while head < queue.len() {
                let u = queue[head];
                head += 1;
                let d = dist[u as usize] + 1;
                for &v in &self.adj[u as usize] {
                    if dist[v as usize] == u32::MAX {
                        dist[v as usize] = d;
                        sum += d as u64;
                        max = max.max(d);
                        queue.push(v);
                    }
                }
            }
            if queue.len() != n {
                return None;
            }
        }
        let pairs = (n * (n - 1)).max(1) as f64;
        Some((max, sum as f64 / pairs))
    }
}

fn connected_without(n: usize, edges: &[(RouterId, RouterId)], removed: &[bool]) -> bool {
    let mut uf = UnionFind::new(n);
    for (&(u, v), &r) in edges.iter().zip(removed) {
        if !r {
            uf.union(u, v);
            if uf.components == 1 {
                return true;
            }
        }
    }
    uf.components <= 1
}

struct Baseline {
    diameter: u32,
    avg: f64,
}

fn trial(
    n: usize,
    edges: &[(RouterId, RouterId)],
    remove: usize,
    metric: FailureMetric,
    base: &Baseline,
    seed: u64,
) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut removed = vec![false; edges.len()];
    for i in index::sample(&mut rng, edges.len(), remove) {
        removed[i] = true;
    }
    match metric {
        FailureMetric::Disconnection => connected_without(n, edges, &removed),
        FailureMetric::DiameterIncrease { max_increase } => {
            if !connected_without(n, edges, &removed) {
                return false;
            }
            Damaged::new(n, edges, &removed).distances().is_some_and(|(d, _)| d <= base.diameter + max_increase)
        }
        FailureMetric::AvgPathIncrease { max_increase } => {
            if !connected_without(n, edges, &removed) {
                return false;
            }
            Damaged::new(n, edges, &removed).distances().is_some_and(|(_, a)| a <= base.avg + max_increase + 1e-12)
        }
    }
}

/// Survival curve and threshold for one topology.
pub fn survivable_fraction(topo: &Topology, exp: &FailureExperiment) -> Result<ResiliencyReport, ResiliencyError> {
    if !(exp.increment > 0.0 && exp.increment < 1.0) {
        return Err(ResiliencyError::BadExperiment(format!("increment {} outside (0, 1)", exp.increment)));
    }
    if !(exp.ci_width > 0.0) || !(exp.confidence > 0.0 && exp.confidence < 1.0) || exp.batch == 0 {
        return Err(ResiliencyError::BadExperiment("confidence, width and batch must be positive".into()));
    }
    let n = topo.num_routers();
    let edges: Vec<(RouterId, RouterId)> = topo.edges().collect();
    let whole = Damaged::new(n, &edges, &vec![false; edges.len()]);
    let (diameter, avg) = whole.distances().ok_or(ResiliencyError::Disconnected)?;
    let base = Baseline { diameter, avg };

    let steps = (1.0 / exp.increment + 1e-9).floor() as usize;
    let mut raw = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let fraction = (step as f64 * exp.increment * 1e9).round() / 1e9;
        let remove = ((fraction * edges.len() as f64) - 1e-9).ceil().max(0.0) as usize;
        let remove = remove.min(edges.len());
        let point_seed = split_seed(exp.seed, step as u64);
        let mut trials = 0usize;
        let mut ok = 0usize;
        loop {
            let start = trials;
            let end = (start + exp.batch).min(exp.max_trials.max(1));
            ok += (start..end)
                .into_par_iter()
                .filter(|&t| trial(n, &edges, remove, exp.metric, &base, split_seed(point_seed, t as u64)))
                .count();
            trials = end;
            let (lo, hi) = wilson_interval(ok, trials, exp.confidence);
            if hi - lo <= exp.ci_width || trials >= exp.max_trials {
                raw.push((fraction, remove, ok, trials, lo, hi));
                break;
            }
        }
    }

    let probs: Vec<f64> = raw.iter().map(|r| r.2 as f64 / r.3 as f64).collect();
    let weights: Vec<f64> = raw.iter().map(|r| r.3 as f64).collect();
    let smooth = isotonic_non_increasing(&probs, &weights);
    let curve: Vec<CurvePoint> = raw
        .iter()
        .zip(probs.iter().zip(&smooth))
        .map(|(&(fraction, links_removed, _, trials, ci_low, ci_high), (&p, &s))| CurvePoint {
            fraction,
            links_removed,
            survival_probability: s,
            raw_probability: p,
            ci_low,
            ci_high,
            trials,
            adjusted: (p - s).abs() > 1e-12,
        })
        .collect();
    let threshold = curve
        .iter()
        .take_while(|c| c.survival_probability >= exp.cutoff)
        .last()
        .map_or(0.0, |c| c.fraction);
    Ok(ResiliencyReport { experiment: exp.clone(), links: edges.len(), threshold, curve })
}

const TABLE_SIZES: [u64; 6] = [256, 512, 1024, 2048, 4096, 8192];

/// Published disconnection thresholds (percent) by approximate endpoint count.
/// `LongHop` is listed separately because that topology is not constructed.
pub fn reference_disconnection(kind: TopologyKind, endpoints: u64) -> Result<u32, ResiliencyError> {
    let row: [Option<u32>; 6] = match kind {
        TopologyKind::Torus3 => [Some(25), None, Some(15), Some(10), Some(5), Some(5)],
        TopologyKind::Torus5 => [Some(50), None, Some(40), None, Some(40), Some(35)],
        TopologyKind::Hypercube => [Some(40), Some(40), Some(40), Some(40), Some(45), Some(45)],
        TopologyKind::FatTree3 => [None, Some(35), Some(40), Some(40), Some(55), Some(60)],
        TopologyKind::Dragonfly => [Some(45), None, Some(50), Some(55), Some(60), Some(65)],
        TopologyKind::FlattenedButterfly3 => [Some(50), Some(55), Some(60), Some(65), Some(70), None],
        TopologyKind::RandomDln => [None, Some(60), None, Some(65), Some(70), Some(75)],
        TopologyKind::SlimFly => [Some(45), Some(60), None, Some(65), Some(70), Some(75)],
        other => return Err(ResiliencyError::UnknownKind(other)),
    };
    let idx = TABLE_SIZES
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (*a.1 as f64).ln() - (endpoints.max(1) as f64).ln();
            let db = (*b.1 as f64).ln() - (endpoints.max(1) as f64).ln();
            da.abs().total_cmp(&db.abs())
        })
        .map(|(i, _)| i)
        .unwrap();
    row[idx].ok_or(ResiliencyError::NoBalancedVariant { kind, endpoints })
}

/// Published long-hop hypercube thresholds: 55% at every size.
pub fn reference_disconnection_long_hop() -> u32 {
    55
}
