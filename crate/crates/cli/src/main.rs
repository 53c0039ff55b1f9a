//! `slimfly` command-line experiments.

mod output;
mod topo;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use output::{config_value, emit, header_lines, resolve, Common};
use slimfly::costpower::{comparison_table, table_row, CostParams};
use slimfly::metrics::{analytic_bisection, bisection_heuristic, structural_report, DEFAULT_LINK_GBPS};
use slimfly::resiliency::{reference_disconnection, survivable_fraction, FailureExperiment, FailureMetric};
use slimfly::routing::Algorithm;
use slimfly::sim::{saturation_point, sweep, traffic_for, SimConfig, SimStats, TrafficPattern};
use slimfly::split_seed;
use slimfly::topology::{bdf_router_count, diam3_counts, moore_bound, mms_delta, Diam3Family};
use topo::TopoArgs;

const BISECTION_STREAM: u64 = 2;
const RESILIENCY_STREAM: u64 = 3;
const SIM_STREAM: u64 = 4;

#[derive(Parser)]
#[command(name = "slimfly", version, about = "Slim Fly topology workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a topology and write its edge list and descriptor.
    Generate(GenerateArgs),
    /// Diameter, average distance and bisection of a topology.
    Analyze(AnalyzeArgs),
    /// Minimum-bisection estimate.
    Bisection(BisectionArgs),
    /// Random link-failure survival curve.
    Resiliency(ResiliencyArgs),
    /// Flit-level simulation over a range of loads.
    Simulate(SimulateArgs),
    /// Layout, cost and power.
    Cost(CostArgs),
    /// Moore bound and closed-form router counts.
    Moore(MooreArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct GenerateArgs {
    #[command(flatten)]
    topo: TopoArgs,
    /// Directory for `<name>.edges` and `<name>.json`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File stem; defaults to the kind and its main parameter.
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    topo: TopoArgs,
    /// Bisection restarts; 0 skips the bisection.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_LINK_GBPS)]
    link_gbps: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct BisectionArgs {
    #[command(flatten)]
    topo: TopoArgs,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Also write the side (0/1) of every router, one per line.
    #[arg(long)]
    sides_out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MetricArg {
    Disconnection,
    Diameter,
    AvgPath,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ResiliencyArgs {
    #[command(flatten)]
    topo: TopoArgs,
    #[arg(long, value_enum, default_value_t = MetricArg::Disconnection)]
    metric: MetricArg,
    /// Allowed growth of the diameter or average distance.
    #[arg(long)]
    max_increase: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    increment: f64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = 0.02)]
    ci_width: f64,
    #[arg(long, default_value_t = 0.5)]
    cutoff: f64,
    #[arg(long, default_value_t = 40_000)]
    max_trials: usize,
    #[command(flatten)]
    common: Common,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_pattern(s: &str) -> Result<TrafficPattern, String> {
    s.parse()
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SimulateArgs {
    #[command(flatten)]
    topo: TopoArgs,
    /// min, val, ugal_l, ugal_g or anca.
    #[arg(long, value_parser = parse_algorithm, default_value = "min")]
    routing: Algorithm,
    /// uniform, shuffle, bit-reversal, bit-complement, shift or worstcase.
    #[arg(long, value_parser = parse_pattern, default_value = "uniform")]
    pattern: TrafficPattern,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    loads: String,
    #[arg(long, default_value_t = 64)]
    buffer_flits: u32,
    #[arg(long, default_value_t = 16)]
    output_buffer_flits: u32,
    #[arg(long)]
    vc_count: Option<u32>,
    #[arg(long, default_value_t = 4)]
    ugal_candidates: usize,
    /// Redraw Valiant intermediates until the route has at most three hops.
    #[arg(long)]
    valiant_cap_three: bool,
    #[arg(long, default_value_t = 5000)]
    measure_cycles: u64,
    #[arg(long, default_value_t = 100_000)]
    warmup_max_cycles: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct CostArgs {
    #[command(flatten)]
    topo: TopoArgs,
    #[arg(long, default_value = "fdr10")]
    preset: String,
    /// JSON file with a full set of cost coefficients, replacing the preset.
    #[arg(long)]
    cost_config: Option<PathBuf>,
    /// Radix to price routers at instead of the built topology's.
    #[arg(long)]
    radix: Option<u32>,
    /// Emit the comparison table of ~10K-endpoint networks instead.
    #[arg(long)]
    table: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FamilyArg {
    Bdf,
    Del,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct MooreArgs {
    /// Network radix for a plain bound, or a formula-only BDF count.
    #[arg(long)]
    radix: Option<u64>,
    #[arg(long, default_value_t = 2)]
    diameter: u32,
    /// Compare a Slim Fly of this field order with its bound.
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    u: Option<u64>,
    #[arg(long)]
    v: Option<u64>,
    #[command(flatten)]
    common: Common,
}

/// Re-apply `--config`, keeping the output location from the command line.
macro_rules! resolved {
    ($name:literal, $args:expr) => {{
        let original = $args.common.clone();
        let mut args = resolve($name, $args, &original)?;
        args.common.config = original.config;
        args.common.out = original.out;
        args
    }};
}

#[derive(Serialize)]
struct GenerateRow {
    kind: String,
    routers: usize,
    endpoints: usize,
    links: usize,
    network_radix: u32,
    router_radix: u32,
    concentration: u32,
    groups: usize,
    edge_list: String,
    descriptor: String,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let args = resolved!("generate", args);
    let topo = args.topo.build(args.common.seed)?;
    let config = config_value("generate", &args);
    let name = args.name.clone().unwrap_or_else(|| {
        let t = &args.topo;
        let main = t.q.or(t.p.map(u64::from)).or(t.k.map(u64::from)).or(t.n.map(u64::from)).or(t.routers.map(u64::from));
        let kind = serde_json::to_value(t.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        match main {
            Some(m) => format!("{kind}_{m}"),
            None => kind,
        }
    });
    std::fs::create_dir_all(&args.out_dir)?;
    let edge_path = args.out_dir.join(format!("{name}.edges"));
    let desc_path = args.out_dir.join(format!("{name}.json"));
    std::fs::write(&edge_path, header_lines(&config) + &topo.to_edge_list())
        .with_context(|| format!("writing {}", edge_path.display()))?;
    std::fs::write(&desc_path, serde_json::to_string_pretty(&topo.descriptor())? + "\n")
        .with_context(|| format!("writing {}", desc_path.display()))?;
    let row = GenerateRow {
        kind: topo.kind().to_string(),
        routers: topo.num_routers(),
        endpoints: topo.num_endpoints(),
        links: topo.num_edges(),
        network_radix: topo.network_radix() as u32,
        router_radix: topo.router_radix() as u32,
        concentration: topo.concentration() as u32,
        groups: topo.num_groups(),
        edge_list: edge_path.display().to_string(),
        descriptor: desc_path.display().to_string(),
    };
    emit(&args.common, &config, None, &[row])
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let args = resolved!("analyze", args);
    let topo = args.topo.build(args.common.seed)?;
    let report = structural_report(&topo, args.restarts, split_seed(args.common.seed, BISECTION_STREAM), args.link_gbps);
    emit(&args.common, &config_value("analyze", &args), None, &[report])
}

#[derive(Serialize)]
struct BisectionRow {
    routers: usize,
    links: usize,
    restarts: usize,
    best: usize,
    median: usize,
    /// Closed-form endpoint bisection, where the topology has one.
    analytic_endpoints: Option<u64>,
}

fn bisection(args: BisectionArgs) -> Result<()> {
    let args = resolved!("bisection", args);
    let topo = args.topo.build(args.common.seed)?;
    if topo.num_routers() < 2 {
        bail!("bisection needs at least two routers");
    }
    let b = bisection_heuristic(&topo, args.restarts, split_seed(args.common.seed, BISECTION_STREAM));
    if let Some(path) = &args.sides_out {
        let text: String = b.sides.iter().map(|&s| if s { "1\n" } else { "0\n" }).collect();
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let row = BisectionRow {
        routers: topo.num_routers(),
        links: topo.num_edges(),
        restarts: b.restarts,
        best: b.best,
        median: b.median,
        analytic_endpoints: analytic_bisection(
            topo.kind(),
            topo.num_endpoints() as u64,
            topo.network_radix() as u64,
            topo.concentration() as u64,
        )
        .ok(),
    };
    emit(&args.common, &config_value("bisection", &args), None, &[row])
}

fn resiliency(args: ResiliencyArgs) -> Result<()> {
    let args = resolved!("resiliency", args);
    let topo = args.topo.build(args.common.seed)?;
    let metric = match args.metric {
        MetricArg::Disconnection => FailureMetric::Disconnection,
        MetricArg::Diameter => match args.max_increase {
            Some(m) => FailureMetric::DiameterIncrease { max_increase: m.round() as u32 },
            None => FailureMetric::DIAMETER,
        },
        MetricArg::AvgPath => match args.max_increase {
            Some(m) => FailureMetric::AvgPathIncrease { max_increase: m },
            None => FailureMetric::AVG_PATH,
        },
    };
    let exp = FailureExperiment {
        metric,
        increment: args.increment,
        confidence: args.confidence,
        ci_width: args.ci_width,
        cutoff: args.cutoff,
        max_trials: args.max_trials,
        seed: split_seed(args.common.seed, RESILIENCY_STREAM),
        ..Default::default()
    };
    let report = survivable_fraction(&topo, &exp)?;
    let reference = match metric {
        FailureMetric::Disconnection => reference_disconnection(topo.kind(), topo.num_endpoints() as u64).ok(),
        _ => None,
    };
    let summary = json!({
        "links": report.links,
        "threshold": report.threshold,
        "reference_threshold_percent": reference,
    });
    emit(&args.common, &config_value("resiliency", &args), Some(summary), &report.curve)
}

fn parse_loads(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let loads = if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()?;
        if v[2] <= 0.0 || v[1] < v[0] {
            bail!("load range {text:?} must be start:stop:step with step > 0");
        }
        slimfly::sim::load_range(v[0], v[1], v[2])
    } else {
        text.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()?
    };
    if loads.is_empty() {
        bail!("no loads given");
    }
    Ok(loads)
}

#[derive(Serialize)]
struct SimRow {
    load: f64,
    routing: String,
    pattern: TrafficPattern,
    measured_offered: f64,
    accepted: f64,
    mean_latency: f64,
    p50_latency: f64,
    p99_latency: f64,
    max_latency: u64,
    mean_hops: f64,
    packets: u64,
    active_sources: usize,
    warmup_cycles: u64,
    steady: bool,
    drained: bool,
    saturated: bool,
    max_channel_utilization: f64,
    /// Channel counts per utilization decile, `;`-separated.
    utilization_histogram: String,
}

impl SimRow {
    fn new(load: f64, s: &SimStats) -> Self {
        SimRow {
            load,
            routing: s.routing.to_string(),
            pattern: s.pattern,
            measured_offered: s.measured_offered,
            accepted: s.accepted,
            mean_latency: s.mean_latency,
            p50_latency: s.p50_latency,
            p99_latency: s.p99_latency,
            max_latency: s.max_latency,
            mean_hops: s.mean_hops,
            packets: s.packets_measured,
            active_sources: s.active_sources,
            warmup_cycles: s.warmup_cycles,
            steady: s.steady,
            drained: s.drained,
            saturated: s.saturated,
            max_channel_utilization: s.max_channel_utilization,
            utilization_histogram: s.channel_utilization_histogram.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let args = resolved!("simulate", args);
    let topo = args.topo.build(args.common.seed)?;
    let loads = parse_loads(&args.loads)?;
    let traffic = traffic_for(&topo, args.pattern)?;
    let cfg = SimConfig {
        routing: args.routing,
        buffer_flits_per_port: args.buffer_flits,
        output_buffer_flits: args.output_buffer_flits,
        vc_count: args.vc_count,
        ugal_candidates: args.ugal_candidates,
        valiant_cap_three: args.valiant_cap_three,
        measure_cycles: args.measure_cycles,
        warmup_max_cycles: args.warmup_max_cycles,
        seed: split_seed(args.common.seed, SIM_STREAM),
        ..Default::default()
    };
    cfg.validate()?;
    let results = sweep(&topo, &cfg, &traffic, &loads);
    let mut rows = Vec::with_capacity(loads.len());
    for (&load, r) in loads.iter().zip(&results) {
        match r {
            Ok(stats) => rows.push(SimRow::new(load, stats)),
            Err(e) => return Err(e.clone()).with_context(|| format!("load {load}")),
        }
    }
    let summary = json!({
        "saturation_load": saturation_point(&loads, &results),
        "zero_load_latency_per_hop": [cfg.zero_load_latency(0), cfg.zero_load_latency(1)],
    });
    emit(&args.common, &config_value("simulate", &args), Some(summary), &rows)
}

fn cost(args: CostArgs) -> Result<()> {
    let args = resolved!("cost", args);
    let params = match &args.cost_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).context("cost config must be a JSON set of cost coefficients")?
        }
        None => CostParams::preset(&args.preset)?,
    };
    let rows = if args.table {
        comparison_table(&params)?
    } else {
        let topo = args.topo.build(args.common.seed)?;
        vec![table_row(&topo, &params, args.radix)?]
    };
    emit(&args.common, &config_value("cost", &args), None, &rows)
}

#[derive(Serialize)]
struct MooreRow {
    construction: String,
    network_radix: u64,
    diameter: u32,
    moore_bound: String,
    routers: String,
    fraction_of_bound: f64,
}

fn moore(args: MooreArgs) -> Result<()> {
    let args = resolved!("moore", args);
    let row = if let Some(q) = args.q {
        let Some((delta, _)) = mms_delta(q) else { bail!("q = {q} has no MMS construction (q = 2 mod 4)") };
        let k = ((3 * q as i64 - delta as i64) / 2) as u64;
        let routers = 2 * (q as u128) * (q as u128);
        let bound = moore_bound(k, 2);
        MooreRow {
            construction: format!("mms q={q}"),
            network_radix: k,
            diameter: 2,
            moore_bound: bound.to_string(),
            routers: routers.to_string(),
            fraction_of_bound: routers as f64 / bound as f64,
        }
    } else if let Some(family) = args.family {
        let (name, k, routers) = match (family, args.u, args.v, args.radix) {
            (FamilyArg::Del, _, Some(v), _) => {
                let (k, n) = diam3_counts(Diam3Family::Del { v })?;
                (format!("del v={v}"), k, n as f64)
            }
            (FamilyArg::Bdf, Some(u), _, _) => {
                let (k, n) = diam3_counts(Diam3Family::Bdf { u })?;
                (format!("bdf u={u}"), k, n as f64)
            }
            (FamilyArg::Bdf, None, _, Some(k)) => {
                let n = bdf_router_count(k);
                ("bdf formula".to_string(), k, *n.numer() as f64 / *n.denom() as f64)
            }
            (FamilyArg::Del, ..) => bail!("--family del needs --v"),
            (FamilyArg::Bdf, ..) => bail!("--family bdf needs --u or --radix"),
        };
        let bound = moore_bound(k, 3);
        MooreRow {
            construction: name,
            network_radix: k,
            diameter: 3,
            moore_bound: bound.to_string(),
            routers: format!("{routers}"),
            fraction_of_bound: routers / bound as f64,
        }
    } else if let Some(k) = args.radix {
        let bound = moore_bound(k, args.diameter);
        MooreRow {
            construction: "bound".into(),
            network_radix: k,
            diameter: args.diameter,
            moore_bound: bound.to_string(),
            routers: bound.to_string(),
            fraction_of_bound: 1.0,
        }
    } else {
        bail!("moore needs --q, --family or --radix");
    };
    emit(&args.common, &config_value("moore", &args), None, &[row])
}

/// Variant name of the first recognised error in the chain.
fn error_kind(err: &anyhow::Error) -> String {
    fn variant(debug: String) -> String {
        debug.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("Error").to_string()
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<slimfly::TopologyError>() {
            return variant(format!("{e:?}"));
        }
        if let Some(e) = cause.downcast_ref::<slimfly::sim::SimError>() {
            return variant(format!("{e:?}"));
        }
        if let Some(e) = cause.downcast_ref::<slimfly::sim::TrafficError>() {
            return variant(format!("{e:?}"));
        }
        if let Some(e) = cause.downcast_ref::<slimfly::costpower::CostError>() {
            return variant(format!("{e:?}"));
        }
        if let Some(e) = cause.downcast_ref::<slimfly::resiliency::ResiliencyError>() {
            return variant(format!("{e:?}"));
        }
        if cause.downcast_ref::<topo::MissingParameter>().is_some() {
            return "MissingParameter".into();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "Io".into();
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "Config".into();
        }
    }
    "Error".into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
        Command::Bisection(a) => bisection(a),
        Command::Resiliency(a) => resiliency(a),
        Command::Simulate(a) => simulate(a),
        Command::Cost(a) => cost(a),
        Command::Moore(a) => moore(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": { "kind": error_kind(&e), "message": format!("{e:#}") } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
