//! `dvca`: run scenarios, attribute violations, run the benchmark, replay traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dvca_core::ads::faults::load_faults;
use dvca_core::ads::AdsConfig;
use dvca_core::bench::run_bench;
use dvca_core::dvca::{run_and_attribute, AttributeOptions, Strategy};
use dvca_core::middleware::trace::{RunConfig, Trace};
use dvca_core::scenario::{bbox_at, load_scenario, Scenario};
use dvca_core::world::rtest;
use dvca_core::{DvcaError, OracleConfig};

const EXIT_PASS: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_NO_VIOLATION: u8 = 3;
const EXIT_UNATTRIBUTABLE: u8 = 4;

#[derive(Parser)]
#[command(name = "dvca", version, about = "Driving-violation cause attribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Oracle configuration (JSON).
    #[arg(long)]
    oracle_config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Bound on concurrent re-simulations.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct SearchFlags {
    /// Run the exhaustive suffix scan alongside the search.
    #[arg(long)]
    audit_monotonicity: bool,
    #[arg(long, default_value = "binary", value_parser = ["binary", "interval-dd"])]
    strategy: String,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trace and verdict.
    Run {
        scenario: PathBuf,
        /// Fault file (one spec or a list).
        #[arg(long)]
        fault: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate and attribute the violation to a component and message.
    Attribute {
        scenario: PathBuf,
        #[arg(long)]
        fault: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Attribute every instance of a benchmark file.
    Bench {
        benchmark: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Emit plot data from a recorded trace.
    Replay {
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(match e.downcast_ref::<DvcaError>() {
                Some(DvcaError::NoViolation) => EXIT_NO_VIOLATION,
                Some(DvcaError::Unattributable { .. }) => EXIT_UNATTRIBUTABLE,
                _ => EXIT_ERROR,
            })
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run { scenario, fault, common } => cmd_run(&scenario, fault.as_deref(), &common),
        Command::Attribute { scenario, fault, common, search } => cmd_attribute(&scenario, fault.as_deref(), &common, &search),
        Command::Bench { benchmark, common, search } => cmd_bench(&benchmark, &common, &search),
        Command::Replay { trace, common } => cmd_replay(&trace, &common),
    }
}

fn oracle_config(common: &Common) -> Result<OracleConfig> {
    match &common.oracle_config {
        None => Ok(OracleConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn setup(scenario: &Path, fault: Option<&Path>, common: &Common) -> Result<(Scenario, RunConfig)> {
    let mut sc = load_scenario(scenario)?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    let faults = match fault {
        Some(f) => load_faults(f)?,
        None => Vec::new(),
    };
    let cfg = RunConfig { ads: AdsConfig::with_faults(faults), oracle: oracle_config(common)?, ..RunConfig::default() };
    std::fs::create_dir_all(&common.out_dir).with_context(|| format!("creating {}", common.out_dir.display()))?;
    Ok((sc, cfg))
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pool(n: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().context("building thread pool")
}

fn strategy(s: &SearchFlags) -> Result<Strategy> {
    Ok(s.strategy.parse()?)
}

fn cmd_run(scenario: &Path, fault: Option<&Path>, common: &Common) -> Result<u8> {
    let (sc, cfg) = setup(scenario, fault, common)?;
    let (verdict, _, trace) = rtest(&sc, &cfg.ads, &cfg.oracle)?;
    trace.save(common.out_dir.join("trace.jsonl"))?;
    write(common.out_dir.join("verdict.json"), serde_json::to_string_pretty(&verdict)?)?;
    println!("verdict: {}  messages: {}  digest: {}", verdict.symbol(), trace.total_messages(), trace.digest());
    for v in &verdict.violations {
        println!("  {:?} at {} ({})", v.kind, v.t, v.detail);
    }
    Ok(if verdict.passed { EXIT_PASS } else { EXIT_VIOLATION })
}

fn cmd_attribute(scenario: &Path, fault: Option<&Path>, common: &Common, search: &SearchFlags) -> Result<u8> {
    let (sc, cfg) = setup(scenario, fault, common)?;
    let opts = AttributeOptions { strategy: strategy(search)?, audit: search.audit_monotonicity, parallel: common.parallel > 1 };
    let (trace, report) = pool(common.parallel)?.install(|| run_and_attribute(&sc, &cfg, &opts))?;
    trace.save(common.out_dir.join("trace.jsonl"))?;
    write(common.out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    write(common.out_dir.join("verdict_matrix.csv"), report.verdict_matrix.to_csv())?;
    if let Some(v) = &report.violation {
        println!("violation: {:?} at {}", v.kind, v.t);
    }
    println!("component: {}", report.component_vi);
    println!("focus: {} at {}", report.focus_message, report.focus_t_pub);
    println!("reduction rate: {:.6} (|M| = {})", report.reduction_rate, report.total_messages);
    println!("dtests: {} (component {}, message {})", report.dtest_invocations, report.component_dtests, report.message_dtests);
    println!("wall time: {:.2} s", report.wall_time);
    Ok(EXIT_PASS)
}

fn cmd_bench(benchmark: &Path, common: &Common, search: &SearchFlags) -> Result<u8> {
    let oracle = oracle_config(common)?;
    let opts = AttributeOptions { strategy: strategy(search)?, audit: search.audit_monotonicity, parallel: common.parallel > 1 };
    let summary = run_bench(benchmark, &oracle, &opts, common.parallel)?;
    std::fs::create_dir_all(&common.out_dir).with_context(|| format!("creating {}", common.out_dir.display()))?;
    write(common.out_dir.join("bench_summary.json"), serde_json::to_string_pretty(&summary)?)?;
    write(common.out_dir.join("bench_summary.csv"), summary.to_csv())?;
    println!("{:<14} {:>5} {:>10} {:>10} {:>10} {:>9}", "component", "n", "comp_ok", "msg_ok", "reduction", "time_s");
    for s in summary.per_component.iter().chain(std::iter::once(&summary.overall)) {
        println!(
            "{:<14} {:>5} {:>9.1}% {:>9.1}% {:>10.6} {:>9.2}",
            s.component.map_or("overall".to_string(), |c| c.to_string()),
            s.instances,
            100.0 * s.component_success,
            100.0 * s.message_success,
            s.avg_reduction_rate,
            s.avg_wall_time
        );
    }
    for r in summary.rows.iter().filter(|r| r.error.is_some()) {
        println!("{}: {}", r.id, r.error.as_deref().unwrap_or_default());
    }
    println!("total wall time: {:.1} s", summary.total_wall_time);
    Ok(EXIT_PASS)
}

fn cmd_replay(path: &Path, common: &Common) -> Result<u8> {
    let trace = Trace::load(path)?;
    std::fs::create_dir_all(&common.out_dir).with_context(|| format!("creating {}", common.out_dir.display()))?;
    write(common.out_dir.join("replay.csv"), replay_csv(&trace))?;
    println!("{} samples", trace.ego_log.len());
    Ok(EXIT_PASS)
}

/// One row per ego sample: ego pose, minimum distance, then each object's center.
fn replay_csv(trace: &Trace) -> String {
    let sc = &trace.header.scenario;
    let mut out = String::from("t_ms,ego_x,ego_y,ego_heading,ego_speed,min_dist");
    for o in &sc.objects {
        let _ = write!(out, ",obj{}_x,obj{}_y", o.id, o.id);
    }
    out.push('\n');
    for s in &trace.ego_log {
        let _ = write!(
            out,
            "{},{:.4},{:.4},{:.5},{:.4},{}",
            s.t.ms(),
            s.p.x,
            s.p.y,
            s.heading,
            s.speed,
            s.min_dist.map_or(String::new(), |d| format!("{d:.4}"))
        );
        for o in &sc.objects {
            let c = bbox_at(o, s.t).center;
            let _ = write!(out, ",{:.4},{:.4}", c.x, c.y);
        }
        out.push('\n');
    }
    out
}
