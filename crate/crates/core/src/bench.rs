//! Frozen injected-fault benchmark: configuration, execution and scoring.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ads::faults::{load_faults, FaultSpec};
use crate::ads::AdsConfig;
use crate::dvca::{run_and_attribute, AttributeOptions, AttributionReport, AuditStatus};
use crate::error::{DvcaError, Result};
use crate::middleware::trace::{RunConfig, Trace};
use crate::middleware::ComponentId;
use crate::oracles::{OracleConfig, ViolationKind, REAR_APPROACH};
use crate::scenario::load_scenario;
use crate::time::SimTime;

/// A control miss this close to a fault-affected output still counts as near.
pub const NEAR_MISS_MS: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub id: String,
    /// Scenario file, relative to the benchmark file.
    pub scenario: PathBuf,
    /// Fault file, relative to the benchmark file.
    pub fault: PathBuf,
    pub expected_violation: ViolationKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub instances: Vec<BenchInstance>,
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<BenchConfig> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| DvcaError::io(path.as_ref(), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub id: String,
    pub fault_kind: String,
    pub expected_component: ComponentId,
    pub expected_violation: ViolationKind,
    pub observed_violation: Option<ViolationKind>,
    pub attributed_component: Option<ComponentId>,
    pub component_ok: bool,
    pub message_ok: bool,
    /// Control only: a miss within one second of a fault-affected output.
    pub message_near: bool,
    pub focus: Option<String>,
    pub total_messages: usize,
    pub reduction_rate: Option<f64>,
    pub dtests: usize,
    pub component_dtests: usize,
    pub message_dtests: usize,
    pub simulations: usize,
    pub states: usize,
    pub wall_time: f64,
    pub audit: AuditStatus,
    pub linear_matches: Option<bool>,
    /// Rear-approach violations are reported but not scored.
    #[serde(default)]
    pub excluded: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub component: Option<ComponentId>,
    pub instances: usize,
    pub component_success: f64,
    pub message_success: f64,
    pub avg_reduction_rate: f64,
    pub avg_wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
    pub per_component: Vec<ComponentStats>,
    pub overall: ComponentStats,
    pub total_wall_time: f64,
}

impl BenchSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "id,fault_kind,expected_component,attributed_component,component_ok,message_ok,message_near,focus,reduction_rate,dtests,simulations,wall_time,error\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{:.3},{}\n",
                r.id,
                r.fault_kind,
                r.expected_component,
                r.attributed_component.map_or(String::new(), |c| c.to_string()),
                r.component_ok,
                r.message_ok,
                r.message_near,
                r.focus.clone().unwrap_or_default(),
                r.reduction_rate.map_or(String::new(), |x| format!("{x:.6}")),
                r.dtests,
                r.simulations,
                r.wall_time,
                r.error.clone().unwrap_or_default().replace(',', ";"),
            ));
        }
        s
    }
}

fn stats(component: Option<ComponentId>, rows: &[&BenchRow]) -> ComponentStats {
    let rows: Vec<&BenchRow> = rows.iter().copied().filter(|r| !r.excluded).collect();
    let n = rows.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let rates: Vec<f64> = rows.iter().filter_map(|r| r.reduction_rate).collect();
    ComponentStats {
        component,
        instances: n,
        component_success: frac(rows.iter().filter(|r| r.component_ok).count()),
        message_success: frac(rows.iter().filter(|r| r.message_ok).count()),
        avg_reduction_rate: if rates.is_empty() { 0.0 } else { rates.iter().sum::<f64>() / rates.len() as f64 },
        avg_wall_time: if n == 0 { 0.0 } else { rows.iter().map(|r| r.wall_time).sum::<f64>() / n as f64 },
    }
}

/// Whether a fault-affected output of `component` lies within `window_ms` of `t`.
pub fn near_fault(trace: &Trace, component: ComponentId, t: SimTime, window_ms: u64) -> bool {
    trace.row(component).iter().any(|m| m.fault_injected && (m.t_pub - t).unsigned_abs() <= window_ms)
}

/// Attributes one instance and scores it against its injected fault.
pub fn run_instance(base: &Path, inst: &BenchInstance, oracle: &OracleConfig, opts: &AttributeOptions) -> BenchRow {
    let start = Instant::now();
    let mut row = BenchRow {
        id: inst.id.clone(),
        fault_kind: String::new(),
        expected_component: ComponentId::Planning,
        expected_violation: inst.expected_violation,
        observed_violation: None,
        attributed_component: None,
        component_ok: false,
        message_ok: false,
        message_near: false,
        focus: None,
        total_messages: 0,
        reduction_rate: None,
        dtests: 0,
        component_dtests: 0,
        message_dtests: 0,
        simulations: 0,
        states: 0,
        wall_time: 0.0,
        audit: AuditStatus::NotRun,
        linear_matches: None,
        excluded: false,
        error: None,
    };
    let outcome = (|| -> Result<(Vec<FaultSpec>, Trace, AttributionReport)> {
        let scenario = load_scenario(base.join(&inst.scenario))?;
        let faults = load_faults(base.join(&inst.fault))?;
        let cfg = RunConfig { ads: AdsConfig::with_faults(faults.clone()), oracle: oracle.clone(), ..RunConfig::default() };
        let (trace, report) = run_and_attribute(&scenario, &cfg, opts)?;
        Ok((faults, trace, report))
    })();
    match outcome {
        Ok((faults, trace, report)) => {
            let expected = faults.first().map_or(ComponentId::Planning, |f| f.target);
            row.fault_kind = faults.iter().map(|f| f.kind.name()).collect::<Vec<_>>().join("+");
            row.expected_component = expected;
            row.observed_violation = report.violation.as_ref().map(|v| v.kind);
            row.attributed_component = Some(report.component_vi);
            row.component_ok = report.component_vi == expected;
            row.message_ok = row.component_ok && report.focus_fault_injected;
            row.message_near = row.component_ok
                && !row.message_ok
                && expected == ComponentId::Control
                && near_fault(&trace, expected, report.focus_t_pub, NEAR_MISS_MS);
            row.focus = Some(report.focus_message.to_string());
            row.total_messages = report.total_messages;
            row.reduction_rate = Some(report.reduction_rate);
            row.dtests = report.dtest_invocations;
            row.component_dtests = report.component_dtests;
            row.message_dtests = report.message_dtests;
            row.simulations = report.simulations;
            row.states = report.states;
            row.audit = report.monotonicity_audit;
            row.linear_matches = report.linear_scan_state.map(|_| report.monotonicity_audit == AuditStatus::Pass);
            row.excluded = report.violation.as_ref().is_some_and(|v| v.detail.contains(REAR_APPROACH));
        }
        Err(e) => {
            if let Ok(faults) = load_faults(base.join(&inst.fault)) {
                row.fault_kind = faults.iter().map(|f| f.kind.name()).collect::<Vec<_>>().join("+");
                row.expected_component = faults.first().map_or(ComponentId::Planning, |f| f.target);
            }
            row.error = Some(e.to_string());
        }
    }
    row.wall_time = start.elapsed().as_secs_f64();
    row
}

/// Runs every instance, `parallel` at a time, and aggregates the results.
pub fn run_bench(path: impl AsRef<Path>, oracle: &OracleConfig, opts: &AttributeOptions, parallel: usize) -> Result<BenchSummary> {
    let start = Instant::now();
    let cfg = BenchConfig::load(path.as_ref())?;
    let base = path.as_ref().parent().unwrap_or(Path::new(".")).to_path_buf();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| DvcaError::DegenerateInput(format!("thread pool: {e}")))?;
    let rows: Vec<BenchRow> = pool.install(|| cfg.instances.par_iter().map(|i| run_instance(&base, i, oracle, opts)).collect());
    Ok(summarize(rows, start.elapsed().as_secs_f64()))
}

pub fn summarize(rows: Vec<BenchRow>, total_wall_time: f64) -> BenchSummary {
    let per_component = ComponentId::PRIORITY
        .iter()
        .map(|c| stats(Some(*c), &rows.iter().filter(|r| r.expected_component == *c).collect::<Vec<_>>()))
        .filter(|s| s.instances > 0)
        .collect();
    let overall = stats(None, &rows.iter().collect::<Vec<_>>());
    BenchSummary { rows, per_component, overall, total_wall_time }
}
