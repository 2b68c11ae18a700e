//! Root-cause attribution over a failing trace.

pub mod component;
pub mod message;
pub mod report;
pub mod search;
pub mod tarantula;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{DvcaError, Result};
use crate::middleware::trace::{RunConfig, Trace};
use crate::middleware::ComponentId;
use crate::scenario::Scenario;
use crate::substitutes::split_trace;
use crate::world::rtest;

pub use component::{attribute_component, ComponentOutcome};
pub use message::{attribute_message_interval, attribute_message_nonplanning, attribute_message_planning, monotonicity_audit, SuffixOracle};
pub use report::{reduction_rate, verdict_matrix, AttributionReport, AuditStatus};
pub use tarantula::{planning_suspiciousness, tarantula_scores};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Binary,
    IntervalDd,
}

impl std::str::FromStr for Strategy {
    type Err = DvcaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Strategy::Binary),
            "interval-dd" => Ok(Strategy::IntervalDd),
            other => Err(DvcaError::Parse(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttributeOptions {
    pub strategy: Strategy,
    /// Also run the exhaustive suffix scan and fail on non-monotone results.
    pub audit: bool,
    /// Issue independent re-runs concurrently.
    pub parallel: bool,
}

impl Default for AttributeOptions {
    fn default() -> Self {
        AttributeOptions { strategy: Strategy::Binary, audit: false, parallel: true }
    }
}

/// Runs the scenario once and attributes its violation.
pub fn run_and_attribute(scenario: &Scenario, cfg: &RunConfig, opts: &AttributeOptions) -> Result<(Trace, AttributionReport)> {
    let start = Instant::now();
    let (_, _, trace) = rtest(scenario, &cfg.ads, &cfg.oracle)?;
    let mut report = attribute(&trace, opts)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((trace, report))
}

/// Attributes the violation of an original failing trace.
pub fn attribute(trace: &Trace, opts: &AttributeOptions) -> Result<AttributionReport> {
    let start = Instant::now();
    let comp = attribute_component(trace, opts.parallel)?;
    let component_dtests = comp.dtests();
    let states = split_trace(trace);
    let mut notes = Vec::new();
    let mut message_probes = Vec::new();
    let mut interval = None;
    let mut audit = AuditStatus::NotRun;
    let mut linear_scan_state = None;
    let mut tarantula = Vec::new();
    let mut message_dtests = 0;

    let focus = if comp.component == ComponentId::Planning {
        let focus = attribute_message_planning(trace, &trace.header.config.oracle)?;
        match planning_suspiciousness(trace, focus) {
            Ok(s) => tarantula = s,
            Err(e) => notes.push(format!("tarantula skipped: {e}")),
        }
        focus
    } else {
        let mut oracle = SuffixOracle::new(trace, &states, comp.component);
        // The single-component IdealAll run is the suffix from the first state.
        oracle.seed(1, true);
        let outcome = match opts.strategy {
            Strategy::Binary => attribute_message_nonplanning(&mut oracle)?,
            Strategy::IntervalDd => {
                let (iv, o) = attribute_message_interval(&mut oracle)?;
                interval = Some(iv);
                o
            }
        };
        message_dtests = oracle.dtests();
        message_probes = outcome.probes.clone();
        if opts.audit {
            let scan = monotonicity_audit(&mut oracle)?;
            linear_scan_state = scan.last_pass;
            if !scan.monotone() {
                return Err(DvcaError::MonotonicityViolation { component: comp.component, at: scan.non_monotone });
            }
            audit = AuditStatus::Pass;
            if opts.strategy == Strategy::Binary && scan.last_pass != Some(outcome.state) {
                notes.push(format!("linear scan boundary {:?} differs from binary search {}", scan.last_pass, outcome.state));
                audit = AuditStatus::Fail;
            }
        }
        outcome.focus
    };

    let focus_msg = trace.message(focus).expect("focus comes from the trace");
    let total = trace.total_messages();
    Ok(AttributionReport {
        scenario: trace.header.scenario.name.clone(),
        violation: trace.verdict.violations.first().cloned(),
        component_vi: comp.component,
        focus_message: focus,
        focus_t_pub: focus_msg.t_pub,
        focus_fault_injected: focus_msg.fault_injected,
        verdict_matrix: verdict_matrix(trace, focus),
        total_messages: total,
        reduction_rate: reduction_rate(total),
        dtest_invocations: component_dtests + message_dtests,
        component_dtests,
        message_dtests,
        simulations: 1 + component_dtests + message_dtests,
        wall_time: start.elapsed().as_secs_f64(),
        states: states.len(),
        monotonicity_audit: audit,
        linear_scan_state,
        component_probes: comp.probes,
        message_probes,
        interval,
        tarantula,
        notes,
    })
}
