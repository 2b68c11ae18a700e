//! Attribution report and verdict-matrix construction.

use serde::{Deserialize, Serialize};

use super::component::ComponentProbe;
use super::search::Probe;
use super::tarantula::Suspiciousness;
use crate::middleware::trace::Trace;
use crate::middleware::{ComponentId, Label, LabeledMessage, MessageId, VerdictMatrix};
use crate::oracles::Violation;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditStatus {
    #[default]
    NotRun,
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub scenario: String,
    pub violation: Option<Violation>,
    pub component_vi: ComponentId,
    pub focus_message: MessageId,
    #[serde(rename = "focus_t_pub_ms")]
    pub focus_t_pub: SimTime,
    pub focus_fault_injected: bool,
    pub verdict_matrix: VerdictMatrix,
    pub total_messages: usize,
    pub reduction_rate: f64,
    /// Re-simulations issued by attribution (excludes the original run).
    pub dtest_invocations: usize,
    pub component_dtests: usize,
    pub message_dtests: usize,
    /// All simulations including the original run.
    pub simulations: usize,
    pub wall_time: f64,
    pub states: usize,
    pub monotonicity_audit: AuditStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_scan_state: Option<usize>,
    pub component_probes: Vec<ComponentProbe>,
    pub message_probes: Vec<Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tarantula: Vec<Suspiciousness<f64>>,
    pub notes: Vec<String>,
}

/// `1 - 1/|M|`.
pub fn reduction_rate(total_messages: usize) -> f64 {
    if total_messages == 0 {
        0.0
    } else {
        1.0 - 1.0 / total_messages as f64
    }
}

/// Focus ✗, later outputs of the same component ?, everything else ✓.
pub fn verdict_matrix(trace: &Trace, focus: MessageId) -> VerdictMatrix {
    let mut entries = Vec::with_capacity(trace.total_messages());
    for c in ComponentId::PRIORITY {
        for m in trace.row(c) {
            let label = if m.id() == focus {
                Label::Fail
            } else if c == focus.component && m.seq > focus.seq {
                Label::Unresolved
            } else {
                Label::Pass
            };
            entries.push(LabeledMessage { component: c, seq: m.seq, t_pub: m.t_pub, label });
        }
    }
    VerdictMatrix { entries }
}
