//! Recorded executions and their canonical JSON-lines serialization.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ComponentId, ExecutionRecord, Message, MessageId};
use crate::ads::AdsConfig;
use crate::error::{DvcaError, Result};
use crate::oracles::{OracleConfig, Verdict};
use crate::scenario::{Scenario, Waypoint};
use crate::substitutes::SubstitutionPlan;
use crate::time::SimTime;
use crate::Vec2;

/// Everything that determines a run besides the scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ads: AdsConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub plan: SubstitutionPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: Scenario,
    pub config: RunConfig,
}

/// One entry of the ego log, sampled every 10 ms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSample {
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    pub p: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    /// Distance to the closest scenario object, if any exist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_dist: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nearest: Option<u32>,
}

impl EgoSample {
    pub fn waypoint(&self) -> Waypoint {
        let dir = Vec2::from_angle(self.heading);
        Waypoint { t: self.t, p: self.p, v: dir.scale(self.speed), a: dir.scale(self.accel) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationEvent {
    pub component: ComponentId,
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    /// 1-based index of the state the run was in when the substitute engaged.
    pub state_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub component: ComponentId,
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    pub message: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    #[default]
    Completed,
    Collision,
    /// Stopped at the first violation because only the verdict was needed.
    ViolationCutoff,
    Panic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub rows: [Vec<Message>; 5],
    pub records: Vec<ExecutionRecord>,
    pub ego_log: Vec<EgoSample>,
    pub activations: Vec<ActivationEvent>,
    pub diagnostics: Vec<Diagnostic>,
    pub end: EndReason,
    pub verdict: Verdict,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(TraceHeader),
    Message(Message),
    Exec(ExecutionRecord),
    Ego(EgoSample),
    Activation(ActivationEvent),
    Diagnostic(Diagnostic),
    End { reason: EndReason },
    Verdict(Verdict),
}

impl Trace {
    pub fn row(&self, c: ComponentId) -> &[Message] {
        &self.rows[c.index()]
    }

    pub fn message(&self, id: MessageId) -> Option<&Message> {
        self.row(id.component).get((id.seq as usize).checked_sub(1)?)
    }

    pub fn total_messages(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// All messages ordered by publish time, then priority, then seq.
    pub fn messages_in_order(&self) -> Vec<&Message> {
        let mut all: Vec<&Message> = self.rows.iter().flatten().collect();
        all.sort_by_key(|m| (m.t_pub, m.component, m.seq));
        all
    }

    /// Ego sample at exactly `t`, if `t` is a sample time inside the log.
    pub fn ego_at(&self, t: SimTime) -> Option<&EgoSample> {
        let i = self.ego_log.partition_point(|s| s.t < t);
        self.ego_log.get(i).filter(|s| s.t == t)
    }

    pub fn waypoints(&self) -> Vec<Waypoint> {
        self.ego_log.iter().map(EgoSample::waypoint).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("json is utf-8")
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut line = |r: &Record| -> std::io::Result<()> {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")
        };
        line(&Record::Header(self.header.clone()))?;
        for m in self.messages_in_order() {
            line(&Record::Message(m.clone()))?;
        }
        for r in &self.records {
            line(&Record::Exec(r.clone()))?;
        }
        for s in &self.ego_log {
            line(&Record::Ego(*s))?;
        }
        for a in &self.activations {
            line(&Record::Activation(a.clone()))?;
        }
        for d in &self.diagnostics {
            line(&Record::Diagnostic(d.clone()))?;
        }
        line(&Record::End { reason: self.end })?;
        line(&Record::Verdict(self.verdict.clone()))
    }

    pub fn from_jsonl(text: &str) -> Result<Trace> {
        let mut header = None;
        let mut rows: [Vec<Message>; 5] = Default::default();
        let mut trace_records = Vec::new();
        let mut ego_log = Vec::new();
        let mut activations = Vec::new();
        let mut diagnostics = Vec::new();
        let mut end = None;
        let mut verdict = None;
        for (n, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(raw).map_err(|e| DvcaError::Parse(format!("trace line {}: {e}", n + 1)))?;
            match rec {
                Record::Header(h) => header = Some(h),
                Record::Message(m) => rows[m.component.index()].push(m),
                Record::Exec(r) => trace_records.push(r),
                Record::Ego(s) => ego_log.push(s),
                Record::Activation(a) => activations.push(a),
                Record::Diagnostic(d) => diagnostics.push(d),
                Record::End { reason } => end = Some(reason),
                Record::Verdict(v) => verdict = Some(v),
            }
        }
        for row in &rows {
            for (i, m) in row.iter().enumerate() {
                if m.seq as usize != i + 1 {
                    return Err(DvcaError::Parse(format!("{} row is not densely sequenced at {}", m.component, m.seq)));
                }
            }
        }
        Ok(Trace {
            header: header.ok_or_else(|| DvcaError::Parse("trace has no header".into()))?,
            rows,
            records: trace_records,
            ego_log,
            activations,
            diagnostics,
            end: end.ok_or_else(|| DvcaError::Parse("trace has no end record".into()))?,
            verdict: verdict.ok_or_else(|| DvcaError::Parse("trace has no verdict".into()))?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_jsonl()).map_err(|e| DvcaError::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Trace> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| DvcaError::io(path.as_ref(), e))?;
        Trace::from_jsonl(&text)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_jsonl().as_bytes());
        hex::encode(h.finalize())
    }
}

/// Messages of `component` with seq ≥ `i` (1-based; `i` may be one past the end).
pub fn trace_suffix(trace: &Trace, component: ComponentId, i: usize) -> Result<&[Message]> {
    let row = trace.row(component);
    if i == 0 || i > row.len() + 1 {
        return Err(DvcaError::Index { index: i, max: row.len() + 1 });
    }
    Ok(&row[i - 1..])
}
