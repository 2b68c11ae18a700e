//! In-process publish/subscribe bus with complete trace recording.

pub mod scheduler;
pub mod trace;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ads::{ControlOut, LocalizationOut, PerceptionOut, PlanningOut, PredictionOut};
use crate::error::{DvcaError, Result};
use crate::substitutes::StateKey;
use crate::time::SimTime;

/// Pipeline components. Declaration order is the same-tick firing priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentId {
    Localization,
    Perception,
    Prediction,
    Planning,
    Control,
}

impl ComponentId {
    /// Firing priority within one tick.
    pub const PRIORITY: [ComponentId; 5] = [
        ComponentId::Localization,
        ComponentId::Perception,
        ComponentId::Prediction,
        ComponentId::Planning,
        ComponentId::Control,
    ];

    /// Components that have an idealized substitute, in attribution order.
    pub const SUBSTITUTABLE: [ComponentId; 4] =
        [ComponentId::Perception, ComponentId::Prediction, ComponentId::Control, ComponentId::Localization];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ComponentId::Localization => "Localization",
            ComponentId::Perception => "Perception",
            ComponentId::Prediction => "Prediction",
            ComponentId::Planning => "Planning",
            ComponentId::Control => "Control",
        }
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ComponentId {
    type Err = DvcaError;
    fn from_str(s: &str) -> Result<Self> {
        ComponentId::PRIORITY
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DvcaError::Parse(format!("unknown component `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data")]
pub enum Payload {
    Perception(PerceptionOut),
    Prediction(PredictionOut),
    Planning(PlanningOut),
    Control(ControlOut),
    Localization(LocalizationOut),
}

impl Payload {
    pub fn component(&self) -> ComponentId {
        match self {
            Payload::Perception(_) => ComponentId::Perception,
            Payload::Prediction(_) => ComponentId::Prediction,
            Payload::Planning(_) => ComponentId::Planning,
            Payload::Control(_) => ComponentId::Control,
            Payload::Localization(_) => ComponentId::Localization,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub component: ComponentId,
    pub seq: u32,
    pub t_pub: SimTime,
    pub payload: Payload,
    /// An injected fault changed this output.
    #[serde(default)]
    pub fault_injected: bool,
    /// Produced by an idealized substitute rather than the component.
    #[serde(default)]
    pub substituted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_key: Option<StateKey>,
}

impl Message {
    pub fn planning(&self) -> Option<&PlanningOut> {
        match &self.payload {
            Payload::Planning(p) => Some(p),
            _ => None,
        }
    }

    pub fn id(&self) -> MessageId {
        MessageId { component: self.component, seq: self.seq }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MessageId {
    pub component: ComponentId,
    pub seq: u32,
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.component, self.seq)
    }
}

/// One component execution: consumed inputs, produced output, time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub component: ComponentId,
    pub inputs: BTreeMap<ComponentId, u32>,
    pub output_seq: u32,
    #[serde(rename = "t_ms")]
    pub t: SimTime,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Flags {
    pub fault_injected: bool,
    pub substituted: bool,
}

/// Message bus for a single run. Rows are indexed by [`ComponentId::index`].
#[derive(Clone, Debug, Default)]
pub struct Bus {
    rows: [Vec<Message>; 5],
    records: Vec<ExecutionRecord>,
}

impl Bus {
    pub fn new() -> Self {
        Bus::default()
    }

    pub fn publish(
        &mut self,
        payload: Payload,
        t: SimTime,
        flags: Flags,
        inputs: BTreeMap<ComponentId, u32>,
    ) -> Result<&Message> {
        let component = payload.component();
        let row = &mut self.rows[component.index()];
        if let Some(last) = row.last() {
            if t < last.t_pub {
                return Err(DvcaError::Order { component, t, last: last.t_pub });
            }
        }
        let seq = row.len() as u32 + 1;
        row.push(Message {
            component,
            seq,
            t_pub: t,
            payload,
            fault_injected: flags.fault_injected,
            substituted: flags.substituted,
            state_key: None,
        });
        self.records.push(ExecutionRecord { component, inputs, output_seq: seq, t });
        Ok(row.last().expect("just pushed"))
    }

    pub fn latest(&self, component: ComponentId) -> Option<&Message> {
        self.rows[component.index()].last()
    }

    pub fn row(&self, component: ComponentId) -> &[Message] {
        &self.rows[component.index()]
    }

    pub fn into_parts(self) -> ([Vec<Message>; 5], Vec<ExecutionRecord>) {
        (self.rows, self.records)
    }
}

/// Execution-level oracle label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "✓")]
    Pass,
    #[serde(rename = "✗")]
    Fail,
    #[serde(rename = "?")]
    Unresolved,
}

impl Label {
    pub fn symbol(self) -> &'static str {
        match self {
            Label::Pass => "✓",
            Label::Fail => "✗",
            Label::Unresolved => "?",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledMessage {
    pub component: ComponentId,
    pub seq: u32,
    pub t_pub: SimTime,
    pub label: Label,
}

/// Per-message labels, ordered by component priority then seq.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictMatrix {
    pub entries: Vec<LabeledMessage>,
}

impl VerdictMatrix {
    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("component,seq,t_pub,label\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{}\n", e.component, e.seq, e.t_pub.ms(), e.label.symbol()));
        }
        s
    }
}
