//! The five pipeline components under test and their message payloads.
//!
//! Every tick function is pure given its inputs and the component's random
//! stream; faults are applied to outputs by [`faults`].

pub mod control;
pub mod faults;
pub mod localization;
pub mod perception;
pub mod planning;
pub mod prediction;

use serde::{Deserialize, Serialize};

use crate::scenario::ObjectKind;
use crate::time::SimTime;
use crate::{OrientedBox, Vec2};

pub use faults::{FaultKind, FaultSpec, Trigger};
pub use planning::PlannerParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceivedObject {
    pub id: u32,
    pub kind: ObjectKind,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub v: Vec2,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerceptionOut {
    pub objects: Vec<PerceivedObject>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredPoint {
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    pub p: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedObject {
    pub id: u32,
    pub kind: ObjectKind,
    pub half_extents: Vec2,
    pub heading: f64,
    pub trajectory: Vec<PredPoint>,
}

impl PredictedObject {
    /// Position at absolute time `t`; the last point persists past the horizon.
    pub fn position_at(&self, t: SimTime) -> Vec2 {
        let tr = &self.trajectory;
        if tr.is_empty() {
            return Vec2::zero();
        }
        if t <= tr[0].t {
            return tr[0].p;
        }
        let last = tr[tr.len() - 1];
        if t >= last.t {
            return last.p;
        }
        let i = tr.partition_point(|q| q.t <= t) - 1;
        let u = (t - tr[i].t) as f64 / (tr[i + 1].t - tr[i].t) as f64;
        tr[i].p.lerp(tr[i + 1].p, u)
    }

    pub fn box_at(&self, t: SimTime) -> OrientedBox {
        OrientedBox::new(self.position_at(t), self.half_extents, self.heading)
    }

    /// Largest displacement from the first predicted point.
    pub fn displacement(&self) -> f64 {
        let p0 = self.trajectory.first().map_or(Vec2::zero(), |q| q.p);
        self.trajectory.iter().map(|q| q.p.distance(p0)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionOut {
    pub objects: Vec<PredictedObject>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanPoint {
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    pub p: Vec2,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[default]
    Cruise,
    Stop,
    Nudge,
    Emergency,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanningOut {
    pub trajectory: Vec<PlanPoint>,
    pub decision: Decision,
    /// Decision-point tags visited while producing this plan.
    #[serde(default)]
    pub coverage: Vec<String>,
}

impl PlanningOut {
    /// Interpolated plan state at absolute time `t`, clamped to the ends.
    pub fn sample(&self, t: SimTime) -> Option<PlanPoint> {
        let tr = &self.trajectory;
        let first = *tr.first()?;
        let last = *tr.last()?;
        if t <= first.t {
            return Some(first);
        }
        if t >= last.t {
            return Some(PlanPoint { t, ..last });
        }
        let i = tr.partition_point(|q| q.t <= t) - 1;
        let (a, b) = (tr[i], tr[i + 1]);
        let u = (t - a.t) as f64 / (b.t - a.t) as f64;
        let dh = crate::num::wrap_angle(b.heading - a.heading);
        Some(PlanPoint {
            t,
            p: a.p.lerp(b.p, u),
            speed: a.speed + (b.speed - a.speed) * u,
            heading: crate::num::wrap_angle(a.heading + dh * u),
        })
    }

    /// Planned longitudinal acceleration at `t` (finite difference).
    pub fn accel_at(&self, t: SimTime) -> f64 {
        let tr = &self.trajectory;
        if tr.len() < 2 {
            return 0.0;
        }
        let i = tr.partition_point(|q| q.t <= t).clamp(1, tr.len() - 1);
        let (a, b) = (tr[i - 1], tr[i]);
        (b.speed - a.speed) / ((b.t - a.t) as f64 / 1000.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlOut {
    pub accel_cmd: f64,
    pub steer: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationOut {
    pub p: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Publish periods in milliseconds per component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Periods {
    pub localization: u64,
    pub perception: u64,
    pub prediction: u64,
    pub planning: u64,
    pub control: u64,
}

impl Default for Periods {
    fn default() -> Self {
        Periods { localization: 10, perception: 100, prediction: 100, planning: 100, control: 10 }
    }
}

/// How components are activated. Only clock-driven execution is modeled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Clock,
}

fn default_range() -> f64 {
    60.0
}

fn default_history() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdsConfig {
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub periods: Periods,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default = "default_range")]
    pub perception_range: f64,
    /// Half-width of uniform position noise added by perception (m).
    #[serde(default)]
    pub perception_noise: f64,
    #[serde(default = "default_history")]
    pub prediction_history: usize,
    #[serde(default)]
    pub planner: PlannerParams,
    /// Enables the lattice-search planning substitute (never used by attribution).
    #[serde(default)]
    pub best_effort_planner: bool,
}

impl Default for AdsConfig {
    fn default() -> Self {
        AdsConfig {
            faults: Vec::new(),
            periods: Periods::default(),
            activation: Activation::Clock,
            perception_range: default_range(),
            perception_noise: 0.0,
            prediction_history: default_history(),
            planner: PlannerParams::default(),
            best_effort_planner: false,
        }
    }
}

impl AdsConfig {
    pub fn with_faults(faults: Vec<FaultSpec>) -> Self {
        AdsConfig { faults, ..AdsConfig::default() }
    }
}
