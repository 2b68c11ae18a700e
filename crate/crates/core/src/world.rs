//! Ground-truth world state, ego kinematics and the `rtest` entry point.

use serde::{Deserialize, Serialize};

use crate::ads::{AdsConfig, ControlOut};
use crate::error::{DvcaError, Result};
use crate::middleware::scheduler::{run_scheduler, RunOptions};
use crate::middleware::trace::{EndReason, RunConfig, Trace};
use crate::num::wrap_angle;
use crate::oracles::{OracleConfig, Verdict};
use crate::scenario::{bbox_at, ego_box, object_pose_at, ObjectKind, Scenario, Waypoint};
use crate::substitutes::SubstitutionPlan;
use crate::time::SimTime;
use crate::{OrientedBox, Vec2};

pub const WHEELBASE: f64 = 2.8;
pub const ACCEL_MIN: f64 = -8.0;
pub const ACCEL_MAX: f64 = 3.0;
pub const STEER_MAX: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub p: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Acceleration realized over the last step (m/s²).
    pub accel: f64,
    #[serde(rename = "t_ms")]
    pub t: SimTime,
}

impl EgoState {
    pub fn at_rest(p: Vec2, heading: f64) -> Self {
        EgoState { p, heading, speed: 0.0, accel: 0.0, t: SimTime::ZERO }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading).scale(self.speed)
    }

    pub fn acceleration(&self) -> Vec2 {
        Vec2::from_angle(self.heading).scale(self.accel)
    }

    pub fn waypoint(&self) -> Waypoint {
        Waypoint { t: self.t, p: self.p, v: self.velocity(), a: self.acceleration() }
    }
}

/// Kinematic bicycle step with actuator clamps. The arc is integrated in
/// closed form, so constant-steer motion traces an exact circle.
pub fn step_ego(state: &EgoState, cmd: &ControlOut, dt_ms: u64) -> EgoState {
    assert!(dt_ms > 0, "step_ego needs a positive dt");
    let dt = dt_ms as f64 / 1000.0;
    let a = cmd.accel_cmd.clamp(ACCEL_MIN, ACCEL_MAX);
    let steer = cmd.steer.clamp(-STEER_MAX, STEER_MAX);
    let v0 = state.speed;
    let raw = v0 + a * dt;
    let (v1, dist) = if raw < 0.0 { (0.0, if a < 0.0 { v0 * v0 / (-2.0 * a) } else { 0.0 }) } else { (raw, 0.5 * (v0 + raw) * dt) };
    let dh = dist / WHEELBASE * steer.tan();
    let chord = if dh.abs() > 1e-12 { dist * (dh / 2.0).sin() / (dh / 2.0) } else { dist };
    let mid = state.heading + dh / 2.0;
    EgoState {
        p: state.p + Vec2::from_angle(mid).scale(chord),
        heading: wrap_angle(state.heading + dh),
        speed: v1,
        accel: (v1 - v0) / dt,
        t: state.t + dt_ms,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u32,
    pub kind: ObjectKind,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub v: Vec2,
}

/// Objects whose box center lies within `range` of `origin`, with exact
/// interpolated kinematics.
pub fn ground_truth_objects(scenario: &Scenario, t: SimTime, origin: Vec2, range: f64) -> Vec<GroundTruthObject> {
    scenario
        .objects
        .iter()
        .filter_map(|o| {
            let k = object_pose_at(o, t);
            (k.p.distance(origin) <= range).then(|| GroundTruthObject { id: o.id, kind: o.kind, bbox: bbox_at(o, t), v: k.v })
        })
        .collect()
}

/// Smallest box distance between the ego and any scenario object at `t`,
/// with the id of the closest object.
pub fn min_object_distance(scenario: &Scenario, ego: &EgoState, t: SimTime) -> Option<(u32, f64)> {
    let eb = ego_box(ego.p, ego.heading, &scenario.ego.size);
    let mut best: Option<(u32, f64)> = None;
    for o in &scenario.objects {
        let b = bbox_at(o, t);
        if b.center.distance(eb.center) - b.radius() - eb.radius() > best.map_or(f64::INFINITY, |x| x.1) {
            continue;
        }
        let d = crate::geom::min_obb_distance(&eb, &b);
        if best.is_none_or(|x| d < x.1) {
            best = Some((o.id, d));
        }
    }
    best
}

/// One full simulated run under the original pipeline.
pub fn rtest(scenario: &Scenario, ads: &AdsConfig, oracle: &OracleConfig) -> Result<(Verdict, Vec<Waypoint>, Trace)> {
    let cfg = RunConfig { ads: ads.clone(), oracle: oracle.clone(), plan: SubstitutionPlan::original() };
    let trace = run_scheduler(scenario, &cfg, &RunOptions::default())?;
    panic_to_error(&trace)?;
    let log = trace.ego_log.iter().map(|s| s.waypoint()).collect();
    Ok((trace.verdict.clone(), log, trace))
}

/// Turns a run that ended in a component panic into an error.
pub fn panic_to_error(trace: &Trace) -> Result<()> {
    if trace.end != EndReason::Panic {
        return Ok(());
    }
    let d = trace.diagnostics.last();
    Err(DvcaError::SimPanic {
        component: d.map_or(crate::middleware::ComponentId::Planning, |d| d.component),
        t: d.map_or(SimTime::ZERO, |d| d.t),
        message: d.map_or_else(String::new, |d| d.message.clone()),
    })
}
