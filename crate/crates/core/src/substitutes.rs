//! Idealized component substitutes, state discretization and the `dtest`
//! re-simulation entry point.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::ads::planning::{plan, PlanContext, PlanFaults};
use crate::ads::prediction::{HORIZON_MS, STEP_MS};
use crate::ads::{ControlOut, LocalizationOut, PerceivedObject, PerceptionOut, PlanningOut, PredPoint, PredictedObject, PredictionOut};
use crate::error::Result;
use crate::geom::min_obb_distance;
use crate::middleware::scheduler::{run_scheduler, RunOptions};
use crate::middleware::trace::{EgoSample, Trace};
use crate::middleware::{ComponentId, MessageId};
use crate::oracles::Verdict;
use crate::scenario::{bbox_at, ego_box, object_pose_at, Scenario};
use crate::time::SimTime;
use crate::world::{ground_truth_objects, EgoState};

/// Position bin (m).
pub const POS_BIN: f64 = 0.2;
/// Velocity bin (m/s).
pub const VEL_BIN: f64 = 0.1;
/// Acceleration bin (m/s²).
pub const ACC_BIN: f64 = 0.1;

/// Discretized ego kinematics `(px, py, vx, vy, ax, ay)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey(pub [i64; 6]);

impl StateKey {
    pub fn of(sample: &EgoSample) -> StateKey {
        let w = sample.waypoint();
        let bin = |x: f64, b: f64| (x / b).floor() as i64;
        StateKey([
            bin(w.p.x, POS_BIN),
            bin(w.p.y, POS_BIN),
            bin(w.v.x, VEL_BIN),
            bin(w.v.y, VEL_BIN),
            bin(w.a.x, ACC_BIN),
            bin(w.a.y, ACC_BIN),
        ])
    }

    /// Weighted L1 distance: position counts most, acceleration least.
    pub fn distance(&self, o: &StateKey) -> f64 {
        const W: [f64; 6] = [1.0, 1.0, 0.5, 0.5, 0.25, 0.25];
        self.0.iter().zip(o.0.iter()).zip(W).map(|((a, b), w)| w * (a - b).abs() as f64).sum()
    }
}

/// Identifies one state of a recorded run. `ordinal` counts earlier visits
/// to the same key; `index` is the 1-based position in the state sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateRef {
    pub key: StateKey,
    pub ordinal: u32,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubstitutionMode {
    #[default]
    Original,
    IdealAll,
    /// Ideal from the moment the run enters the referenced state onwards.
    IdealFromState(StateRef),
    /// Ideal from the n-th state (1-based) onwards.
    IdealFromIndex(usize),
    /// Ideal for exactly `count` outputs once the referenced state is reached.
    IdealWithinStates { from: StateRef, count: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubstitutionPlan {
    pub modes: BTreeMap<ComponentId, SubstitutionMode>,
}

impl SubstitutionPlan {
    pub fn original() -> Self {
        SubstitutionPlan::default()
    }

    pub fn single(c: ComponentId, mode: SubstitutionMode) -> Self {
        SubstitutionPlan { modes: BTreeMap::from([(c, mode)]) }
    }

    pub fn ideal(components: impl IntoIterator<Item = ComponentId>) -> Self {
        SubstitutionPlan { modes: components.into_iter().map(|c| (c, SubstitutionMode::IdealAll)).collect() }
    }

    pub fn mode(&self, c: ComponentId) -> SubstitutionMode {
        self.modes.get(&c).copied().unwrap_or_default()
    }

    pub fn is_original(&self) -> bool {
        self.modes.values().all(|m| *m == SubstitutionMode::Original)
    }
}

/// Online state sequence: consecutive identical keys merge into one state.
#[derive(Clone, Debug, Default)]
pub struct StateTracker {
    current: Option<StateKey>,
    index: usize,
    ordinal: u32,
    visits: HashMap<StateKey, u32>,
}

impl StateTracker {
    /// Feeds the key at the next sample; returns true when a new state begins.
    pub fn observe(&mut self, key: StateKey) -> bool {
        if self.current == Some(key) {
            return false;
        }
        let n = self.visits.entry(key).or_insert(0);
        self.ordinal = *n;
        *n += 1;
        self.index += 1;
        self.current = Some(key);
        true
    }

    pub fn current(&self) -> Option<StateRef> {
        self.current.map(|key| StateRef { key, ordinal: self.ordinal, index: self.index })
    }
}

/// A maximal run of consecutive messages sharing one state key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub index: usize,
    pub key: StateKey,
    pub ordinal: u32,
    #[serde(rename = "t_start_ms")]
    pub t_start: SimTime,
    pub messages: Vec<MessageId>,
}

impl State {
    pub fn state_ref(&self) -> StateRef {
        StateRef { key: self.key, ordinal: self.ordinal, index: self.index }
    }

    pub fn component_messages(&self, c: ComponentId) -> impl Iterator<Item = &MessageId> {
        self.messages.iter().filter(move |m| m.component == c)
    }
}

/// Splits a trace into its state sequence, in global message order.
pub fn split_trace(trace: &Trace) -> Vec<State> {
    let mut tracker = StateTracker::default();
    let mut states: Vec<State> = Vec::new();
    for m in trace.messages_in_order() {
        let key = m.state_key.or_else(|| trace.ego_at(m.t_pub).map(StateKey::of)).unwrap_or(StateKey([0; 6]));
        if tracker.observe(key) {
            let r = tracker.current().expect("observed");
            states.push(State { index: r.index, key, ordinal: r.ordinal, t_start: m.t_pub, messages: Vec::new() });
        }
        states.last_mut().expect("state exists").messages.push(m.id());
    }
    states
}

/// Nearest recorded state to `key` by weighted L1 distance; ties go to the
/// earlier state.
pub fn match_state<'a>(states: &'a [State], key: &StateKey) -> Option<&'a State> {
    let mut best: Option<(&State, f64)> = None;
    for s in states {
        let d = s.key.distance(key);
        if best.is_none_or(|b| d < b.1) {
            best = Some((s, d));
        }
    }
    best.map(|b| b.0)
}

/// Ground-truth object list within perception range.
pub fn ideal_perception(scenario: &Scenario, ego: &EgoState, t: SimTime, range: f64) -> PerceptionOut {
    PerceptionOut {
        objects: ground_truth_objects(scenario, t, ego.p, range)
            .into_iter()
            .map(|g| PerceivedObject { id: g.id, kind: g.kind, bbox: g.bbox, v: g.v })
            .collect(),
    }
}

/// Ground-truth futures of every object within range.
pub fn ideal_prediction(scenario: &Scenario, ego: &EgoState, t: SimTime, range: f64) -> PredictionOut {
    let objects = scenario
        .objects
        .iter()
        .filter(|o| object_pose_at(o, t).p.distance(ego.p) <= range)
        .map(|o| PredictedObject {
            id: o.id,
            kind: o.kind,
            half_extents: o.size.half_extents(),
            heading: bbox_at(o, t).heading,
            trajectory: (0..=HORIZON_MS / STEP_MS)
                .map(|k| {
                    let tk = t + k * STEP_MS;
                    PredPoint { t: tk, p: object_pose_at(o, tk).p }
                })
                .collect(),
        })
        .collect();
    PredictionOut { objects }
}

pub fn ideal_localization(ego: &EgoState) -> LocalizationOut {
    crate::ads::localization::truth(ego)
}

/// Command published by the ideal controller; the physics step then places
/// the ego exactly on the plan.
pub fn ideal_control(plan: &PlanningOut, t: SimTime) -> ControlOut {
    ControlOut { accel_cmd: plan.accel_at(t), steer: 0.0 }
}

/// Ego state after one step of perfect plan tracking. An empty plan holds
/// the ego in place.
pub fn sim_control_apply(plan: &PlanningOut, ego: &EgoState, dt_ms: u64) -> EgoState {
    let t = ego.t + dt_ms;
    match plan.sample(t) {
        Some(q) => EgoState {
            p: q.p,
            heading: q.heading,
            speed: q.speed.max(0.0),
            accel: (q.speed.max(0.0) - ego.speed) / (dt_ms as f64 / 1000.0),
            t,
        },
        None => EgoState { speed: 0.0, accel: 0.0, t, ..*ego },
    }
}

/// True when the ego following `trajectory` keeps at least `c` from every object.
pub fn collision_free(scenario: &Scenario, trajectory: &PlanningOut, c: f64) -> bool {
    trajectory.trajectory.iter().all(|q| {
        let eb = ego_box(q.p, q.heading, &scenario.ego.size);
        scenario.objects.iter().all(|o| min_obb_distance(&eb, &bbox_at(o, q.t)) >= c)
    })
}

/// Lateral offsets tried by the best-effort planner, nearest to the lane center first.
const LATTICE: [f64; 7] = [0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5];

/// Best-effort substitute for planning: plans on ground truth, then searches
/// lateral shifts of that plan for one that stays clear of every object.
/// When none exists the result is a stop in place tagged `infeasible`.
pub fn best_effort_planning(ctx: &PlanContext<'_>, ego: &EgoState, t: SimTime, c: f64) -> PlanningOut {
    let loc = ideal_localization(ego);
    let pred = ideal_prediction(ctx.scenario, ego, t, f64::INFINITY);
    for bias in LATTICE {
        let candidate = plan(ctx, t, &pred, &loc, PlanFaults { lateral_bias: bias, ..PlanFaults::default() });
        if collision_free(ctx.scenario, &candidate, c) {
            return candidate;
        }
    }
    let stop = crate::ads::PlanPoint { t, p: ego.p, speed: 0.0, heading: ego.heading };
    PlanningOut {
        trajectory: vec![stop, crate::ads::PlanPoint { t: t + 1000, ..stop }],
        decision: crate::ads::Decision::Emergency,
        coverage: vec!["best_effort.infeasible".into()],
    }
}

/// Re-simulates the scenario of `original` under `plan`, stopping at the
/// first violation since only the verdict matters.
pub fn dtest(original: &Trace, plan: SubstitutionPlan) -> Result<(Verdict, Trace)> {
    let mut cfg = original.header.config.clone();
    cfg.plan = plan;
    let trace = run_scheduler(&original.header.scenario, &cfg, &RunOptions { stop_on_violation: true })?;
    crate::world::panic_to_error(&trace)?;
    Ok((trace.verdict.clone(), trace))
}
