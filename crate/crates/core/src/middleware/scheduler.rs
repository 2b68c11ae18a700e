//! Millisecond tick loop driving the pipeline and the world.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trace::{ActivationEvent, Diagnostic, EgoSample, EndReason, RunConfig, Trace, TraceHeader};
use super::{Bus, ComponentId, Flags, Payload};
use crate::ads::control::control_tick;
use crate::ads::localization::localization_tick;
use crate::ads::perception::perception_tick;
use crate::ads::planning::{planning_tick, PlanContext};
use crate::ads::prediction::prediction_tick;
use crate::ads::{LocalizationOut, PerceptionOut, PlanningOut, PredictionOut};
use crate::error::Result;
use crate::oracles::{evaluate, ViolationKind};
use crate::scenario::Scenario;
use crate::substitutes::{self, StateKey, StateTracker, SubstitutionMode};
use crate::time::SimTime;
use crate::world::{ground_truth_objects, min_object_distance, step_ego, EgoState};

/// Ego samples are taken on this grid (ms).
pub const SAMPLE_MS: u64 = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// End the run at the first safe-distance or speeding sample.
    pub stop_on_violation: bool,
}

/// Derives a per-component seed from the scenario seed (splitmix64 finalizer).
pub fn component_seed(seed: u64, c: ComponentId) -> u64 {
    let mut z = seed ^ (c.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substitution bookkeeping for one component during a run.
#[derive(Clone, Copy, Debug)]
struct Slot {
    mode: SubstitutionMode,
    active: bool,
    remaining: Option<usize>,
}

impl Slot {
    fn new(mode: SubstitutionMode) -> Self {
        Slot { mode, active: mode == SubstitutionMode::IdealAll, remaining: None }
    }

    /// Called when the run enters a new state; returns true on activation.
    fn on_state(&mut self, key: StateKey, ordinal: u32, index: usize) -> bool {
        if self.active {
            return false;
        }
        let hit = match self.mode {
            SubstitutionMode::IdealFromState(r) => (r.key, r.ordinal) == (key, ordinal) || index >= r.index,
            SubstitutionMode::IdealWithinStates { from, count } => {
                let hit = (from.key, from.ordinal) == (key, ordinal) || index >= from.index;
                if hit {
                    self.remaining = Some(count);
                }
                hit
            }
            SubstitutionMode::IdealFromIndex(n) => index >= n,
            _ => false,
        };
        self.active = hit;
        hit
    }

    /// Whether the next output is produced by the substitute.
    fn take(&mut self) -> bool {
        if !self.active {
            return false;
        }
        match &mut self.remaining {
            None => true,
            Some(0) => false,
            Some(n) => {
                *n -= 1;
                true
            }
        }
    }
}

fn sample(ego: &EgoState, scenario: &Scenario) -> EgoSample {
    let near = min_object_distance(scenario, ego, ego.t);
    EgoSample {
        t: ego.t,
        p: ego.p,
        heading: ego.heading,
        speed: ego.speed,
        accel: ego.accel,
        min_dist: near.map(|n| n.1),
        nearest: near.map(|n| n.0),
    }
}

fn panic_text(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

fn due(t: SimTime, period: u64) -> bool {
    period > 0 && t.ms().is_multiple_of(period)
}

/// Runs one simulation and records everything into a [`Trace`].
///
/// A component panic ends the run with [`EndReason::Panic`] and a diagnostic;
/// callers decide whether that is an error.
pub fn run_scheduler(scenario: &Scenario, cfg: &RunConfig, opts: &RunOptions) -> Result<Trace> {
    let ads = &cfg.ads;
    let periods = [
        ads.periods.localization,
        ads.periods.perception,
        ads.periods.prediction,
        ads.periods.planning,
        ads.periods.control,
    ];
    let mut rngs: Vec<ChaCha8Rng> =
        ComponentId::PRIORITY.iter().map(|c| ChaCha8Rng::seed_from_u64(component_seed(scenario.seed, *c))).collect();
    let mut slots: Vec<Slot> = ComponentId::PRIORITY.iter().map(|c| Slot::new(cfg.plan.mode(*c))).collect();
    if !ads.best_effort_planner {
        slots[ComponentId::Planning.index()] = Slot::new(SubstitutionMode::Original);
    }
    let plan_ctx = PlanContext { scenario, params: &ads.planner };

    let mut bus = Bus::new();
    let mut tracker = StateTracker::default();
    let mut ego = EgoState::at_rest(scenario.ego.init_pose.p, scenario.ego.init_pose.heading);
    let mut ego_log = Vec::new();
    let mut activations = Vec::new();
    let mut diagnostics = Vec::new();
    let mut end = EndReason::Completed;
    let t_max = scenario.t_max_ms;
    let c = cfg.oracle.safe_distance;
    let check_speed = cfg.oracle.enabled(ViolationKind::Speeding);
    let check_dist = cfg.oracle.enabled(ViolationKind::SafeDistance);

    'ticks: for ms in 0..=t_max.ms() {
        let t = SimTime(ms);
        debug_assert_eq!(ego.t, t);
        if ms % SAMPLE_MS == 0 {
            let s = sample(&ego, scenario);
            ego_log.push(s);
            if tracker.observe(StateKey::of(&s)) {
                let r = tracker.current().expect("observed");
                for comp in ComponentId::PRIORITY {
                    if slots[comp.index()].on_state(r.key, r.ordinal, r.index) {
                        activations.push(ActivationEvent { component: comp, t, state_index: r.index });
                    }
                }
            }
            if s.min_dist.is_some_and(|d| d <= 0.0) {
                end = EndReason::Collision;
                break;
            }
            if opts.stop_on_violation {
                let close = check_dist && s.min_dist.is_some_and(|d| d < c);
                let fast = check_speed
                    && scenario
                        .map
                        .lane_at(s.p)
                        .is_some_and(|h| s.speed > h.lane.speed_limit + cfg.oracle.speed_tolerance);
                if close || fast {
                    end = EndReason::ViolationCutoff;
                    break;
                }
            }
        }
        if t >= t_max {
            break;
        }

        for comp in ComponentId::PRIORITY {
            if !due(t, periods[comp.index()]) {
                continue;
            }
            let ideal = slots[comp.index()].take();
            let rng = &mut rngs[comp.index()];
            let result = catch_unwind(AssertUnwindSafe(|| -> (Payload, bool, BTreeMap<ComponentId, u32>) {
                let mut inputs = BTreeMap::new();
                let loc_in = |inputs: &mut BTreeMap<ComponentId, u32>| -> LocalizationOut {
                    match bus.latest(ComponentId::Localization) {
                        Some(m) => {
                            inputs.insert(ComponentId::Localization, m.seq);
                            match &m.payload {
                                Payload::Localization(l) => *l,
                                _ => unreachable!("localization row holds localization payloads"),
                            }
                        }
                        None => substitutes::ideal_localization(&ego),
                    }
                };
                match comp {
                    ComponentId::Localization => {
                        if ideal {
                            (Payload::Localization(substitutes::ideal_localization(&ego)), false, inputs)
                        } else {
                            let (out, inj) = localization_tick(&ego, &ads.faults, rng);
                            (Payload::Localization(out), inj, inputs)
                        }
                    }
                    ComponentId::Perception => {
                        if ideal {
                            let out = substitutes::ideal_perception(scenario, &ego, t, ads.perception_range);
                            (Payload::Perception(out), false, inputs)
                        } else {
                            let truth = ground_truth_objects(scenario, t, ego.p, ads.perception_range);
                            let (out, inj) = perception_tick(&truth, &ego, &ads.faults, rng, t, ads.perception_noise);
                            (Payload::Perception(out), inj, inputs)
                        }
                    }
                    ComponentId::Prediction => {
                        let row = bus.row(ComponentId::Perception);
                        if let Some(m) = row.last() {
                            inputs.insert(ComponentId::Perception, m.seq);
                        }
                        if ideal {
                            let out = substitutes::ideal_prediction(scenario, &ego, t, ads.perception_range);
                            (Payload::Prediction(out), false, inputs)
                        } else {
                            let from = row.len().saturating_sub(ads.prediction_history.max(1));
                            let history: Vec<(SimTime, &PerceptionOut)> = row[from..]
                                .iter()
                                .filter_map(|m| match &m.payload {
                                    Payload::Perception(p) => Some((m.t_pub, p)),
                                    _ => None,
                                })
                                .collect();
                            let (out, inj) = prediction_tick(&history, t, ego.p, &ads.faults, rng);
                            (Payload::Prediction(out), inj, inputs)
                        }
                    }
                    ComponentId::Planning => {
                        let loc = loc_in(&mut inputs);
                        if ideal {
                            let out = substitutes::best_effort_planning(&plan_ctx, &ego, t, c);
                            return (Payload::Planning(out), false, inputs);
                        }
                        let empty = PredictionOut::default();
                        let pred = match bus.latest(ComponentId::Prediction) {
                            Some(m) => {
                                inputs.insert(ComponentId::Prediction, m.seq);
                                match &m.payload {
                                    Payload::Prediction(p) => p,
                                    _ => unreachable!("prediction row holds prediction payloads"),
                                }
                            }
                            None => &empty,
                        };
                        let (out, inj) = planning_tick(&plan_ctx, t, pred, &loc, ego.p, &ads.faults, rng);
                        (Payload::Planning(out), inj, inputs)
                    }
                    ComponentId::Control => {
                        let loc = loc_in(&mut inputs);
                        let empty = PlanningOut::default();
                        let plan = match bus.latest(ComponentId::Planning) {
                            Some(m) => {
                                inputs.insert(ComponentId::Planning, m.seq);
                                m.planning().expect("planning row holds plans")
                            }
                            None => &empty,
                        };
                        if ideal {
                            (Payload::Control(substitutes::ideal_control(plan, t)), false, inputs)
                        } else {
                            let (out, inj) = control_tick(plan, &loc, t, ego.p, &ads.faults, rng);
                            (Payload::Control(out), inj, inputs)
                        }
                    }
                }
            }));
            match result {
                Ok((payload, injected, inputs)) => {
                    let flags = Flags { fault_injected: injected, substituted: ideal };
                    bus.publish(payload, t, flags, inputs)?;
                }
                Err(e) => {
                    diagnostics.push(Diagnostic { component: comp, t, message: panic_text(e) });
                    end = EndReason::Panic;
                    break 'ticks;
                }
            }
        }

        // Physics: the latest control output drives the ego for one millisecond.
        ego = match bus.latest(ComponentId::Control) {
            Some(m) if m.substituted => {
                let empty = PlanningOut::default();
                let plan = bus.latest(ComponentId::Planning).and_then(|p| p.planning()).unwrap_or(&empty);
                substitutes::sim_control_apply(plan, &ego, 1)
            }
            Some(m) => match &m.payload {
                Payload::Control(cmd) => step_ego(&ego, cmd, 1),
                _ => unreachable!("control row holds control payloads"),
            },
            None => step_ego(&ego, &Default::default(), 1),
        };
    }

    let (mut rows, records) = bus.into_parts();
    for row in rows.iter_mut() {
        for m in row.iter_mut() {
            let i = ego_log.partition_point(|s: &EgoSample| s.t < m.t_pub);
            m.state_key = ego_log.get(i).filter(|s| s.t == m.t_pub).map(StateKey::of);
        }
    }
    let verdict = evaluate(&ego_log, scenario, &cfg.oracle);
    Ok(Trace {
        header: TraceHeader { scenario: scenario.clone(), config: cfg.clone() },
        rows,
        records,
        ego_log,
        activations,
        diagnostics,
        end,
        verdict,
    })
}
