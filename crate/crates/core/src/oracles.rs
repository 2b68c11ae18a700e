//! System-level violation oracles over the ego log, and the per-message
//! planning check used to find the first violating planning output.

use serde::{Deserialize, Serialize};

use crate::ads::planning::RefLine;
use crate::ads::{PlanningOut, PredictionOut};
use crate::geom::min_obb_distance;
use crate::middleware::trace::{EgoSample, Trace};
use crate::middleware::{ComponentId, Payload};
use crate::scenario::{bbox_at, ego_box, object_pose_at, LaneMap, Scenario, SignalColor};
use crate::time::SimTime;
use crate::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    SafeDistance,
    Speeding,
    Mission,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort_by_key(|v| (v.t, v.kind));
        Verdict { passed: violations.is_empty(), violations }
    }

    pub fn symbol(&self) -> &'static str {
        if self.passed {
            "✓"
        } else {
            "✗"
        }
    }

    pub fn first_kind(&self) -> Option<ViolationKind> {
        self.violations.first().map(|v| v.kind)
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

fn all_kinds() -> Vec<ViolationKind> {
    vec![ViolationKind::SafeDistance, ViolationKind::Speeding, ViolationKind::Mission]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub enabled: Vec<ViolationKind>,
    /// Minimal safe distance `c` (m).
    pub safe_distance: f64,
    pub dest_tolerance: f64,
    pub speed_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { enabled: all_kinds(), safe_distance: 0.3, dest_tolerance: 2.0, speed_tolerance: 0.5 }
    }
}

impl OracleConfig {
    pub fn enabled(&self, k: ViolationKind) -> bool {
        self.enabled.contains(&k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafeDistanceHit {
    pub t: SimTime,
    pub object: u32,
    pub distance: f64,
    /// The object closed in on the ego from behind.
    pub rear_approach: bool,
}

/// Earliest sample where the ego box comes within `c` of any object box.
pub fn check_safe_distance(log: &[EgoSample], scenario: &Scenario, c: f64) -> Option<SafeDistanceHit> {
    for s in log {
        let eb = ego_box(s.p, s.heading, &scenario.ego.size);
        let mut hit: Option<(u32, f64)> = None;
        for o in &scenario.objects {
            let ob = bbox_at(o, s.t);
            if ob.center.distance(eb.center) - ob.radius() - eb.radius() >= c {
                continue;
            }
            let d = min_obb_distance(&eb, &ob);
            if d < c && hit.is_none_or(|h| d < h.1) {
                hit = Some((o.id, d));
            }
        }
        if let Some((id, d)) = hit {
            let obj = scenario.object(id).expect("object exists");
            let rel = eb.to_local(object_pose_at(obj, s.t).p);
            let fwd = Vec2::from_angle(s.heading);
            let closing = object_pose_at(obj, s.t).v.dot(fwd) > s.speed + 1e-9;
            return Some(SafeDistanceHit { t: s.t, object: id, distance: d, rear_approach: rel.x < 0.0 && closing });
        }
    }
    None
}

/// True iff the final ego position is within `tolerance` of `dest`.
pub fn check_mission(log: &[EgoSample], dest: Vec2, tolerance: f64) -> bool {
    log.last().is_some_and(|s| s.p.distance(dest) <= tolerance)
}

/// Earliest sample where speed exceeds the lane limit plus `tolerance`.
pub fn check_speeding(log: &[EgoSample], map: &LaneMap, tolerance: f64) -> Option<(SimTime, f64, f64)> {
    log.iter().find_map(|s| {
        let lane = map.lane_at(s.p)?;
        (s.speed > lane.lane.speed_limit + tolerance).then_some((s.t, s.speed, lane.lane.speed_limit))
    })
}

/// Aggregates the enabled checks. The mission check only applies to logs
/// that ran to the time budget; a run cut short already carries the
/// violation that stopped it.
pub fn evaluate(log: &[EgoSample], scenario: &Scenario, cfg: &OracleConfig) -> Verdict {
    let mut v = Vec::new();
    if log.is_empty() {
        return Verdict::from_violations(v);
    }
    if cfg.enabled(ViolationKind::SafeDistance) {
        if let Some(h) = check_safe_distance(log, scenario, cfg.safe_distance) {
            let mut detail = format!("object {} at {:.3} m", h.object, h.distance);
            if h.rear_approach {
                detail.push(' ');
                detail.push_str(REAR_APPROACH);
            }
            v.push(Violation { kind: ViolationKind::SafeDistance, t: h.t, detail });
        }
    }
    if cfg.enabled(ViolationKind::Speeding) {
        if let Some((t, speed, limit)) = check_speeding(log, &scenario.map, cfg.speed_tolerance) {
            v.push(Violation { kind: ViolationKind::Speeding, t, detail: format!("{speed:.2} m/s over limit {limit:.2} m/s") });
        }
    }
    let last = log[log.len() - 1];
    if cfg.enabled(ViolationKind::Mission) && last.t >= scenario.t_max_ms && !check_mission(log, scenario.ego.dest, cfg.dest_tolerance) {
        v.push(Violation {
            kind: ViolationKind::Mission,
            t: last.t,
            detail: format!("final position {:.2} m from destination", last.p.distance(scenario.ego.dest)),
        });
    }
    Verdict::from_violations(v)
}

/// Detail marker for safe-distance hits where the object closed in from behind.
pub const REAR_APPROACH: &str = "rear-approach";

/// Horizon over which a plan is checked against ground truth.
pub const PLAN_CHECK_HORIZON_MS: u64 = 2000;
/// Lookahead for objects that justify a stop.
pub const STALL_LOOKAHEAD: f64 = 30.0;
/// How long a stall must persist before a plan counts as violating.
pub const STALL_PERSIST_MS: u64 = 3000;

/// Inputs for judging one planning message.
#[derive(Clone, Debug)]
pub struct PlanCheckContext<'a> {
    pub scenario: &'a Scenario,
    /// True ego state at the message's publish time.
    pub ego: EgoSample,
    /// Prediction the planner consumed, if known.
    pub prediction: Option<&'a PredictionOut>,
    /// Publish time of the first message of the current uninterrupted stall.
    pub stall_since: Option<SimTime>,
}

/// Stall condition of a single plan, without the persistence requirement.
pub fn stall_condition(plan: &PlanningOut, t: SimTime, ctx: &PlanCheckContext<'_>, cfg: &OracleConfig) -> bool {
    let held = plan.trajectory.is_empty() || plan.trajectory.iter().all(|q| q.speed < 0.05);
    if !held || ctx.ego.p.distance(ctx.scenario.ego.dest) <= cfg.dest_tolerance {
        return false;
    }
    let sc = ctx.scenario;
    let Some(rl) = RefLine::build(&sc.map, ctx.ego.p, sc.ego.dest) else {
        return true;
    };
    let half_lane = sc.map.lane_at(ctx.ego.p).map_or(1.75, |h| h.lane.width / 2.0);
    let (s0, _) = rl.sl(ctx.ego.p);
    let front = s0 + sc.ego.size.length / 2.0;
    let blocks = |b: &crate::OrientedBox| {
        let (smin, smax, lo, hi) = rl.extent(b);
        hi >= -half_lane && lo <= half_lane && smax >= front - 0.5 && smin <= front + STALL_LOOKAHEAD
    };
    if sc.objects.iter().any(|o| blocks(&bbox_at(o, t))) {
        return false;
    }
    if let Some(pred) = ctx.prediction {
        if pred.objects.iter().any(|o| blocks(&o.box_at(t))) {
            return false;
        }
    }
    let red_ahead = sc.signals.iter().any(|sig| {
        let (s_line, _) = rl.sl(sig.stop_line);
        sig.color_at(t) != SignalColor::Green && s_line >= front - 0.5 && s_line <= front + STALL_LOOKAHEAD
    });
    !red_ahead
}

/// Would executing this plan verbatim violate a driving specification?
pub fn planning_message_violates(plan: &PlanningOut, t: SimTime, ctx: &PlanCheckContext<'_>, cfg: &OracleConfig) -> bool {
    let sc = ctx.scenario;
    for q in plan.trajectory.iter().filter(|q| q.t <= t + PLAN_CHECK_HORIZON_MS) {
        let eb = ego_box(q.p, q.heading, &sc.ego.size);
        for o in &sc.objects {
            let ob = bbox_at(o, q.t);
            if ob.center.distance(eb.center) - ob.radius() - eb.radius() >= cfg.safe_distance {
                continue;
            }
            if min_obb_distance(&eb, &ob) < cfg.safe_distance {
                return true;
            }
        }
    }
    for q in &plan.trajectory {
        if let Some(hit) = sc.map.lane_at(q.p) {
            if q.speed > hit.lane.speed_limit + cfg.speed_tolerance {
                return true;
            }
        }
    }
    match ctx.stall_since {
        Some(since) => stall_condition(plan, t, ctx, cfg) && t - since >= STALL_PERSIST_MS as i64,
        None => false,
    }
}

/// Check contexts for every planning message of `trace`, in seq order.
pub fn planning_contexts<'a>(trace: &'a Trace, cfg: &OracleConfig) -> Vec<PlanCheckContext<'a>> {
    let sc = &trace.header.scenario;
    let preds = trace.row(ComponentId::Prediction);
    let mut out = Vec::new();
    let mut since: Option<SimTime> = None;
    for m in trace.row(ComponentId::Planning) {
        let Some(plan) = m.planning() else { continue };
        let Some(ego) = trace.ego_at(m.t_pub).copied() else { break };
        let k = preds.partition_point(|p| p.t_pub <= m.t_pub);
        let prediction = k.checked_sub(1).and_then(|i| match &preds[i].payload {
            Payload::Prediction(p) => Some(p),
            _ => None,
        });
        let mut ctx = PlanCheckContext { scenario: sc, ego, prediction, stall_since: None };
        if stall_condition(plan, m.t_pub, &ctx, cfg) {
            since = Some(since.unwrap_or(m.t_pub));
        } else {
            since = None;
        }
        ctx.stall_since = since;
        out.push(ctx);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{EgoSpec, Lane, ObjectKind, Pose, Size, TrafficObject, Waypoint};
    use crate::Polyline;

    fn scenario_with_cone(x: f64) -> Scenario {
        Scenario {
            name: String::new(),
            map: LaneMap {
                lanes: vec![Lane {
                    id: 0,
                    centerline: Polyline::new([Vec2::new(0.0, 0.0), Vec2::new(300.0, 0.0)]).unwrap(),
                    width: 3.5,
                    speed_limit: 11.0,
                    successors: vec![],
                }],
            },
            ego: EgoSpec {
                init_pose: Pose { p: Vec2::zero(), heading: 0.0 },
                dest: Vec2::new(100.0, 0.0),
                size: Size::new(4.0, 2.0, 1.5),
            },
            objects: vec![TrafficObject {
                id: 5,
                kind: ObjectKind::StaticObstacle,
                size: Size::new(1.0, 1.0, 1.0),
                waypoints: vec![Waypoint { t: SimTime(0), p: Vec2::new(x, 0.0), v: Vec2::zero(), a: Vec2::zero() }],
                heading_override: None,
            }],
            signals: vec![],
            t_max_ms: SimTime(1000),
            seed: 0,
        }
    }

    fn sample(t: u64, x: f64, speed: f64) -> EgoSample {
        EgoSample { t: SimTime(t), p: Vec2::new(x, 0.0), heading: 0.0, speed, accel: 0.0, min_dist: None, nearest: None }
    }

    #[test]
    fn far_objects_do_not_trigger() {
        let sc = scenario_with_cone(200.0);
        assert!(check_safe_distance(&[sample(0, 0.0, 0.0), sample(10, 1.0, 0.0)], &sc, 0.3).is_none());
    }

    #[test]
    fn near_miss_reports_distance() {
        // Cone face at 9.5, ego front at x + 2.0.
        let sc = scenario_with_cone(10.0);
        let hit = check_safe_distance(&[sample(0, 7.25, 1.0)], &sc, 0.3).unwrap();
        assert!((hit.distance - 0.25).abs() < 1e-9);
        assert!(!hit.rear_approach);
    }

    #[test]
    fn mission_boundary() {
        let dest = Vec2::new(100.0, 0.0);
        assert!(check_mission(&[sample(0, 100.0, 0.0)], dest, 2.0));
        assert!(check_mission(&[sample(0, 98.1, 0.0)], dest, 2.0));
        assert!(!check_mission(&[sample(0, 97.0, 0.0)], dest, 2.0));
    }

    #[test]
    fn speeding_tolerance() {
        let sc = scenario_with_cone(200.0);
        assert!(check_speeding(&[sample(0, 1.0, 11.4)], &sc.map, 0.5).is_none());
        let (t, s, l) = check_speeding(&[sample(0, 1.0, 10.0), sample(6000, 50.0, 13.0)], &sc.map, 0.5).unwrap();
        assert_eq!((t, s, l), (SimTime(6000), 13.0, 11.0));
        assert!(check_speeding(&[sample(0, 1.0, 30.0)].map(|mut s| {
            s.p.y = 20.0;
            s
        }), &sc.map, 0.5)
        .is_none());
    }

    #[test]
    fn compound_verdict_sorted() {
        let sc = scenario_with_cone(200.0);
        let log = [sample(0, 0.0, 0.0), sample(500, 5.0, 13.0), sample(1000, 10.0, 5.0)];
        let v = evaluate(&log, &sc, &OracleConfig::default());
        assert!(!v.passed);
        let kinds: Vec<_> = v.violations.iter().map(|x| x.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::Speeding, ViolationKind::Mission]);
    }
}
