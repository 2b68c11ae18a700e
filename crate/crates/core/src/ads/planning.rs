//! Lane-follow planner with stop, follow, yield and nudge behaviors.
//!
//! The planner works in a station/lateral frame along the routed lane
//! centerlines. Obstacles become either speed caps (stop before a point,
//! or a speed limit over a zone) or lateral nudge zones. A speed profile is
//! integrated forward under the caps, then the lateral target is blended in
//! from the believed ego offset.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::faults::{for_component, FaultKind, FaultSpec};
use super::{Decision, LocalizationOut, PlanPoint, PlanningOut, PredictedObject, PredictionOut};
use crate::middleware::ComponentId;
use crate::scenario::{LaneMap, Scenario, SignalColor};
use crate::time::SimTime;
use crate::{OrientedBox, Polyline, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub cruise_speed: f64,
    pub comfort_accel: f64,
    pub comfort_decel: f64,
    pub max_decel: f64,
    pub horizon_ms: u64,
    pub step_ms: u64,
    /// Safe distance the planner keeps from objects (m).
    pub clearance: f64,
    /// Extra gap left in front of a stop target (m).
    pub stop_buffer: f64,
    /// Added to the ego half width and clearance to form the corridor.
    pub lateral_margin: f64,
    pub nudge_max_offset: f64,
    pub nudge_speed: f64,
    /// Length of the reduced-speed zone before a nudged object (m).
    pub nudge_zone: f64,
    /// Speed excess over `nudge_speed` above which a late nudge becomes a stop.
    pub nudge_commit_margin: f64,
    pub nudge_ramp: f64,
    pub static_displacement: f64,
    pub lead_min_speed: f64,
    pub crossing_buffer_ms: u64,
    pub blend_distance: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            cruise_speed: 10.0,
            comfort_accel: 1.5,
            comfort_decel: 2.5,
            max_decel: 6.0,
            horizon_ms: 5000,
            step_ms: 100,
            clearance: 0.3,
            stop_buffer: 0.5,
            lateral_margin: 0.2,
            nudge_max_offset: 1.0,
            nudge_speed: 4.0,
            nudge_zone: 20.0,
            nudge_commit_margin: 1.5,
            nudge_ramp: 10.0,
            static_displacement: 0.3,
            lead_min_speed: 0.5,
            crossing_buffer_ms: 1000,
            blend_distance: 8.0,
        }
    }
}

/// Fault effects the planner honors internally.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlanFaults {
    pub drop_obstacle_caps: bool,
    pub lateral_bias: f64,
    pub no_trajectory: bool,
}

impl PlanFaults {
    pub fn is_none(&self) -> bool {
        *self == PlanFaults::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cap {
    /// Ego center must stop at or before `s`.
    Stop { s: f64, obstacle: bool },
    /// Speed at most `v` for ego center stations in `[start, end]`.
    Zone { start: f64, end: f64, v: f64, obstacle: bool },
}

impl Cap {
    fn allow(&self, s: f64, b: f64) -> f64 {
        match *self {
            Cap::Stop { s: stop, .. } => (2.0 * b * (stop - s).max(0.0)).sqrt(),
            Cap::Zone { start, end, v, .. } => {
                if s > end {
                    f64::INFINITY
                } else {
                    (v * v + 2.0 * b * (start - s).max(0.0)).sqrt()
                }
            }
        }
    }

    fn obstacle(&self) -> bool {
        match *self {
            Cap::Stop { obstacle, .. } | Cap::Zone { obstacle, .. } => obstacle,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Nudge {
    s_min: f64,
    s_max: f64,
    offset: f64,
}

/// Routed reference line with its station-lateral helpers.
#[derive(Clone, Debug)]
pub struct RefLine {
    pub line: Polyline,
    pub speed_limit: f64,
}

impl RefLine {
    /// Concatenated centerlines from the lane nearest `p` to the lane of `dest`.
    pub fn build(map: &LaneMap, p: Vec2, dest: Vec2) -> Option<RefLine> {
        let start = match map.lane_at(p) {
            Some(hit) => hit.lane,
            None => map
                .lanes
                .iter()
                .min_by(|a, b| a.centerline.project(p).distance.total_cmp(&b.centerline.project(p).distance))?,
        };
        let goal = map.lane_at(dest).map_or(start.id, |h| h.lane.id);
        let ids = map.route(start.id, goal).unwrap_or_else(|| vec![start.id]);
        let mut pts = Vec::new();
        let mut limit = f64::INFINITY;
        for id in ids {
            let lane = map.lane(id)?;
            limit = limit.min(lane.speed_limit);
            pts.extend_from_slice(lane.centerline.points());
        }
        Some(RefLine { line: Polyline::new(pts)?, speed_limit: limit })
    }

    pub fn sl(&self, p: Vec2) -> (f64, f64) {
        let pr = self.line.project(p);
        // Beyond the ends the projection clamps; extend the station linearly.
        let len = self.line.length();
        if pr.station <= 0.0 || pr.station >= len {
            let s_edge = pr.station.clamp(0.0, len);
            let origin = self.line.point_at(s_edge, 0.0);
            let dir = Vec2::from_angle(self.line.heading_at(s_edge));
            let d = p - origin;
            return (s_edge + d.dot(dir), dir.cross(d));
        }
        (pr.station, pr.lateral)
    }

    /// Station and lateral extents of a box.
    pub fn extent(&self, b: &OrientedBox) -> (f64, f64, f64, f64) {
        let mut r = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in b.corners() {
            let (s, l) = self.sl(c);
            r = (r.0.min(s), r.1.max(s), r.2.min(l), r.3.max(l));
        }
        r
    }
}

/// Everything the planner reads besides the messages.
pub struct PlanContext<'a> {
    pub scenario: &'a Scenario,
    pub params: &'a PlannerParams,
}

struct Profile {
    s: Vec<f64>,
    v: Vec<f64>,
}

fn integrate(caps: &[Cap], s0: f64, v0: f64, cruise: f64, p: &PlannerParams, steps: usize) -> Profile {
    let dt = p.step_ms as f64 / 1000.0;
    let allow = |s: f64| caps.iter().fold(cruise, |m, c| m.min(c.allow(s, p.comfort_decel)));
    let mut s = s0;
    let mut v = v0.max(0.0);
    let mut out = Profile { s: vec![s], v: vec![v] };
    for _ in 0..steps {
        let mut next = (v + p.comfort_accel * dt).min(allow(s + v * dt));
        next = next.max(v - p.max_decel * dt).max(0.0);
        s += 0.5 * (v + next) * dt;
        v = next;
        out.s.push(s);
        out.v.push(v);
    }
    out
}

fn nudge_weight(n: &Nudge, s: f64, half_len: f64, ramp: f64) -> f64 {
    let full_from = n.s_min - half_len - 1.0;
    let full_to = n.s_max + half_len + 1.0;
    if s < full_from - ramp || s > full_to + ramp {
        0.0
    } else if s < full_from {
        (s - (full_from - ramp)) / ramp
    } else if s > full_to {
        1.0 - (s - full_to) / ramp
    } else {
        1.0
    }
}

fn lateral_target(nudges: &[Nudge], s: f64, half_len: f64, ramp: f64) -> f64 {
    let mut best: f64 = 0.0;
    for n in nudges {
        let o = n.offset * nudge_weight(n, s, half_len, ramp);
        if o.abs() > best.abs() {
            best = o;
        }
    }
    best
}

/// Core planner. Deterministic in its inputs.
pub fn plan(ctx: &PlanContext<'_>, t: SimTime, pred: &PredictionOut, loc: &LocalizationOut, faults: PlanFaults) -> PlanningOut {
    let mut cov: Vec<&'static str> = Vec::new();
    if faults.no_trajectory {
        return PlanningOut { trajectory: Vec::new(), decision: Decision::Stop, coverage: vec!["fault.no_trajectory".into()] };
    }
    let p = ctx.params;
    let sc = ctx.scenario;
    let half_len = sc.ego.size.length / 2.0;
    let half_w = sc.ego.size.width / 2.0;
    let hw = half_w + p.clearance + p.lateral_margin;
    let gap = p.clearance + p.stop_buffer;
    let steps = (p.horizon_ms / p.step_ms) as usize;

    let Some(rl) = RefLine::build(&sc.map, loc.p, sc.ego.dest) else {
        cov.push("route.missing");
        return PlanningOut { trajectory: Vec::new(), decision: Decision::Stop, coverage: tags(cov) };
    };
    cov.push("route.found");
    let (s0, l0) = rl.sl(loc.p);
    let (s_dest, _) = rl.sl(sc.ego.dest);
    let cruise = p.cruise_speed.min(rl.speed_limit);

    let mut caps: Vec<Cap> = vec![Cap::Stop { s: s_dest, obstacle: false }];
    if s_dest - s0 < cruise * cruise / (2.0 * p.comfort_decel) + 5.0 {
        cov.push("dest.approach");
    }

    for sig in &sc.signals {
        let (s_line, _) = rl.sl(sig.stop_line);
        let front_gap = s_line - (s0 + half_len);
        if front_gap < -0.5 {
            continue;
        }
        match sig.color_at(t) {
            SignalColor::Red => {
                cov.push("signal.red");
                caps.push(Cap::Stop { s: s_line - half_len, obstacle: false });
            }
            SignalColor::Yellow if loc.speed * loc.speed / (2.0 * p.comfort_decel) <= front_gap => {
                cov.push("signal.yellow_stop");
                caps.push(Cap::Stop { s: s_line - half_len, obstacle: false });
            }
            _ => {}
        }
    }

    // Classify predicted objects.
    let mut statics: Vec<(&PredictedObject, (f64, f64, f64, f64))> = Vec::new();
    let mut movers: Vec<&PredictedObject> = Vec::new();
    let mut nudges: Vec<Nudge> = Vec::new();
    let mut obstacle_caps: Vec<Cap> = Vec::new();
    for obj in &pred.objects {
        if obj.trajectory.is_empty() {
            continue;
        }
        let ext = rl.extent(&obj.box_at(t));
        if ext.1 < s0 - half_len {
            continue;
        }
        if obj.displacement() < p.static_displacement {
            statics.push((obj, ext));
            continue;
        }
        let in_corridor = ext.3 >= -hw && ext.2 <= hw;
        let (s_a, _) = rl.sl(obj.position_at(t));
        let (s_b, _) = rl.sl(obj.position_at(t + 1000));
        let v_long = s_b - s_a;
        if in_corridor && v_long > p.lead_min_speed && ext.0 > s0 {
            cov.push("lead.follow");
            let s_stop = ext.0 + v_long * v_long / (2.0 * p.max_decel) - gap - half_len;
            obstacle_caps.push(Cap::Stop { s: s_stop, obstacle: true });
        } else {
            movers.push(obj);
        }
    }

    // Static objects: nudge when a small offset clears them, otherwise stop.
    for (_, ext) in &statics {
        let (s_min, s_max, lo, hi) = *ext;
        if hi < -hw || lo > hw {
            continue;
        }
        cov.push("static.blocking");
        let right = lo - hw;
        let left = hi + hw;
        let offset = if right.abs() <= left.abs() { right } else { left };
        let front_gap = s_min - (s0 + half_len);
        if offset.abs() <= p.nudge_max_offset {
            if front_gap <= p.nudge_zone && loc.speed > p.nudge_speed + p.nudge_commit_margin {
                cov.push("static.commit_stop");
                obstacle_caps.push(Cap::Stop { s: s_min - gap - half_len, obstacle: true });
            } else {
                cov.push("static.nudge");
                nudges.push(Nudge { s_min, s_max, offset });
                obstacle_caps.push(Cap::Zone {
                    start: s_min - half_len - p.nudge_zone,
                    end: s_max + half_len,
                    v: p.nudge_speed,
                    obstacle: true,
                });
            }
        } else {
            cov.push("static.stop");
            obstacle_caps.push(Cap::Stop { s: s_min - gap - half_len, obstacle: true });
        }
    }
    // Re-check statics against the nudged path.
    for (_, ext) in &statics {
        let (s_min, s_max, lo, hi) = *ext;
        let probes = [s_min - half_len, 0.5 * (s_min + s_max), s_max + half_len];
        let blocked = probes.iter().any(|&s| {
            let l = lateral_target(&nudges, s, half_len, p.nudge_ramp);
            hi >= l - hw && lo <= l + hw
        });
        let nudged = nudges.iter().any(|n| n.s_min == s_min && n.s_max == s_max);
        if blocked && !nudged {
            cov.push("static.residual_stop");
            obstacle_caps.push(Cap::Stop { s: s_min - gap - half_len, obstacle: true });
        }
    }

    // Moving objects that cross or occupy the corridor: time-aware yield.
    let buffer = p.crossing_buffer_ms as f64 / 1000.0;
    let mut yielded = vec![false; movers.len()];
    loop {
        let mut all = caps.clone();
        if !faults.drop_obstacle_caps {
            all.extend(obstacle_caps.iter().copied());
        }
        let prof = integrate(&all, s0, loc.speed, cruise, p, steps);
        let mut changed = false;
        for (i, obj) in movers.iter().enumerate() {
            if yielded[i] {
                continue;
            }
            let mut window: Option<(f64, f64)> = None;
            let (mut s_lo, mut s_hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut open_at_end = false;
            for k in 0..=steps {
                let tau = k as f64 * p.step_ms as f64 / 1000.0;
                let ext = rl.extent(&obj.box_at(t + k as u64 * p.step_ms));
                let l = lateral_target(&nudges, 0.5 * (ext.0 + ext.1), half_len, p.nudge_ramp);
                let inside = ext.3 >= l - hw && ext.2 <= l + hw && ext.1 >= s0 - half_len;
                if inside {
                    window = Some(window.map_or((tau, tau), |(a, _)| (a, tau)));
                    s_lo = s_lo.min(ext.0);
                    s_hi = s_hi.max(ext.1);
                    open_at_end = k == steps;
                }
            }
            let Some((t_in, mut t_out)) = window else { continue };
            if open_at_end {
                t_out = f64::INFINITY;
            }
            let zone_lo = s_lo - half_len - gap;
            let zone_hi = s_hi + half_len + p.clearance;
            let dt = p.step_ms as f64 / 1000.0;
            let te_in = prof.s.iter().position(|&s| s >= zone_lo).map(|k| k as f64 * dt);
            let Some(te_in) = te_in else {
                cov.push("crossing.clear");
                continue;
            };
            let te_out = prof.s.iter().position(|&s| s > zone_hi).map_or(f64::INFINITY, |k| k as f64 * dt);
            if te_in <= t_out + buffer && te_out >= t_in - buffer {
                cov.push("crossing.yield");
                obstacle_caps.push(Cap::Stop { s: zone_lo, obstacle: true });
                yielded[i] = true;
                changed = true;
            } else {
                cov.push("crossing.pass");
            }
        }
        if !changed {
            break;
        }
    }

    let kept: Vec<Cap> = if faults.drop_obstacle_caps {
        if obstacle_caps.iter().any(Cap::obstacle) {
            cov.push("fault.caps_dropped");
        }
        caps.clone()
    } else {
        caps.iter().chain(obstacle_caps.iter()).copied().collect()
    };
    let prof = integrate(&kept, s0, loc.speed, cruise, p, steps);

    // Lateral path: nudge target plus bias, blended in from the believed offset.
    let bias = faults.lateral_bias;
    if bias != 0.0 {
        cov.push("fault.lateral_bias");
    }
    // A nudge only shapes the path when its speed zone is honored.
    let nudges: Vec<Nudge> = if faults.drop_obstacle_caps { Vec::new() } else { nudges };
    let target = |s: f64| lateral_target(&nudges, s, half_len, p.nudge_ramp) + bias;
    let l_at = |s: f64| {
        let w = (1.0 - (s - s0) / p.blend_distance).clamp(0.0, 1.0);
        target(s) + (l0 - target(s0)) * w
    };
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(PlanPoint { t, p: loc.p, speed: loc.speed, heading: loc.heading });
    for k in 1..=steps {
        let s = prof.s[k];
        let l = l_at(s);
        let ds = 0.5;
        let slope = (l_at(s + ds) - l) / ds;
        trajectory.push(PlanPoint {
            t: t + k as u64 * p.step_ms,
            p: rl.line.point_at(s, l),
            speed: prof.v[k],
            heading: crate::num::wrap_angle(rl.line.heading_at(s) + slope.atan()),
        });
    }

    let dt = p.step_ms as f64 / 1000.0;
    let first_decel = (prof.v[0] - prof.v[1]) / dt;
    let stops = prof.v[steps] < 0.05 && kept.iter().any(|c| matches!(c, Cap::Stop { .. }));
    let nudging = nudges.iter().any(|n| nudge_weight(n, prof.s[steps], half_len, p.nudge_ramp) > 0.0 || nudge_weight(n, s0, half_len, p.nudge_ramp) > 0.0);
    let decision = if first_decel > p.comfort_decel + 0.1 {
        cov.push("profile.emergency");
        Decision::Emergency
    } else if stops {
        Decision::Stop
    } else if nudging {
        Decision::Nudge
    } else {
        cov.push("profile.cruise");
        Decision::Cruise
    };
    PlanningOut { trajectory, decision, coverage: tags(cov) }
}

fn tags(mut cov: Vec<&'static str>) -> Vec<String> {
    cov.sort_unstable();
    cov.dedup();
    cov.into_iter().map(String::from).collect()
}

/// Collects the planning fault effects that fire at `t`.
pub fn active_faults(faults: &[FaultSpec], t: SimTime, ego_p: Vec2, rng: &mut ChaCha8Rng) -> PlanFaults {
    let mut pf = PlanFaults::default();
    for f in for_component(faults, ComponentId::Planning) {
        if !f.trigger.fires(t, ego_p, rng) {
            continue;
        }
        match f.kind {
            FaultKind::IncorrectPathPlanning { lateral_bias } => pf.lateral_bias += lateral_bias,
            FaultKind::IncorrectSpeedPlanning => pf.drop_obstacle_caps = true,
            FaultKind::NoPlanningTrajectory => pf.no_trajectory = true,
            _ => {}
        }
    }
    pf
}

/// Planning component tick: returns the plan and whether a fault changed it.
pub fn planning_tick(
    ctx: &PlanContext<'_>,
    t: SimTime,
    pred: &PredictionOut,
    loc: &LocalizationOut,
    ego_p: Vec2,
    faults: &[FaultSpec],
    rng: &mut ChaCha8Rng,
) -> (PlanningOut, bool) {
    let pf = active_faults(faults, t, ego_p, rng);
    let out = plan(ctx, t, pred, loc, pf);
    if pf.is_none() {
        return (out, false);
    }
    let clean = plan(ctx, t, pred, loc, PlanFaults::default());
    let changed = clean.trajectory != out.trajectory;
    (out, changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ads::PredPoint;
    use crate::scenario::{EgoSpec, Lane, ObjectKind, Pose, Size};

    fn scenario() -> Scenario {
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
                dest: Vec2::new(250.0, 0.0),
                size: Size::new(4.6, 2.0, 1.5),
            },
            objects: vec![],
            signals: vec![],
            t_max_ms: SimTime(30_000),
            seed: 0,
        }
    }

    fn loc(x: f64, speed: f64) -> LocalizationOut {
        LocalizationOut { p: Vec2::new(x, 0.0), heading: 0.0, speed, accel: 0.0 }
    }

    fn static_obj(x: f64, y: f64, len: f64, wid: f64) -> PredictedObject {
        PredictedObject {
            id: 1,
            kind: ObjectKind::StaticObstacle,
            half_extents: Vec2::new(len / 2.0, wid / 2.0),
            heading: 0.0,
            trajectory: (0..=30).map(|k| PredPoint { t: SimTime(k * 100), p: Vec2::new(x, y) }).collect(),
        }
    }

    #[test]
    fn empty_road_cruises_on_centerline() {
        let sc = scenario();
        let params = PlannerParams::default();
        let ctx = PlanContext { scenario: &sc, params: &params };
        let out = plan(&ctx, SimTime(0), &PredictionOut::default(), &loc(10.0, 10.0), PlanFaults::default());
        assert_eq!(out.decision, Decision::Cruise);
        assert_eq!(out.trajectory.len(), 51);
        assert!(out.trajectory.iter().all(|q| q.p.y.abs() < 1e-9 && (q.speed - 10.0).abs() < 1e-9));
    }

    #[test]
    fn blocking_static_obstacle_stops_with_clearance() {
        let sc = scenario();
        let params = PlannerParams { horizon_ms: 20_000, ..PlannerParams::default() };
        let ctx = PlanContext { scenario: &sc, params: &params };
        let pred = PredictionOut { objects: vec![static_obj(40.0, 0.0, 1.0, 3.0)] };
        let out = plan(&ctx, SimTime(0), &pred, &loc(10.0, 5.0), PlanFaults::default());
        assert_eq!(out.decision, Decision::Stop);
        let last = out.trajectory.last().unwrap();
        assert!(last.speed < 1e-3);
        let front = last.p.x + 2.3;
        // The discrete profile may overshoot the stop point by a few millimetres.
        assert!(39.5 - front >= 0.3 + 0.5 - 0.01, "front at {front}");
        for w in out.trajectory.windows(2) {
            assert!(((w[1].speed - w[0].speed) / 0.1).abs() <= 8.0);
        }
    }

    #[test]
    fn small_offset_nudges() {
        let sc = scenario();
        let params = PlannerParams::default();
        let ctx = PlanContext { scenario: &sc, params: &params };
        let pred = PredictionOut { objects: vec![static_obj(30.0, 0.9, 0.5, 0.5)] };
        let out = plan(&ctx, SimTime(0), &pred, &loc(10.0, 3.0), PlanFaults::default());
        assert_eq!(out.decision, Decision::Nudge);
        assert!(out.coverage.iter().any(|c| c == "static.nudge"));
    }

    #[test]
    fn speed_fault_keeps_cruise_through_obstacle() {
        let sc = scenario();
        let params = PlannerParams::default();
        let ctx = PlanContext { scenario: &sc, params: &params };
        let pred = PredictionOut { objects: vec![static_obj(40.0, 0.0, 1.0, 3.0)] };
        let f = PlanFaults { drop_obstacle_caps: true, ..PlanFaults::default() };
        let out = plan(&ctx, SimTime(0), &pred, &loc(10.0, 10.0), f);
        assert!(out.trajectory.iter().all(|q| (q.speed - 10.0).abs() < 1e-9));
    }

    #[test]
    fn no_trajectory_fault_is_empty() {
        let sc = scenario();
        let params = PlannerParams::default();
        let ctx = PlanContext { scenario: &sc, params: &params };
        let f = PlanFaults { no_trajectory: true, ..PlanFaults::default() };
        assert!(plan(&ctx, SimTime(0), &PredictionOut::default(), &loc(0.0, 0.0), f).trajectory.is_empty());
    }
}
