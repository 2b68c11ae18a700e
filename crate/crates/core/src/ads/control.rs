//! Pure-pursuit steering with proportional speed tracking.

use rand_chacha::ChaCha8Rng;

use super::faults::{for_component, FaultKind, FaultSpec};
use super::{ControlOut, LocalizationOut, PlanningOut};
use crate::middleware::ComponentId;
use crate::time::SimTime;
use crate::world::{ACCEL_MAX, ACCEL_MIN, STEER_MAX, WHEELBASE};
use crate::Vec2;

pub const SPEED_GAIN: f64 = 1.0;
pub const MIN_LOOKAHEAD: f64 = 3.0;
pub const LOOKAHEAD_TIME: f64 = 0.5;

/// First point on the plan polyline at least `ld` from `p`, searching
/// forward from the segment closest to `p`.
fn lookahead_point(plan: &PlanningOut, p: Vec2, ld: f64) -> Vec2 {
    let tr = &plan.trajectory;
    let closest = tr
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.p.distance(p).total_cmp(&b.1.p.distance(p)))
        .map_or(0, |(i, _)| i);
    for w in tr[closest..].windows(2) {
        let (a, b) = (w[0].p, w[1].p);
        if b.distance(p) < ld {
            continue;
        }
        // Intersection of the circle |x - p| = ld with segment a-b.
        let d = b - a;
        let f = a - p;
        let qa = d.dot(d);
        if qa < 1e-12 {
            return b;
        }
        let qb = 2.0 * f.dot(d);
        let qc = f.dot(f) - ld * ld;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let u = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
        return a + d.scale(u);
    }
    // Plan shorter than the lookahead: extend along its final heading.
    let last = tr[tr.len() - 1];
    let rem = (ld - last.p.distance(p)).max(0.0);
    last.p + Vec2::from_angle(last.heading).scale(rem)
}

/// Nominal command before faults. An empty plan holds the brake.
pub fn track(plan: &PlanningOut, loc: &LocalizationOut, t: SimTime) -> ControlOut {
    let Some(target) = plan.sample(t) else {
        return ControlOut { accel_cmd: ACCEL_MIN, steer: 0.0 };
    };
    let ld = MIN_LOOKAHEAD.max(LOOKAHEAD_TIME * loc.speed);
    let goal = lookahead_point(plan, loc.p, ld);
    let to = goal - loc.p;
    let alpha = crate::num::wrap_angle(to.angle() - loc.heading);
    let dist = to.norm().max(1e-6);
    let steer = (2.0 * WHEELBASE * alpha.sin() / dist).atan();
    let accel = plan.accel_at(t) + SPEED_GAIN * (target.speed - loc.speed);
    ControlOut { accel_cmd: accel.clamp(ACCEL_MIN, ACCEL_MAX), steer: steer.clamp(-STEER_MAX, STEER_MAX) }
}

pub fn control_tick(
    plan: &PlanningOut,
    loc: &LocalizationOut,
    t: SimTime,
    ego_p: Vec2,
    faults: &[FaultSpec],
    rng: &mut ChaCha8Rng,
) -> (ControlOut, bool) {
    let mut cmd = track(plan, loc, t);
    let mut injected = false;
    for f in for_component(faults, ComponentId::Control) {
        let (da, ds) = match f.kind {
            FaultKind::WrongLongitudinalCommand { accel_offset } => (accel_offset, 0.0),
            FaultKind::WrongLateralCommand { steer_offset } => (0.0, steer_offset),
            _ => continue,
        };
        if f.trigger.fires(t, ego_p, rng) {
            cmd.accel_cmd += da;
            cmd.steer += ds;
            injected = true;
        }
    }
    cmd.accel_cmd = cmd.accel_cmd.clamp(ACCEL_MIN, ACCEL_MAX);
    cmd.steer = cmd.steer.clamp(-STEER_MAX, STEER_MAX);
    (cmd, injected)
}
