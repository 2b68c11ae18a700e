//! Constant-velocity trajectory prediction over a short horizon.

use rand_chacha::ChaCha8Rng;

use super::faults::{for_component, FaultKind, FaultSpec};
use super::{PerceivedObject, PerceptionOut, PredPoint, PredictedObject, PredictionOut};
use crate::middleware::ComponentId;
use crate::time::SimTime;
use crate::Vec2;

pub const HORIZON_MS: u64 = 3000;
pub const STEP_MS: u64 = 100;

/// Velocity for `obj`, falling back to a finite difference over the history
/// when the perceived velocity is unusable. Objects new to the history are
/// treated as fresh tracks with their latest velocity.
fn velocity(obj: &PerceivedObject, t: SimTime, history: &[(SimTime, &PerceptionOut)]) -> Vec2 {
    if obj.v.is_finite() {
        return obj.v;
    }
    for (tp, prev) in history.iter().rev() {
        if *tp >= t {
            continue;
        }
        if let Some(old) = prev.objects.iter().find(|o| o.id == obj.id) {
            let dt = (t - *tp) as f64 / 1000.0;
            return (obj.bbox.center - old.bbox.center).scale(1.0 / dt);
        }
    }
    Vec2::zero()
}

pub fn extrapolate(p: Vec2, v: Vec2, t: SimTime) -> Vec<PredPoint> {
    (0..=HORIZON_MS / STEP_MS)
        .map(|k| {
            let dt = k * STEP_MS;
            PredPoint { t: t + dt, p: p + v.scale(dt as f64 / 1000.0) }
        })
        .collect()
}

/// `history` is ordered oldest first and must end with the frame to predict from.
pub fn prediction_tick(
    history: &[(SimTime, &PerceptionOut)],
    t: SimTime,
    ego_p: Vec2,
    faults: &[FaultSpec],
    rng: &mut ChaCha8Rng,
) -> (PredictionOut, bool) {
    let Some((_, latest)) = history.last() else {
        return (PredictionOut::default(), false);
    };
    let mut objects: Vec<PredictedObject> = latest
        .objects
        .iter()
        .map(|o| PredictedObject {
            id: o.id,
            kind: o.kind,
            half_extents: o.bbox.half_extents,
            heading: o.bbox.heading,
            trajectory: extrapolate(o.bbox.center, velocity(o, t, &history[..history.len() - 1]), t),
        })
        .collect();
    let mut injected = false;
    for f in for_component(faults, ComponentId::Prediction) {
        if !f.trigger.fires(t, ego_p, rng) {
            continue;
        }
        match f.kind {
            FaultKind::NoPredictionTrajectory => {
                let before = objects.len();
                objects.retain(|o| !f.trigger.matches_object(o.id));
                injected |= objects.len() != before;
            }
            FaultKind::WrongPredictionTrajectory { offset, velocity } => {
                for o in objects.iter_mut().filter(|o| f.trigger.matches_object(o.id)) {
                    let p0 = o.trajectory[0].p;
                    o.trajectory = extrapolate(p0 + offset, velocity, t);
                    injected = true;
                }
            }
            _ => {}
        }
    }
    (PredictionOut { objects }, injected)
}
