//! Object-list perception: ground truth within range plus injected errors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::faults::{for_component, FaultKind, FaultSpec};
use super::{PerceivedObject, PerceptionOut};
use crate::middleware::ComponentId;
use crate::time::SimTime;
use crate::world::{EgoState, GroundTruthObject};
use crate::Vec2;

/// Returns the perceived object list and whether any fault altered it.
/// `truth` is already restricted to the sensor range around the true ego.
pub fn perception_tick(
    truth: &[GroundTruthObject],
    ego: &EgoState,
    faults: &[FaultSpec],
    rng: &mut ChaCha8Rng,
    t: SimTime,
    noise: f64,
) -> (PerceptionOut, bool) {
    let mut objects: Vec<PerceivedObject> =
        truth.iter().map(|g| PerceivedObject { id: g.id, kind: g.kind, bbox: g.bbox, v: g.v }).collect();
    if noise > 0.0 {
        for o in &mut objects {
            o.bbox.center += Vec2::new(rng.gen_range(-noise..=noise), rng.gen_range(-noise..=noise));
        }
    }
    let fwd = Vec2::from_angle(ego.heading);
    let left = fwd.perp();
    let mut injected = false;
    for f in for_component(faults, ComponentId::Perception) {
        if !f.trigger.fires(t, ego.p, rng) {
            continue;
        }
        let hit = |o: &PerceivedObject| f.trigger.matches_object(o.id);
        match &f.kind {
            FaultKind::MissDetection => {
                let before = objects.len();
                objects.retain(|o| !hit(o));
                injected |= objects.len() != before;
            }
            kind => {
                for o in objects.iter_mut().filter(|o| hit(o)) {
                    match *kind {
                        FaultKind::WrongBBox { scale_length, scale_width } => {
                            o.bbox.half_extents = Vec2::new(o.bbox.half_extents.x * scale_length, o.bbox.half_extents.y * scale_width);
                        }
                        FaultKind::WrongLongitudinalDist { offset } => o.bbox.center += fwd.scale(offset),
                        FaultKind::WrongLateralDist { offset } => o.bbox.center += left.scale(offset),
                        FaultKind::WrongVelocity { delta_longitudinal, delta_lateral } => {
                            let of = Vec2::from_angle(o.bbox.heading);
                            o.v += of.scale(delta_longitudinal) + of.perp().scale(delta_lateral);
                        }
                        _ => continue,
                    }
                    injected = true;
                }
            }
        }
    }
    (PerceptionOut { objects }, injected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ads::Trigger;
    use crate::scenario::ObjectKind;
    use crate::OrientedBox;
    use rand::SeedableRng;

    fn truth() -> Vec<GroundTruthObject> {
        vec![
            GroundTruthObject {
                id: 7,
                kind: ObjectKind::Vehicle,
                bbox: OrientedBox::new(Vec2::new(20.0, 0.0), Vec2::new(2.0, 1.0), 0.0),
                v: Vec2::new(8.0, 0.0),
            },
            GroundTruthObject {
                id: 8,
                kind: ObjectKind::Pedestrian,
                bbox: OrientedBox::new(Vec2::new(30.0, 4.0), Vec2::new(0.25, 0.25), 0.0),
                v: Vec2::zero(),
            },
        ]
    }

    fn run(faults: &[FaultSpec], t: u64) -> (PerceptionOut, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        perception_tick(&truth(), &EgoState::at_rest(Vec2::zero(), 0.0), faults, &mut rng, SimTime(t), 0.0)
    }

    #[test]
    fn no_fault_is_identity() {
        let (out, injected) = run(&[], 0);
        assert!(!injected);
        assert_eq!(out.objects.len(), 2);
        assert_eq!(out.objects[0].bbox, truth()[0].bbox);
    }

    #[test]
    fn miss_detection_in_window_only() {
        let f = FaultSpec::new(
            FaultKind::MissDetection,
            Trigger { start_ms: SimTime(2000), end_ms: Some(SimTime(6000)), object_id: Some(7), ..Trigger::default() },
        );
        let (out, injected) = run(std::slice::from_ref(&f), 3000);
        assert!(injected && out.objects.iter().all(|o| o.id != 7));
        let (out, injected) = run(&[f], 6000);
        assert!(!injected && out.objects.len() == 2);
    }

    #[test]
    fn wrong_velocity_along_heading() {
        let f = FaultSpec::new(
            FaultKind::WrongVelocity { delta_longitudinal: -5.0, delta_lateral: 0.0 },
            Trigger { object_id: Some(7), ..Trigger::default() },
        );
        let (out, _) = run(&[f], 0);
        assert!((out.objects[0].v.x - 3.0).abs() < 1e-12);
        assert_eq!(out.objects[1].v, Vec2::zero());
    }

    #[test]
    fn distance_faults_in_ego_frame() {
        let lon = FaultSpec::new(FaultKind::WrongLongitudinalDist { offset: 3.0 }, Trigger::default());
        let lat = FaultSpec::new(FaultKind::WrongLateralDist { offset: -1.0 }, Trigger::default());
        let (out, _) = run(&[lon, lat], 0);
        assert!(out.objects[0].bbox.center.distance(Vec2::new(23.0, -1.0)) < 1e-12);
    }
}
