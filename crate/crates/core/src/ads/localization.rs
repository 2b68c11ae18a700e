//! Localization: exact ego state with an optional lateral error.

use rand_chacha::ChaCha8Rng;

use super::faults::{for_component, FaultKind, FaultSpec};
use super::LocalizationOut;
use crate::middleware::ComponentId;
use crate::world::EgoState;
use crate::Vec2;

pub fn localization_tick(ego: &EgoState, faults: &[FaultSpec], rng: &mut ChaCha8Rng) -> (LocalizationOut, bool) {
    let mut out = truth(ego);
    let mut injected = false;
    for f in for_component(faults, ComponentId::Localization) {
        if let FaultKind::WrongLateralLocalization { lateral_offset } = f.kind {
            if f.trigger.fires(ego.t, ego.p, rng) && lateral_offset != 0.0 {
                out.p += Vec2::from_angle(ego.heading).perp().scale(lateral_offset);
                injected = true;
            }
        }
    }
    (out, injected)
}

pub fn truth(ego: &EgoState) -> LocalizationOut {
    LocalizationOut { p: ego.p, heading: ego.heading, speed: ego.speed, accel: ego.accel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ads::{FaultSpec, Trigger};
    use crate::time::SimTime;
    use rand::SeedableRng;

    #[test]
    fn lateral_fault_inside_window_only() {
        let f = FaultSpec::new(
            FaultKind::WrongLateralLocalization { lateral_offset: 1.5 },
            Trigger { start_ms: SimTime(1000), end_ms: Some(SimTime(2000)), ..Trigger::default() },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ego = EgoState::at_rest(Vec2::new(5.0, 0.0), 0.0);
        let (out, inj) = localization_tick(&ego, std::slice::from_ref(&f), &mut rng);
        assert!(!inj && out == truth(&ego));
        ego.t = SimTime(1500);
        let (out, inj) = localization_tick(&ego, &[f], &mut rng);
        assert!(inj && (out.p.y - 1.5).abs() < 1e-12);
    }
}
