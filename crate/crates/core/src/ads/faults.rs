//! Declarative fault specifications applied to component outputs.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DvcaError, Result};
use crate::middleware::ComponentId;
use crate::time::SimTime;
use crate::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FaultKind {
    MissDetection,
    WrongBBox {
        scale_length: f64,
        scale_width: f64,
    },
    /// Shift along the ego heading (m).
    WrongLongitudinalDist {
        offset: f64,
    },
    /// Shift to the left of the ego heading (m).
    WrongLateralDist {
        offset: f64,
    },
    /// Velocity error in the object's own frame (m/s).
    WrongVelocity {
        #[serde(default)]
        delta_longitudinal: f64,
        #[serde(default)]
        delta_lateral: f64,
    },
    NoPredictionTrajectory,
    /// Replaces the trajectory with `p + offset + velocity * tau`.
    WrongPredictionTrajectory {
        #[serde(default)]
        offset: Vec2,
        #[serde(default)]
        velocity: Vec2,
    },
    IncorrectPathPlanning {
        lateral_bias: f64,
    },
    /// Drops every obstacle-derived speed constraint.
    IncorrectSpeedPlanning,
    NoPlanningTrajectory,
    WrongLongitudinalCommand {
        accel_offset: f64,
    },
    WrongLateralCommand {
        steer_offset: f64,
    },
    WrongLateralLocalization {
        lateral_offset: f64,
    },
}

impl FaultKind {
    pub fn component(&self) -> ComponentId {
        use FaultKind::*;
        match self {
            MissDetection | WrongBBox { .. } | WrongLongitudinalDist { .. } | WrongLateralDist { .. } | WrongVelocity { .. } => {
                ComponentId::Perception
            }
            NoPredictionTrajectory | WrongPredictionTrajectory { .. } => ComponentId::Prediction,
            IncorrectPathPlanning { .. } | IncorrectSpeedPlanning | NoPlanningTrajectory => ComponentId::Planning,
            WrongLongitudinalCommand { .. } | WrongLateralCommand { .. } => ComponentId::Control,
            WrongLateralLocalization { .. } => ComponentId::Localization,
        }
    }

    pub fn name(&self) -> &'static str {
        use FaultKind::*;
        match self {
            MissDetection => "MissDetection",
            WrongBBox { .. } => "WrongBBox",
            WrongLongitudinalDist { .. } => "WrongLongitudinalDist",
            WrongLateralDist { .. } => "WrongLateralDist",
            WrongVelocity { .. } => "WrongVelocity",
            NoPredictionTrajectory => "NoPredictionTrajectory",
            WrongPredictionTrajectory { .. } => "WrongPredictionTrajectory",
            IncorrectPathPlanning { .. } => "IncorrectPathPlanning",
            IncorrectSpeedPlanning => "IncorrectSpeedPlanning",
            NoPlanningTrajectory => "NoPlanningTrajectory",
            WrongLongitudinalCommand { .. } => "WrongLongitudinalCommand",
            WrongLateralCommand { .. } => "WrongLateralCommand",
            WrongLateralLocalization { .. } => "WrongLateralLocalization",
        }
    }
}

/// Axis-aligned region the true ego position must be inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Vec2,
    pub max: Vec2,
}

impl Region {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    #[serde(default)]
    pub start_ms: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_ms: Option<SimTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default = "one")]
    pub probability: f64,
}

impl Default for Trigger {
    fn default() -> Self {
        Trigger { start_ms: SimTime::ZERO, end_ms: None, object_id: None, region: None, probability: 1.0 }
    }
}

impl Trigger {
    /// Time window and region test. The probability draw is separate so a
    /// component only consumes randomness when the window is open.
    pub fn window_open(&self, t: SimTime, ego_p: Vec2) -> bool {
        t >= self.start_ms && self.end_ms.is_none_or(|e| t < e) && self.region.is_none_or(|r| r.contains(ego_p))
    }

    pub fn fires(&self, t: SimTime, ego_p: Vec2, rng: &mut ChaCha8Rng) -> bool {
        if !self.window_open(t, ego_p) {
            return false;
        }
        self.probability >= 1.0 || rng.gen::<f64>() < self.probability
    }

    pub fn matches_object(&self, id: u32) -> bool {
        self.object_id.is_none_or(|o| o == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub target: ComponentId,
    #[serde(flatten)]
    pub kind: FaultKind,
    #[serde(default)]
    pub trigger: Trigger,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, trigger: Trigger) -> Self {
        FaultSpec { target: kind.component(), kind, trigger }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.component() != self.target {
            return Err(DvcaError::validation(
                "target",
                format!("{} cannot target {:?}", self.kind.name(), self.target),
            ));
        }
        if !(0.0..=1.0).contains(&self.trigger.probability) {
            return Err(DvcaError::validation("trigger.probability", "must lie in [0, 1]"));
        }
        if let Some(end) = self.trigger.end_ms {
            if end <= self.trigger.start_ms {
                return Err(DvcaError::validation("trigger.end_ms", "must exceed start_ms"));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FaultFile {
    Many(Vec<FaultSpec>),
    One(FaultSpec),
}

/// Reads a fault file holding either one spec or a list of specs.
pub fn load_faults(path: impl AsRef<Path>) -> Result<Vec<FaultSpec>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| DvcaError::io(path.as_ref(), e))?;
    let faults = match serde_json::from_str::<FaultFile>(&text)? {
        FaultFile::Many(v) => v,
        FaultFile::One(f) => vec![f],
    };
    for (i, f) in faults.iter().enumerate() {
        f.validate().map_err(|e| match e {
            DvcaError::Validation { path, reason } => DvcaError::validation(format!("[{i}].{path}"), reason),
            other => other,
        })?;
    }
    Ok(faults)
}

/// Faults aimed at `component`, in declaration order.
pub fn for_component(faults: &[FaultSpec], component: ComponentId) -> impl Iterator<Item = &FaultSpec> {
    faults.iter().filter(move |f| f.target == component)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn flattened_kind_round_trips() {
        let json = r#"{"target":"Control","kind":"WrongLongitudinalCommand","accel_offset":2.0,"trigger":{"start_ms":3000,"end_ms":5000}}"#;
        let f: FaultSpec = serde_json::from_str(json).unwrap();
        assert_eq!(f.kind, FaultKind::WrongLongitudinalCommand { accel_offset: 2.0 });
        assert_eq!(f.trigger.probability, 1.0);
        f.validate().unwrap();
        let back: FaultSpec = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn mismatched_target_rejected() {
        let f = FaultSpec { target: ComponentId::Planning, kind: FaultKind::MissDetection, trigger: Trigger::default() };
        assert!(matches!(f.validate(), Err(DvcaError::Validation { .. })));
    }

    #[test]
    fn window_is_half_open() {
        let tr = Trigger { start_ms: SimTime(3000), end_ms: Some(SimTime(5000)), ..Trigger::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(!tr.fires(SimTime(2999), Vec2::zero(), &mut rng));
        assert!(tr.fires(SimTime(3000), Vec2::zero(), &mut rng));
        assert!(!tr.fires(SimTime(5000), Vec2::zero(), &mut rng));
    }
}
