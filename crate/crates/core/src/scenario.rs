//! Scenario data model: map, ego mission, scripted traffic objects and signals.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DvcaError, Result};
use crate::time::SimTime;
use crate::{OrientedBox, Polyline, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Pedestrian,
    Vehicle,
    StaticObstacle,
    Infrastructure,
}

/// Box dimensions `[length, width, height]` in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Size {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Size {
    pub const fn new(length: f64, width: f64, height: f64) -> Self {
        Size { length, width, height }
    }

    pub fn half_extents(&self) -> Vec2 {
        Vec2::new(self.length / 2.0, self.width / 2.0)
    }
}

impl From<[f64; 3]> for Size {
    fn from(a: [f64; 3]) -> Self {
        Size::new(a[0], a[1], a[2])
    }
}

impl From<Size> for [f64; 3] {
    fn from(s: Size) -> Self {
        [s.length, s.width, s.height]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    #[serde(rename = "t_ms")]
    pub t: SimTime,
    pub p: Vec2,
    #[serde(default)]
    pub v: Vec2,
    #[serde(default)]
    pub a: Vec2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficObject {
    pub id: u32,
    pub kind: ObjectKind,
    pub size: Size,
    pub waypoints: Vec<Waypoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_override: Option<f64>,
}

/// Interpolated kinematics of an object at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub p: Vec2,
    pub v: Vec2,
    pub a: Vec2,
}

impl TrafficObject {
    pub fn is_static(&self) -> bool {
        let p0 = self.waypoints[0].p;
        self.waypoints.iter().all(|w| w.p == p0 && w.v == Vec2::zero() && w.a == Vec2::zero())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: u32,
    pub centerline: Polyline,
    pub width: f64,
    pub speed_limit: f64,
    #[serde(default)]
    pub successors: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LaneMap {
    pub lanes: Vec<Lane>,
}

/// Result of locating a point on the map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneHit<'a> {
    pub lane: &'a Lane,
    pub station: f64,
    pub lateral: f64,
}

impl LaneMap {
    pub fn lane(&self, id: u32) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    /// Nearest lane whose corridor contains `p`; ties go to the smaller id.
    pub fn lane_at(&self, p: Vec2) -> Option<LaneHit<'_>> {
        let mut best: Option<(f64, LaneHit<'_>)> = None;
        for lane in &self.lanes {
            let pr = lane.centerline.project(p);
            if pr.lateral.abs() > lane.width / 2.0 || pr.distance > lane.width / 2.0 {
                continue;
            }
            let better = match &best {
                None => true,
                Some((d, hit)) => pr.distance < *d || (pr.distance == *d && lane.id < hit.lane.id),
            };
            if better {
                best = Some((pr.distance, LaneHit { lane, station: pr.station, lateral: pr.lateral }));
            }
        }
        best.map(|(_, h)| h)
    }

    /// Lane ids from `from` to `to` following successor links (breadth first).
    pub fn route(&self, from: u32, to: u32) -> Option<Vec<u32>> {
        let mut prev: Vec<(u32, u32)> = Vec::new();
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(id) = queue.pop_front() {
            if id == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev.iter().find(|(c, _)| *c == cur).map(|(_, p)| *p)?;
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &next in self.lane(id).map(|l| l.successors.as_slice()).unwrap_or(&[]) {
                if seen.insert(next) {
                    prev.push((next, id));
                    queue.push_back(next);
                }
            }
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalColor {
    Red,
    Yellow,
    Green,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalPhase {
    pub start_ms: SimTime,
    pub end_ms: SimTime,
    pub color: SignalColor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub id: u32,
    pub stop_line: Vec2,
    pub phases: Vec<SignalPhase>,
}

impl Signal {
    pub fn color_at(&self, t: SimTime) -> SignalColor {
        self.phases
            .iter()
            .find(|ph| ph.start_ms <= t && t < ph.end_ms)
            .or(self.phases.last())
            .map_or(SignalColor::Green, |ph| ph.color)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub p: Vec2,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub init_pose: Pose,
    pub dest: Vec2,
    pub size: Size,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub map: LaneMap,
    pub ego: EgoSpec,
    #[serde(default)]
    pub objects: Vec<TrafficObject>,
    #[serde(default)]
    pub signals: Vec<Signal>,
    pub t_max_ms: SimTime,
    #[serde(default)]
    pub seed: u64,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| DvcaError::io(path.as_ref(), e))?;
    Scenario::from_json(&text)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario)?;
    std::fs::write(path.as_ref(), text + "\n").map_err(|e| DvcaError::io(path.as_ref(), e))
}

fn finite(v: Vec2, path: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DvcaError::validation(path, "non-finite coordinate"))
    }
}

fn positive(x: f64, path: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(DvcaError::validation(path, format!("must be > 0, got {x}")))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_max_ms == SimTime::ZERO {
            return Err(DvcaError::validation("t_max_ms", "must be > 0"));
        }
        if self.map.lanes.is_empty() {
            return Err(DvcaError::validation("map.lanes", "at least one lane required"));
        }
        let mut ids = BTreeSet::new();
        for (i, lane) in self.map.lanes.iter().enumerate() {
            let path = format!("map.lanes[{i}]");
            if !ids.insert(lane.id) {
                return Err(DvcaError::validation(format!("{path}.id"), "duplicate lane id"));
            }
            positive(lane.width, &format!("{path}.width"))?;
            positive(lane.speed_limit, &format!("{path}.speed_limit"))?;
        }
        for (i, lane) in self.map.lanes.iter().enumerate() {
            for (j, succ) in lane.successors.iter().enumerate() {
                if !ids.contains(succ) {
                    return Err(DvcaError::validation(
                        format!("map.lanes[{i}].successors[{j}]"),
                        format!("unknown lane {succ}"),
                    ));
                }
            }
        }

        let ego = &self.ego;
        finite(ego.init_pose.p, "ego.init_pose.p")?;
        finite(ego.dest, "ego.dest")?;
        if !ego.init_pose.heading.is_finite() {
            return Err(DvcaError::validation("ego.init_pose.heading", "non-finite"));
        }
        positive(ego.size.length, "ego.size[0]")?;
        positive(ego.size.width, "ego.size[1]")?;
        positive(ego.size.height, "ego.size[2]")?;
        let start = self
            .map
            .lane_at(ego.init_pose.p)
            .ok_or_else(|| DvcaError::validation("ego.init_pose.p", "not on any lane"))?;
        let dest = self
            .map
            .lane_at(ego.dest)
            .ok_or_else(|| DvcaError::validation("ego.dest", "not on any lane"))?;
        if self.map.route(start.lane.id, dest.lane.id).is_none() {
            return Err(DvcaError::validation("ego.dest", "not reachable from ego.init_pose"));
        }

        let mut obj_ids = BTreeSet::new();
        for (i, obj) in self.objects.iter().enumerate() {
            let path = format!("objects[{i}]");
            if !obj_ids.insert(obj.id) {
                return Err(DvcaError::validation(format!("{path}.id"), "duplicate object id"));
            }
            positive(obj.size.length, &format!("{path}.size[0]"))?;
            positive(obj.size.width, &format!("{path}.size[1]"))?;
            positive(obj.size.height, &format!("{path}.size[2]"))?;
            if obj.waypoints.is_empty() {
                return Err(DvcaError::validation(format!("{path}.waypoints"), "empty"));
            }
            for (j, w) in obj.waypoints.iter().enumerate() {
                let wp = format!("{path}.waypoints[{j}]");
                finite(w.p, &format!("{wp}.p"))?;
                finite(w.v, &format!("{wp}.v"))?;
                finite(w.a, &format!("{wp}.a"))?;
                if j > 0 && w.t <= obj.waypoints[j - 1].t {
                    return Err(DvcaError::validation(format!("{wp}.t_ms"), "waypoint times must strictly increase"));
                }
            }
            if matches!(obj.kind, ObjectKind::StaticObstacle | ObjectKind::Infrastructure) && !obj.is_static() {
                return Err(DvcaError::validation(
                    format!("{path}.waypoints"),
                    "static objects need constant position and zero velocity",
                ));
            }
        }

        for (i, sig) in self.signals.iter().enumerate() {
            let path = format!("signals[{i}]");
            finite(sig.stop_line, &format!("{path}.stop_line"))?;
            let mut cursor = SimTime::ZERO;
            for (j, ph) in sig.phases.iter().enumerate() {
                if ph.start_ms != cursor || ph.end_ms <= ph.start_ms {
                    return Err(DvcaError::validation(
                        format!("{path}.phases[{j}]"),
                        "phases must be contiguous, non-empty and start at 0",
                    ));
                }
                cursor = ph.end_ms;
            }
            if cursor < self.t_max_ms {
                return Err(DvcaError::validation(format!("{path}.phases"), "phases must cover [0, t_max_ms)"));
            }
        }
        Ok(())
    }

    pub fn object(&self, id: u32) -> Option<&TrafficObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn ego_half_extents(&self) -> Vec2 {
        self.ego.size.half_extents()
    }
}

/// Linear interpolation of position and velocity between bracketing
/// waypoints; acceleration is taken verbatim from the earlier waypoint.
/// Clamps to the first/last waypoint outside the scripted range.
pub fn object_pose_at(obj: &TrafficObject, t: SimTime) -> Kinematics {
    let w = &obj.waypoints;
    let first = &w[0];
    let last = &w[w.len() - 1];
    if t <= first.t {
        return Kinematics { p: first.p, v: first.v, a: first.a };
    }
    if t >= last.t {
        return Kinematics { p: last.p, v: last.v, a: last.a };
    }
    let i = w.partition_point(|x| x.t <= t) - 1;
    let (w0, w1) = (&w[i], &w[i + 1]);
    let u = (t - w0.t) as f64 / (w1.t - w0.t) as f64;
    Kinematics { p: w0.p.lerp(w1.p, u), v: w0.v.lerp(w1.v, u), a: w0.a }
}

const MOVING_EPS: f64 = 1e-6;

/// Heading of an object at `t`: velocity direction when moving, otherwise
/// the direction of the last segment with displacement before `t`, then the
/// scenario's override, then 0.
pub fn object_heading_at(obj: &TrafficObject, t: SimTime) -> f64 {
    let k = object_pose_at(obj, t);
    if k.v.norm() > MOVING_EPS {
        return k.v.angle();
    }
    let w = &obj.waypoints;
    let upto = w.partition_point(|x| x.t <= t).min(w.len());
    for i in (1..upto).rev() {
        let d = w[i].p - w[i - 1].p;
        if d.norm() > MOVING_EPS {
            return d.angle();
        }
    }
    obj.heading_override.unwrap_or(0.0)
}

pub fn bbox_at(obj: &TrafficObject, t: SimTime) -> OrientedBox {
    OrientedBox::new(object_pose_at(obj, t).p, obj.size.half_extents(), object_heading_at(obj, t))
}

/// Box of the ego vehicle centered on its reference point.
pub fn ego_box(p: Vec2, heading: f64, size: &Size) -> OrientedBox {
    OrientedBox::new(p, size.half_extents(), heading)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(t: u64, x: f64, y: f64, vx: f64, vy: f64) -> Waypoint {
        Waypoint { t: SimTime(t), p: Vec2::new(x, y), v: Vec2::new(vx, vy), a: Vec2::zero() }
    }

    fn straight_map() -> LaneMap {
        LaneMap {
            lanes: vec![Lane {
                id: 0,
                centerline: Polyline::new([Vec2::new(0.0, 0.0), Vec2::new(200.0, 0.0)]).unwrap(),
                width: 3.5,
                speed_limit: 11.0,
                successors: vec![],
            }],
        }
    }

    #[test]
    fn interpolation_midpoint_and_clamp() {
        let obj = TrafficObject {
            id: 1,
            kind: ObjectKind::Pedestrian,
            size: Size::new(0.5, 0.5, 1.8),
            waypoints: vec![wp(0, 0.0, 0.0, 2.0, 0.0), wp(2000, 4.0, 0.0, 2.0, 0.0)],
            heading_override: None,
        };
        assert_eq!(object_pose_at(&obj, SimTime(1000)).p, Vec2::new(2.0, 0.0));
        assert_eq!(object_pose_at(&obj, SimTime(9000)).p, Vec2::new(4.0, 0.0));
        assert_eq!(object_heading_at(&obj, SimTime(500)), 0.0);
    }

    #[test]
    fn stopped_object_keeps_previous_heading() {
        let obj = TrafficObject {
            id: 1,
            kind: ObjectKind::Vehicle,
            size: Size::new(4.0, 2.0, 1.5),
            waypoints: vec![wp(0, 0.0, 0.0, 0.0, 1.0), wp(1000, 0.0, 1.0, 0.0, 0.0)],
            heading_override: None,
        };
        let h = object_heading_at(&obj, SimTime(5000));
        assert!((h - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn static_heading_defaults_to_zero_or_override() {
        let mut obj = TrafficObject {
            id: 1,
            kind: ObjectKind::StaticObstacle,
            size: Size::new(0.5, 0.5, 1.0),
            waypoints: vec![wp(0, 5.0, 5.0, 0.0, 0.0)],
            heading_override: None,
        };
        assert_eq!(bbox_at(&obj, SimTime(123)).heading, 0.0);
        obj.heading_override = Some(0.3);
        assert_eq!(bbox_at(&obj, SimTime(123)).heading, 0.3);
    }

    #[test]
    fn lane_at_on_and_off() {
        let map = straight_map();
        let hit = map.lane_at(Vec2::new(50.0, 0.0)).unwrap();
        assert_eq!(hit.lateral, 0.0);
        assert!((hit.station - 50.0).abs() < 1e-12);
        assert!(map.lane_at(Vec2::new(50.0, 10.0)).is_none());
    }

    #[test]
    fn lane_at_tie_breaks_to_smaller_id() {
        let mk = |id, y: f64| Lane {
            id,
            centerline: Polyline::new([Vec2::new(0.0, y), Vec2::new(100.0, y)]).unwrap(),
            width: 4.0,
            speed_limit: 10.0,
            successors: vec![],
        };
        let map = LaneMap { lanes: vec![mk(7, 1.5), mk(3, -1.5)] };
        assert_eq!(map.lane_at(Vec2::new(20.0, 0.0)).unwrap().lane.id, 3);
    }

    #[test]
    fn route_follows_successors() {
        let mut map = straight_map();
        map.lanes[0].successors = vec![1];
        map.lanes.push(Lane { id: 1, successors: vec![2], ..map.lanes[0].clone() });
        map.lanes.push(Lane { id: 2, successors: vec![], ..map.lanes[0].clone() });
        assert_eq!(map.route(0, 2), Some(vec![0, 1, 2]));
        assert_eq!(map.route(2, 0), None);
    }
}
