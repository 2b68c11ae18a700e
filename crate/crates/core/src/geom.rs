//! Planar geometry kernels: vectors, oriented boxes, polylines.
//!
//! Everything here is generic over [`Scalar`] so the same code serves the
//! `f64` simulator and any `f32` consumer. The crate root re-exports the
//! `f64` instantiations as `Vec2`, `OrientedBox` and `Polyline`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> From<[T; 2]> for Vec2<T> {
    fn from(a: [T; 2]) -> Self {
        Vec2 { x: a[0], y: a[1] }
    }
}

impl<T: Scalar> From<Vec2<T>> for [T; 2] {
    fn from(v: Vec2<T>) -> Self {
        [v.x, v.y]
    }
}

impl<T: Scalar> Vec2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2::new(T::zero(), T::zero())
    }

    /// Unit vector at `angle` radians from +x.
    pub fn from_angle(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Left-hand normal (rotated +90 degrees).
    pub fn perp(self) -> Self {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn scale(self, k: T) -> Self {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn lerp(self, o: Self, u: T) -> Self {
        self + (o - self).scale(u)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> AddAssign for Vec2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> SubAssign for Vec2<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        self.scale(k)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rectangle with arbitrary orientation. `half_extents.x` runs along the
/// heading (half length), `half_extents.y` across it (half width).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct OrientedBox<T> {
    pub center: Vec2<T>,
    pub half_extents: Vec2<T>,
    pub heading: T,
}

impl<T: Scalar> OrientedBox<T> {
    pub fn new(center: Vec2<T>, half_extents: Vec2<T>, heading: T) -> Self {
        OrientedBox { center, half_extents, heading }
    }

    /// Unit axes (forward, left).
    pub fn axes(&self) -> (Vec2<T>, Vec2<T>) {
        let f = Vec2::from_angle(self.heading);
        (f, f.perp())
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2<T>; 4] {
        let (f, l) = self.axes();
        let fx = f.scale(self.half_extents.x);
        let ly = l.scale(self.half_extents.y);
        let c = self.center;
        [c + fx + ly, c - fx + ly, c - fx - ly, c + fx - ly]
    }

    pub fn edges(&self) -> [(Vec2<T>, Vec2<T>); 4] {
        let k = self.corners();
        [(k[0], k[1]), (k[1], k[2]), (k[2], k[3]), (k[3], k[0])]
    }

    pub fn area(&self) -> T {
        T::lit(4.0) * self.half_extents.x * self.half_extents.y
    }

    /// Radius of the circumscribed circle.
    pub fn radius(&self) -> T {
        self.half_extents.norm()
    }

    /// Point in box frame: x forward, y left.
    pub fn to_local(&self, p: Vec2<T>) -> Vec2<T> {
        (p - self.center).rotate(-self.heading)
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        let q = self.to_local(p);
        q.x.abs() <= self.half_extents.x && q.y.abs() <= self.half_extents.y
    }

    pub fn translated(&self, d: Vec2<T>) -> Self {
        OrientedBox { center: self.center + d, ..*self }
    }
}

/// Distance from `p` to segment `[a, b]`.
pub fn point_segment_distance<T: Scalar>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == T::zero() {
        return p.distance(a);
    }
    let u = ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one());
    p.distance(a + ab.scale(u))
}

fn orient<T: Scalar>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>) -> T {
    (b - a).cross(c - a)
}

fn on_segment<T: Scalar>(a: Vec2<T>, b: Vec2<T>, p: Vec2<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// True when closed segments `[a0, a1]` and `[b0, b1]` share a point.
pub fn segments_intersect<T: Scalar>(a0: Vec2<T>, a1: Vec2<T>, b0: Vec2<T>, b1: Vec2<T>) -> bool {
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    (d1 == z && on_segment(b0, b1, a0))
        || (d2 == z && on_segment(b0, b1, a1))
        || (d3 == z && on_segment(a0, a1, b0))
        || (d4 == z && on_segment(a0, a1, b1))
}

/// Minimum Euclidean distance between two closed segments.
pub fn segment_distance<T: Scalar>(a0: Vec2<T>, a1: Vec2<T>, b0: Vec2<T>, b1: Vec2<T>) -> T {
    if segments_intersect(a0, a1, b0, b1) {
        return T::zero();
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

/// Minimum distance between two oriented boxes; zero when they touch or overlap.
pub fn min_obb_distance<T: Scalar>(a: &OrientedBox<T>, b: &OrientedBox<T>) -> T {
    let gap = a.center.distance(b.center) - a.radius() - b.radius();
    let ea = a.edges();
    let eb = b.edges();
    if gap <= T::zero() {
        // Containment: no edge crossing but one box fully inside the other.
        if a.contains(b.center) || b.contains(a.center) {
            return T::zero();
        }
    }
    let mut best = T::infinity();
    for &(a0, a1) in &ea {
        for &(b0, b1) in &eb {
            let d = segment_distance(a0, a1, b0, b1);
            if d == T::zero() {
                return d;
            }
            best = best.min(d);
        }
    }
    if a.contains(b.corners()[0]) || b.contains(a.corners()[0]) {
        return T::zero();
    }
    best
}

/// Result of projecting a point onto a [`Polyline`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<T> {
    /// Arc length of the foot point from the first vertex.
    pub station: T,
    /// Signed offset, positive to the left of the direction of travel.
    pub lateral: T,
    /// Euclidean distance from the point to the foot point.
    pub distance: T,
    pub segment: usize,
}

/// Open polyline with cached cumulative arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2<T>>", into = "Vec<Vec2<T>>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Polyline<T> {
    points: Vec<Vec2<T>>,
    stations: Vec<T>,
}

impl<T: Scalar> Polyline<T> {
    /// Builds a polyline, dropping consecutive duplicate vertices. Returns
    /// `None` when fewer than two distinct vertices remain.
    pub fn new(points: impl IntoIterator<Item = Vec2<T>>) -> Option<Self> {
        let mut pts: Vec<Vec2<T>> = Vec::new();
        for p in points {
            if pts.last().is_none_or(|q| q.distance(p) > T::lit(1e-9)) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let mut stations = Vec::with_capacity(pts.len());
        let mut acc = T::zero();
        stations.push(acc);
        for w in pts.windows(2) {
            acc = acc + w[0].distance(w[1]);
            stations.push(acc);
        }
        Some(Polyline { points: pts, stations })
    }

    pub fn points(&self) -> &[Vec2<T>] {
        &self.points
    }

    pub fn length(&self) -> T {
        *self.stations.last().expect("non-empty")
    }

    fn segment_dir(&self, i: usize) -> Vec2<T> {
        let d = self.points[i + 1] - self.points[i];
        d.scale(T::one() / d.norm())
    }

    pub fn project(&self, p: Vec2<T>) -> Projection<T> {
        let mut best: Option<Projection<T>> = None;
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let ab = b - a;
            let len = self.stations[i + 1] - self.stations[i];
            let u = ((p - a).dot(ab) / (len * len)).max(T::zero()).min(T::one());
            let foot = a + ab.scale(u);
            let dist = p.distance(foot);
            if best.is_none_or(|b| dist < b.distance) {
                let dir = ab.scale(T::one() / len);
                let lateral = dir.cross(p - foot);
                let lateral = if lateral < T::zero() { -dist } else { dist };
                best = Some(Projection { station: self.stations[i] + u * len, lateral, distance: dist, segment: i });
            }
        }
        best.expect("polyline has a segment")
    }

    fn segment_at(&self, station: T) -> usize {
        let n = self.points.len() - 1;
        match self.stations.iter().position(|&s| s > station) {
            Some(0) => 0,
            Some(i) => (i - 1).min(n - 1),
            None => n - 1,
        }
    }

    /// Heading of the polyline at `station` (clamped to the end segments).
    pub fn heading_at(&self, station: T) -> T {
        self.segment_dir(self.segment_at(station)).angle()
    }

    /// World point at `station` along the line and `lateral` to its left.
    /// Stations outside `[0, length]` extrapolate along the end segments.
    pub fn point_at(&self, station: T, lateral: T) -> Vec2<T> {
        let i = self.segment_at(station);
        let dir = self.segment_dir(i);
        self.points[i] + dir.scale(station - self.stations[i]) + dir.perp().scale(lateral)
    }
}

impl<T: Scalar> TryFrom<Vec<Vec2<T>>> for Polyline<T> {
    type Error = String;
    fn try_from(points: Vec<Vec2<T>>) -> Result<Self, String> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err("polyline vertex is not finite".into());
        }
        Polyline::new(points).ok_or_else(|| "polyline needs at least two distinct points".into())
    }
}

impl<T: Scalar> From<Polyline<T>> for Vec<Vec2<T>> {
    fn from(p: Polyline<T>) -> Self {
        p.points
    }
}
