//! Brute-force geometry oracles shared by the test targets.

use dvca_core::{OrientedBox, Vec2};
use rand::Rng;

pub const SAMPLES: usize = 10_000;

/// Exact point-to-box distance in the box frame.
pub fn point_box_distance(b: &OrientedBox, p: Vec2) -> f64 {
    let l = b.to_local(p);
    let dx = (l.x.abs() - b.half_extents.x).max(0.0);
    let dy = (l.y.abs() - b.half_extents.y).max(0.0);
    dx.hypot(dy)
}

/// Evenly spaced points along the perimeter, corners included.
pub fn perimeter_points(b: &OrientedBox, n: usize) -> Vec<Vec2> {
    let per_edge = n / 4;
    b.edges()
        .iter()
        .flat_map(|&(a, c)| (0..per_edge).map(move |i| a.lerp(c, i as f64 / (per_edge - 1) as f64)))
        .collect()
}

/// Half the samples on each boundary, each measured to the other box.
pub fn sampled_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if a.contains(b.center) || b.contains(a.center) {
        return 0.0;
    }
    let ab = perimeter_points(a, SAMPLES / 2).into_iter().map(|p| point_box_distance(b, p));
    let ba = perimeter_points(b, SAMPLES / 2).into_iter().map(|p| point_box_distance(a, p));
    ab.chain(ba).fold(f64::INFINITY, f64::min)
}

pub fn random_box(rng: &mut impl Rng) -> OrientedBox {
    OrientedBox::new(
        Vec2::new(rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)),
        Vec2::new(rng.gen_range(0.1..2.5), rng.gen_range(0.1..2.5)),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}
