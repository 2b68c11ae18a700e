mod common;

use common::{random_box, sampled_distance};
use dvca_core::geom::{self, min_obb_distance};
use dvca_core::{OrientedBox, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn obb_distance_matches_sampling_on_100_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut overlapping = 0;
    for i in 0..100 {
        let (a, b) = (random_box(&mut rng), random_box(&mut rng));
        let exact = min_obb_distance(&a, &b);
        let sampled = sampled_distance(&a, &b);
        if sampled == 0.0 {
            overlapping += 1;
        }
        assert!((exact - sampled).abs() <= 1e-3, "pair {i}: exact {exact} sampled {sampled}");
    }
    // Both regimes are exercised.
    assert!(overlapping > 0 && overlapping < 100);
}

#[test]
fn touching_and_nested_boxes_are_zero() {
    let a = OrientedBox::new(Vec2::zero(), Vec2::new(1.0, 1.0), 0.0);
    let touching = OrientedBox::new(Vec2::new(2.0, 0.0), Vec2::new(1.0, 1.0), 0.0);
    let nested = OrientedBox::new(Vec2::new(0.1, 0.0), Vec2::new(0.2, 0.2), 0.7);
    assert_eq!(min_obb_distance(&a, &touching), 0.0);
    assert_eq!(min_obb_distance(&a, &nested), 0.0);
    assert_eq!(min_obb_distance(&nested, &a), 0.0);
}

#[test]
fn generic_kernel_agrees_in_f32() {
    let a = geom::OrientedBox::<f32>::new(geom::Vec2::new(0.0, 0.0), geom::Vec2::new(1.0, 0.5), 0.3);
    let b = geom::OrientedBox::<f32>::new(geom::Vec2::new(4.0, 1.0), geom::Vec2::new(0.5, 0.5), -0.2);
    let a64 = OrientedBox::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.5), 0.3);
    let b64 = OrientedBox::new(Vec2::new(4.0, 1.0), Vec2::new(0.5, 0.5), -0.2);
    assert!((min_obb_distance(&a, &b) as f64 - min_obb_distance(&a64, &b64)).abs() < 1e-5);
}

fn arb_box() -> impl Strategy<Value = OrientedBox> {
    (-6.0..6.0f64, -6.0..6.0f64, 0.1..2.5f64, 0.1..2.5f64, -3.2..3.2f64)
        .prop_map(|(x, y, hx, hy, h)| OrientedBox::new(Vec2::new(x, y), Vec2::new(hx, hy), h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn obb_distance_symmetric_and_nonnegative(a in arb_box(), b in arb_box()) {
        let d = min_obb_distance(&a, &b);
        prop_assert!(d >= 0.0);
        prop_assert!((d - min_obb_distance(&b, &a)).abs() < 1e-9);
    }

    #[test]
    fn obb_distance_invariant_under_rigid_shift(a in arb_box(), b in arb_box(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        let d = Vec2::new(dx, dy);
        prop_assert!((min_obb_distance(&a, &b) - min_obb_distance(&a.translated(d), &b.translated(d))).abs() < 1e-9);
    }

    #[test]
    fn obb_distance_bounded_by_center_distance(a in arb_box(), b in arb_box()) {
        prop_assert!(min_obb_distance(&a, &b) <= a.center.distance(b.center) + 1e-12);
    }
}
