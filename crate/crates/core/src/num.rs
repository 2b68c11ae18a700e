//! Scalar abstraction shared by the geometry and scoring code.

use std::fmt::Debug;

/// Floating point scalar usable by the generic geometry kernels (`f32` or `f64`).
pub trait Scalar:
    num_traits::Float + num_traits::FloatConst + num_traits::FromPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: num_traits::Float + num_traits::FloatConst + num_traits::FromPrimitive + Debug + Default + Send + Sync + 'static
{
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::TAU();
    let mut r = (a + T::PI()) % two_pi;
    if r < T::zero() {
        r = r + two_pi;
    }
    r - T::PI()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) + std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.25f64) + 0.25).abs() < 1e-15);
        assert!((wrap_angle(std::f32::consts::TAU + 0.5) - 0.5).abs() < 1e-5);
    }
}
