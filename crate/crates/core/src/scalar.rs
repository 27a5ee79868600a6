use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used by the spline, optimizer and geometry kernels.
///
/// Implemented for `f32` and `f64`. Absolute time-of-day values (~1e5 s)
/// need `f64` to keep sub-millisecond resolution, so the pipeline itself
/// runs on `f64`; the kernels accept `f32` for relative-time work.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the value cannot be represented.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::max_value)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Planar vector in a local tangent plane (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Scalar> std::ops::Add for Vec2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> std::ops::Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Splits a position error into along-track and cross-track components
/// relative to the direction of `velocity`.
///
/// Returns `None` when the velocity has zero length.
pub fn along_cross_split<T: Scalar>(error: Vec2<T>, velocity: Vec2<T>) -> Option<(T, T)> {
    let speed = velocity.norm();
    if !(speed > T::zero()) {
        return None;
    }
    let along = velocity.scale(speed.recip());
    Some((error.dot(along), error.dot(along.perp())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_recovers_components() {
        let (at, xt) = along_cross_split(Vec2::new(3.0_f64, 4.0), Vec2::new(10.0, 0.0)).unwrap();
        assert_eq!(at, 3.0);
        assert_eq!(xt, 4.0);
        let (at, xt) = along_cross_split(Vec2::new(1.0_f32, 1.0), Vec2::new(0.0, -2.0)).unwrap();
        assert!((at + 1.0).abs() < 1e-6);
        assert!((xt - 1.0).abs() < 1e-6);
    }

    #[test]
    fn split_rejects_zero_velocity() {
        assert!(along_cross_split(Vec2::new(1.0, 1.0), Vec2::<f64>::default()).is_none());
    }
}
