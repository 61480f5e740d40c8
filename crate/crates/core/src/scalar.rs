//! Scalar abstraction shared by the geometric kernels.

use nalgebra as na;
use num_traits as nt;

/// Floating point scalar usable by the Lie-group, Jacobian, alignment and
/// bounding-box kernels. Implemented for `f32` and `f64`.
pub trait Real:
    na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        na::convert(x)
    }

    /// Lossless widening (or identity) into `f64`.
    fn as_f64(self) -> f64;

    /// Machine epsilon of the concrete type.
    fn machine_epsilon() -> Self;
}

impl Real for f32 {
    #[inline]
    fn as_f64(self) -> f64 {
        f64::from(self)
    }

    #[inline]
    fn machine_epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn machine_epsilon() -> Self {
        f64::EPSILON
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion() {
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Real>::lit(0.1), 0.1f64);
        assert_eq!(<f32 as Real>::lit(2.0).as_f64(), 2.0);
    }
}
