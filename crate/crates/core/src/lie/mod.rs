//! SO(3), SE(3) and Sim(3) algebra.
//!
//! Tangent vectors of SE(3) are ordered `(rho, phi)`: translational part first,
//! rotational part second. Updates are right-multiplicative,
//! `T ⊕ τ = T · exp(τ)`, which is the convention the residual Jacobians in
//! [`crate::solver`] are derived for.

mod se3;
mod sim3;
mod so3;

pub use se3::{Se3, Se3Tangent, RENORMALIZE_EVERY};
pub use sim3::Sim3;
pub use so3::So3;

use crate::scalar::Real;
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Below this rotation magnitude the exp/log coefficients switch to their
/// Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Rotations whose angle is within this distance of π are rejected by the
/// logarithm, where the axis sign is ambiguous.
pub const NEAR_PI: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("rotation angle {angle} is within {NEAR_PI} of pi; logarithm branch is ambiguous")]
    AngleNearPi { angle: f64 },
    #[error("matrix is not a rotation (orthonormality error {orthonormality:e}, det {det})")]
    NotARotation { orthonormality: f64, det: f64 },
    #[error("bottom row of homogeneous matrix must be [0, 0, 0, 1]")]
    NotHomogeneous,
    #[error("similarity scale must be positive and finite, got {0}")]
    InvalidScale(f64),
}

/// Skew-symmetric matrix `[v]×` with `[v]× w = v × w`.
#[inline]
pub fn hat<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Inverse of [`hat`] for the antisymmetric part of `m`.
#[inline]
pub fn vee<T: Real>(m: &Matrix3<T>) -> Vector3<T> {
    let half = T::lit(0.5);
    Vector3::new(
        (m[(2, 1)] - m[(1, 2)]) * half,
        (m[(0, 2)] - m[(2, 0)]) * half,
        (m[(1, 0)] - m[(0, 1)]) * half,
    )
}

/// Coefficients `(sin θ/θ, (1−cos θ)/θ², (θ−sin θ)/θ³)` of the Rodrigues
/// and left-Jacobian series.
pub(crate) fn rodrigues_coefficients<T: Real>(theta: T) -> (T, T, T) {
    let theta2 = theta * theta;
    if theta < T::lit(SMALL_ANGLE) {
        (
            T::one() - theta2 / T::lit(6.0),
            T::lit(0.5) - theta2 / T::lit(24.0),
            T::lit(1.0 / 6.0) - theta2 / T::lit(120.0),
        )
    } else {
        let s = theta.sin();
        // 2 sin²(θ/2) avoids the cancellation in 1 − cos θ.
        let half = theta * T::lit(0.5);
        let half_sinc = half.sin() / half;
        (
            s / theta,
            T::lit(0.5) * half_sinc * half_sinc,
            (theta - s) / (theta2 * theta),
        )
    }
}
