use super::{hat, rodrigues_coefficients, vee, LieError, NEAR_PI, SMALL_ANGLE};
use crate::scalar::Real;
use nalgebra::{Matrix3, Vector3};
use std::ops::Mul;

/// Rotation in 3D stored as an orthonormal matrix with determinant +1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct So3<T: Real> {
    matrix: Matrix3<T>,
}

impl<T: Real> Default for So3<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> So3<T> {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
        }
    }

    /// Wraps a matrix without checking it. The caller guarantees orthonormality.
    pub fn from_matrix_unchecked(matrix: Matrix3<T>) -> Self {
        Self { matrix }
    }

    /// Wraps a matrix after checking `m·mᵀ = I` and `det m = 1` within `tol`.
    pub fn from_matrix(matrix: Matrix3<T>, tol: T) -> Result<Self, LieError> {
        let orth = (matrix * matrix.transpose() - Matrix3::identity()).amax();
        let det = matrix.determinant();
        if orth > tol || (det - T::one()).abs() > tol || !orth.is_finite() {
            return Err(LieError::NotARotation {
                orthonormality: orth.as_f64(),
                det: det.as_f64(),
            });
        }
        Ok(Self { matrix })
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3<T> {
        &self.matrix
    }

    /// Rodrigues' formula `exp([phi]×)`.
    pub fn exp(phi: &Vector3<T>) -> Self {
        let theta = phi.norm();
        let (a, b, _) = rodrigues_coefficients(theta);
        let k = hat(phi);
        Self {
            matrix: Matrix3::identity() + k * a + k * k * b,
        }
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> T {
        let w = vee(&self.matrix);
        let c = (self.matrix.trace() - T::one()) * T::lit(0.5);
        w.norm().atan2(c)
    }

    /// Principal logarithm. Fails within [`NEAR_PI`] of a half turn.
    pub fn log(&self) -> Result<Vector3<T>, LieError> {
        let w = vee(&self.matrix);
        let s = w.norm();
        let c = (self.matrix.trace() - T::one()) * T::lit(0.5);
        let theta = s.atan2(c);
        if T::pi() - theta < T::lit(NEAR_PI) {
            return Err(LieError::AngleNearPi {
                angle: theta.as_f64(),
            });
        }
        if theta < T::lit(SMALL_ANGLE) {
            Ok(w * (T::one() + theta * theta / T::lit(6.0)))
        } else {
            Ok(w * (theta / s))
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }

    #[inline]
    pub fn act(&self, x: &Vector3<T>) -> Vector3<T> {
        self.matrix * x
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn orthonormalized(&self) -> Self {
        Self {
            matrix: project_to_rotation(&self.matrix),
        }
    }

    /// Largest absolute entry of `m·mᵀ − I`.
    pub fn orthonormality_error(&self) -> T {
        (self.matrix * self.matrix.transpose() - Matrix3::identity()).amax()
    }

    pub fn cast<U: Real>(&self) -> So3<U> {
        So3 {
            matrix: self.matrix.map(|x| U::lit(x.as_f64())),
        }
    }
}

impl<T: Real> Mul for So3<T> {
    type Output = So3<T>;

    fn mul(self, rhs: So3<T>) -> So3<T> {
        So3 {
            matrix: self.matrix * rhs.matrix,
        }
    }
}

/// `U·Vᵀ` from the SVD of `m`, with the sign flip that keeps det = +1.
pub(crate) fn project_to_rotation<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < T::zero() {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -T::one();
        r = u * d * v_t;
    }
    r
}
