use super::{hat, rodrigues_coefficients, LieError, So3, SMALL_ANGLE};
use crate::scalar::Real;
use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};
use std::ops::{Add, Mul, MulAssign, Neg, Sub};

/// Number of in-place compositions after which the rotation block is
/// projected back onto SO(3).
pub const RENORMALIZE_EVERY: u32 = 64;

/// Element of se(3) in `(rho, phi)` order.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Se3Tangent<T: Real> {
    /// Translational part.
    pub rho: Vector3<T>,
    /// Rotational part, radians.
    pub phi: Vector3<T>,
}

impl<T: Real> Se3Tangent<T> {
    pub fn new(rho: Vector3<T>, phi: Vector3<T>) -> Self {
        Self { rho, phi }
    }

    pub fn zero() -> Self {
        Self {
            rho: Vector3::zeros(),
            phi: Vector3::zeros(),
        }
    }

    pub fn from_vector(v: &Vector6<T>) -> Self {
        Self {
            rho: v.fixed_rows::<3>(0).into_owned(),
            phi: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<T> {
        Vector6::new(
            self.rho.x, self.rho.y, self.rho.z, self.phi.x, self.phi.y, self.phi.z,
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rho: self.rho * s,
            phi: self.phi * s,
        }
    }

    pub fn norm(&self) -> T {
        self.to_vector().norm()
    }

    /// 4×4 matrix form `[[hat(phi), rho], [0, 0]]`.
    pub fn to_algebra_matrix(&self) -> Matrix4<T> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.phi));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.rho);
        m
    }
}

impl<T: Real> Add for Se3Tangent<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.rho + rhs.rho, self.phi + rhs.phi)
    }
}

impl<T: Real> Sub for Se3Tangent<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.rho - rhs.rho, self.phi - rhs.phi)
    }
}

impl<T: Real> Neg for Se3Tangent<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.rho, -self.phi)
    }
}

/// Rigid transform, equivalent to the homogeneous matrix `[[R, t], [0, 1]]`.
#[derive(Clone, Copy, Debug)]
pub struct Se3<T: Real> {
    rotation: So3<T>,
    translation: Vector3<T>,
    compositions: u32,
}

impl<T: Real> PartialEq for Se3<T> {
    fn eq(&self, other: &Self) -> bool {
        self.rotation == other.rotation && self.translation == other.translation
    }
}

impl<T: Real> Default for Se3<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Se3<T> {
    pub fn new(rotation: So3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
            compositions: 0,
        }
    }

    pub fn identity() -> Self {
        Self::new(So3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<T>) -> Self {
        Self::new(So3::identity(), t)
    }

    pub fn from_rotation(r: So3<T>) -> Self {
        Self::new(r, Vector3::zeros())
    }

    #[inline]
    pub fn rotation(&self) -> &So3<T> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    pub fn to_matrix(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Parses a homogeneous matrix, validating the rotation block within `tol`.
    pub fn from_matrix(m: &Matrix4<T>, tol: T) -> Result<Self, LieError> {
        let row = m.fixed_view::<1, 4>(3, 0);
        if row[0] != T::zero() || row[1] != T::zero() || row[2] != T::zero() || row[3] != T::one()
        {
            return Err(LieError::NotHomogeneous);
        }
        let r = So3::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned(), tol)?;
        Ok(Self::new(r, m.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    /// Exponential map with Taylor fallback for small rotations.
    pub fn exp(tau: &Se3Tangent<T>) -> Self {
        let theta = tau.phi.norm();
        let (a, b, c) = rodrigues_coefficients(theta);
        let k = hat(&tau.phi);
        let k2 = k * k;
        let rotation = Matrix3::identity() + k * a + k2 * b;
        let v = Matrix3::identity() + k * b + k2 * c;
        Self::new(So3::from_matrix_unchecked(rotation), v * tau.rho)
    }

    /// Principal logarithm; errors when the rotation is within
    /// [`super::NEAR_PI`] of a half turn.
    pub fn log(&self) -> Result<Se3Tangent<T>, LieError> {
        let phi = self.rotation.log()?;
        let theta = phi.norm();
        let k = hat(&phi);
        let e = if theta < T::lit(SMALL_ANGLE) {
            T::lit(1.0 / 12.0) + theta * theta / T::lit(720.0)
        } else {
            let half = theta * T::lit(0.5);
            (T::one() - half * half.cos() / half.sin()) / (theta * theta)
        };
        let v_inv = Matrix3::identity() - k * T::lit(0.5) + k * k * e;
        Ok(Se3Tangent::new(v_inv * self.translation, phi))
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        Self::new(r_inv, -(r_inv.act(&self.translation)))
    }

    /// `R·x + t`.
    #[inline]
    pub fn act(&self, x: &Vector3<T>) -> Vector3<T> {
        self.rotation.act(x) + self.translation
    }

    /// Adjoint in `(rho, phi)` order: `[[R, [t]×R], [0, R]]`.
    pub fn adjoint(&self) -> Matrix6<T> {
        let r = self.rotation.matrix();
        let mut ad = Matrix6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
        ad.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(hat(&self.translation) * r));
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
        ad
    }

    /// Right-multiplicative update `self · exp(tau)`.
    pub fn oplus(&self, tau: &Se3Tangent<T>) -> Self {
        *self * Se3::exp(tau)
    }

    pub fn is_identity(&self) -> bool {
        *self.rotation.matrix() == Matrix3::identity() && self.translation == Vector3::zeros()
    }

    pub fn orthonormalized(&self) -> Self {
        Self::new(self.rotation.orthonormalized(), self.translation)
    }

    pub fn cast<U: Real>(&self) -> Se3<U> {
        Se3::new(
            self.rotation.cast(),
            self.translation.map(|x| U::lit(x.as_f64())),
        )
    }
}

impl<T: Real> Mul for Se3<T> {
    type Output = Se3<T>;

    fn mul(self, rhs: Se3<T>) -> Se3<T> {
        Se3::new(
            self.rotation * rhs.rotation,
            self.rotation.act(&rhs.translation) + self.translation,
        )
    }
}

impl<T: Real> MulAssign for Se3<T> {
    /// In-place composition; every [`RENORMALIZE_EVERY`] calls the rotation
    /// is re-projected onto SO(3) to stop drift in long chains.
    fn mul_assign(&mut self, rhs: Se3<T>) {
        let count = self.compositions + 1;
        *self = *self * rhs;
        if count >= RENORMALIZE_EVERY {
            self.rotation = self.rotation.orthonormalized();
            self.compositions = 0;
        } else {
            self.compositions = count;
        }
    }
}
