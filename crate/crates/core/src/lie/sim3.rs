use super::{LieError, So3};
use crate::scalar::Real;
use nalgebra::Vector3;
use std::ops::Mul;

/// Similarity transform acting as `x ↦ s·R·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sim3<T: Real> {
    scale: T,
    rotation: So3<T>,
    translation: Vector3<T>,
}

impl<T: Real> Sim3<T> {
    pub fn new(scale: T, rotation: So3<T>, translation: Vector3<T>) -> Result<Self, LieError> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(LieError::InvalidScale(scale.as_f64()));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: T::one(),
            rotation: So3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn rotation(&self) -> &So3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    #[inline]
    pub fn act(&self, x: &Vector3<T>) -> Vector3<T> {
        self.rotation.act(x) * self.scale + self.translation
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        let s_inv = T::one() / self.scale;
        Self {
            scale: s_inv,
            rotation: r_inv,
            translation: -(r_inv.act(&self.translation) * s_inv),
        }
    }
}

impl<T: Real> Mul for Sim3<T> {
    type Output = Sim3<T>;

    fn mul(self, rhs: Sim3<T>) -> Sim3<T> {
        Sim3 {
            scale: self.scale * rhs.scale,
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation.act(&rhs.translation) * self.scale + self.translation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_action() {
        let x = Vector3::new(1.5, -2.0, 0.25);
        assert_eq!(Sim3::<f64>::identity().act(&x), x);
    }

    #[test]
    fn pure_scaling() {
        let s = Sim3::new(2.0, So3::identity(), Vector3::zeros()).unwrap();
        assert_eq!(s.act(&Vector3::new(1.0, 1.0, 1.0)), Vector3::new(2.0, 2.0, 2.0));
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(Sim3::new(0.0, So3::<f64>::identity(), Vector3::zeros()).is_err());
        assert!(Sim3::new(f64::NAN, So3::<f64>::identity(), Vector3::zeros()).is_err());
    }

    #[test]
    fn inverse_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let phi = Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let t = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let s = Sim3::new(rng.random_range(0.1..10.0), So3::exp(&phi), t).unwrap();
            let x = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            assert!((s.inverse().act(&s.act(&x)) - x).norm() < 1e-9);
            assert!(((s * s.inverse()).act(&x) - x).norm() < 1e-9);
        }
    }
}
