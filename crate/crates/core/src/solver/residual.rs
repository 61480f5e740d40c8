//! Pairwise alignment residual, its right Jacobians, and the Huber kernel.
//!
//! For `Z = T_j⁻¹·T_i` the residual is `r = Z·X_i − X̂_j`. Perturbing
//! `T_i ← T_i·exp(δ)` gives `Z·exp(δ)`, so
//! `∂r/∂δ_i = R_Z·[I | −[X_i]×]`. Perturbing `T_j ← T_j·exp(ε)` gives
//! `exp(−ε)·Z`, so `∂r/∂ε_j = [−I | [Z·X_i]×]`; this equals
//! `−R_Z·[I | −[X_i]×]·Ad(Z⁻¹)` with the standard
//! `Ad(Z⁻¹) = [[R_Zᵀ, [−R_Zᵀ t_Z]× R_Zᵀ], [0, R_Zᵀ]]`.

use crate::lie::{hat, Se3};
use crate::scalar::Real;
use nalgebra::{Matrix3, Matrix3x6, Vector3};

/// `T_j⁻¹·T_i·X_i − X̂_j`.
#[inline]
pub fn residual<T: Real>(
    t_i: &Se3<T>,
    t_j: &Se3<T>,
    x_i: &Vector3<T>,
    x_hat_j: &Vector3<T>,
) -> Vector3<T> {
    (t_j.inverse() * *t_i).act(x_i) - x_hat_j
}

/// Right Jacobians `(J_Ti, J_Tj)` of the residual at `Z = T_j⁻¹·T_i`, both in
/// `(rho, phi)` column order.
pub fn residual_jacobians<T: Real>(z: &Se3<T>, x_i: &Vector3<T>) -> (Matrix3x6<T>, Matrix3x6<T>) {
    let r = z.rotation().matrix();
    let mut j_i = Matrix3x6::zeros();
    j_i.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    j_i.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-(r * hat(x_i))));

    let mut j_j = Matrix3x6::zeros();
    j_j.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(-Matrix3::identity()));
    j_j.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&hat(&z.act(x_i)));
    (j_i, j_j)
}

/// IRLS weight of the Huber kernel: 1 inside the knee, `delta/s` outside.
#[inline]
pub fn huber_weight<T: Real>(residual_norm: T, delta: T) -> T {
    if residual_norm <= delta {
        T::one()
    } else {
        delta / residual_norm
    }
}

/// Huber cost `ρ(s)`: `s²/2` inside the knee, `δ(s − δ/2)` outside.
#[inline]
pub fn huber_cost<T: Real>(s: T, delta: T) -> T {
    if s <= delta {
        T::lit(0.5) * s * s
    } else {
        delta * (s - T::lit(0.5) * delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::Se3Tangent;
    use nalgebra::{Matrix4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut impl Rng) -> Se3<f64> {
        let v = |rng: &mut dyn rand::RngCore, s: f64| {
            Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
        };
        Se3::exp(&Se3Tangent::new(v(rng, 2.0), v(rng, 1.5)))
    }

    #[test]
    fn aligned_identity_gives_zero() {
        let x = Vector3::new(0.2, -0.4, 1.0);
        let id = Se3::identity();
        assert_eq!(residual(&id, &id, &x, &x), Vector3::zeros());
    }

    #[test]
    fn pure_offset() {
        let ti = Se3::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let r = residual(&ti, &Se3::identity(), &Vector3::zeros(), &Vector3::zeros());
        assert_eq!(r, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn matches_explicit_matrix_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..300 {
            let ti = random_pose(&mut rng);
            let tj = random_pose(&mut rng);
            let x = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let xh = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let mj: Matrix4<f64> = tj.to_matrix().try_inverse().unwrap();
            let p = mj * ti.to_matrix() * Vector4::new(x.x, x.y, x.z, 1.0);
            let oracle = Vector3::new(p.x, p.y, p.z) - xh;
            assert!((residual(&ti, &tj, &x, &xh) - oracle).amax() < 1e-12);
        }
    }

    #[test]
    fn identity_specialization() {
        let x = Vector3::new(1.0, 2.0, 3.0);
        let (ji, jj) = residual_jacobians(&Se3::identity(), &x);
        let h = hat(&x);
        assert_eq!(ji.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity());
        assert_eq!(ji.fixed_view::<3, 3>(0, 3).into_owned(), -h);
        assert_eq!(jj.fixed_view::<3, 3>(0, 0).into_owned(), -Matrix3::identity());
        assert_eq!(jj.fixed_view::<3, 3>(0, 3).into_owned(), h);
    }

    #[test]
    fn origin_point_kills_rotation_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let z = random_pose(&mut rng);
        let (ji, jj) = residual_jacobians(&z, &Vector3::zeros());
        assert_eq!(ji.fixed_view::<3, 3>(0, 3).into_owned(), Matrix3::zeros());
        assert_eq!(jj.fixed_view::<3, 3>(0, 3).into_owned(), hat(z.translation()));
    }

    #[test]
    fn single_precision_jacobians() {
        let z = Se3::<f32>::exp(&Se3Tangent::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.3, 0.1, -0.2)));
        let (ji, jj) = residual_jacobians(&z, &Vector3::new(1.0, -1.0, 0.5));
        assert!(ji.iter().chain(jj.iter()).all(|x| x.is_finite()));
    }

    #[test]
    fn huber_weight_cases() {
        assert_eq!(huber_weight(0.0, 0.5), 1.0);
        assert_eq!(huber_weight(0.5, 0.5), 1.0);
        assert!((huber_weight(5.0, 0.5) - 0.1f64).abs() < 1e-15);
    }

    #[test]
    fn huber_weight_is_irls_weight_of_cost() {
        // ρ'(s)/s by central differences must equal the closed-form weight
        let delta: f64 = 0.3;
        for &s in &[0.05, 0.2, 0.29, 0.31, 0.9, 3.0, 30.0] {
            let h = 1e-6;
            let d = (huber_cost(s + h, delta) - huber_cost(s - h, delta)) / (2.0 * h);
            assert!((d / s - huber_weight(s, delta)).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn huber_weight_matches_scalar_minimizer() {
        // weighted mean with weights w_i = huber_weight(|x_i − m|) is a fixed
        // point at the minimizer of Σρ(|x_i − m|), found here by golden section
        let xs = [0.0, 0.1, 0.2, 0.15, 5.0];
        let delta = 0.1;
        let f = |m: f64| xs.iter().map(|x| huber_cost((x - m).abs(), delta)).sum::<f64>();
        let (mut a, mut b) = (-1.0, 6.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let m = 0.5 * (a + b);
        let w: Vec<f64> = xs.iter().map(|x| huber_weight((x - m).abs(), delta)).collect();
        let fixed = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / w.iter().sum::<f64>();
        assert!((fixed - m).abs() < 1e-7);
    }
}
