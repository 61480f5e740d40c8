//! Robust dense alignment of primitives by per-object Gauss-Newton IRLS.

mod classify;
mod gauss_newton;
mod problem;
pub mod residual;
pub mod warp;

pub use classify::{classify_static, static_residual, StaticEvidence};
pub use gauss_newton::{solve, solve_object, ObjectReport, ObjectSolution, SolveReport, Termination};
pub use problem::{
    residual_term, Correspondence, NormalEquationsBlock, ObjectProblem, ResidualTerm, SkippedPair,
    CHUNK_SAMPLES,
};
pub use residual::{huber_cost, huber_weight, residual, residual_jacobians};
pub use warp::{warp_chain, warp_pixel, warp_targets, WarpedPixel, WarpedTargets};

use crate::scene::validate::Diagnostic;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative Huber knee used when none is configured.
pub const DEFAULT_HUBER_FRACTION: f64 = 0.01;
/// Relative static threshold used when none is configured.
pub const DEFAULT_STATIC_FRACTION: f64 = 0.005;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("scene failed validation: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidScene(Vec<Diagnostic>),
}

/// Solver settings. Lengths are in scene units; `None` selects a fraction of
/// the scene scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub update_norm_tolerance: f64,
    pub huber_delta: Option<f64>,
    pub static_residual_threshold: Option<f64>,
    pub min_correspondences_per_pair: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            update_norm_tolerance: 1e-8,
            huber_delta: None,
            static_residual_threshold: None,
            min_correspondences_per_pair: 100,
            damping: 0.0,
        }
    }
}

/// [`SolverConfig`] with every length made concrete.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSolverConfig {
    pub max_iterations: usize,
    pub update_norm_tolerance: f64,
    pub huber_delta: f64,
    pub static_residual_threshold: f64,
    pub min_correspondences_per_pair: usize,
    pub damping: f64,
    pub scene_scale: f64,
}

impl SolverConfig {
    pub fn resolve(&self, scene_scale: f64) -> Result<ResolvedSolverConfig, SolverError> {
        let bad = |field, reason: &str| {
            Err(SolverError::InvalidConfig {
                field,
                reason: reason.to_owned(),
            })
        };
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be positive");
        }
        if !(self.update_norm_tolerance >= 0.0 && self.update_norm_tolerance.is_finite()) {
            return bad("update_norm_tolerance", "must be a non-negative number");
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad("damping", "must be a non-negative number");
        }
        let huber_delta = self.huber_delta.unwrap_or(DEFAULT_HUBER_FRACTION * scene_scale);
        if !(huber_delta > 0.0 && huber_delta.is_finite()) {
            return bad("huber_delta", "must be positive");
        }
        let static_residual_threshold = self
            .static_residual_threshold
            .unwrap_or(DEFAULT_STATIC_FRACTION * scene_scale);
        if !(static_residual_threshold > 0.0 && static_residual_threshold.is_finite()) {
            return bad("static_residual_threshold", "must be positive");
        }
        Ok(ResolvedSolverConfig {
            max_iterations: self.max_iterations,
            update_norm_tolerance: self.update_norm_tolerance,
            huber_delta,
            static_residual_threshold,
            min_correspondences_per_pair: self.min_correspondences_per_pair,
            damping: self.damping,
            scene_scale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_against_scale() {
        let r = SolverConfig::default().resolve(2.0).unwrap();
        assert_eq!(r.max_iterations, 50);
        assert_eq!(r.huber_delta, 0.02);
        assert_eq!(r.static_residual_threshold, 0.01);
        assert_eq!(r.min_correspondences_per_pair, 100);
    }

    #[test]
    fn rejects_nonpositive_settings() {
        let c = SolverConfig {
            huber_delta: Some(0.0),
            ..SolverConfig::default()
        };
        assert!(matches!(c.resolve(1.0), Err(SolverError::InvalidConfig { field: "huber_delta", .. })));
        let c = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(c.resolve(1.0).is_err());
        let c = SolverConfig {
            damping: -1.0,
            ..SolverConfig::default()
        };
        assert!(c.resolve(1.0).is_err());
    }
}
