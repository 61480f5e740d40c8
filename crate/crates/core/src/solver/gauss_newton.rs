use super::classify::{apply_classification, static_residual, StaticEvidence};
use super::problem::{ObjectProblem, SkippedPair};
use super::{ResolvedSolverConfig, SolverConfig, SolverError};
use crate::lie::Se3Tangent;
use crate::scene::validate::validate_scene;
use crate::scene::{ObjectId, SceneData};
use crate::Pose;
use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Smallest-to-largest eigenvalue ratio of the Jacobi-scaled Hessian below
/// which an object is rank deficient.
pub const SINGULAR_RATIO: f64 = 1e-12;
/// Damping at which a rejected step sequence is abandoned.
const MAX_DAMPING: f64 = 1e12;
const MIN_DAMPING_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `‖τ‖∞` fell below the update tolerance.
    Converged,
    MaxIterations,
    /// No descent step found within the damping range.
    Stalled,
    /// Rank-deficient normal equations; poses left at identity.
    SingularSystem,
    /// Nothing to optimize: a single observation or no usable pair.
    NoCorrespondences,
    /// Frozen by static classification.
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub object_id: ObjectId,
    pub static_flag: bool,
    pub static_residual: Option<f64>,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Termination,
    /// Valid labelled pixels of each primitive, in track order.
    pub pixel_counts: Vec<usize>,
    pub correspondences: usize,
    pub skipped_pairs: Vec<SkippedPair>,
    /// Cost after each accepted iteration, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: ResolvedSolverConfig,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub objects: Vec<ObjectReport>,
}

/// Free poses of one object and how they were reached.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSolution {
    pub object_id: ObjectId,
    /// One pose per observed primitive; the last is the identity gauge.
    pub poses: Vec<Pose>,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub termination: Termination,
    pub cost_history: Vec<f64>,
}

fn is_rank_deficient(h: &DMatrix<f64>) -> bool {
    let n = h.nrows();
    let d: Vec<f64> = (0..n).map(|i| h[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return true;
    }
    let s = DMatrix::from_fn(n, n, |r, c| h[(r, c)] / (d[r] * d[c]).sqrt());
    let eig = SymmetricEigen::new(s).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    !(max > 0.0) || min < SINGULAR_RATIO * max
}

fn apply_update(poses: &[Pose], tau: &DVector<f64>) -> Vec<Pose> {
    poses
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let v = Vector6::from_iterator(tau.rows(6 * s, 6).iter().copied());
            p.oplus(&Se3Tangent::from_vector(&v))
        })
        .collect()
}

/// Damped Gauss-Newton IRLS on one object starting from identity poses.
/// A step is kept only if it does not increase the cost; rejected steps
/// raise the Marquardt damping and still count as iterations.
pub fn solve_object(problem: &ObjectProblem, config: &ResolvedSolverConfig) -> ObjectSolution {
    let m = problem.free_count();
    let mut poses = vec![Pose::identity(); m];
    let finish = |poses: Vec<Pose>, iterations, initial_cost, final_cost, termination, cost_history| {
        let mut all = poses;
        all.push(Pose::identity());
        ObjectSolution {
            object_id: problem.object_id(),
            poses: all,
            iterations,
            initial_cost,
            final_cost,
            termination,
            cost_history,
        }
    };
    if m == 0 || problem.correspondence_count() == 0 {
        let c = problem.cost(&poses);
        return finish(poses, 0, c, c, Termination::NoCorrespondences, vec![c]);
    }

    let mut ne = problem.linearize(&poses);
    let initial_cost = ne.cost;
    let mut cost = ne.cost;
    let mut history = vec![cost];
    if is_rank_deficient(&ne.hessian) {
        return finish(poses, 0, cost, cost, Termination::SingularSystem, history);
    }

    let mut lambda = config.damping;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let mut h = ne.hessian.clone();
        for i in 0..h.nrows() {
            h[(i, i)] *= 1.0 + lambda;
        }
        let step = h.cholesky().map(|c| -c.solve(&ne.gradient));
        let Some(tau) = step.filter(|t| t.iter().all(|x| x.is_finite())) else {
            lambda = (10.0 * lambda).max(MIN_DAMPING_STEP);
            if lambda > MAX_DAMPING {
                termination = Termination::SingularSystem;
                poses = vec![Pose::identity(); m];
                break;
            }
            continue;
        };
        let small = tau.amax() < config.update_norm_tolerance;
        let candidate = apply_update(&poses, &tau);
        let new_cost = problem.cost(&candidate);
        if new_cost <= cost {
            poses = candidate;
            cost = new_cost;
            history.push(cost);
            lambda = if lambda / 10.0 < MIN_DAMPING_STEP {
                config.damping
            } else {
                lambda / 10.0
            };
            if small {
                termination = Termination::Converged;
                break;
            }
            ne = problem.linearize(&poses);
        } else {
            if small {
                termination = Termination::Converged;
                break;
            }
            lambda = (10.0 * lambda).max(MIN_DAMPING_STEP);
            if lambda > MAX_DAMPING {
                termination = Termination::Stalled;
                break;
            }
        }
    }
    finish(poses, iterations, initial_cost, cost, termination, history)
}

/// Validates the scene, freezes static objects and solves every dynamic
/// object independently. Poses are written back into the scene.
pub fn solve(scene: &mut SceneData, config: &SolverConfig) -> Result<SolveReport, SolverError> {
    let diagnostics = validate_scene(scene);
    if !diagnostics.is_empty() {
        return Err(SolverError::InvalidScene(diagnostics));
    }
    let resolved = config.resolve(scene.scene_scale())?;
    let evidence: Vec<StaticEvidence> = scene
        .objects
        .par_iter()
        .map(|o| static_residual(scene, o))
        .collect();
    apply_classification(scene, &evidence, resolved.static_residual_threshold);

    let shared: &SceneData = scene;
    let solved: Vec<Option<(ObjectSolution, Vec<SkippedPair>, usize)>> = shared
        .objects
        .par_iter()
        .map(|obj| {
            if obj.is_static {
                return None;
            }
            let problem = ObjectProblem::build(
                shared,
                obj,
                resolved.huber_delta,
                resolved.min_correspondences_per_pair,
            );
            let sol = solve_object(&problem, &resolved);
            Some((sol, problem.skipped().to_vec(), problem.correspondence_count()))
        })
        .collect();

    let mut reports = Vec::with_capacity(solved.len());
    for ((obj, result), static_median) in scene.objects.iter_mut().zip(solved).zip(&evidence) {
        let pixel_counts = obj.primitives.iter().map(|p| p.pixel_count).collect();
        let report = match result {
            None => ObjectReport {
                object_id: obj.object_id,
                static_flag: true,
                static_residual: static_median.weighted_median,
                iterations: 0,
                initial_cost: 0.0,
                final_cost: 0.0,
                termination: Termination::Static,
                pixel_counts,
                correspondences: 0,
                skipped_pairs: Vec::new(),
                cost_history: Vec::new(),
            },
            Some((sol, skipped_pairs, correspondences)) => {
                for (prim, pose) in obj.primitives.iter_mut().zip(&sol.poses) {
                    prim.pose = *pose;
                }
                ObjectReport {
                    object_id: obj.object_id,
                    static_flag: false,
                    static_residual: static_median.weighted_median,
                    iterations: sol.iterations,
                    initial_cost: sol.initial_cost,
                    final_cost: sol.final_cost,
                    termination: sol.termination,
                    pixel_counts,
                    correspondences,
                    skipped_pairs,
                    cost_history: sol.cost_history,
                }
            }
        };
        reports.push(report);
    }
    Ok(SolveReport {
        config: resolved,
        initial_cost: reports.iter().map(|r| r.initial_cost).sum(),
        final_cost: reports.iter().map(|r| r.final_cost).sum(),
        objects: reports,
    })
}
