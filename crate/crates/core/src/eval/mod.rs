//! Reconstruction scoring: similarity alignment, thresholded precision and
//! recall, and chunked sequence evaluation on dynamic parts.

mod kdtree;

pub use kdtree::KdTree;

use crate::lie::{Sim3, So3};
use crate::remap::{remap_frames, RemapError};
use crate::scalar::Real;
use crate::scene::{GroundTruth, SceneData};
use crate::{Point3, SimTransform};
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("alignment needs at least 3 non-collinear pairs ({pairs} given)")]
    DegenerateConfiguration { pairs: usize },
    #[error("{which} cloud is empty")]
    EmptyCloud { which: &'static str },
    #[error("invalid evaluation setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("ground truth has {found} frames, scene has {expected}")]
    GroundTruthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Remap(#[from] RemapError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Distance threshold in scene units.
    pub threshold: f64,
    pub chunk_length: usize,
    pub dynamic_only: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: 0.01,
            chunk_length: 150,
            dynamic_only: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(EvalError::InvalidConfig {
                field: "threshold",
                reason: "must be positive".into(),
            });
        }
        if self.chunk_length < 2 {
            return Err(EvalError::InvalidConfig {
                field: "chunk_length",
                reason: "must be at least 2".into(),
            });
        }
        Ok(())
    }
}

/// Least-squares similarity taking `src` onto `dst`, by centroid removal,
/// SVD of the cross-covariance with a reflection guard, and the
/// variance-ratio scale.
pub fn umeyama_align<T: Real>(src: &[Vector3<T>], dst: &[Vector3<T>]) -> Result<Sim3<T>, EvalError> {
    let n = src.len().min(dst.len());
    let degenerate = EvalError::DegenerateConfiguration { pairs: n };
    if n < 3 || src.len() != dst.len() {
        return Err(degenerate);
    }
    let nf = T::from_usize(n).expect("pair count fits the scalar");
    let mu_s = src.iter().fold(Vector3::zeros(), |a, p| a + p) / nf;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / nf;
    let mut cov = Matrix3::<T>::zeros();
    let mut var_s = T::zero();
    for (s, d) in src.iter().zip(dst) {
        let a = s - mu_s;
        cov += (d - mu_d) * a.transpose();
        var_s += a.norm_squared();
    }
    cov /= nf;
    var_s /= nf;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut sv = svd.singular_values;
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite covariance"));
    let tol = T::lit(1e-12);
    if !(var_s > T::zero()) || sorted[1] <= tol * sorted[0] {
        return Err(degenerate);
    }
    let mut s = Matrix3::<T>::identity();
    if (u.determinant() * v_t.determinant()) < T::zero() {
        let k = sv.imin();
        s[(k, k)] = -T::one();
        sv[k] = -sv[k];
    }
    let r = u * s * v_t;
    let scale = sv.sum() / var_s;
    let t = mu_d - r * mu_s * scale;
    Sim3::new(scale, So3::from_matrix_unchecked(r), t).map_err(|_| degenerate)
}

/// Thresholded accuracy and completeness of one prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

pub fn harmonic_fscore(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn covered_fraction(queries: &[Point3], index: &KdTree, threshold: f64) -> f64 {
    let hits: usize = queries
        .par_chunks(4096)
        .map(|c| c.iter().filter(|q| index.any_within(q, threshold)).count())
        .sum();
    hits as f64 / queries.len() as f64
}

/// Precision: predicted points within `threshold` of some ground-truth point.
/// Recall: ground-truth points within `threshold` of some prediction.
pub fn score(pred: &[Point3], gt: &[Point3], threshold: f64) -> Result<Score, EvalError> {
    if pred.is_empty() {
        return Err(EvalError::EmptyCloud { which: "predicted" });
    }
    if gt.is_empty() {
        return Err(EvalError::EmptyCloud { which: "ground-truth" });
    }
    let (gt_index, pred_index) = rayon::join(|| KdTree::new(gt), || KdTree::new(pred));
    let precision = covered_fraction(pred, &gt_index, threshold);
    let recall = covered_fraction(gt, &pred_index, threshold);
    Ok(Score {
        precision,
        recall,
        fscore: harmonic_fscore(precision, recall),
    })
}

/// 4×4 homogeneous matrix of a similarity, row-major rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub scale: f64,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&SimTransform> for SimRecord {
    fn from(s: &SimTransform) -> Self {
        let r = s.rotation().matrix();
        Self {
            scale: s.scale(),
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [s.translation().x, s.translation().y, s.translation().z],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkResult {
    /// First keyframe of the chunk.
    pub start: usize,
    /// Last keyframe of the chunk, the remap target.
    pub end: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub predicted_points: usize,
    pub ground_truth_points: usize,
    pub alignment: SimRecord,
}

/// Per-chunk scores and their unweighted means. The top-level `fscore` is
/// the mean of chunk F-scores; each chunk satisfies `F = 2pr/(p + r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub threshold: f64,
    pub chunk_length: usize,
    pub dynamic_only: bool,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub chunks: Vec<ChunkResult>,
}

/// Point clouds entering the score of one chunk, before alignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkClouds {
    pub start: usize,
    pub end: usize,
    pub predicted: Vec<Point3>,
    pub ground_truth: Vec<Point3>,
    /// Pixel-aligned (predicted, ground truth) pairs of the last keyframe.
    pub anchor_pred: Vec<Point3>,
    pub anchor_gt: Vec<Point3>,
}

/// Gathers the clouds of the chunk `[start, end]`: every source keyframe
/// remapped to `end`, restricted to ground-truth dynamic pixels when
/// requested, against the ground-truth geometry at `end`.
pub fn chunk_clouds(
    scene: &SceneData,
    gt: &GroundTruth,
    start: usize,
    end: usize,
    dynamic_only: bool,
) -> Result<ChunkClouds, EvalError> {
    let recon = remap_frames(scene, start..end + 1, end)?;
    let mut predicted = Vec::new();
    for f in &recon.frames {
        let g = &gt.frames[f.source_frame];
        predicted.extend(
            f.points
                .iter_valid()
                .filter(|(idx, _)| !dynamic_only || g.dynamic[*idx])
                .map(|(_, p)| *p),
        );
    }
    let g = &gt.frames[end];
    let ground_truth = g
        .points
        .iter_valid()
        .filter(|(idx, _)| !dynamic_only || g.dynamic[*idx])
        .map(|(_, p)| *p)
        .collect();
    let last = &scene.keyframes[end].points;
    let (anchor_pred, anchor_gt) = last
        .iter_valid()
        .filter_map(|(idx, p)| g.points.get(idx).map(|q| (*p, *q)))
        .unzip();
    Ok(ChunkClouds {
        start,
        end,
        predicted,
        ground_truth,
        anchor_pred,
        anchor_gt,
    })
}

/// Scores the reconstruction chunk by chunk: remap to the chunk's last
/// keyframe, align on that keyframe's pixel pairs, score, and average.
pub fn evaluate_sequence(scene: &SceneData, gt: &GroundTruth, config: &EvalConfig) -> Result<EvalResult, EvalError> {
    config.validate()?;
    let n = scene.keyframe_count();
    if gt.frames.len() != n {
        return Err(EvalError::GroundTruthMismatch {
            expected: n,
            found: gt.frames.len(),
        });
    }
    if n == 0 {
        return Err(EvalError::EmptyCloud { which: "predicted" });
    }
    let mut chunks = Vec::new();
    for start in (0..n).step_by(config.chunk_length) {
        let end = (start + config.chunk_length).min(n) - 1;
        let clouds = chunk_clouds(scene, gt, start, end, config.dynamic_only)?;
        let align = umeyama_align(&clouds.anchor_pred, &clouds.anchor_gt)?;
        let aligned: Vec<Point3> = clouds.predicted.par_iter().map(|p| align.act(p)).collect();
        let s = score(&aligned, &clouds.ground_truth, config.threshold)?;
        chunks.push(ChunkResult {
            start,
            end,
            precision: s.precision,
            recall: s.recall,
            fscore: s.fscore,
            predicted_points: aligned.len(),
            ground_truth_points: clouds.ground_truth.len(),
            alignment: SimRecord::from(&align),
        });
    }
    let m = chunks.len() as f64;
    Ok(EvalResult {
        threshold: config.threshold,
        chunk_length: config.chunk_length,
        dynamic_only: config.dynamic_only,
        precision: chunks.iter().map(|c| c.precision).sum::<f64>() / m,
        recall: chunks.iter().map(|c| c.recall).sum::<f64>() / m,
        fscore: chunks.iter().map(|c| c.fscore).sum::<f64>() / m,
        chunks,
    })
}
