use super::problem::residual_term;
use super::ResolvedSolverConfig;
use crate::scene::{ObjectTrack, SceneData};
use rayon::prelude::*;

/// Identity-pose residual statistics of one object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticEvidence {
    /// Confidence-weighted median of `‖X_i − X̂_j‖` over all adjacent pairs,
    /// `None` without any correspondence.
    pub weighted_median: Option<f64>,
    pub correspondences: usize,
}

/// Weighted median: the smallest value whose cumulative weight reaches half
/// of the total.
pub(crate) fn weighted_median(mut samples: Vec<(f64, f64)>) -> Option<f64> {
    samples.retain(|&(_, w)| w > 0.0);
    if samples.is_empty() {
        return None;
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &samples {
        acc += w;
        if acc >= 0.5 * total {
            return Some(v);
        }
    }
    samples.last().map(|s| s.0)
}

pub fn static_residual(scene: &SceneData, track: &ObjectTrack) -> StaticEvidence {
    let samples: Vec<(f64, f64)> = track
        .adjacent_pairs()
        .flat_map(|(i, j)| {
            residual_term(scene, track.object_id, i, j)
                .samples
                .into_iter()
                .map(|s| ((s.source - s.target).norm(), s.confidence))
        })
        .collect();
    StaticEvidence {
        correspondences: samples.len(),
        weighted_median: weighted_median(samples),
    }
}

/// Flags objects whose identity-pose residual median is below the threshold
/// and resets every pose to identity. Objects without correspondences stay
/// dynamic.
pub fn classify_static(scene: &mut SceneData, config: &ResolvedSolverConfig) -> Vec<bool> {
    let evidence: Vec<StaticEvidence> = scene
        .objects
        .par_iter()
        .map(|o| static_residual(scene, o))
        .collect();
    apply_classification(scene, &evidence, config.static_residual_threshold);
    scene.objects.iter().map(|o| o.is_static).collect()
}

pub(crate) fn apply_classification(scene: &mut SceneData, evidence: &[StaticEvidence], threshold: f64) {
    for (obj, ev) in scene.objects.iter_mut().zip(evidence) {
        obj.reset_poses();
        obj.is_static = ev.weighted_median.is_some_and(|m| m < threshold);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_cases() {
        assert_eq!(weighted_median(vec![]), None);
        assert_eq!(weighted_median(vec![(3.0, 1.0)]), Some(3.0));
        assert_eq!(weighted_median(vec![(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]), Some(2.0));
        // heavy weight on the largest value dominates
        assert_eq!(weighted_median(vec![(1.0, 0.1), (2.0, 0.1), (9.0, 5.0)]), Some(9.0));
        // zero weights are ignored
        assert_eq!(weighted_median(vec![(1.0, 0.0), (5.0, 1.0)]), Some(5.0));
    }

    #[test]
    fn weighted_median_matches_unit_weight_order_statistic() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 101) as f64).collect();
        let m = weighted_median(xs.iter().map(|&x| (x, 1.0)).collect()).unwrap();
        assert_eq!(m, 50.0);
    }
}
