//! Residual terms of one object and their IRLS normal equations.

use super::residual::{huber_cost, huber_weight};
use super::warp::warp_pixel;
use crate::lie::hat;
use crate::scene::{ObjectId, ObjectTrack, SceneData};
use crate::{Point3, Pose};
use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Samples per accumulation chunk. Fixed so that the reduction order, and
/// therefore every floating point sum, is independent of the worker count.
pub const CHUNK_SAMPLES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    /// `X_i`, source point.
    pub source: Point3,
    /// `X̂_j`, warped target point.
    pub target: Point3,
    /// `w_ij ∈ (0, 1]`.
    pub confidence: f64,
}

/// Masked correspondences between two consecutive observations of an object.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualTerm {
    pub object_id: ObjectId,
    pub source_frame: usize,
    pub target_frame: usize,
    pub samples: Vec<Correspondence>,
}

/// A pair dropped for having too few correspondences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub source_frame: usize,
    pub target_frame: usize,
    pub correspondences: usize,
    pub required: usize,
}

/// Gauss-Newton system of one object over its free poses (all primitives but
/// the last), 6 parameters each in `(rho, phi)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalEquationsBlock {
    pub object_id: ObjectId,
    /// `JᵀWJ`, symmetric positive semi-definite.
    pub hessian: DMatrix<f64>,
    /// `JᵀWr`; the update solves `H·τ = −b`.
    pub gradient: DVector<f64>,
    pub cost: f64,
}

/// Builds correspondences for the pair `(i, j)` of `object`: source pixels
/// labelled `object` at `i` whose warp into `j` lands on the same label.
pub fn residual_term(scene: &SceneData, object: ObjectId, i: usize, j: usize) -> ResidualTerm {
    let kf = &scene.keyframes[i];
    let samples = kf
        .points
        .iter_valid()
        .filter(|(idx, _)| kf.mask.raw(*idx) == object.0)
        .filter_map(|(idx, p)| {
            let w = warp_pixel(scene, i, j, idx);
            (w.weight > 0.0 && w.label == Some(object)).then_some(Correspondence {
                source: *p,
                target: w.point,
                confidence: w.weight,
            })
        })
        .collect();
    ResidualTerm {
        object_id: object,
        source_frame: i,
        target_frame: j,
        samples,
    }
}

#[derive(Clone, Debug)]
struct SlottedTerm {
    term: ResidualTerm,
    slot_i: Option<usize>,
    slot_j: Option<usize>,
}

/// All residual terms of one object, with pose slots assigned.
#[derive(Clone, Debug)]
pub struct ObjectProblem {
    object_id: ObjectId,
    keyframes: Vec<usize>,
    terms: Vec<SlottedTerm>,
    skipped: Vec<SkippedPair>,
    huber_delta: f64,
}

impl ObjectProblem {
    pub fn build(
        scene: &SceneData,
        track: &ObjectTrack,
        huber_delta: f64,
        min_correspondences: usize,
    ) -> Self {
        let keyframes: Vec<usize> = track.observed_keyframes().collect();
        let gauge = keyframes.len() - 1;
        let pairs: Vec<(usize, (usize, usize))> = track.adjacent_pairs().enumerate().collect();
        let built: Vec<ResidualTerm> = pairs
            .par_iter()
            .map(|&(_, (i, j))| residual_term(scene, track.object_id, i, j))
            .collect();
        let mut terms = Vec::new();
        let mut skipped = Vec::new();
        for ((a, _), term) in pairs.into_iter().zip(built) {
            if term.samples.len() < min_correspondences {
                skipped.push(SkippedPair {
                    source_frame: term.source_frame,
                    target_frame: term.target_frame,
                    correspondences: term.samples.len(),
                    required: min_correspondences,
                });
                continue;
            }
            let slot = |s: usize| (s != gauge).then_some(s);
            terms.push(SlottedTerm {
                term,
                slot_i: slot(a),
                slot_j: slot(a + 1),
            });
        }
        Self {
            object_id: track.object_id,
            keyframes,
            terms,
            skipped,
            huber_delta,
        }
    }

    pub fn object_id(&self) -> ObjectId {
        self.object_id
    }

    /// Observed keyframes; the last one is the gauge.
    pub fn keyframes(&self) -> &[usize] {
        &self.keyframes
    }

    pub fn free_count(&self) -> usize {
        self.keyframes.len() - 1
    }

    pub fn skipped(&self) -> &[SkippedPair] {
        &self.skipped
    }

    pub fn terms(&self) -> impl Iterator<Item = &ResidualTerm> {
        self.terms.iter().map(|t| &t.term)
    }

    pub fn correspondence_count(&self) -> usize {
        self.terms.iter().map(|t| t.term.samples.len()).sum()
    }

    pub fn huber_delta(&self) -> f64 {
        self.huber_delta
    }

    fn pose(poses: &[Pose], slot: Option<usize>) -> Pose {
        slot.map_or_else(Pose::identity, |s| poses[s])
    }

    fn chunks(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (t, st) in self.terms.iter().enumerate() {
            let n = st.term.samples.len();
            let mut start = 0;
            while start < n {
                let end = (start + CHUNK_SAMPLES).min(n);
                out.push((t, start, end));
                start = end;
            }
        }
        out
    }

    /// Huber cost `Σ ρ(w·‖r‖)` at the given free poses.
    pub fn cost(&self, poses: &[Pose]) -> f64 {
        self.reduce(poses, Mode::Cost).cost
    }

    /// Cost and gradient `JᵀWr` without forming the Hessian.
    pub fn gradient(&self, poses: &[Pose]) -> (f64, DVector<f64>) {
        let acc = self.reduce(poses, Mode::Gradient);
        (acc.cost, acc.b)
    }

    /// Assembles `JᵀWJ`, `JᵀWr` and the cost at `poses`.
    pub fn linearize(&self, poses: &[Pose]) -> NormalEquationsBlock {
        let acc = self.reduce(poses, Mode::Full);
        let mut h = acc.h;
        h.fill_lower_triangle_with_upper_triangle();
        NormalEquationsBlock {
            object_id: self.object_id,
            hessian: h,
            gradient: acc.b,
            cost: acc.cost,
        }
    }

    fn reduce(&self, poses: &[Pose], mode: Mode) -> Reduced {
        assert_eq!(poses.len(), self.free_count(), "one pose per free primitive");
        let relative: Vec<Pose> = self
            .terms
            .iter()
            .map(|st| Self::pose(poses, st.slot_j).inverse() * Self::pose(poses, st.slot_i))
            .collect();
        let partials: Vec<(usize, ChunkAccum)> = self
            .chunks()
            .into_par_iter()
            .map(|(t, start, end)| {
                let samples = &self.terms[t].term.samples[start..end];
                (t, accumulate(&relative[t], samples, self.huber_delta, mode))
            })
            .collect();

        let dim = 6 * self.free_count();
        let mut out = Reduced {
            h: if mode == Mode::Full {
                DMatrix::zeros(dim, dim)
            } else {
                DMatrix::zeros(0, 0)
            },
            b: DVector::zeros(dim),
            cost: 0.0,
        };
        for (t, acc) in partials {
            let st = &self.terms[t];
            out.cost += acc.cost;
            if mode == Mode::Cost {
                continue;
            }
            let slots = [st.slot_i, st.slot_j];
            for (bi, si) in slots.iter().enumerate() {
                let Some(si) = si else { continue };
                for r in 0..6 {
                    out.b[6 * si + r] += acc.b[6 * bi + r];
                }
                if mode != Mode::Full {
                    continue;
                }
                for (bj, sj) in slots.iter().enumerate() {
                    let Some(sj) = sj else { continue };
                    for r in 0..6 {
                        for c in 0..6 {
                            let (gr, gc) = (6 * bi + r, 6 * bj + c);
                            let (hr, hc) = (6 * si + r, 6 * sj + c);
                            if hr <= hc {
                                out.h[(hr, hc)] += acc.get(gr, gc);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Cost,
    Gradient,
    Full,
}

struct Reduced {
    h: DMatrix<f64>,
    b: DVector<f64>,
    cost: f64,
}

/// Upper triangle of the 12×12 pair Hessian, plus gradient and cost.
struct ChunkAccum {
    h: [f64; 78],
    b: [f64; 12],
    cost: f64,
}

impl ChunkAccum {
    #[inline]
    fn tri(r: usize, c: usize) -> usize {
        // row-major upper triangle offset for r <= c
        r * 12 - r * (r + 1) / 2 + c
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        if r <= c {
            self.h[Self::tri(r, c)]
        } else {
            self.h[Self::tri(c, r)]
        }
    }
}

fn accumulate(z: &Pose, samples: &[Correspondence], delta: f64, mode: Mode) -> ChunkAccum {
    let rz: &Matrix3<f64> = z.rotation().matrix();
    let tz = z.translation();
    let mut acc = ChunkAccum {
        h: [0.0; 78],
        b: [0.0; 12],
        cost: 0.0,
    };
    for s in samples {
        let y = rz * s.source + tz;
        let r = y - s.target;
        let norm = r.norm();
        let scaled = s.confidence * norm;
        acc.cost += huber_cost(scaled, delta);
        if mode == Mode::Cost {
            continue;
        }
        let w = s.confidence * s.confidence * huber_weight(scaled, delta);

        // J = [R_Z | −R_Z[X]× | −I | [y]×]
        let rx = rz * hat(&s.source);
        let hy = hat(&y);
        let mut j = [[0.0f64; 12]; 3];
        for row in 0..3 {
            for c in 0..3 {
                j[row][c] = rz[(row, c)];
                j[row][3 + c] = -rx[(row, c)];
                j[row][9 + c] = hy[(row, c)];
            }
            j[row][6 + row] = -1.0;
        }
        let wr = [w * r.x, w * r.y, w * r.z];
        for c in 0..12 {
            acc.b[c] += j[0][c] * wr[0] + j[1][c] * wr[1] + j[2][c] * wr[2];
        }
        if mode != Mode::Full {
            continue;
        }
        let mut k = 0;
        for a in 0..12 {
            let wa = [w * j[0][a], w * j[1][a], w * j[2][a]];
            for c in a..12 {
                acc.h[k] += wa[0] * j[0][c] + wa[1] * j[1][c] + wa[2] * j[2][c];
                k += 1;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::Se3Tangent;
    use crate::scene::{CorrespondenceField, Keyframe, PointMap, SegmentMask};
    use crate::solver::residual::{residual, residual_jacobians};
    use nalgebra::{Matrix3x6, Vector3};
    use rand::{Rng, SeedableRng};

    #[test]
    fn triangle_offsets_are_dense() {
        let mut seen = [false; 78];
        for r in 0..12 {
            for c in r..12 {
                let k = ChunkAccum::tri(r, c);
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    /// Three-frame scene of a single rigid blob with known motion.
    fn blob_scene(motion: &[Pose]) -> SceneData {
        let (w, h) = (16, 16);
        let rest: Vec<Point3> = (0..w * h)
            .map(|i| {
                let (u, v) = ((i % w) as f64, (i / w) as f64);
                Point3::new(0.05 * u, 0.05 * v, 0.2 * (0.3 * u).sin() + 0.1 * (0.2 * v).cos())
            })
            .collect();
        let frames = motion
            .iter()
            .map(|m| Keyframe {
                points: PointMap::new(w, h, rest.iter().map(|p| m.act(p)).collect(), vec![true; w * h]).unwrap(),
                mask: SegmentMask::new(w, h, vec![0; w * h]).unwrap(),
            })
            .collect();
        let flows = (0..motion.len() - 1).map(|k| CorrespondenceField::identity(w, h, k)).collect();
        SceneData::from_parts(frames, flows, "arbitrary").unwrap()
    }

    #[test]
    fn normal_equations_match_dense_assembly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        let mut rv = || Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
        let motion: Vec<Pose> = (0..3).map(|_| Pose::exp(&Se3Tangent::new(rv(), rv()))).collect();
        let poses: Vec<Pose> = (0..2).map(|_| Pose::exp(&Se3Tangent::new(rv(), rv()))).collect();
        let scene = blob_scene(&motion);
        let problem = ObjectProblem::build(&scene, &scene.objects[0], 0.05, 10);
        assert_eq!(problem.free_count(), 2);
        let ne = problem.linearize(&poses);

        // dense oracle: stack every residual row and form JᵀWJ directly
        let all = [poses[0], poses[1], Pose::identity()];
        let mut h = DMatrix::<f64>::zeros(12, 12);
        let mut b = DVector::<f64>::zeros(12);
        let mut cost = 0.0;
        for (a, term) in problem.terms().enumerate() {
            for s in &term.samples {
                let r = residual(&all[a], &all[a + 1], &s.source, &s.target);
                let z = all[a + 1].inverse() * all[a];
                let (ji, jj) = residual_jacobians(&z, &s.source);
                let scaled = s.confidence * r.norm();
                let w = s.confidence.powi(2) * huber_weight(scaled, 0.05);
                cost += huber_cost(scaled, 0.05);
                let mut j = DMatrix::<f64>::zeros(3, 12);
                j.view_mut((0, 6 * a), (3, 6)).copy_from(&ji);
                if a + 1 < 2 {
                    j.view_mut((0, 6 * (a + 1)), (3, 6)).copy_from(&jj);
                }
                h += j.transpose() * &j * w;
                b += j.transpose() * DVector::from_column_slice(r.as_slice()) * w;
            }
        }
        assert!((ne.hessian - h).amax() < 1e-9);
        assert!((ne.gradient - b).amax() < 1e-10);
        assert!((ne.cost - cost).abs() < 1e-10);
        let _ = Matrix3x6::<f64>::zeros();
    }

    #[test]
    fn insufficient_pairs_are_skipped() {
        let scene = blob_scene(&[Pose::identity(), Pose::identity()]);
        let problem = ObjectProblem::build(&scene, &scene.objects[0], 0.05, 10_000);
        assert_eq!(problem.skipped().len(), 1);
        assert_eq!(problem.skipped()[0].correspondences, 256);
        assert_eq!(problem.terms().count(), 0);
    }
}
