//! Procedural piecewise-rigid scenes with known trajectories.
//!
//! Every object owns a rectangular pixel region that shifts by an integer
//! pixel velocity per keyframe, and each pixel of the region carries one
//! fixed point of the object's rest geometry. Flows between consecutive
//! keyframes are therefore exact integer displacements, and corresponded
//! points differ by the object's rigid motion alone.

mod presets;

pub use presets::{noisy_benchmark, performance_scene, standard_benchmark, three_body_chain, STANDARD_OCCLUDED};

use crate::dataio::pose_from_rows;
use crate::lie::Se3Tangent;
use crate::scene::{
    CorrespondenceField, GroundTruth, GtFrame, GtObject, Keyframe, ObjectId, PointMap, SceneData, SegmentMask,
    MIN_PRIMITIVE_PIXELS, UNCOVERED,
};
use crate::{Point3, Pose};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Upper bound of the confidence drawn for outlier flows.
pub const OUTLIER_MAX_CONFIDENCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid synth setting `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

fn config_err<T>(field: impl Into<String>, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        field: field.into(),
        reason: reason.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Box,
    SphereShell,
    PlanarPatch,
}

/// World motion `M_k` applied to the rest geometry at keyframe `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Trajectory {
    Static,
    /// `M_k = C·exp(k·τ)·C⁻¹` with `C` the translation to the rest centre,
    /// so rotations turn the object about its own centre.
    Twist { twist: [f64; 6] },
    /// One row-major homogeneous matrix per keyframe.
    Scripted { poses: Vec<[[f64; 4]; 4]> },
    /// Same world motion as another object, making the pair co-rigid.
    Follow { object: u16 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: u16,
    pub shape: Shape,
    /// Rest centre in scene units.
    pub center: [f64; 3],
    /// Full extents along x, y, z; a planar patch ignores z.
    pub extents: [f64; 3],
    /// `[u0, v0, width, height]` at keyframe 0; one point per pixel.
    pub region: [usize; 4],
    #[serde(default)]
    pub pixel_velocity: [i64; 2],
    pub trajectory: Trajectory,
    /// Inclusive keyframe intervals in which the object is observed; empty
    /// means always.
    #[serde(default)]
    pub visible: Vec<[usize; 2]>,
}

impl ObjectSpec {
    pub fn is_visible(&self, k: usize) -> bool {
        self.visible.is_empty() || self.visible.iter().any(|&[a, b]| a <= k && k <= b)
    }

    fn origin(&self, k: usize) -> (i64, i64) {
        let k = k as i64;
        (
            self.region[0] as i64 + self.pixel_velocity[0] * k,
            self.region[1] as i64 + self.pixel_velocity[1] * k,
        )
    }

    /// Rest point carried by region pixel `(a, b)`.
    pub fn rest_point(&self, a: usize, b: usize) -> Point3 {
        let s = (a as f64 + 0.5) / self.region[2] as f64;
        let t = (b as f64 + 0.5) / self.region[3] as f64;
        let c = Point3::from(self.center);
        let half = Vector3::from(self.extents) * 0.5;
        match self.shape {
            Shape::PlanarPatch => c + Vector3::new((2.0 * s - 1.0) * half.x, (2.0 * t - 1.0) * half.y, 0.0),
            Shape::SphereShell | Shape::Box => {
                let theta = std::f64::consts::PI * t;
                let phi = 2.0 * std::f64::consts::PI * s;
                let d = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                if self.shape == Shape::SphereShell {
                    c + d.component_mul(&half)
                } else {
                    // radial projection of the direction onto the box surface
                    let m = (0..3).map(|i| d[i].abs() / half[i]).fold(0.0, f64::max);
                    c + d / m
                }
            }
        }
    }

    /// Diagonal of the rest geometry's axis-aligned bounds.
    pub fn diameter(&self) -> f64 {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for b in 0..self.region[3] {
            for a in 0..self.region[2] {
                let p = self.rest_point(a, b);
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        (hi - lo).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub keyframe_count: usize,
    pub width: usize,
    pub height: usize,
    /// Point noise std as a fraction of each object's diameter.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub outlier_fraction: f64,
    #[serde(default = "default_unit")]
    pub scene_unit: String,
    pub objects: Vec<ObjectSpec>,
}

fn default_unit() -> String {
    "m".into()
}

impl SynthConfig {
    /// Checks every field and returns the world motion of each object.
    pub fn validate(&self) -> Result<Vec<Vec<Pose>>, ConfigError> {
        let n = self.keyframe_count;
        if n == 0 {
            return config_err("keyframe_count", "must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return config_err("width", "resolution must be positive");
        }
        if self.width * self.height > u32::MAX as usize {
            return config_err("width", "resolution is too large");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return config_err("noise", "must be a finite non-negative fraction");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return config_err("outlier_fraction", "must lie in [0, 1)");
        }
        if self.objects.is_empty() {
            return config_err("objects", "at least one object is required");
        }
        let mut ids = BTreeMap::new();
        for (i, o) in self.objects.iter().enumerate() {
            let f = |name: &str| format!("objects[{i}].{name}");
            if o.id == UNCOVERED {
                return config_err(f("id"), format!("{UNCOVERED} is reserved for uncovered pixels"));
            }
            if ids.insert(o.id, i).is_some() {
                return config_err(f("id"), format!("duplicate object id {}", o.id));
            }
            if o.extents.iter().any(|e| !(e.is_finite() && *e >= 0.0))
                || o.extents[0] <= 0.0
                || o.extents[1] <= 0.0
                || (o.shape != Shape::PlanarPatch && o.extents[2] <= 0.0)
            {
                return config_err(f("extents"), "must be positive");
            }
            if o.center.iter().any(|c| !c.is_finite()) {
                return config_err(f("center"), "must be finite");
            }
            if o.region[2] * o.region[3] < MIN_PRIMITIVE_PIXELS {
                return config_err(f("region"), format!("needs at least {MIN_PRIMITIVE_PIXELS} pixels"));
            }
            for k in 0..n {
                let (u, v) = o.origin(k);
                if u < 0 || v < 0 || u as usize + o.region[2] > self.width || v as usize + o.region[3] > self.height {
                    return config_err(f("region"), format!("leaves the image at keyframe {k}"));
                }
            }
            if o.visible.iter().any(|&[a, b]| a > b || b >= n) {
                return config_err(f("visible"), "intervals must be ordered and inside the sequence");
            }
            if !(0..n).any(|k| o.is_visible(k)) {
                return config_err(f("visible"), "object is never visible");
            }
        }
        for k in 0..n {
            let mut owner = vec![None::<usize>; self.width * self.height];
            for (i, o) in self.objects.iter().enumerate() {
                let (u0, v0) = o.origin(k);
                for b in 0..o.region[3] {
                    for a in 0..o.region[2] {
                        let idx = (v0 as usize + b) * self.width + u0 as usize + a;
                        if let Some(j) = owner[idx].replace(i) {
                            return config_err(
                                format!("objects[{i}].region"),
                                format!("overlaps object {} at keyframe {k}", self.objects[j].id),
                            );
                        }
                    }
                }
            }
        }
        let mut motions: Vec<Option<Vec<Pose>>> = vec![None; self.objects.len()];
        for i in 0..self.objects.len() {
            self.resolve_motion(i, &ids, &mut motions, &mut Vec::new())?;
        }
        Ok(motions.into_iter().map(|m| m.expect("resolved")).collect())
    }

    fn resolve_motion(
        &self,
        i: usize,
        ids: &BTreeMap<u16, usize>,
        motions: &mut [Option<Vec<Pose>>],
        chain: &mut Vec<usize>,
    ) -> Result<Vec<Pose>, ConfigError> {
        if let Some(m) = &motions[i] {
            return Ok(m.clone());
        }
        let field = format!("objects[{i}].trajectory");
        if chain.contains(&i) {
            return config_err(field, "follow chain forms a cycle");
        }
        let o = &self.objects[i];
        let n = self.keyframe_count;
        let m = match &o.trajectory {
            Trajectory::Static => vec![Pose::identity(); n],
            Trajectory::Twist { twist } => {
                if twist.iter().any(|x| !x.is_finite()) {
                    return config_err(field, "twist must be finite");
                }
                let tau = Se3Tangent::from_vector(&(*twist).into());
                let c = Pose::from_translation(Vector3::from(o.center));
                (0..n)
                    .map(|k| if k == 0 { Pose::identity() } else { c * Pose::exp(&tau.scale(k as f64)) * c.inverse() })
                    .collect()
            }
            Trajectory::Scripted { poses } => {
                if poses.len() != n {
                    return config_err(field, format!("{} poses for {n} keyframes", poses.len()));
                }
                poses
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| {
                        pose_from_rows(rows).ok_or_else(|| ConfigError {
                            field: field.clone(),
                            reason: format!("pose {k} is not a rigid transform"),
                        })
                    })
                    .collect::<Result<_, _>>()?
            }
            Trajectory::Follow { object } => {
                let &j = ids.get(object).ok_or_else(|| ConfigError {
                    field: field.clone(),
                    reason: format!("follows unknown object {object}"),
                })?;
                chain.push(i);
                let m = self.resolve_motion(j, ids, motions, chain)?;
                chain.pop();
                m
            }
        };
        motions[i] = Some(m.clone());
        Ok(m)
    }
}

/// Region pixel of one object at one keyframe.
#[derive(Clone)]
struct Owner {
    object: usize,
    a: usize,
    b: usize,
    visible: bool,
    noise: Point3,
}

/// Renders the configured scene and its noise-free ground truth.
///
/// Flows follow each object's region even while it is hidden, as a tracker
/// carrying points through an occluder would, so observations on both
/// sides of a gap can be linked by chaining. Pixels of an object that is never
/// observed again carry no flow.
///
/// Random draws happen in a fixed order (frame noise row-major per
/// keyframe, then flow outliers per pair), so the seed determines the
/// output bit for bit.
pub fn generate(config: &SynthConfig) -> Result<(SceneData, GroundTruth), ConfigError> {
    let motions = config.validate()?;
    let (w, h, n) = (config.width, config.height, config.keyframe_count);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let diameters: Vec<f64> = config.objects.iter().map(ObjectSpec::diameter).collect();

    let mut keyframes = Vec::with_capacity(n);
    let mut gt_frames = Vec::with_capacity(n);
    let mut owners: Vec<Vec<Option<Owner>>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut gt_points = PointMap::invalid(w, h);
        let mut gt_labels = SegmentMask::uncovered(w, h);
        let mut dynamic = vec![false; w * h];
        let mut owner = vec![None; w * h];
        for (i, o) in config.objects.iter().enumerate() {
            let (u0, v0) = o.origin(k);
            let moving = motions[i].iter().any(|m| !m.is_identity());
            for b in 0..o.region[3] {
                for a in 0..o.region[2] {
                    let idx = (v0 as usize + b) * w + u0 as usize + a;
                    gt_points.set(idx, motions[i][k].act(&o.rest_point(a, b)));
                    gt_labels.set(idx, Some(ObjectId(o.id)));
                    dynamic[idx] = moving;
                    owner[idx] = Some(Owner {
                        object: i,
                        a,
                        b,
                        visible: o.is_visible(k),
                        noise: Point3::zeros(),
                    });
                }
            }
        }
        let mut points = PointMap::invalid(w, h);
        let mut mask = SegmentMask::uncovered(w, h);
        for (idx, slot) in owner.iter_mut().enumerate() {
            let Some(px) = slot.as_mut().filter(|px| px.visible) else { continue };
            let std = config.noise * diameters[px.object];
            if std > 0.0 {
                px.noise = Point3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * std;
            }
            points.set(idx, gt_points.get(idx).expect("covered") + px.noise);
            mask.set(idx, Some(ObjectId(config.objects[px.object].id)));
        }
        keyframes.push(Keyframe { points, mask });
        gt_frames.push(GtFrame {
            points: gt_points,
            labels: gt_labels,
            dynamic,
        });
        owners.push(owner);
    }

    let mut correspondences = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let mut flow = vec![Vector2::zeros(); w * h];
        let mut conf = vec![0.0; w * h];
        for (idx, slot) in owners[k].iter().enumerate() {
            let Some(px) = slot else { continue };
            let o = &config.objects[px.object];
            if !(k + 1..n).any(|j| o.is_visible(j)) {
                continue;
            }
            if config.outlier_fraction > 0.0 && rng.random::<f64>() < config.outlier_fraction {
                let target = Vector2::new(rng.random::<f64>() * (w - 1) as f64, rng.random::<f64>() * (h - 1) as f64);
                let source = Vector2::new((idx % w) as f64, (idx / w) as f64);
                flow[idx] = target - source;
                conf[idx] = rng.random::<f64>() * OUTLIER_MAX_CONFIDENCE;
                continue;
            }
            let (u1, v1) = o.origin(k + 1);
            let target = (v1 as usize + px.b) * w + u1 as usize + px.a;
            let next = owners[k + 1][target].as_ref().expect("regions move with their objects");
            flow[idx] = Vector2::new(o.pixel_velocity[0] as f64, o.pixel_velocity[1] as f64);
            conf[idx] = 1.0 / (1.0 + (next.noise - px.noise).norm() / diameters[px.object]);
        }
        correspondences.push(CorrespondenceField::new(w, h, flow, conf, k).expect("sized to the image"));
    }

    let scene = SceneData::from_parts(keyframes, correspondences, config.scene_unit.clone())
        .expect("every object is visible somewhere with enough pixels");
    let objects = config
        .objects
        .iter()
        .zip(motions)
        .zip(&diameters)
        .map(|((o, world_motion), &diameter)| GtObject {
            object_id: ObjectId(o.id),
            diameter,
            world_motion,
        })
        .collect();
    Ok((
        scene,
        GroundTruth {
            frames: gt_frames,
            objects,
        },
    ))
}
