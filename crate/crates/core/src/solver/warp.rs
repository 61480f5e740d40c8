//! Flow-based warping of target pointmaps onto source pixels.

use crate::scene::{in_image, ObjectId, PointMap, SceneData, SegmentMask};
use crate::Point3;
use nalgebra::Vector2;

/// Target-frame geometry seen from one source pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpedPixel {
    /// Bilinearly interpolated target point (zero when `weight == 0`).
    pub point: Point3,
    /// Nearest-neighbour target label, `None` when outside or uncovered.
    pub label: Option<ObjectId>,
    /// Correspondence confidence, 0 when the warp is unusable.
    pub weight: f64,
}

impl WarpedPixel {
    const REJECTED: WarpedPixel = WarpedPixel {
        point: Point3::new(0.0, 0.0, 0.0),
        label: None,
        weight: 0.0,
    };
}

/// Per-pixel `(X̂, Ŝ, w)` for a keyframe pair.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedTargets {
    pub source: usize,
    pub target: usize,
    pub pixels: Vec<WarpedPixel>,
}

/// Warps keyframe `k + 1` onto the pixels of keyframe `k`.
pub fn warp_targets(scene: &SceneData, k: usize) -> WarpedTargets {
    warp_chain(scene, k, k + 1)
}

/// Warps keyframe `target` onto the pixels of keyframe `source` by chaining
/// the adjacent flows in between.
pub fn warp_chain(scene: &SceneData, source: usize, target: usize) -> WarpedTargets {
    let n = scene.width() * scene.height();
    WarpedTargets {
        source,
        target,
        pixels: (0..n)
            .map(|idx| warp_pixel(scene, source, target, idx))
            .collect(),
    }
}

/// Bilinear taps `(pixel index, weight)` around a position inside the image.
/// Zero-weight taps are dropped, so integer positions yield a single tap.
#[inline]
pub(crate) fn bilinear_taps(p: &Vector2<f64>, width: usize) -> ([(usize, f64); 4], usize) {
    let x0 = p.x.floor();
    let y0 = p.y.floor();
    let fx = p.x - x0;
    let fy = p.y - y0;
    let (x0, y0) = (x0 as usize, y0 as usize);
    let mut taps = [(0usize, 0f64); 4];
    let mut n = 0;
    let candidates = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    for (x, y, w) in candidates {
        if w > 0.0 {
            taps[n] = (y * width + x, w);
            n += 1;
        }
    }
    (taps, n)
}

#[inline]
fn nearest_index(p: &Vector2<f64>, width: usize) -> usize {
    (p.y.round() as usize) * width + p.x.round() as usize
}

/// Samples the target pointmap at a subpixel position. Every contributing tap
/// must be valid and carry the nearest-neighbour label, so geometry from
/// different objects is never blended.
fn sample_target(points: &PointMap, mask: &SegmentMask, p: &Vector2<f64>) -> Option<(Point3, Option<ObjectId>)> {
    let width = points.width();
    let label = mask.raw(nearest_index(p, width));
    let (taps, n) = bilinear_taps(p, width);
    let mut acc = Point3::zeros();
    for &(idx, w) in &taps[..n] {
        if mask.raw(idx) != label {
            return None;
        }
        acc += points.get(idx)? * w;
    }
    Some((acc, mask.label(nearest_index(p, width))))
}

/// Bilinear sample of the flow and confidence of pair `pair` at `p`.
fn sample_flow(scene: &SceneData, pair: usize, p: &Vector2<f64>) -> (Vector2<f64>, f64) {
    let field = &scene.correspondences[pair];
    let (taps, n) = bilinear_taps(p, field.width());
    let mut flow = Vector2::zeros();
    let mut conf = 0.0;
    for &(idx, w) in &taps[..n] {
        flow += field.flow(idx) * w;
        conf += field.confidence(idx) * w;
    }
    (flow, conf)
}

/// Warp of a single source pixel; see [`warp_chain`].
pub fn warp_pixel(scene: &SceneData, source: usize, target: usize, idx: usize) -> WarpedPixel {
    debug_assert!(source < target);
    let (w, h) = (scene.width(), scene.height());
    let mut pos = Vector2::new((idx % w) as f64, (idx / w) as f64);
    let mut conf = 1.0;
    for pair in source..target {
        let (flow, c) = if pair == source {
            let f = &scene.correspondences[pair];
            (f.flow(idx), f.confidence(idx))
        } else {
            sample_flow(scene, pair, &pos)
        };
        pos += flow;
        conf *= c;
        if !in_image(&pos, w, h) || conf <= 0.0 {
            return WarpedPixel::REJECTED;
        }
    }
    let kf = &scene.keyframes[target];
    match sample_target(&kf.points, &kf.mask, &pos) {
        Some((point, label)) => WarpedPixel {
            point,
            label,
            weight: conf,
        },
        None => WarpedPixel {
            label: kf.mask.label(nearest_index(&pos, w)),
            ..WarpedPixel::REJECTED
        },
    }
}
