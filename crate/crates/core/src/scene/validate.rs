use super::{ObjectId, SceneData, MIN_PRIMITIVE_PIXELS, UNCOVERED};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// One violated scene invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Diagnostic {
    #[error("expected {expected} correspondence fields for {keyframes} keyframes, found {found}; missing pair ({missing_from}, {})", missing_from + 1)]
    CorrespondenceCount {
        keyframes: usize,
        expected: usize,
        found: usize,
        missing_from: usize,
    },
    #[error("{what} of keyframe {frame} is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    Resolution {
        what: &'static str,
        frame: usize,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("non-finite point at valid pixel {pixel} of keyframe {frame}")]
    NonFinitePoint { frame: usize, pixel: usize },
    #[error("correspondence {pair} declares source frame {found}")]
    SourceFrame { pair: usize, found: usize },
    #[error("confidence {value} outside [0, 1] at pixel {pixel} of pair {pair}")]
    ConfidenceRange { pair: usize, pixel: usize, value: f64 },
    #[error("non-finite flow at pixel {pixel} of pair {pair}")]
    NonFiniteFlow { pair: usize, pixel: usize },
    #[error("pixel {pixel} of pair {pair} flows outside the image with confidence {value}")]
    OutOfImageConfidence { pair: usize, pixel: usize, value: f64 },
    #[error("object {object} has an empty track")]
    EmptyTrack { object: ObjectId },
    #[error("object {object}: keyframe {next} does not follow {prev} (track must be strictly increasing)")]
    TrackOrdering {
        object: ObjectId,
        prev: usize,
        next: usize,
    },
    #[error("object {object} appears in {count} tracks")]
    DuplicateTrack { object: ObjectId, count: usize },
    #[error("object {object} at keyframe {frame} covers {pixels} pixels but has no track")]
    UntrackedLabel {
        object: ObjectId,
        frame: usize,
        pixels: usize,
    },
    #[error("object {object} primitive at keyframe {frame} is outside the sequence")]
    PrimitiveOutOfRange { object: ObjectId, frame: usize },
    #[error("object {object} primitive at keyframe {frame} declares {declared} pixels, mask has {actual}")]
    PixelCount {
        object: ObjectId,
        frame: usize,
        declared: usize,
        actual: usize,
    },
    #[error("object {object} primitive carries id {found}")]
    PrimitiveIdentity { object: ObjectId, found: ObjectId },
    #[error("static object {object} has a non-identity pose at keyframe {frame}")]
    StaticPose { object: ObjectId, frame: usize },
    #[error("last observed primitive of object {object} does not have identity pose")]
    Gauge { object: ObjectId },
}

/// Checks every scene invariant. An empty result means the scene is valid.
pub fn validate_scene(scene: &SceneData) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = scene.keyframes.len();
    let (w, h) = (scene.width(), scene.height());

    let expected_pairs = n.saturating_sub(1);
    if scene.correspondences.len() != expected_pairs {
        out.push(Diagnostic::CorrespondenceCount {
            keyframes: n,
            expected: expected_pairs,
            found: scene.correspondences.len(),
            missing_from: scene.correspondences.len().min(expected_pairs),
        });
    }

    for (k, kf) in scene.keyframes.iter().enumerate() {
        let checks = [
            ("pointmap", kf.points.width(), kf.points.height()),
            ("mask", kf.mask.width(), kf.mask.height()),
        ];
        for (what, fw, fh) in checks {
            if (fw, fh) != (w, h) {
                out.push(Diagnostic::Resolution {
                    what,
                    frame: k,
                    expected_w: w,
                    expected_h: h,
                    found_w: fw,
                    found_h: fh,
                });
            }
        }
        if let Some((pixel, _)) = kf
            .points
            .iter_valid()
            .find(|(_, p)| !p.iter().all(|c| c.is_finite()))
        {
            out.push(Diagnostic::NonFinitePoint { frame: k, pixel });
        }
    }

    for (pair, f) in scene.correspondences.iter().enumerate() {
        if (f.width(), f.height()) != (w, h) {
            out.push(Diagnostic::Resolution {
                what: "correspondence",
                frame: pair,
                expected_w: w,
                expected_h: h,
                found_w: f.width(),
                found_h: f.height(),
            });
            continue;
        }
        if f.source_frame() != pair {
            out.push(Diagnostic::SourceFrame {
                pair,
                found: f.source_frame(),
            });
        }
        for idx in 0..w * h {
            let c = f.confidence(idx);
            if !(0.0..=1.0).contains(&c) {
                out.push(Diagnostic::ConfidenceRange {
                    pair,
                    pixel: idx,
                    value: c,
                });
                break;
            }
            let flow = f.flow(idx);
            if !flow.x.is_finite() || !flow.y.is_finite() {
                out.push(Diagnostic::NonFiniteFlow { pair, pixel: idx });
                break;
            }
            if c > 0.0 && !f.in_image(&f.target(idx)) {
                out.push(Diagnostic::OutOfImageConfidence {
                    pair,
                    pixel: idx,
                    value: c,
                });
                break;
            }
        }
    }

    let mut track_count: BTreeMap<ObjectId, usize> = BTreeMap::new();
    for obj in &scene.objects {
        *track_count.entry(obj.object_id).or_default() += 1;
        if obj.primitives.is_empty() {
            out.push(Diagnostic::EmptyTrack {
                object: obj.object_id,
            });
            continue;
        }
        for pair in obj.primitives.windows(2) {
            if pair[1].keyframe <= pair[0].keyframe {
                out.push(Diagnostic::TrackOrdering {
                    object: obj.object_id,
                    prev: pair[0].keyframe,
                    next: pair[1].keyframe,
                });
            }
        }
        for prim in &obj.primitives {
            if prim.object_id != obj.object_id {
                out.push(Diagnostic::PrimitiveIdentity {
                    object: obj.object_id,
                    found: prim.object_id,
                });
            }
            if prim.keyframe >= n {
                out.push(Diagnostic::PrimitiveOutOfRange {
                    object: obj.object_id,
                    frame: prim.keyframe,
                });
                continue;
            }
            let kf = &scene.keyframes[prim.keyframe];
            let actual = (0..kf.mask.labels().len())
                .filter(|&i| kf.mask.raw(i) == obj.object_id.0 && kf.points.is_valid(i))
                .count();
            if actual != prim.pixel_count {
                out.push(Diagnostic::PixelCount {
                    object: obj.object_id,
                    frame: prim.keyframe,
                    declared: prim.pixel_count,
                    actual,
                });
            }
            if obj.is_static && !prim.pose.is_identity() {
                out.push(Diagnostic::StaticPose {
                    object: obj.object_id,
                    frame: prim.keyframe,
                });
            }
        }
        if !obj.primitives[obj.primitives.len() - 1].pose.is_identity() {
            out.push(Diagnostic::Gauge {
                object: obj.object_id,
            });
        }
    }
    for (&object, &count) in &track_count {
        if count > 1 {
            out.push(Diagnostic::DuplicateTrack { object, count });
        }
    }

    let tracked: BTreeSet<ObjectId> = track_count.keys().copied().collect();
    for (k, kf) in scene.keyframes.iter().enumerate() {
        let mut per_label: BTreeMap<u16, usize> = BTreeMap::new();
        for idx in 0..kf.mask.labels().len() {
            let l = kf.mask.raw(idx);
            if l != UNCOVERED && kf.points.is_valid(idx) {
                *per_label.entry(l).or_default() += 1;
            }
        }
        for (l, pixels) in per_label {
            if pixels >= MIN_PRIMITIVE_PIXELS && !tracked.contains(&ObjectId(l)) {
                out.push(Diagnostic::UntrackedLabel {
                    object: ObjectId(l),
                    frame: k,
                    pixels,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::test_support::labelled_keyframe;
    use crate::scene::{CorrespondenceField, Primitive};
    use crate::{Point3, Pose};

    fn two_frame_scene() -> SceneData {
        let frames = vec![
            labelled_keyframe(10, 10, vec![0; 100], 0.0),
            labelled_keyframe(10, 10, vec![0; 100], 1.0),
        ];
        SceneData::from_parts(frames, vec![CorrespondenceField::identity(10, 10, 0)], "metric").unwrap()
    }

    #[test]
    fn clean_scene_has_no_diagnostics() {
        assert!(validate_scene(&two_frame_scene()).is_empty());
    }

    #[test]
    fn missing_correspondence_is_reported() {
        let mut s = two_frame_scene();
        s.correspondences.clear();
        let d = validate_scene(&s);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::CorrespondenceCount { missing_from: 0, .. }));
        assert!(d[0].to_string().contains("(0, 1)"));
    }

    #[test]
    fn duplicated_keyframe_in_track() {
        let mut s = two_frame_scene();
        let dup = s.objects[0].primitives[0].clone();
        s.objects[0].primitives.insert(1, dup);
        let d = validate_scene(&s);
        assert!(d.iter().any(|x| matches!(x, Diagnostic::TrackOrdering { prev: 0, next: 0, .. })));
    }

    #[test]
    fn nan_at_valid_pixel() {
        let mut s = two_frame_scene();
        s.keyframes[1].points.set(5, Point3::new(f64::NAN, 0.0, 0.0));
        assert!(validate_scene(&s)
            .iter()
            .any(|x| matches!(x, Diagnostic::NonFinitePoint { frame: 1, pixel: 5 })));
        s.keyframes[1].points.set_invalid(5);
        s.objects = crate::scene::build_objects(&s.keyframes).unwrap();
        assert!(validate_scene(&s).is_empty());
    }

    #[test]
    fn gauge_and_static_violations() {
        let mut s = two_frame_scene();
        let moved = Pose::from_translation(Point3::new(0.1, 0.0, 0.0));
        s.objects[0].primitives[1].pose = moved;
        assert!(validate_scene(&s).iter().any(|x| matches!(x, Diagnostic::Gauge { .. })));
        s.objects[0].primitives[1].pose = Pose::identity();
        s.objects[0].primitives[0].pose = moved;
        s.objects[0].is_static = true;
        assert!(validate_scene(&s).iter().any(|x| matches!(x, Diagnostic::StaticPose { frame: 0, .. })));
    }

    #[test]
    fn untracked_label_and_pixel_count() {
        let mut s = two_frame_scene();
        s.objects[0].primitives[0].pixel_count = 3;
        let extra = Primitive {
            object_id: ObjectId(0),
            keyframe: 7,
            pixel_count: 1,
            pose: Pose::identity(),
        };
        s.objects[0].primitives.push(extra);
        let d = validate_scene(&s);
        assert!(d.iter().any(|x| matches!(x, Diagnostic::PixelCount { declared: 3, actual: 100, .. })));
        assert!(d.iter().any(|x| matches!(x, Diagnostic::PrimitiveOutOfRange { frame: 7, .. })));
        s.objects.clear();
        assert!(validate_scene(&s).iter().any(|x| matches!(x, Diagnostic::UntrackedLabel { .. })));
    }
}
