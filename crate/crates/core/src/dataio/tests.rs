use super::*;
use crate::lie::Se3Tangent;
use crate::remap::remap_scene;
use crate::scene::test_support::labelled_keyframe;
use crate::scene::UNCOVERED;
use rand::{Rng, SeedableRng};

fn tw(v: [f64; 6]) -> Se3Tangent<f64> {
    Se3Tangent::from_vector(&v.into())
}

fn scene() -> SceneData {
    let (w, h) = (16, 12);
    let keyframes = (0..3)
        .map(|k| {
            let labels = (0..w * h)
                .map(|i| match i % w {
                    0..=7 => 0,
                    8..=14 => 1,
                    _ => UNCOVERED,
                })
                .collect();
            let mut kf = labelled_keyframe(w, h, labels, k as f64 * 0.1 + 1.0 / 3.0);
            kf.points.set_invalid(5);
            kf
        })
        .collect();
    let correspondences = (0..2)
        .map(|k| {
            let mut f = CorrespondenceField::identity(w, h, k);
            f.set(3, Vector2::new(0.25, 0.5), 0.7);
            f
        })
        .collect();
    SceneData::from_parts(keyframes, correspondences, "m").unwrap()
}

fn ground_truth(scene: &SceneData) -> GroundTruth {
    GroundTruth {
        frames: scene
            .keyframes
            .iter()
            .map(|kf| GtFrame {
                points: kf.points.clone(),
                labels: kf.mask.clone(),
                dynamic: kf.mask.labels().iter().map(|&l| l == 1).collect(),
            })
            .collect(),
        objects: vec![
            GtObject {
                object_id: ObjectId(0),
                diameter: 1.0,
                world_motion: vec![Pose::identity(); 3],
            },
            GtObject {
                object_id: ObjectId(1),
                diameter: 0.7,
                world_motion: (0..3)
                    .map(|k| Pose::exp(&tw([0.1 * k as f64, 0.0, 0.0, 0.0, 0.0, 0.3 * k as f64])))
                    .collect(),
            },
        ],
    }
}

/// Raw-bit comparison, which also equates NaN payloads at invalid pixels.
fn same_points(a: &PointMap, b: &PointMap) -> bool {
    a.valid_mask() == b.valid_mask()
        && a.raw_points()
            .iter()
            .zip(b.raw_points())
            .all(|(p, q)| p.iter().zip(q.iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
}

fn same_scene(a: &SceneData, b: &SceneData) -> bool {
    a.keyframes.len() == b.keyframes.len()
        && a.keyframes
            .iter()
            .zip(&b.keyframes)
            .all(|(x, y)| same_points(&x.points, &y.points) && x.mask == y.mask)
        && a.correspondences == b.correspondences
        && a.objects == b.objects
        && a.scene_unit == b.scene_unit
}

#[test]
fn quantized_scene_roundtrips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let s = quantize_scene(&scene());
    save_scene(dir.path(), &s).unwrap();
    let back = load_scene(dir.path()).unwrap();
    assert!(same_scene(&s, &back));
    // a second pass reproduces the same bytes
    let dir2 = tempfile::tempdir().unwrap();
    save_scene(dir2.path(), &back).unwrap();
    for name in ["manifest", "frame_0001.pts", "flow_0000.flo2", "conf_0001.cnf"] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(dir2.path().join(name)).unwrap()
        );
    }
}

#[test]
fn unquantized_scene_loses_only_single_precision() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene();
    save_scene(dir.path(), &s).unwrap();
    let back = load_scene(dir.path()).unwrap();
    assert!(!same_scene(&s, &back));
    assert!(same_scene(&quantize_scene(&s), &back));
}

#[test]
fn ground_truth_roundtrips_through_dataset_root() {
    let dir = tempfile::tempdir().unwrap();
    let s = quantize_scene(&scene());
    let gt = quantize_ground_truth(&ground_truth(&s));
    save_dataset(dir.path(), &s, Some(&gt)).unwrap();
    for root in [dir.path().to_owned(), dir.path().join("gt")] {
        let back = load_ground_truth(&root).unwrap();
        assert_eq!(back.objects, gt.objects);
        for (x, y) in back.frames.iter().zip(&gt.frames) {
            assert!(same_points(&x.points, &y.points));
            assert_eq!((&x.labels, &x.dynamic), (&y.labels, &y.dynamic));
        }
    }
}

#[test]
fn reconstructions_roundtrip_bit_exactly() {
    let mut s = scene();
    s.objects[1].primitives[0].pose = Pose::exp(&tw([0.3, 0.1, -0.2, 0.05, 0.1, 0.7]));
    let recons: Vec<_> = (0..3).map(|t| remap_scene(&s, t).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    save_reconstructions(dir.path(), &recons).unwrap();
    let back = load_reconstructions(dir.path()).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in recons.iter().zip(&back) {
        assert_eq!(a.target_time, b.target_time);
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert!(same_points(&x.points, &y.points));
            assert_eq!(x.provenance, y.provenance);
        }
    }
}

#[test]
fn solution_roundtrip_restores_estimates() {
    let mut s = scene();
    s.objects[0].is_static = true;
    s.objects[1].primitives[1].pose = Pose::exp(&tw([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]));
    s.objects[1].extrapolated.insert(2, Pose::exp(&tw([1.0, 0.0, 0.0, 0.0, 0.0, 0.1])));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solution.json");
    save_solution(&path, &Solution::from_scene(&s)).unwrap();
    let mut fresh = scene();
    apply_solution(&mut fresh, &load_solution(&path).unwrap(), &path).unwrap();
    assert_eq!(fresh.objects, s.objects);
}

#[test]
fn manifest_count_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    save_scene(dir.path(), &scene()).unwrap();
    let mpath = dir.path().join(MANIFEST);
    let mut m: SceneManifest = read_json(&mpath).unwrap();
    m.correspondences.pop();
    write_json(&mpath, &m).unwrap();
    let err = load_scene(dir.path()).unwrap_err();
    assert!(matches!(err, DataError::Manifest { .. }), "{err}");
    assert!(err.to_string().contains("1 correspondence fields"));
}

#[test]
fn missing_inventory_file_is_a_manifest_error() {
    let dir = tempfile::tempdir().unwrap();
    save_scene(dir.path(), &scene()).unwrap();
    std::fs::remove_file(dir.path().join("flow_0001.flo2")).unwrap();
    assert!(matches!(load_scene(dir.path()), Err(DataError::Manifest { .. })));
}

#[test]
fn escaping_inventory_paths_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    save_scene(dir.path(), &scene()).unwrap();
    let mpath = dir.path().join(MANIFEST);
    let mut m: SceneManifest = read_json(&mpath).unwrap();
    m.frames[0].points = "../frame_0000.pts".into();
    write_json(&mpath, &m).unwrap();
    assert!(matches!(load_scene(dir.path()), Err(DataError::Manifest { .. })));
}

#[test]
fn missing_manifest_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_scene(dir.path()), Err(DataError::Format { .. })));
}

#[test]
fn invalid_content_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = scene();
    s.correspondences[0].set(7, Vector2::zeros(), 1.5);
    save_scene(dir.path(), &s).unwrap();
    match load_scene(dir.path()) {
        Err(DataError::Validation(d)) => assert!(d.iter().any(|x| matches!(x, Diagnostic::ConfidenceRange { .. }))),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn corrupted_files_never_load_silently() {
    let dir = tempfile::tempdir().unwrap();
    let s = quantize_scene(&scene());
    save_scene(dir.path(), &s).unwrap();
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST)
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut silent = 0;
    for trial in 0..100 {
        let name = &names[rng.random_range(0..names.len())];
        let path = dir.path().join(name);
        let original = std::fs::read(&path).unwrap();
        let mut bytes = original.clone();
        match trial % 4 {
            // header damage
            0 => bytes[rng.random_range(0..array::HEADER_LEN)] ^= 1 << rng.random_range(0..8),
            // truncation
            1 => bytes.truncate(rng.random_range(0..bytes.len())),
            // trailing garbage
            2 => bytes.extend((0..rng.random_range(1..9)).map(|_| rng.random::<u8>())),
            // dimension swap in the header
            _ => {
                let (a, b) = (bytes[6..10].to_vec(), bytes[10..14].to_vec());
                bytes[6..10].copy_from_slice(&b);
                bytes[10..14].copy_from_slice(&a);
                bytes[6] ^= 1;
            }
        }
        std::fs::write(&path, &bytes).unwrap();
        match load_scene(dir.path()) {
            Ok(back) if !same_scene(&s, &back) || bytes != original => silent += 1,
            _ => {}
        }
        std::fs::write(&path, &original).unwrap();
    }
    assert_eq!(silent, 0);
}
