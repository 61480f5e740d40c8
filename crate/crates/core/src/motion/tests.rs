use super::*;
use crate::lie::{Se3Tangent, So3};
use crate::scene::Primitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rv(rng: &mut impl Rng, s: f64) -> Point3 {
    Point3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

fn random_pose(rng: &mut impl Rng) -> Pose {
    let rho = rv(rng, 1.0);
    let phi = rv(rng, 1.0);
    Pose::exp(&Se3Tangent::new(rho, phi))
}

fn sorted(v: Vector3Like) -> [f64; 3] {
    let mut a = [v.x, v.y, v.z];
    a.sort_by(f64::total_cmp);
    a
}
type Vector3Like = nalgebra::Vector3<f64>;

fn cube_corners() -> Vec<Point3> {
    (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect()
}

#[test]
fn unit_cube_corners() {
    let b = fit_obb(&cube_corners()).unwrap();
    assert!((b.center - Point3::repeat(0.5)).amax() < 1e-15);
    for e in sorted(b.half_extents) {
        assert!((e - 0.5).abs() < 1e-12);
    }
}

#[test]
fn rotated_cube_keeps_extents() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for _ in 0..20 {
        let r = So3::exp(&rv(&mut rng, 3.0));
        let pts: Vec<Point3> = cube_corners().iter().map(|p| r.act(p)).collect();
        let b = fit_obb(&pts).unwrap();
        for e in sorted(b.half_extents) {
            assert!((e - 0.5).abs() < 1e-9, "{e}");
        }
        assert!((b.center - r.act(&Point3::repeat(0.5))).amax() < 1e-12);
    }
}

#[test]
fn elongated_box_axes_follow_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    let pts: Vec<Point3> = (0..500)
        .map(|_| Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0), rng.random_range(-0.2..0.2)))
        .collect();
    let base = fit_obb(&pts).unwrap();
    let r = So3::exp(&Point3::new(0.3, -0.7, 1.1));
    let rotated = fit_obb(&pts.iter().map(|p| r.act(p)).collect::<Vec<_>>()).unwrap();
    assert!((base.half_extents - rotated.half_extents).amax() < 1e-9);
    for i in 0..3 {
        let a = r.matrix() * base.axes.matrix().column(i);
        let b = rotated.axes.matrix().column(i);
        assert!((a.dot(&b).abs() - 1.0).abs() < 1e-9);
    }
    assert!(base.axes.matrix().determinant() > 0.0);
}

#[test]
fn fitted_box_contains_every_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(85);
    for n in [2usize, 3, 5, 40, 400] {
        let pose = random_pose(&mut rng);
        let scale = Point3::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.01..1.0));
        let pts: Vec<Point3> = (0..n).map(|_| pose.act(&rv(&mut rng, 1.0).component_mul(&scale))).collect();
        let b = fit_obb(&pts).unwrap();
        assert!(pts.iter().all(|p| b.contains(p, 1.0, 1e-12)));
    }
}

#[test]
fn degenerate_clouds() {
    assert!(matches!(fit_obb::<f64>(&[]), Err(ObbError::DegenerateCloud { distinct: 0, .. })));
    let p = Point3::new(1.0, 2.0, 3.0);
    match fit_obb(&[p, p, p]) {
        Err(ObbError::DegenerateCloud { distinct: 1, fallback }) => {
            assert_eq!(fallback.center, p);
            assert!(fallback.half_extents.iter().all(|&e| e > 0.0));
        }
        other => panic!("{other:?}"),
    }
}

fn aligned(center: Point3, half: f64) -> Obb<f64> {
    Obb {
        center,
        axes: So3::identity(),
        half_extents: Point3::repeat(half),
    }
}

#[test]
fn contact_cases() {
    let a = aligned(Point3::zeros(), 1.0);
    assert!(in_contact(&a, &a, 1.1));
    assert!(!in_contact(&a, &aligned(Point3::new(10.0, 0.0, 0.0), 1.0), 1.1));
    assert!(in_contact(&a, &aligned(Point3::new(2.1, 0.0, 0.0), 1.0), 1.1));
    assert!(!in_contact(&a, &aligned(Point3::new(2.3, 0.0, 0.0), 1.0), 1.1));
}

fn random_box(rng: &mut impl Rng) -> Obb<f64> {
    Obb {
        center: rv(rng, 2.0),
        axes: So3::exp(&rv(rng, 3.0)),
        half_extents: Point3::new(rng.random_range(0.1..1.0), rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)),
    }
}

#[test]
fn contact_agrees_with_point_sampling() {
    // any sample of one inflated box inside the other proves intersection;
    // for axis-aligned pairs the analytic overlap test decides exactly
    let mut rng = ChaCha8Rng::seed_from_u64(87);
    let alpha = 1.1;
    let grid: Vec<Point3> = (0..11 * 11 * 11)
        .map(|i| Point3::new((i % 11) as f64 / 5.0 - 1.0, ((i / 11) % 11) as f64 / 5.0 - 1.0, (i / 121) as f64 / 5.0 - 1.0))
        .collect();
    for _ in 0..300 {
        let a = random_box(&mut rng);
        let b = random_box(&mut rng);
        let witness = grid.iter().any(|g| {
            let p = a.center + a.axes.matrix() * g.component_mul(&(a.half_extents * alpha));
            b.contains(&p, alpha, 0.0)
        });
        if witness {
            assert!(in_contact(&a, &b, alpha));
        }
        let aa = Obb { axes: So3::identity(), ..a };
        let bb = Obb { axes: So3::identity(), ..b };
        let overlap = (0..3).all(|i| (aa.center[i] - bb.center[i]).abs() <= alpha * (aa.half_extents[i] + bb.half_extents[i]));
        assert_eq!(in_contact(&aa, &bb, alpha), overlap);
    }
}

#[test]
fn contact_is_symmetric_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(89);
    for _ in 0..2000 {
        let a = random_box(&mut rng);
        let b = random_box(&mut rng);
        let alpha = rng.random_range(1.0..1.5);
        let c = in_contact(&a, &b, alpha);
        assert_eq!(c, in_contact(&b, &a, alpha));
        if c {
            assert!(in_contact(&a, &b, alpha + rng.random_range(0.0..1.0)));
        }
    }
}

#[test]
fn velocity_distance_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let v = random_pose(&mut rng);
    assert_eq!(velocity_distance(&v, &v, 0.02, 0.1).unwrap(), 0.0);
    for _ in 0..200 {
        let v = random_pose(&mut rng);
        let w = random_pose(&mut rng);
        let d1 = velocity_distance(&v, &w, 0.3, 0.1).unwrap();
        let d2 = velocity_distance(&w, &v, 0.3, 0.1).unwrap();
        assert!((d1 - d2).abs() < 1e-12 * d1.max(1.0));
    }
    let d = velocity_distance(&Pose::identity(), &Pose::from_translation(Point3::new(0.06, 0.0, 0.0)), 0.02, 0.1).unwrap();
    assert!((d - 3.0).abs() < 1e-12);
}

fn chain(id: u16, poses: &[Pose]) -> ObjectTrack {
    ObjectTrack::new(
        ObjectId(id),
        poses
            .iter()
            .enumerate()
            .map(|(k, p)| Primitive {
                object_id: ObjectId(id),
                keyframe: k,
                pixel_count: 100,
                pose: *p,
            })
            .collect(),
    )
}

#[test]
fn velocities_are_left_gauge_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(93);
    let cfg = ResolvedMotionConfig {
        alpha: 1.1,
        sigma_tau: 0.05,
        sigma_psi: 0.1,
        distance_threshold: 3.0,
    };
    let small = |rng: &mut ChaCha8Rng| Pose::exp(&Se3Tangent::new(rv(rng, 0.2), rv(rng, 0.3)));
    let a: Vec<Pose> = (0..6).map(|_| small(&mut rng)).collect();
    let b: Vec<Pose> = (0..6).map(|_| small(&mut rng)).collect();
    let base = mean_velocity_distance(&chain(0, &a), &chain(1, &b), 6, &cfg).unwrap().unwrap().0;
    for _ in 0..1000 {
        let f = random_pose(&mut rng);
        let g = random_pose(&mut rng);
        let fa: Vec<Pose> = a.iter().map(|p| f * *p).collect();
        let gb: Vec<Pose> = b.iter().map(|p| g * *p).collect();
        let d = mean_velocity_distance(&chain(0, &fa), &chain(1, &gb), 6, &cfg).unwrap().unwrap().0;
        assert!((d - base).abs() < 1e-10, "{d} vs {base}");
    }
}

#[test]
fn extrapolation_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(95);
    let obj = chain(0, &[random_pose(&mut rng), Pose::identity()]);
    let mut parent = chain(1, &[Pose::identity(); 4]);
    parent.is_static = true;
    assert_eq!(extrapolate_pose(&obj, &parent, 1).unwrap(), Pose::identity());
    assert_eq!(extrapolate_pose(&obj, &parent, 3).unwrap(), Pose::identity());
    let moving: Vec<Pose> = (0..4).map(|_| random_pose(&mut rng)).collect();
    let parent = chain(1, &moving);
    let t = extrapolate_pose(&obj, &parent, 3).unwrap();
    // the child's warp from its last observation equals the parent's
    let mut child = obj.clone();
    child.extrapolated.insert(3, t);
    let wc = warp_transform(&child, 1, 3).unwrap();
    let wp = warp_transform(&parent, 1, 3).unwrap();
    assert!((wc.to_matrix() - wp.to_matrix()).amax() < 1e-12);
    let short = chain(2, &moving[2..]);
    assert!(extrapolate_pose(&obj, &short, 3).is_err());
}
