//! Solver structure: block-diagonality, determinism, classification and
//! recovery on small scripted scenes.

use glue4d_core::dataio::pose_to_rows;
use glue4d_core::lie::Se3Tangent;
use glue4d_core::scene::{ObjectId, SceneData};
use glue4d_core::solver::{solve, solve_object, ObjectProblem, SolverConfig, Termination};
use glue4d_core::synth::{generate, noisy_benchmark, standard_benchmark, ObjectSpec, Shape, SynthConfig, Trajectory};
use glue4d_core::Pose;
use nalgebra::Vector6;

fn poses(scene: &SceneData) -> Vec<Vec<Pose>> {
    scene.objects.iter().map(|o| o.primitives.iter().map(|p| p.pose).collect()).collect()
}

fn box_object(trajectory: Trajectory) -> ObjectSpec {
    ObjectSpec {
        id: 0,
        shape: Shape::Box,
        center: [0.3, -0.2, 3.0],
        extents: [0.8, 0.6, 0.5],
        region: [4, 4, 24, 24],
        pixel_velocity: [1, 0],
        trajectory,
        visible: Vec::new(),
    }
}

fn single_object(trajectory: Trajectory, keyframes: usize) -> SynthConfig {
    SynthConfig {
        seed: 3,
        keyframe_count: keyframes,
        width: 40,
        height: 32,
        noise: 0.0,
        outlier_fraction: 0.0,
        scene_unit: "m".into(),
        objects: vec![box_object(trajectory)],
    }
}

#[test]
fn joint_solve_equals_independent_solves() {
    for cfg in [standard_benchmark(), noisy_benchmark()] {
        let (mut scene, _) = generate(&cfg).unwrap();
        let config = SolverConfig {
            update_norm_tolerance: 1e-14,
            ..SolverConfig::default()
        };
        let report = solve(&mut scene, &config).unwrap();
        let resolved = config.resolve(scene.scene_scale()).unwrap();
        for (obj, r) in scene.objects.iter().zip(&report.objects) {
            if obj.is_static {
                continue;
            }
            let problem = ObjectProblem::build(&scene, obj, resolved.huber_delta, resolved.min_correspondences_per_pair);
            let alone = solve_object(&problem, &resolved);
            assert_eq!(alone.iterations, r.iterations);
            for (p, q) in obj.primitives.iter().zip(&alone.poses) {
                assert!((p.pose.to_matrix() - q.to_matrix()).amax() <= 1e-12);
            }
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let (scene, _) = generate(&noisy_benchmark()).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut s = scene.clone();
            let report = solve(&mut s, &SolverConfig::default()).unwrap();
            (poses(&s), report)
        })
    };
    let (p1, r1) = run(1);
    for threads in [2, 4, 8] {
        let (p, r) = run(threads);
        assert_eq!(p, p1);
        assert_eq!(r, r1);
    }
}

#[test]
fn scripted_trajectory_is_recovered() {
    let script: Vec<[[f64; 4]; 4]> = (0..5)
        .map(|k| {
            let k = k as f64;
            let tau = Se3Tangent::from_vector(&Vector6::new(0.05 * k, -0.02 * k, 0.03 * k * k, 0.1 * k, -0.05 * k, 0.08 * k));
            pose_to_rows(&Pose::exp(&tau))
        })
        .collect();
    let (mut scene, gt) = generate(&single_object(Trajectory::Scripted { poses: script }, 5)).unwrap();
    let report = solve(&mut scene, &SolverConfig::default()).unwrap();
    assert!(report.objects[0].iterations <= 50);
    let g = gt.object(ObjectId(0)).unwrap();
    for p in &scene.objects[0].primitives {
        let truth = g.relative_pose(p.keyframe, 4);
        let d = p.pose.inverse() * truth;
        assert!(d.rotation().angle() < 1e-6);
        assert!(d.translation().norm() < 1e-6);
    }
}

#[test]
fn outliers_are_absorbed_by_the_robust_kernel() {
    let twist = Trajectory::Twist {
        twist: [0.04, 0.01, -0.02, 0.05, 0.12, -0.03],
    };
    let cfg = SynthConfig {
        outlier_fraction: 0.2,
        ..single_object(twist, 5)
    };
    let (mut scene, gt) = generate(&cfg).unwrap();
    solve(&mut scene, &SolverConfig::default()).unwrap();
    let g = gt.object(ObjectId(0)).unwrap();
    let centre = nalgebra::Vector3::from(cfg.objects[0].center);
    for p in &scene.objects[0].primitives {
        let truth = g.relative_pose(p.keyframe, 4);
        let d = p.pose.inverse() * truth;
        assert!(d.rotation().angle().to_degrees() < 1.0);
        let c = g.world_motion[p.keyframe].act(&centre);
        assert!((p.pose.act(&c) - truth.act(&c)).norm() < 0.01 * g.diameter);
    }
}

#[test]
fn classification_straddles_the_threshold() {
    let still = generate(&single_object(Trajectory::Static, 4)).unwrap().0;
    let threshold = SolverConfig::default().resolve(still.scene_scale()).unwrap().static_residual_threshold;
    for (factor, expect_static) in [(0.5, true), (2.0, false), (10.0, false)] {
        let twist = Trajectory::Twist {
            twist: [factor * threshold, 0.0, 0.0, 0.0, 0.0, 0.0],
        };
        let cfg = SynthConfig {
            noise: 1e-5,
            ..single_object(twist, 4)
        };
        let (mut scene, _) = generate(&cfg).unwrap();
        let report = solve(&mut scene, &SolverConfig::default()).unwrap();
        assert_eq!(report.objects[0].static_flag, expect_static, "factor {factor}");
        if expect_static {
            assert_eq!(report.objects[0].termination, Termination::Static);
            assert!(scene.objects[0].primitives.iter().all(|p| p.pose.is_identity()));
        }
    }
}

#[test]
fn occlusion_gap_links_across_the_hidden_frame() {
    let twist = Trajectory::Twist {
        twist: [0.05, 0.0, 0.0, 0.0, 0.1, 0.0],
    };
    let mut cfg = single_object(twist, 5);
    cfg.objects[0].visible = vec![[0, 2], [4, 4]];
    let (mut scene, gt) = generate(&cfg).unwrap();
    let keyframes: Vec<usize> = scene.objects[0].observed_keyframes().collect();
    assert_eq!(keyframes, vec![0, 1, 2, 4]);
    let report = solve(&mut scene, &SolverConfig::default()).unwrap();
    assert_eq!(report.objects[0].termination, Termination::Converged);
    let g = gt.object(ObjectId(0)).unwrap();
    for p in &scene.objects[0].primitives {
        assert!((p.pose.to_matrix() - g.relative_pose(p.keyframe, 4).to_matrix()).amax() < 1e-6);
    }
}

#[test]
fn iteration_cap_is_respected() {
    let (mut scene, _) = generate(&noisy_benchmark()).unwrap();
    let report = solve(
        &mut scene,
        &SolverConfig {
            max_iterations: 3,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    for r in report.objects.iter().filter(|r| !r.static_flag) {
        assert!(r.iterations <= 3);
        assert_eq!(r.termination, Termination::MaxIterations);
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }
}
