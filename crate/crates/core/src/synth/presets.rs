use super::{ObjectSpec, Shape, SynthConfig, Trajectory};

/// Object hidden after keyframe 6 of the canonical scene.
pub const STANDARD_OCCLUDED: u16 = 4;

fn object(id: u16, shape: Shape, center: [f64; 3], extents: [f64; 3], region: [usize; 4]) -> ObjectSpec {
    ObjectSpec {
        id,
        shape,
        center,
        extents,
        region,
        pixel_velocity: [0, 0],
        trajectory: Trajectory::Static,
        visible: Vec::new(),
    }
}

fn moving(mut o: ObjectSpec, velocity: [i64; 2], trajectory: Trajectory) -> ObjectSpec {
    o.pixel_velocity = velocity;
    o.trajectory = trajectory;
    o
}

fn twist(t: [f64; 6]) -> Trajectory {
    Trajectory::Twist { twist: t }
}

/// Canonical 128×128, 10-keyframe scene: a static box (0), a translating
/// sphere shell (1), a box spinning about its centre (2), a planar patch on
/// a screw motion (3), and a small box (4) riding on box 2 that vanishes
/// after keyframe 6.
pub fn standard_benchmark() -> SynthConfig {
    // screw axis, roughly normalized
    let axis = [0.3, 0.2, 0.93];
    SynthConfig {
        seed: 20_240_601,
        keyframe_count: 10,
        width: 128,
        height: 128,
        noise: 0.0,
        outlier_fraction: 0.0,
        scene_unit: "m".into(),
        objects: vec![
            object(0, Shape::Box, [-2.0, -2.0, 5.0], [1.5, 1.5, 0.5], [2, 2, 36, 36]),
            moving(
                object(1, Shape::SphereShell, [2.0, -1.0, 4.5], [1.0, 1.0, 1.0], [48, 4, 30, 30]),
                [2, 0],
                twist([0.06, 0.03, -0.02, 0.0, 0.0, 0.0]),
            ),
            moving(
                object(2, Shape::Box, [0.0, 1.0, 4.0], [0.6, 0.6, 0.6], [8, 60, 36, 36]),
                [1, 1],
                twist([0.0, 0.0, 0.0, 0.05, 0.1, 0.04]),
            ),
            moving(
                object(3, Shape::PlanarPatch, [-1.5, 1.5, 4.5], [1.0, 0.8, 0.0], [70, 50, 40, 40]),
                [1, -1],
                twist(std::array::from_fn(|i| if i < 3 { 0.05 * axis[i] } else { 0.2 * axis[i - 3] })),
            ),
            ObjectSpec {
                visible: vec![[0, 6]],
                ..moving(
                    object(STANDARD_OCCLUDED, Shape::Box, [0.41, 1.0, 4.0], [0.2, 0.2, 0.2], [44, 60, 12, 12]),
                    [1, 1],
                    Trajectory::Follow { object: 2 },
                )
            },
        ],
    }
}

/// The canonical scene with point noise of 1% of each diameter and 20% of
/// flows replaced by outliers.
pub fn noisy_benchmark() -> SynthConfig {
    SynthConfig {
        noise: 0.01,
        outlier_fraction: 0.2,
        ..standard_benchmark()
    }
}

/// Drawer-like chain: an item (0) rests on a body (1) that is attached to
/// a front panel (2); item and body disappear after keyframe 4 while the
/// front stays visible. The item does not touch the front, so its parent is
/// only reachable through the body. Object 3 is static background.
pub fn three_body_chain() -> SynthConfig {
    let front = 2;
    let follow = Trajectory::Follow { object: front };
    SynthConfig {
        seed: 7,
        keyframe_count: 8,
        width: 96,
        height: 96,
        noise: 0.0,
        outlier_fraction: 0.0,
        scene_unit: "m".into(),
        objects: vec![
            ObjectSpec {
                visible: vec![[0, 4]],
                ..moving(object(0, Shape::Box, [0.0, 0.0, 4.41], [0.2, 0.2, 0.2], [40, 10, 10, 10]), [1, 0], follow.clone())
            },
            ObjectSpec {
                visible: vec![[0, 4]],
                ..moving(object(1, Shape::Box, [0.0, 0.0, 4.0], [1.0, 0.6, 0.6], [10, 10, 30, 30]), [1, 0], follow)
            },
            moving(
                object(front, Shape::Box, [0.56, 0.0, 4.0], [0.1, 0.6, 0.6], [10, 40, 30, 12]),
                [1, 0],
                twist([0.08, 0.0, 0.0, 0.0, 0.0, 0.02]),
            ),
            object(3, Shape::Box, [-3.0, 2.0, 6.0], [1.0, 1.0, 1.0], [60, 50, 30, 30]),
        ],
    }
}

/// 256×256, 10 keyframes, five moving objects, for timing the backend.
pub fn performance_scene() -> SynthConfig {
    SynthConfig {
        seed: 99,
        keyframe_count: 10,
        width: 256,
        height: 256,
        noise: 0.0,
        outlier_fraction: 0.0,
        scene_unit: "m".into(),
        objects: vec![
            moving(
                object(0, Shape::Box, [-2.0, -2.0, 6.0], [1.2, 0.8, 1.0], [4, 4, 70, 70]),
                [1, 0],
                twist([0.04, 0.0, 0.01, 0.0, 0.05, 0.0]),
            ),
            moving(
                object(1, Shape::SphereShell, [2.0, -2.0, 6.0], [1.0, 1.0, 1.0], [130, 4, 70, 70]),
                [1, 1],
                twist([0.0, 0.05, 0.0, 0.03, 0.0, 0.06]),
            ),
            moving(
                object(2, Shape::PlanarPatch, [-2.0, 2.0, 6.0], [1.2, 1.0, 0.0], [4, 120, 70, 70]),
                [0, 1],
                twist([0.0, 0.0, 0.05, 0.1, 0.02, 0.0]),
            ),
            moving(
                object(3, Shape::Box, [2.0, 2.0, 6.0], [0.7, 0.7, 0.7], [130, 120, 70, 70]),
                [1, -1],
                twist([0.02, 0.02, 0.02, 0.05, 0.05, 0.05]),
            ),
            moving(
                object(4, Shape::SphereShell, [0.0, 3.5, 7.0], [1.4, 0.9, 1.1], [80, 190, 64, 64]),
                [1, 0],
                twist([-0.05, 0.0, 0.0, 0.0, 0.0, 0.08]),
            ),
        ],
    }
}
