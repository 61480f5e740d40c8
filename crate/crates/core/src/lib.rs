//! Dense 4D reconstruction backend: rigid primitives cut from per-frame
//! pointmaps are glued into per-object trajectories.

// `!(x > 0)` is the NaN-rejecting form used by every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod error;
pub mod eval;
pub mod lie;
pub mod motion;
pub mod scalar;
pub mod scene;
pub mod solver;
pub mod remap;
pub mod synth;

pub use error::Error;

/// World-space point or vector.
pub type Point3 = nalgebra::Vector3<f64>;
pub type Rotation = lie::So3<f64>;
pub type Pose = lie::Se3<f64>;
pub type Twist = lie::Se3Tangent<f64>;
pub type SimTransform = lie::Sim3<f64>;

pub type PoseF32 = lie::Se3<f32>;
pub type TwistF32 = lie::Se3Tangent<f32>;
pub type SimTransformF32 = lie::Sim3<f32>;
