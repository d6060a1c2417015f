//! Deterministic record-and-replay engine for dual demonstrations: continuous
//! end-effector trajectories replayed in lockstep with discrete lab-jig
//! state machines.
//!
//! A demonstration is a dense stream of synchronized samples (pose, gripper
//! width, jig states). Replay walks that stream one target waypoint at a
//! time: a proportional law drives the simulated plant toward the target
//! pose, a state-mismatch law issues jig commands, and the target index only
//! advances once both the continuous channels and the discrete states match.
//! The metrics layer scores the executed trajectory against the
//! demonstration (Hausdorff distances per channel, DTW time mapping, jig
//! synchronization distances, duration statistics).
//!
//! Numeric kernels in [`math`] and [`metrics`] are generic over the scalar
//! type; the engine itself runs on the `f64` aliases below.

pub mod format;
pub mod jig;
pub mod math;
pub mod model;

/// Scalar type used by the engine.
pub type Scalar = f64;
/// 3-vector at the engine scalar.
pub type Vec3 = math::Vector3<Scalar>;
/// Unit quaternion at the engine scalar.
pub type Quat = math::Quaternion<Scalar>;

pub use model::{
    Demonstration, DemoPoint, GripperState, JigEvent, JigStateVector, Pose, RelocationEvent,
    Trajectory,
};
