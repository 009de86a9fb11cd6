//! Deterministic flight dynamics, control, and mission logic for an
//! eight-rotor aerial vehicle that picks up, carries, and stacks poles with a
//! passive wedge gripper.
//!
//! Everything numeric is generic over the scalar (`f32` or `f64`) through the
//! [`num::Real`] bound; the aliases at the crate root fix `f64`, which is
//! what the simulator binary uses.

pub mod allocation;
pub mod control;
pub mod dynamics;
pub mod gripper;
pub mod metrics;
pub mod mission;
pub mod num;
pub mod report;
pub mod runlog;
pub mod scenario;
pub mod sim;
pub mod so3;
pub mod trajectory;
pub mod vehicle;
pub mod voltage;

/// World or body vector, f64.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3 x 3 matrix, f64.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Validated rotation matrix, f64.
pub type Rotation = so3::RotationMatrix<f64>;
/// Body wrench, f64.
pub type Wrench = dynamics::Wrench<f64>;
/// Rigid-body state, f64.
pub type RigidState = dynamics::RigidState<f64>;
/// Vehicle parameter set, f64.
pub type VehicleParams = vehicle::VehicleParams<f64>;
/// Controller setpoint, f64.
pub type Setpoint = control::Setpoint<f64>;
/// Controller gains, f64.
pub type ControlGains = control::ControlGains<f64>;
