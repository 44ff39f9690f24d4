//! Bimanual teleoperation engine.
//!
//! Hand poses are retargeted into per-arm end-effector commands, orientation
//! is refined with joystick nudges and slerp recovery, and camera panels are
//! anchored next to each gripper in the operator's view.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod geometry;
pub mod perception;
pub mod retarget;
pub mod runtime;
pub mod session;
pub mod sim;
pub mod transport;
pub mod workspace;

pub use config::{ConfigError, EngineConfig};
pub use engine::{Engine, TickOutput};
