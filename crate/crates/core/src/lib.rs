//! Control stack and deterministic desk-scale simulator for a garbage
//! detection and collection robot.
//!
//! The crate is split along the robot's pipeline:
//!
//! - [`geometry`]: pinhole camera model, pixel centering errors and
//!   ground-plane ranging.
//! - [`controller`]: discrete PID on pixel error and the mapping to base
//!   motion commands.
//! - [`kinematics`]: forward/inverse kinematics of the 4-DOF parallelogram
//!   arm, servo quantization, static torque and the lead-screw gripper.
//! - [`protocol`]: the planner/actuator line protocol, framing and a
//!   loopback transport.
//! - [`mission`]: the search/align/range/approach/pick state machine.
//! - [`sim`]: the kinematic world simulator that closes the loop.
//! - [`scenario`] and [`report`]: configuration and output formats used by
//!   the `agdc` command line tool.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod geometry;
pub mod kinematics;
pub mod mission;
pub mod protocol;
pub mod report;
pub mod scenario;
pub mod sim;

pub use scenario::ScenarioConfig;
