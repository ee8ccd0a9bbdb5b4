//! Scenario-based pole-placement synthesis for object-level control of a
//! planar two-finger hand holding a square object.
//!
//! * [`hand`]: kinematics, grasp map, contact forces and the reduced
//!   object-level dynamics.
//! * [`linearization`]: affine models at operating points and their
//!   validation against the nonlinear field.
//! * [`lmi`]: D-region blocks, the scenario program and gain recovery.
//! * [`scenario`]: uncertainty boxes, sampling, sample-size bounds, the
//!   feasibility, optimality and grid designers and violation estimates.
//! * [`simulator`]: closed-loop RK4 simulation, pole traces, metrics and CSV
//!   export.
//! * [`config`] and [`experiments`]: TOML experiments and the JSON artifacts
//!   written by the `graspsynth` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod hand;
pub mod linearization;
pub mod lmi;
pub mod matrix_rows;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
