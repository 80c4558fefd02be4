//! Trajectory optimization and closed-loop simulation for robot-assisted
//! data collection.
//!
//! A polygon-shaped robot follows a coarse reference path while it collects
//! data from fixed wireless sensors. Each receding-horizon step solves a
//! sequence of convex subproblems (majorization-minimization over a concave
//! lower bound of the spectral efficiency) that trade off path tracking,
//! collected throughput, predicted edge-model error and obstacle clearance.
//!
//! Modules, bottom-up:
//! - [`geometry`]: H-polytopes, placement, minimum distance with dual certificates.
//! - [`kinematics`]: Ackermann model, Euler integration and its linearization.
//! - [`channel`]: region-aware path loss, spectral efficiency, collected bits.
//! - [`learning`]: power-law classification error model and its curve fit.
//! - [`surrogate`]: the MM lower bound of the spectral efficiency and its validator.
//! - [`planner`]: cost terms, convex subproblem assembly, interior-point solver, MM loop, MPC step.
//! - [`harness`]: scenarios, schemes, closed-loop runs, comparison reports and plots.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kinematics;
pub mod learning;
pub mod par;
pub mod planner;
pub mod surrogate;

pub use error::{Error, Result};
