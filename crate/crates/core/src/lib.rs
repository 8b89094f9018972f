//! Quadrotor flight-dynamics simulation and low-level motor-thrust policy learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: generalized × quadrotor model, presets and domain randomization
//! - [`dynamics`]: Newton–Euler rigid-body stepping with SVD re-orthogonalization
//! - [`actuation`]: normalized thrust interface, motor lag and Ornstein–Uhlenbeck motor noise
//! - [`sensing`]: noisy 18-dimensional observations
//! - [`env`]: episodic environment, cost, goals and flight logs
//! - [`policy`]: MLP policy, snapshots and C export
//! - [`trainer`]: PPO with GAE
//! - [`eval`]: hover / tracking / recovery metrics and experiment batteries
//! - [`config`]: TOML run configuration

pub mod actuation;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod eval;
pub mod mlp;
pub mod params;
pub mod policy;
pub mod rotation;
pub mod sensing;
pub mod trainer;

pub use error::{Error, Result};

/// Gravitational acceleration magnitude in m/s².
pub const GRAVITY: f64 = 9.81;

/// Dynamics integration step (200 Hz).
pub const DT_DYNAMICS: f64 = 0.005;

/// Policy tick (100 Hz).
pub const DT_POLICY: f64 = 0.01;

/// Observation dimension fed to the policy.
pub const OBS_DIM: usize = 18;

/// Number of motors / action dimension.
pub const ACT_DIM: usize = 4;
