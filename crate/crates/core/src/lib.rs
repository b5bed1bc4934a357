//! Resilient time-varying formation tracking for networks of double-integrator
//! agents whose global positioning signals may be under deception attacks.
//!
//! The crate covers the whole closed loop:
//!
//! * [`graph`]: the undirected sensory topology and its weighted Laplacian.
//! * [`formation`]: C² desired trajectories, per-agent offsets and their derivatives.
//! * [`dynamics`]: fixed-step integration of `ẍ = u` and sensor synthesis.
//! * [`control`]: the formation tracking law and the β-driven gain tuning.
//! * [`attacks`]: additive, hybrid and unstable deception attacks on positioning.
//! * [`estimation`]: the information-form estimator with relative-measurement
//!   fallback and KL-divergence gating.
//! * [`metrics`]: performance index, restoration and modified restoration.
//! * [`scenario`]: config schema, the single-rate run loop, logs and sweeps.

pub mod attacks;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod formation;
pub mod graph;
pub mod metrics;
pub mod par;
pub mod scenario;

pub use error::{Error, Result};

/// Column vector of runtime dimension (2 or 3 in practice).
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix of runtime shape.
pub type Matrix = nalgebra::DMatrix<f64>;
