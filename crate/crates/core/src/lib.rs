//! Event-triggered stabilization of leader–follower linear multi-agent
//! systems on directed graphs.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`]: topology, Laplacian, iSCC cells, pinning, grounded matrix `M`
//! * [`control`]: Riccati gain synthesis and trigger-parameter bounds
//! * [`sim`]: fixed-step hybrid simulation under static or dynamic triggers
//! * [`analysis`]: convergence metrics, envelopes and inter-event bounds
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod analysis;
pub mod control;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Network = graph::DirectedNetwork<f64>;
pub type Grounded = graph::GroundedMatrix<f64>;
pub type Design = control::GainDesign<f64>;
pub type Bounds = control::TriggerBounds<f64>;
pub type Scenario = sim::Scenario<f64>;
pub type Trajectory = sim::Trajectory<f64>;
pub type Report = analysis::AnalysisReport<f64>;
