//! Analytical delay/reliability model for VR image delivery over a terahertz
//! small-cell downlink, with an independent discrete-event simulator used to
//! validate the analytics.
//!
//! The pipeline: a THz link budget with molecular absorption ([`channel`]),
//! a Matérn hard-core deployment with a Gaussian interference approximation
//! ([`geometry`]), a two-queue tandem delay model solved on a uniform time
//! grid ([`delay`], [`numerics`]), and a seeded event-driven simulator
//! ([`simulator`]). [`validation`] runs the whole acceptance suite;
//! [`config`] holds the experiment presets.

pub mod channel;
pub mod config;
pub mod delay;
pub mod geometry;
pub mod numerics;
pub mod report;
pub mod simulator;
pub mod sweep;
pub mod validation;

use thiserror::Error;

/// Crate-wide error type. Constructors validate domain preconditions and
/// return these rather than panicking, so sweep drivers can skip or flag
/// individual rows.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its domain (non-positive rate, distance, ...).
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Requested hard-core intensity is not realizable by dependent thinning.
    #[error("infeasible hard-core deployment: eta*pi*r^2 = {packing:.6} must be < 1")]
    InfeasibleHardCore { packing: f64 },

    /// Queue utilization at or above one; the waiting-time series diverges.
    #[error("unstable queue: utilization rho = {rho:.6} >= 1")]
    UnstableQueue { rho: f64 },

    /// Two tabulated distributions were combined across different grids.
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },

    /// The time grid does not capture enough probability mass.
    #[error("grid coverage: mass {mass:.12} on grid is below required {required:.12}")]
    GridCoverage { mass: f64, required: f64 },

    /// A simulated queue backlog exceeded its divergence cap.
    #[error("{queue} backlog {backlog} exceeded cap {cap}; queue is diverging")]
    Divergence {
        queue: &'static str,
        backlog: usize,
        cap: usize,
    },

    /// Configuration input could not be interpreted.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
