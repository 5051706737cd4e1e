//! Centralized multi-agent ergodic exploration of a 2D domain.
//!
//! A team of agents deposits unit-mass skinny Gaussians while moving; the
//! time average of those deposits is driven towards a Gaussian-mixture
//! reference distribution by visiting the mixture components ("holes") in a
//! fixed cyclic order, with dwell times chosen so that the ergodic function
//! decreases segment by segment.

pub mod control;
pub mod engine;
pub mod ergodic;
pub mod error;
pub mod field;
pub mod io;
pub mod reference;

pub use control::{AgentState, ControlConfig, ControlMode, GradientSign};
pub use engine::{
    integral_of_v, run, MetricsRow, Phase, RunError, RunResult, SegmentRecord, SimConfig,
    Simulation, Snapshot, TrajectoryRow, Transition,
};
pub use ergodic::{DepartureConfig, DepartureRule, ErgodicState, SegmentTimers};
pub use error::{Error, Result};
pub use field::{CellMask, Cov2, GridSpec, Point, ScalarField, Stamp};
pub use reference::{HoleRegion, HoleSet, MixtureComponent, ReferenceMixture, Tour};
