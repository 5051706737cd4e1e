//! Command-line front end for `ergodic-core`: scenario files, single runs,
//! sweeps and heatmap export.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, CliResult};
pub use scenario::{parse_scenario, ScenarioFile};
pub use sweep::{run_sweep, ComparisonRow, SweepSpec};
