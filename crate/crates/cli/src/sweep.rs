//! Parameter sweeps over agent count or controller mode.
//!
//! ```toml
//! scenario = "four-holes.toml"
//! output_dir = "sweep-agents"
//!
//! [axis]
//! agent_count = [1, 3, 5]
//! positions = [[180.0, 175.0], [200.0, 300.0], [300.0, 200.0], [100.0, 220.0], [240.0, 60.0]]
//! ```
//!
//! Each axis value runs in `<output_dir>/<label>`; `comparison.csv` lists
//! one row per value in axis order.

use std::path::{Path, PathBuf};

use ergodic_core::{run, ControlMode, Point, SimConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::write_artifacts;
use crate::scenario::parse_scenario;

pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    /// Base scenario, relative to the sweep file.
    pub scenario: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    pub axis: AxisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_count: Option<Vec<usize>>,
    /// Starting positions drawn in order for agent-count runs. Defaults to
    /// the base scenario's agents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Vec<ControlMode>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Axis {
    AgentCount {
        counts: Vec<usize>,
        pool: Vec<Point>,
    },
    Mode(Vec<ControlMode>),
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub axis: Axis,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub final_v: Option<f64>,
    pub integral_v: Option<f64>,
    pub error: Option<String>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: SweepFile = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let root = path.parent().unwrap_or(Path::new("."));
        let mut base = parse_scenario(&root.join(&file.scenario))?;
        if let Some(steps) = file.max_steps {
            base.max_steps = steps;
        }
        let output_dir = file.output_dir.unwrap_or_else(|| PathBuf::from("sweep"));
        let axis = match (file.axis.agent_count, file.axis.mode) {
            (Some(counts), None) => {
                let pool = match file.axis.positions {
                    Some(p) => p.into_iter().map(Point::from).collect(),
                    None => base.agents.clone(),
                };
                Axis::AgentCount { counts, pool }
            }
            (None, Some(modes)) => {
                if file.axis.positions.is_some() {
                    return Err(CliError::Validation(
                        "axis.positions only applies to agent_count".into(),
                    ));
                }
                Axis::Mode(modes)
            }
            _ => {
                return Err(CliError::Validation(
                    "axis needs exactly one of agent_count or mode".into(),
                ))
            }
        };
        let spec = Self {
            base,
            axis,
            output_dir,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> CliResult<()> {
        match &self.axis {
            Axis::AgentCount { counts, pool } => {
                if counts.is_empty() {
                    return Err(CliError::Validation(
                        "sweep axis agent_count is empty".into(),
                    ));
                }
                if let Some(&n) = counts.iter().find(|&&n| n == 0 || n > pool.len()) {
                    return Err(CliError::Validation(format!(
                        "agent count {n} needs between 1 and {} starting positions",
                        pool.len()
                    )));
                }
            }
            Axis::Mode(modes) if modes.is_empty() => {
                return Err(CliError::Validation("sweep axis mode is empty".into()));
            }
            Axis::Mode(_) => {}
        }
        for (_, config) in self.members() {
            config.validate()?;
        }
        Ok(())
    }

    /// Label and config of every run, in axis order.
    pub fn members(&self) -> Vec<(String, SimConfig)> {
        match &self.axis {
            Axis::AgentCount { counts, pool } => counts
                .iter()
                .map(|&n| {
                    let mut c = self.base.clone();
                    c.agents = pool[..n].to_vec();
                    (format!("agents-{n}"), c)
                })
                .collect(),
            Axis::Mode(modes) => modes
                .iter()
                .map(|&m| {
                    let mut c = self.base.clone();
                    c.control.mode = m;
                    (format!("mode-{}", m.label()), c)
                })
                .collect(),
        }
    }
}

/// Runs every member in parallel and writes per-run artifacts plus the
/// comparison table. Failing members are reported in their row.
pub fn run_sweep(spec: &SweepSpec, out: &Path) -> CliResult<Vec<ComparisonRow>> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let rows: Vec<CliResult<ComparisonRow>> = spec
        .members()
        .into_par_iter()
        .map(|(label, config)| {
            let dir = out.join(&label);
            match run(config) {
                Ok(result) => {
                    write_artifacts(&dir, &result)?;
                    Ok(ComparisonRow {
                        label,
                        final_v: result.metrics.last().map(|m| m.v),
                        integral_v: Some(result.integral_v),
                        error: None,
                    })
                }
                Err(e) => {
                    write_artifacts(&dir, &e.partial)?;
                    Ok(ComparisonRow {
                        label,
                        final_v: e.partial.metrics.last().map(|m| m.v),
                        integral_v: None,
                        error: Some(e.error.to_string()),
                    })
                }
            }
        })
        .collect();
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;

    let path = out.join(COMPARISON_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::io(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}
