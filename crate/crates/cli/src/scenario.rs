//! TOML scenario files.
//!
//! ```toml
//! [grid]
//! Lx = 400.0
//! Ly = 400.0
//! nx = 200
//! ny = 200
//!
//! [mixture]
//! kappa = 3.0
//! [[mixture.components]]
//! weight = 1.0
//! mean = [200.0, 200.0]
//! cov = [[20.0, 0.0], [0.0, 20.0]]
//!
//! [agents]
//! positions = [[100.0, 100.0]]
//! sigma_R = [[3.0, 0.0], [0.0, 3.0]]
//!
//! [run]
//! max_steps = 1000
//! ```
//!
//! `grid`, `control`, `departure`, `kappa`, `sigma_R` and the optional run
//! keys fall back to their defaults when omitted.

use std::path::{Path, PathBuf};

use ergodic_core::reference::DEFAULT_KAPPA;
use ergodic_core::{
    ControlConfig, ControlMode, Cov2, DepartureConfig, DepartureRule, GradientSign, GridSpec,
    MixtureComponent, Point, ReferenceMixture, SimConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub grid: GridSection,
    pub mixture: MixtureSection,
    pub agents: AgentsSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub departure: DepartureSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            lx: g.lx,
            ly: g.ly,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub components: Vec<ComponentEntry>,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentEntry {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub positions: Vec<[f64; 2]>,
    #[serde(rename = "sigma_R", default = "default_sigma_r")]
    pub sigma_r: [[f64; 2]; 2],
}

fn default_sigma_r() -> [[f64; 2]; 2] {
    [[3.0, 0.0], [0.0, 3.0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub v_max: f64,
    pub mode: ControlMode,
    pub gradient_sign: GradientSign,
}

impl Default for ControlSection {
    fn default() -> Self {
        let c = ControlConfig::default();
        Self {
            v_max: c.v_max,
            mode: c.mode,
            gradient_sign: c.gradient_sign,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DepartureSection {
    pub beta: f64,
    pub gamma: f64,
    pub rule: DepartureRule,
    pub fill_guard: bool,
}

impl Default for DepartureSection {
    fn default() -> Self {
        let d = DepartureConfig::default();
        Self {
            beta: d.beta,
            gamma: d.gamma,
            rule: d.rule,
            fill_guard: d.fill_guard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub max_steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_budget: Option<u64>,
}

fn cov(m: [[f64; 2]; 2], what: &str) -> CliResult<Cov2> {
    Cov2::from_matrix(m).map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Converts to a fully validated simulation config.
    pub fn to_config(&self) -> CliResult<SimConfig> {
        let grid = GridSpec::new(self.grid.lx, self.grid.ly, self.grid.nx, self.grid.ny)?;
        let components = self
            .mixture
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(MixtureComponent::new(
                    c.weight,
                    c.mean.into(),
                    cov(c.cov, &format!("mixture component {}", i + 1))?,
                ))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let config = SimConfig {
            grid,
            components,
            kappa: self.mixture.kappa,
            agents: self
                .agents
                .positions
                .iter()
                .map(|&p| Point::from(p))
                .collect(),
            sigma_r: cov(self.agents.sigma_r, "sigma_R")?,
            control: ControlConfig {
                v_max: self.control.v_max,
                mode: self.control.mode,
                gradient_sign: self.control.gradient_sign,
            },
            departure: DepartureConfig {
                beta: self.departure.beta,
                gamma: self.departure.gamma,
                rule: self.departure.rule,
                fill_guard: self.departure.fill_guard,
            },
            max_steps: self.run.max_steps,
            snapshot_every: self.run.snapshot_every,
            stall_budget: self.run.stall_budget,
        };
        config.validate()?;
        ReferenceMixture::build(config.components.clone(), grid)?;
        Ok(config)
    }

    pub fn from_config(config: &SimConfig) -> Self {
        let m = |c: Cov2| c.to_matrix();
        Self {
            grid: GridSection {
                lx: config.grid.lx,
                ly: config.grid.ly,
                nx: config.grid.nx,
                ny: config.grid.ny,
            },
            mixture: MixtureSection {
                kappa: config.kappa,
                components: config
                    .components
                    .iter()
                    .map(|c| ComponentEntry {
                        weight: c.weight,
                        mean: [c.mean.x, c.mean.y],
                        cov: m(c.cov),
                    })
                    .collect(),
            },
            agents: AgentsSection {
                positions: config.agents.iter().map(|p| [p.x, p.y]).collect(),
                sigma_r: m(config.sigma_r),
            },
            control: ControlSection {
                v_max: config.control.v_max,
                mode: config.control.mode,
                gradient_sign: config.control.gradient_sign,
            },
            departure: DepartureSection {
                beta: config.departure.beta,
                gamma: config.departure.gamma,
                rule: config.departure.rule,
                fill_guard: config.departure.fill_guard,
            },
            run: RunSection {
                max_steps: config.max_steps,
                snapshot_every: config.snapshot_every,
                output_dir: None,
                stall_budget: config.stall_budget,
            },
        }
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> CliResult<SimConfig> {
    ScenarioFile::load(path)?.to_config()
}
