//! Centralized exploration loop.
//!
//! The team travels to a target hole, dwells there until both the timing
//! bound and the hole-error condition have been met, then moves on to the
//! next hole of a fixed tour. Each step moves every agent, deposits one
//! skinny Gaussian per agent and re-evaluates the phase.

use serde::Serialize;

use crate::control::{
    blend_r, blended_step, gradient_step, nearest_point_step, ControlConfig, ControlMode,
};
use crate::ergodic::{required_dwell, DepartureConfig, ErgodicState, SegmentTimers};
use crate::error::{Error, Result};
use crate::field::{Cov2, GridSpec, Point, ScalarField, Stamp};
use crate::reference::{HoleSet, MixtureComponent, ReferenceMixture, Tour};

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub components: Vec<MixtureComponent>,
    pub kappa: f64,
    pub agents: Vec<Point>,
    pub sigma_r: Cov2,
    pub control: ControlConfig,
    pub departure: DepartureConfig,
    pub max_steps: u64,
    /// Store an error-field snapshot whenever `k` is a multiple of this.
    pub snapshot_every: Option<u64>,
    /// Travel steps allowed per segment before the run is declared stalled.
    /// Defaults to ten domain diagonals at full speed.
    pub stall_budget: Option<u64>,
}

impl SimConfig {
    /// The four-hole, three-agent reference experiment.
    pub fn four_holes(max_steps: u64) -> Self {
        Self {
            grid: GridSpec::default(),
            components: crate::reference::four_hole_components(),
            kappa: crate::reference::DEFAULT_KAPPA,
            agents: crate::reference::four_hole_agents(),
            sigma_r: Cov2::diag(3.0, 3.0).expect("valid covariance"),
            control: ControlConfig::default(),
            departure: DepartureConfig::default(),
            max_steps,
            snapshot_every: None,
            stall_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.control.validate()?;
        self.departure.validate()?;
        if self.agents.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one agent is required".into(),
            ));
        }
        for (j, p) in self.agents.iter().enumerate() {
            if !self.grid.contains(*p) {
                return Err(Error::InvalidConfig(format!(
                    "agent {} starts outside the domain at ({}, {})",
                    j + 1,
                    p.x,
                    p.y
                )));
            }
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be positive (got {})",
                self.kappa
            )));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::InvalidConfig(
                "snapshot_every must be positive".into(),
            ));
        }
        if self.stall_budget == Some(0) {
            return Err(Error::InvalidConfig("stall_budget must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_stall_budget(&self) -> u64 {
        self.stall_budget
            .unwrap_or_else(|| (10.0 * self.grid.diagonal() / self.control.v_max).ceil() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    #[serde(rename = "TRAVEL")]
    Travel,
    #[serde(rename = "DWELL")]
    Dwell,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Travel => "TRAVEL",
            Phase::Dwell => "DWELL",
        }
    }
}

/// One metrics line. `target_hole` is one-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub k: u64,
    #[serde(rename = "V_k")]
    pub v: f64,
    pub phase: Phase,
    pub target_hole: usize,
    pub cycle: u64,
    pub a: f64,
    pub h_mean: f64,
    pub h_prime_mean: f64,
    pub hole_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub k: u64,
    pub agent_id: usize,
    pub x: f64,
    pub y: f64,
}

/// One travel + dwell episode at a single hole. Fields describing later
/// boundaries stay `None` while the segment is still open.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRecord {
    pub segment: usize,
    /// One-based hole number.
    pub target_hole: usize,
    pub cycle: u64,
    pub k_travel_start: u64,
    pub k_dwell_start: Option<u64>,
    pub k_departure: Option<u64>,
    /// Team-average travel steps.
    pub h_mean: Option<f64>,
    /// Team-average dwell steps at departure.
    pub h_prime_mean: Option<f64>,
    /// Hole-region mass of the time-averaged distribution at dwell start.
    pub a: Option<f64>,
    /// Minimum dwell from the timing bound.
    pub h_prime_min: Option<f64>,
    /// Departure threshold of the segment's cycle.
    pub threshold: f64,
    /// Dwell time at which the hole-error condition first held.
    pub h_double_prime: Option<f64>,
    pub v_travel_start: f64,
    pub v_dwell_start: Option<f64>,
    pub v_departure: Option<f64>,
}

impl SegmentRecord {
    pub fn is_complete(&self) -> bool {
        self.k_departure.is_some()
    }
}

/// Error field stored at a scheduled step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: u64,
    pub phi: ScalarField,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: Vec<MetricsRow>,
    pub trajectories: Vec<TrajectoryRow>,
    pub segments: Vec<SegmentRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: ErgodicState,
    pub final_positions: Vec<Point>,
    pub integral_v: f64,
    /// Smallest and largest blend weight seen.
    pub r_range: Option<(f64, f64)>,
}

/// A failed run together with everything recorded up to the failure.
#[derive(Debug)]
pub struct RunError {
    pub error: Error,
    pub partial: Box<RunResult>,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} metric rows)",
            self.error,
            self.partial.metrics.len()
        )
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Phase change produced by a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    Arrived { hole: usize },
    Departed { from: usize, to: usize },
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    mixture: ReferenceMixture,
    holes: HoleSet,
    tour: Tour,
    tour_pos: usize,
    cycle: u64,
    state: ErgodicState,
    positions: Vec<Point>,
    timers: SegmentTimers,
    phase: Phase,
    k: u64,
    v: f64,
    a: f64,
    hole_error: f64,
    segment: SegmentRecord,
    completed: Vec<SegmentRecord>,
    travel_steps: u64,
    stall_budget: u64,
    r_range: Option<(f64, f64)>,
}

impl Simulation {
    /// Initializes the reference, picks the first target and absorbs the
    /// deposits at the initial positions as step 0.
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mixture = ReferenceMixture::build(config.components.clone(), config.grid)?;
        let holes = mixture.hole_masks(config.kappa)?;
        let first = mixture.initial_target(&config.agents)?;
        let tour = mixture.build_tour(first)?;
        let mut state = ErgodicState::empty(config.grid, config.agents.len())?;
        state.deposit_step(&config.agents, &config.sigma_r)?;

        let threshold = config.departure.threshold(0);
        let stall_budget = config.effective_stall_budget();
        let positions = config.agents.clone();
        let mut sim = Self {
            timers: SegmentTimers::new(positions.len()),
            segment: SegmentRecord {
                segment: 0,
                target_hole: first + 1,
                cycle: 0,
                k_travel_start: 0,
                k_dwell_start: None,
                k_departure: None,
                h_mean: None,
                h_prime_mean: None,
                a: None,
                h_prime_min: None,
                threshold,
                h_double_prime: None,
                v_travel_start: 0.0,
                v_dwell_start: None,
                v_departure: None,
            },
            config,
            mixture,
            holes,
            tour,
            tour_pos: 0,
            cycle: 0,
            state,
            positions,
            phase: Phase::Travel,
            k: 0,
            v: 0.0,
            a: 0.0,
            hole_error: 0.0,
            completed: Vec::new(),
            travel_steps: 0,
            stall_budget,
            r_range: None,
        };
        sim.refresh_measures()?;
        sim.segment.v_travel_start = sim.v;
        sim.record_positions();
        sim.update_phase()?;
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn mixture(&self) -> &ReferenceMixture {
        &self.mixture
    }

    pub fn holes(&self) -> &HoleSet {
        &self.holes
    }

    pub fn tour(&self) -> &Tour {
        &self.tour
    }

    pub fn state(&self) -> &ErgodicState {
        &self.state
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn timers(&self) -> &SegmentTimers {
        &self.timers
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Zero-based index of the current target hole.
    pub fn target(&self) -> usize {
        self.tour.hole_at(self.tour_pos)
    }

    pub fn current_v(&self) -> f64 {
        self.v
    }

    /// Segment currently in progress.
    pub fn open_segment(&self) -> &SegmentRecord {
        &self.segment
    }

    pub fn r_range(&self) -> Option<(f64, f64)> {
        self.r_range
    }

    pub fn phi(&self) -> Result<ScalarField> {
        self.state.phi(self.mixture.rho_star())
    }

    pub fn metrics_row(&self) -> MetricsRow {
        MetricsRow {
            k: self.k,
            v: self.v,
            phase: self.phase,
            target_hole: self.target() + 1,
            cycle: self.cycle,
            a: self.a,
            h_mean: self.timers.h_mean(),
            h_prime_mean: self.timers.h_prime_mean(),
            hole_error: self.hole_error,
        }
    }

    pub fn trajectory_rows(&self) -> impl Iterator<Item = TrajectoryRow> + '_ {
        self.positions
            .iter()
            .enumerate()
            .map(|(j, p)| TrajectoryRow {
                k: self.k,
                agent_id: j + 1,
                x: p.x,
                y: p.y,
            })
    }

    fn refresh_measures(&mut self) -> Result<()> {
        let rho_star = self.mixture.rho_star();
        self.v = self.state.ergodic_v(rho_star)?;
        self.a = self.state.rho().integrate(Some(self.holes.omega2()))?;
        self.hole_error = self
            .state
            .hole_error(rho_star, self.holes.get(self.target()))?;
        Ok(())
    }

    fn record_positions(&mut self) {
        let mask = &self.holes.get(self.tour.hole_at(self.tour_pos)).mask;
        let spec = self.config.grid;
        for (j, p) in self.positions.iter().enumerate() {
            let inside = spec.cell_index_of(*p).is_some_and(|i| mask.contains(i));
            self.timers.record(j, inside);
        }
    }

    fn note_r(&mut self, r: f64) {
        self.r_range = Some(match self.r_range {
            None => (r, r),
            Some((lo, hi)) => (lo.min(r), hi.max(r)),
        });
    }

    /// Next position of every agent under the configured control law, all
    /// computed from the same error field.
    fn next_positions(&mut self) -> Result<Vec<Point>> {
        let phi = self.phi()?;
        let control = self.config.control;
        let target_mask = &self.holes.get(self.target()).mask;
        let rho_star = self.mixture.rho_star();
        let spec = self.config.grid;
        let mut next = Vec::with_capacity(self.positions.len());
        let mut rs = Vec::with_capacity(self.positions.len());
        for &mu in &self.positions {
            let g = phi.nearest_negative(mu, Some(target_mask));
            let p = match control.mode {
                ControlMode::NearestOnly => match g {
                    Some(g) => match nearest_point_step(mu, g, control.v_max) {
                        Ok(p) => spec.clamp(p),
                        Err(Error::ZeroDirection) => mu,
                        Err(e) => return Err(e),
                    },
                    None => mu,
                },
                ControlMode::GradientOnly => spec.clamp(gradient_step(
                    mu,
                    &phi,
                    control.v_max,
                    control.gradient_sign,
                )?),
                ControlMode::Blended => {
                    let r = blend_r(self.state.rho().sample(mu)?, rho_star.sample(mu)?)?;
                    rs.push(r);
                    blended_step(mu, g, &phi, r, control.v_max, control.gradient_sign)?
                }
            };
            next.push(p);
        }
        for r in rs {
            self.note_r(r);
        }
        Ok(next)
    }

    /// Advances one time step and returns the phase change it caused, if any.
    pub fn step(&mut self) -> Result<Option<Transition>> {
        let next = self.next_positions()?;
        let stamps = next
            .iter()
            .map(|&p| Stamp::skinny_gaussian(&self.config.grid, p, &self.config.sigma_r))
            .collect::<Result<Vec<_>>>()?;
        self.state.absorb(&stamps)?;
        self.positions = next;
        self.k += 1;
        self.record_positions();
        self.refresh_measures()?;
        self.update_phase()
    }

    /// Applies the arrival and departure rules at the current step.
    pub fn update_phase(&mut self) -> Result<Option<Transition>> {
        let mut transition = None;
        if self.phase == Phase::Travel {
            if self.timers.all_arrived() {
                let h = self.timers.h_mean();
                let bound = if h == 0.0 {
                    0.0
                } else {
                    required_dwell(self.a, h)?
                };
                self.phase = Phase::Dwell;
                self.segment.k_dwell_start = Some(self.k);
                self.segment.h_mean = Some(h);
                self.segment.a = Some(self.a);
                self.segment.h_prime_min = Some(bound);
                self.segment.v_dwell_start = Some(self.v);
                transition = Some(Transition::Arrived {
                    hole: self.target(),
                });
            } else {
                if self.k > self.segment.k_travel_start {
                    self.travel_steps += 1;
                }
                if self.travel_steps > self.stall_budget {
                    return Err(Error::Stall {
                        hole: self.target() + 1,
                        steps: self.travel_steps,
                        k: self.k,
                    });
                }
                return Ok(None);
            }
        }

        let dwell = self.timers.h_prime_mean();
        if self.segment.h_double_prime.is_none()
            && (self
                .config
                .departure
                .is_satisfied(self.hole_error, self.segment.threshold)
                || (self.config.departure.fill_guard && self.hole_filled()?))
        {
            self.segment.h_double_prime = Some(dwell);
        }
        let bound = self.segment.h_prime_min.unwrap_or(0.0);
        if let Some(h2) = self.segment.h_double_prime {
            if dwell > bound.max(h2) {
                let from = self.target();
                self.depart(dwell)?;
                transition = Some(Transition::Departed {
                    from,
                    to: self.target(),
                });
            }
        }
        Ok(transition)
    }

    /// Whether the target hole holds at least its reference mass.
    fn hole_filled(&self) -> Result<bool> {
        let mask = &self.holes.get(self.target()).mask;
        Ok(self.state.rho().integrate(Some(mask))?
            >= self.mixture.rho_star().integrate(Some(mask))?)
    }

    fn depart(&mut self, dwell: f64) -> Result<()> {
        self.segment.k_departure = Some(self.k);
        self.segment.h_prime_mean = Some(dwell);
        self.segment.v_departure = Some(self.v);

        self.tour_pos = (self.tour_pos + 1) % self.tour.len();
        if self.tour_pos == 0 {
            self.cycle += 1;
        }
        let next = self.target();
        let finished = std::mem::replace(
            &mut self.segment,
            SegmentRecord {
                segment: self.completed.len() + 1,
                target_hole: next + 1,
                cycle: self.cycle,
                k_travel_start: self.k,
                k_dwell_start: None,
                k_departure: None,
                h_mean: None,
                h_prime_mean: None,
                a: None,
                h_prime_min: None,
                threshold: self.config.departure.threshold(self.cycle),
                h_double_prime: None,
                v_travel_start: self.v,
                v_dwell_start: None,
                v_departure: None,
            },
        );
        self.completed.push(finished);
        self.timers = SegmentTimers::new(self.positions.len());
        self.phase = Phase::Travel;
        self.travel_steps = 0;
        self.hole_error = self
            .state
            .hole_error(self.mixture.rho_star(), self.holes.get(next))?;
        Ok(())
    }

    /// Completed segments followed by the open one.
    pub fn segments(&self) -> Vec<SegmentRecord> {
        let mut all = self.completed.clone();
        all.push(self.segment.clone());
        all
    }

    pub fn completed_segments(&self) -> &[SegmentRecord] {
        &self.completed
    }
}

/// Runs `config.max_steps` steps, recording every metric row, trajectory
/// point, segment and scheduled snapshot.
pub fn run(config: SimConfig) -> std::result::Result<RunResult, RunError> {
    let snapshot_every = config.snapshot_every;
    let max_steps = config.max_steps;
    let mut sim = match Simulation::new(config.clone()) {
        Ok(sim) => sim,
        Err(error) => {
            let empty = ErgodicState::empty(config.grid, config.agents.len().max(1))
                .expect("agent count is positive");
            return Err(RunError {
                error,
                partial: Box::new(RunResult {
                    metrics: Vec::new(),
                    trajectories: Vec::new(),
                    segments: Vec::new(),
                    snapshots: Vec::new(),
                    final_state: empty,
                    final_positions: config.agents,
                    integral_v: 0.0,
                    r_range: None,
                }),
            });
        }
    };

    let mut metrics = Vec::with_capacity(max_steps as usize + 1);
    let mut trajectories = Vec::with_capacity((max_steps as usize + 1) * sim.positions().len());
    let mut snapshots = Vec::new();
    let mut failure = None;
    loop {
        metrics.push(sim.metrics_row());
        trajectories.extend(sim.trajectory_rows());
        if snapshot_every.is_some_and(|every| sim.k() % every == 0) {
            match sim.phi() {
                Ok(phi) => snapshots.push(Snapshot { k: sim.k(), phi }),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        if sim.k() >= max_steps {
            break;
        }
        if let Err(e) = sim.step() {
            failure = Some(e);
            break;
        }
    }

    let result = RunResult {
        integral_v: integral_of_v(&metrics),
        metrics,
        trajectories,
        segments: sim.segments(),
        snapshots,
        final_positions: sim.positions().to_vec(),
        r_range: sim.r_range(),
        final_state: sim.state,
    };
    match failure {
        None => Ok(result),
        Some(error) => Err(RunError {
            error,
            partial: Box::new(result),
        }),
    }
}

/// Left Riemann sum of the ergodic function with unit time step.
pub fn integral_of_v(metrics: &[MetricsRow]) -> f64 {
    metrics
        .split_last()
        .map_or(0.0, |(_, head)| head.iter().map(|m| m.v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(vs: impl IntoIterator<Item = f64>) -> Vec<MetricsRow> {
        vs.into_iter()
            .enumerate()
            .map(|(k, v)| MetricsRow {
                k: k as u64,
                v,
                phase: Phase::Travel,
                target_hole: 1,
                cycle: 0,
                a: 0.0,
                h_mean: 0.0,
                h_prime_mean: 0.0,
                hole_error: 0.0,
            })
            .collect()
    }

    #[test]
    fn integral_of_constant_series() {
        assert_eq!(integral_of_v(&rows(std::iter::repeat_n(2.0, 101))), 200.0);
    }

    #[test]
    fn integral_of_linear_decay_is_a_left_sum() {
        let series = (0..=100).map(|k| 2.0 - 0.02 * k as f64);
        assert!((integral_of_v(&rows(series)) - 101.0).abs() < 1e-9);
    }

    #[test]
    fn integral_of_single_row_is_zero() {
        assert_eq!(integral_of_v(&rows([1.5])), 0.0);
        assert_eq!(integral_of_v(&[]), 0.0);
    }

    #[test]
    fn default_stall_budget_is_ten_diagonals() {
        assert_eq!(SimConfig::four_holes(1).effective_stall_budget(), 566);
    }
}
