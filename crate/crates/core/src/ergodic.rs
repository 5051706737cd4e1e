//! Time-averaged agent distribution and the timing quantities built on it.
//!
//! The state after deposit number `k` (counting from zero) holds
//!
//! ```text
//! rho_k = 1/(k+1) * 1/N * sum_{i=0..k} sum_j f_i^j
//! ```
//!
//! and is advanced with the equivalent recursion
//! `rho_{k+1} = ((k+1) rho_k + 1/N sum_j f_{k+1}^j) / (k+2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Cov2, Point, ScalarField, Stamp};
use crate::reference::HoleRegion;

/// Tolerance on the unit-mass invariant of the time-averaged distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Time-averaged distribution of agent deposits.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicState {
    rho: ScalarField,
    /// Number of deposit rounds absorbed so far.
    rounds: u64,
    agent_count: usize,
}

impl ErgodicState {
    /// State before any deposit round; `rho` is identically zero.
    pub fn empty(spec: crate::GridSpec, agent_count: usize) -> Result<Self> {
        if agent_count == 0 {
            return Err(Error::InvalidConfig(
                "at least one agent is required".into(),
            ));
        }
        Ok(Self {
            rho: ScalarField::zeros(spec),
            rounds: 0,
            agent_count,
        })
    }

    /// Wraps an externally prepared distribution as the state at step `k`.
    pub fn from_distribution(rho: ScalarField, k: u64, agent_count: usize) -> Result<Self> {
        if agent_count == 0 {
            return Err(Error::InvalidConfig(
                "at least one agent is required".into(),
            ));
        }
        if rho.values().iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::InvalidDensity(
                "time-averaged distribution must be finite and non-negative".into(),
            ));
        }
        let mass = rho.integrate(None)?;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "time-averaged distribution has mass {mass}, expected 1"
            )));
        }
        Ok(Self {
            rho,
            rounds: k + 1,
            agent_count,
        })
    }

    /// Index of the latest deposit round, `None` before the first one.
    pub fn k(&self) -> Option<u64> {
        self.rounds.checked_sub(1)
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn spec(&self) -> &crate::GridSpec {
        self.rho.spec()
    }

    /// Absorbs one round of skinny-Gaussian deposits at `positions`.
    pub fn deposit_step(&mut self, positions: &[Point], sigma_r: &Cov2) -> Result<()> {
        let stamps = positions
            .iter()
            .map(|&p| Stamp::skinny_gaussian(self.spec(), p, sigma_r))
            .collect::<Result<Vec<_>>>()?;
        self.absorb(&stamps)
    }

    /// Absorbs one round of precomputed unit-mass deposits, one per agent.
    ///
    /// Deposits are accumulated in a canonical (lexicographic) order, so the
    /// result does not depend on agent labelling.
    pub fn absorb(&mut self, deposits: &[Stamp]) -> Result<()> {
        if deposits.len() != self.agent_count {
            return Err(Error::DimensionMismatch {
                expected: format!("{} deposits", self.agent_count),
                actual: format!("{} deposits", deposits.len()),
            });
        }
        let mut ordered: Vec<&Stamp> = deposits.iter().collect();
        ordered.sort_by(|a, b| stamp_key(a).cmp(stamp_key(b)));

        let n = self.rounds as f64;
        let keep = n / (n + 1.0);
        let weight = 1.0 / (self.agent_count as f64 * (n + 1.0));
        if self.rounds > 0 {
            for v in self.rho.values_mut() {
                *v *= keep;
            }
        }
        for stamp in ordered {
            stamp.add_to(&mut self.rho, weight);
        }
        self.rounds += 1;
        Ok(())
    }

    /// Error field `rho_k - rho_star`.
    pub fn phi(&self, rho_star: &ScalarField) -> Result<ScalarField> {
        self.rho.difference(rho_star)
    }

    /// Ergodic function: integral of `|rho_k - rho_star|`.
    pub fn ergodic_v(&self, rho_star: &ScalarField) -> Result<f64> {
        self.rho.l1_distance(rho_star, None)
    }

    /// Integral of `|phi_k|` restricted to `hole`.
    pub fn hole_error(&self, rho_star: &ScalarField, hole: &HoleRegion) -> Result<f64> {
        self.rho.l1_distance(rho_star, Some(&hole.mask))
    }

    /// Change of the distribution after absorbing `future` (one inner vector of
    /// per-agent deposits per step), via the closed-form increment
    /// `(1/N sum f - h rho_k) / (k + h + 1)`.
    pub fn delta_rho(&self, future: &[Vec<Stamp>]) -> Result<ScalarField> {
        let h = future.len();
        if h == 0 {
            return Err(Error::InvalidConfig(
                "delta_rho needs at least one step".into(),
            ));
        }
        let k = self
            .k()
            .ok_or_else(|| Error::InvalidConfig("delta_rho needs a state with k >= 0".into()))?;
        let spec = *self.spec();
        let mut sum = ScalarField::zeros(spec);
        let inv_n = 1.0 / self.agent_count as f64;
        for round in future {
            if round.len() != self.agent_count {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} deposits", self.agent_count),
                    actual: format!("{} deposits", round.len()),
                });
            }
            for stamp in round {
                stamp.add_to(&mut sum, inv_n);
            }
        }
        sum.add_scaled(&self.rho, -(h as f64))?;
        Ok(sum.scaled(1.0 / (k as f64 + h as f64 + 1.0)))
    }
}

fn stamp_key(s: &Stamp) -> impl Iterator<Item = (usize, u64)> + '_ {
    s.entries().iter().map(|&(i, v)| (i, v.to_bits()))
}

/// Per-agent travel and dwell counters for one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentTimers {
    travel: Vec<u64>,
    dwell: Vec<u64>,
    arrived: Vec<bool>,
}

impl SegmentTimers {
    pub fn new(agent_count: usize) -> Self {
        Self {
            travel: vec![0; agent_count],
            dwell: vec![0; agent_count],
            arrived: vec![false; agent_count],
        }
    }

    /// Updates agent `j` after its move: travel time accumulates until the
    /// agent first enters the target hole, dwell time from the step after.
    pub fn record(&mut self, j: usize, inside_target: bool) {
        if self.arrived[j] {
            self.dwell[j] += 1;
        } else if inside_target {
            self.arrived[j] = true;
        } else {
            self.travel[j] += 1;
        }
    }

    pub fn travel(&self) -> &[u64] {
        &self.travel
    }

    pub fn dwell(&self) -> &[u64] {
        &self.dwell
    }

    pub fn has_arrived(&self, j: usize) -> bool {
        self.arrived[j]
    }

    pub fn all_arrived(&self) -> bool {
        self.arrived.iter().all(|&a| a)
    }

    /// Team-average travel time `h`.
    pub fn h_mean(&self) -> f64 {
        mean(&self.travel)
    }

    /// Team-average dwell time `h'`.
    pub fn h_prime_mean(&self) -> f64 {
        mean(&self.dwell)
    }
}

fn mean(v: &[u64]) -> f64 {
    v.iter().sum::<u64>() as f64 / v.len() as f64
}

/// Minimum dwell `a / (1 - a) * h` needed for the dwell-phase drop of the
/// ergodic function to outweigh the travel-phase rise. The actual dwell must
/// strictly exceed it.
pub fn required_dwell(a: f64, h: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::DegenerateMass(a));
    }
    if h < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "travel time must be non-negative (got {h})"
        )));
    }
    Ok(a / (1.0 - a) * h)
}

/// Predicted rise `2 h a / (k + h + 1)` of the ergodic function over `h`
/// travel steps, under the ideal sign structure.
pub fn predict_travel_increment(k: u64, h: f64, a: f64) -> f64 {
    2.0 * h * a / (k as f64 + h + 1.0)
}

/// Predicted hole-region mass `(k + 1) a / (k + h + 1)` after `h` steps with
/// no deposits inside the holes.
pub fn predict_omega2_mass(k: u64, h: f64, a: f64) -> f64 {
    (k as f64 + 1.0) * a / (k as f64 + h + 1.0)
}

/// Sense of the departure inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepartureRule {
    /// Satisfied once the hole error drops below the threshold.
    #[default]
    DeficitBelow,
    /// Satisfied once the hole error exceeds the threshold.
    LiteralAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepartureConfig {
    pub beta: f64,
    pub gamma: f64,
    pub rule: DepartureRule,
    /// Also accept the hole-error condition once the target hole holds at
    /// least its reference mass.
    pub fill_guard: bool,
}

impl Default for DepartureConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            gamma: 0.3,
            rule: DepartureRule::DeficitBelow,
            fill_guard: true,
        }
    }
}

impl DepartureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive (got {})",
                self.beta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive (got {})",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Threshold `beta * exp(-gamma * cycle)`.
    pub fn threshold(&self, cycle: u64) -> f64 {
        departure_threshold(cycle, self)
    }

    pub fn is_satisfied(&self, hole_error: f64, threshold: f64) -> bool {
        match self.rule {
            DepartureRule::DeficitBelow => hole_error < threshold,
            DepartureRule::LiteralAbove => hole_error > threshold,
        }
    }
}

pub fn departure_threshold(cycle: u64, cfg: &DepartureConfig) -> f64 {
    cfg.beta * (-cfg.gamma * cycle as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GridSpec;

    fn small() -> GridSpec {
        GridSpec::new(100.0, 100.0, 50, 50).unwrap()
    }

    fn sigma() -> Cov2 {
        Cov2::diag(3.0, 3.0).unwrap()
    }

    #[test]
    fn first_round_single_agent_is_the_deposit() {
        let spec = small();
        let mut s = ErgodicState::empty(spec, 1).unwrap();
        assert_eq!(s.k(), None);
        let p = Point::new(40.0, 61.0);
        s.deposit_step(&[p], &sigma()).unwrap();
        assert_eq!(s.k(), Some(0));
        let f = Stamp::skinny_gaussian(&spec, p, &sigma())
            .unwrap()
            .to_field(spec);
        assert_eq!(s.rho(), &f);
    }

    #[test]
    fn first_round_two_agents_is_the_mean() {
        let spec = small();
        let mut s = ErgodicState::empty(spec, 2).unwrap();
        let (a, b) = (Point::new(20.0, 20.0), Point::new(70.0, 55.0));
        s.deposit_step(&[a, b], &sigma()).unwrap();
        let fa = Stamp::skinny_gaussian(&spec, a, &sigma())
            .unwrap()
            .to_field(spec);
        let fb = Stamp::skinny_gaussian(&spec, b, &sigma())
            .unwrap()
            .to_field(spec);
        for ((r, x), y) in s.rho().values().iter().zip(fa.values()).zip(fb.values()) {
            assert!((r - 0.5 * (x + y)).abs() < 1e-15);
        }
        assert!((s.rho().integrate(None).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deposit_outside_domain_fails() {
        let mut s = ErgodicState::empty(small(), 1).unwrap();
        assert!(matches!(
            s.deposit_step(&[Point::new(101.0, 3.0)], &sigma()),
            Err(Error::OutOfDomain { .. })
        ));
        assert_eq!(s.rounds(), 0);
    }

    #[test]
    fn absorb_rejects_wrong_deposit_count() {
        let spec = small();
        let mut s = ErgodicState::empty(spec, 2).unwrap();
        let st = Stamp::skinny_gaussian(&spec, Point::new(1.0, 1.0), &sigma()).unwrap();
        assert!(s.absorb(&[st]).is_err());
    }

    #[test]
    fn phi_and_v_of_identical_distributions() {
        let spec = small();
        let mut s = ErgodicState::empty(spec, 1).unwrap();
        s.deposit_step(&[Point::new(50.0, 50.0)], &sigma()).unwrap();
        let same = s.rho().clone();
        assert!(s.phi(&same).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(s.ergodic_v(&same).unwrap(), 0.0);
    }

    #[test]
    fn v_of_disjoint_supports_is_two() {
        let spec = small();
        let mut s = ErgodicState::empty(spec, 1).unwrap();
        s.deposit_step(&[Point::new(10.0, 10.0)], &sigma()).unwrap();
        let other = Stamp::skinny_gaussian(&spec, Point::new(90.0, 90.0), &sigma())
            .unwrap()
            .to_field(spec);
        assert!((s.ergodic_v(&other).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn delta_rho_single_step() {
        let spec = small();
        let mut s = ErgodicState::empty(spec, 1).unwrap();
        for x in [10.0, 20.0, 30.0] {
            s.deposit_step(&[Point::new(x, 50.0)], &sigma()).unwrap();
        }
        let f = Stamp::skinny_gaussian(&spec, Point::new(60.0, 40.0), &sigma()).unwrap();
        let delta = s.delta_rho(&[vec![f.clone()]]).unwrap();
        let k = s.k().unwrap() as f64;
        let dense = f.to_field(spec);
        for ((d, fv), r) in delta
            .values()
            .iter()
            .zip(dense.values())
            .zip(s.rho().values())
        {
            assert!((d - (fv - r) / (k + 2.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_rho_cancels_when_deposits_reproduce_rho() {
        let spec = small();
        let p = Point::new(50.0, 50.0);
        let mut s = ErgodicState::empty(spec, 1).unwrap();
        s.deposit_step(&[p], &sigma()).unwrap();
        let f = Stamp::skinny_gaussian(&spec, p, &sigma()).unwrap();
        let delta = s.delta_rho(&[vec![f.clone()], vec![f]]).unwrap();
        assert!(delta.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn required_dwell_examples() {
        assert!((required_dwell(0.4, 10.0).unwrap() - 20.0 / 3.0).abs() < 1e-12);
        assert_eq!(required_dwell(0.0, 123.0).unwrap(), 0.0);
        assert_eq!(required_dwell(0.5, 8.0).unwrap(), 8.0);
        assert!(matches!(
            required_dwell(1.0, 3.0),
            Err(Error::DegenerateMass(_))
        ));
    }

    #[test]
    fn travel_increment_examples() {
        assert!((predict_travel_increment(9, 5.0, 0.3) - 0.2).abs() < 1e-15);
        assert_eq!(predict_travel_increment(9, 0.0, 0.3), 0.0);
        assert_eq!(predict_travel_increment(9, 5.0, 0.0), 0.0);
    }

    #[test]
    fn omega2_mass_examples() {
        assert_eq!(predict_omega2_mass(7, 0.0, 0.37), 0.37);
        assert_eq!(predict_omega2_mass(0, 1.0, 0.5), 0.25);
        for h in 1..10 {
            assert!(
                predict_omega2_mass(4, h as f64 + 1.0, 0.3) < predict_omega2_mass(4, h as f64, 0.3)
            );
        }
    }

    #[test]
    fn departure_threshold_examples() {
        let cfg = DepartureConfig::default();
        assert_eq!(departure_threshold(0, &cfg), cfg.beta);
        assert!((departure_threshold(2, &cfg) - 0.054_881_163_6).abs() < 1e-9);
        for c in 0..20 {
            assert!(cfg.threshold(c + 1) < cfg.threshold(c));
        }
    }

    #[test]
    fn departure_rule_directions() {
        let below = DepartureConfig::default();
        let above = DepartureConfig {
            rule: DepartureRule::LiteralAbove,
            ..below
        };
        assert!(below.is_satisfied(0.01, 0.05) && !below.is_satisfied(0.1, 0.05));
        assert!(above.is_satisfied(0.1, 0.05) && !above.is_satisfied(0.01, 0.05));
        assert!(DepartureConfig { beta: 0.0, ..below }.validate().is_err());
    }

    #[test]
    fn timers_stop_travel_on_entry_and_start_dwell_next_step() {
        let mut t = SegmentTimers::new(2);
        t.record(0, false);
        t.record(1, true);
        assert_eq!(t.travel(), &[1, 0]);
        assert_eq!(t.dwell(), &[0, 0]);
        t.record(0, true);
        t.record(1, false);
        assert!(t.all_arrived());
        assert_eq!(t.travel(), &[1, 0]);
        assert_eq!(t.dwell(), &[0, 1]);
        assert_eq!(t.h_mean(), 0.5);
        assert_eq!(t.h_prime_mean(), 0.5);
    }
}
