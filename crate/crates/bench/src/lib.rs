//! Fixtures shared by the criterion benchmarks.

use ergodic_core::{ErgodicState, Point, ReferenceMixture, ScalarField, SimConfig, Simulation};

/// The reference experiment advanced by `warmup` steps.
pub fn warmed_simulation(warmup: u64) -> Simulation {
    let mut sim = Simulation::new(SimConfig::four_holes(warmup + 1_000_000))
        .expect("four-hole scenario is valid");
    for _ in 0..warmup {
        sim.step().expect("step succeeds");
    }
    sim
}

/// Error field of the reference experiment after `warmup` steps.
pub fn warmed_phi(warmup: u64) -> ScalarField {
    warmed_simulation(warmup).phi().expect("phi is defined")
}

pub fn four_hole_mixture() -> ReferenceMixture {
    let c = SimConfig::four_holes(0);
    ReferenceMixture::build(c.components, c.grid).expect("four-hole mixture is valid")
}

pub fn empty_state(agents: usize) -> ErgodicState {
    ErgodicState::empty(SimConfig::four_holes(0).grid, agents).expect("positive agent count")
}

pub fn probe_points() -> Vec<Point> {
    vec![
        Point::new(5.0, 5.0),
        Point::new(200.0, 200.0),
        Point::new(330.0, 310.0),
    ]
}
