//! Shared fixtures for the criterion benchmarks.

use passage_core::evolution::{uniform_grid, IntegratorConfig};
use passage_core::fock::{fock_state, FockSpace};
use passage_core::pulses::{ControlSchedule, GammaSign, LambdaRule};
use passage_core::QuantumState;
use std::f64::consts::FRAC_PI_2;

/// Broken-phase λ-rule schedule used across the benches.
pub fn broken_schedule(lambda: f64) -> ControlSchedule {
    let rule = LambdaRule { lambda, tau: 1.0, phi: FRAC_PI_2, phi_a: 0.0, big_theta: 0.0, dissipative: true };
    ControlSchedule::from_lambda(&rule, GammaSign::NormRestoring).expect("valid preset")
}

/// `|n, 0⟩` on a square two-mode space.
pub fn fock_fixture(cutoff: usize, n: usize) -> (FockSpace, QuantumState) {
    let space = FockSpace::new(&[cutoff, cutoff]).expect("space");
    let psi = fock_state(&space, &[n, 0]).expect("state").state;
    (space, psi)
}

pub fn integrator(samples: usize, block: bool) -> IntegratorConfig {
    IntegratorConfig { samples: uniform_grid(1.0, samples), block, ..Default::default() }
}
