//! Oracles shared by the acceptance harness and the integration tests.
#![allow(dead_code)]

use passage_core::evolution::{evolve_ket, uniform_grid};
use passage_core::fock::fock_state;
use passage_core::frames::{frame_matrix, frame_unitary, mode_combination};
use passage_core::pulses::LambdaRule;
use passage_core::spectrum::scattering_matrix;
use passage_core::{CMat, ControlSchedule, FockSpace, FrameParams, GammaSign, IntegratorConfig, Waveform};
use std::f64::consts::{FRAC_PI_2, PI};

pub fn lambda_schedule(lambda: f64, phi_a: f64, dissipative: bool) -> ControlSchedule {
    let rule = LambdaRule { lambda, tau: 1.0, phi: FRAC_PI_2, phi_a, big_theta: 0.0, dissipative };
    ControlSchedule::from_lambda(&rule, GammaSign::NormRestoring).unwrap()
}

/// A schedule with time-dependent `θ` and `α` and all rates switched on.
pub fn generic_schedule() -> ControlSchedule {
    ControlSchedule {
        tau: 1.0,
        theta: Waveform::Sinusoid { offset: 0.7, amplitude: 0.4, omega: 2.1, phase: -0.3 },
        alpha: Waveform::Polynomial { coeffs: vec![0.2, 0.5, -0.3] },
        phi: 1.3,
        phi_a: 0.0,
        gamma_a: 0.4,
        gamma_b: 0.15,
        big_gamma: 0.25,
        big_theta: PI,
        lambda: None,
    }
}

fn frame_params(n: usize) -> FrameParams {
    let thetas = (1..n).map(|k| Waveform::Sinusoid { offset: 0.3 * k as f64, amplitude: 0.5, omega: 1.7, phase: 0.2 * k as f64 }).collect();
    let alphas = (1..n).map(|k| Waveform::Linear { start: 0.1 * k as f64, end: -0.8 + 0.3 * k as f64, tau: 1.0 }).collect();
    FrameParams::new(thetas, alphas).unwrap()
}

/// `max_k ‖V†μ_k(t)V − μ_k(0)‖` on the sectors the cutoff holds completely.
pub fn conjugation_residual(modes: usize, cutoff: usize, t: f64) -> f64 {
    let space = FockSpace::new(&vec![cutoff; modes]).unwrap();
    let params = frame_params(modes);
    let v = frame_unitary(&space, &params, t).unwrap();
    let complete: Vec<usize> = (0..space.dim()).filter(|&i| space.total_number(i) <= cutoff).collect();
    let mut worst: f64 = 0.0;
    for k in 0..modes {
        let mu_t = mode_combination(&space, &frame_matrix(&params, t).row(k)).unwrap().to_dense();
        let mu_0 = mode_combination(&space, &frame_matrix(&params, 0.0).row(k)).unwrap().to_dense();
        let diff: CMat = v.adjoint() * mu_t * &v - mu_0;
        for &col in &complete {
            for r in 0..space.dim() {
                worst = worst.max(diff[(r, col)].norm());
            }
        }
    }
    worst
}

/// Integrates `|n₁, n₂⟩` on the full space (no sector blocking) and reports the largest weight
/// outside the initial sector and the largest drift of `⟨N⟩/‖ψ‖²`, both relative.
pub fn number_conservation(occupations: [usize; 2], cutoff: usize) -> (f64, f64) {
    let space = FockSpace::new(&[cutoff, cutoff]).unwrap();
    let n = occupations[0] + occupations[1];
    let psi0 = fock_state(&space, &occupations).unwrap().state;
    let cfg = IntegratorConfig { samples: uniform_grid(1.0, 40), block: false, ..Default::default() };
    let tr = evolve_ket(&space, &generic_schedule(), &psi0, &cfg).unwrap();
    let (mut leak, mut drift): (f64, f64) = (0.0, 0.0);
    for s in &tr.states {
        let v = s.as_pure().unwrap();
        let total = v.norm_squared();
        let outside: f64 = (0..space.dim()).filter(|&i| space.total_number(i) != n).map(|i| v[i].norm_sqr()).sum();
        let mean: f64 = (0..space.dim()).map(|i| space.total_number(i) as f64 * v[i].norm_sqr()).sum::<f64>() / total;
        leak = leak.max(outside / total);
        drift = drift.max((mean - n as f64).abs() / n as f64);
    }
    (leak, drift)
}

/// λ = 0: largest `|‖ψ‖² − 1|` along the transfer and largest `||S₁₂| − |S₂₁||` on the grid.
pub fn hermitian_regression(gamma_1: f64) -> (f64, f64) {
    let s = lambda_schedule(0.0, 0.0, true);
    let space = FockSpace::new(&[5, 5]).unwrap();
    let psi0 = fock_state(&space, &[5, 0]).unwrap().state;
    let cfg = IntegratorConfig { samples: uniform_grid(1.0, 50), ..Default::default() };
    let tr = evolve_ket(&space, &s, &psi0, &cfg).unwrap();
    let norm = tr.states.iter().map(|x| (x.trace() - 1.0).abs()).fold(0.0, f64::max);
    let mut recip: f64 = 0.0;
    for t in uniform_grid(1.0, 50) {
        let sm = scattering_matrix(&s, t, gamma_1, 0.0).unwrap().s;
        recip = recip.max((sm[(0, 1)].norm() - sm[(1, 0)].norm()).abs());
    }
    (norm, recip)
}
