//! Control schedules, synthesized pulses `J(t)`, `Δ(t)`, the λ-rule for rates and the
//! global-phase records of the μ₁ passage.

use crate::error::{Error, Result};
use crate::frames::{FrameParams, Waveform};
use crate::linalg::{adaptive_simpson, c, cis, CMat, I};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// How the sign of the dissipative coupling is fixed by the λ-rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GammaSign {
    /// `Γ = −λθ̇/2`
    Literal,
    /// Sign that makes the net imaginary phase vanish over `[0, τ]`.
    #[default]
    NormRestoring,
    /// `Γ = +λθ̇/2`; the negative control.
    Reversed,
}

impl std::str::FromStr for GammaSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(GammaSign::Literal),
            "norm-restoring" => Ok(GammaSign::NormRestoring),
            "reversed" => Ok(GammaSign::Reversed),
            other => Err(Error::param("gamma-sign", format!("unknown mode `{other}`"))),
        }
    }
}

/// Everything the pulses derive from. Rates are in units of `1/τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub tau: f64,
    pub theta: Waveform,
    pub alpha: Waveform,
    pub phi: f64,
    pub phi_a: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    #[serde(rename = "Gamma")]
    pub big_gamma: f64,
    #[serde(rename = "Theta")]
    pub big_theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// Inputs of the λ-rule: linear θ sweep from 0 to π/2 with α ≡ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRule {
    pub lambda: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "half_pi")]
    pub phi: f64,
    pub phi_a: f64,
    #[serde(rename = "Theta", default)]
    pub big_theta: f64,
    /// Whether the dissipative coupling `Γ` is switched on.
    pub dissipative: bool,
}

fn one() -> f64 {
    1.0
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

/// `θ(t) = πt/(2τ)`.
pub fn theta_linear(tau: f64) -> Result<Waveform> {
    if !(tau > 0.0) {
        return Err(Error::param("tau", "must be positive"));
    }
    Ok(Waveform::Linear { start: 0.0, end: FRAC_PI_2, tau })
}

/// `γ_a = λθ̇/π`, `|Γ| = λθ̇/2`, sign per `sign` for the canonical broken-phase sweep.
pub fn rates_from_lambda(lambda: f64, theta_dot: f64, sign: GammaSign) -> Result<(f64, f64)> {
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", "must be nonnegative"));
    }
    let gamma_a = lambda * theta_dot / PI;
    let mag = lambda * theta_dot / 2.0;
    let tau = FRAC_PI_2 / theta_dot;
    let template = ControlSchedule {
        tau,
        theta: theta_linear(tau)?,
        alpha: Waveform::constant(0.0),
        phi: FRAC_PI_2,
        phi_a: 0.0,
        gamma_a,
        gamma_b: gamma_a,
        big_gamma: 0.0,
        big_theta: 0.0,
        lambda: Some(lambda),
    };
    Ok((gamma_a, resolve_gamma(&template, mag, sign)))
}

fn resolve_gamma(template: &ControlSchedule, mag: f64, sign: GammaSign) -> f64 {
    match sign {
        GammaSign::Literal => -mag,
        GammaSign::Reversed => mag,
        GammaSign::NormRestoring => {
            let residual = |g: f64| {
                let mut s = template.clone();
                s.big_gamma = g;
                check_norm_restoration(&s)
            };
            // ties go to the printed sign
            if residual(mag) < residual(-mag) {
                mag
            } else {
                -mag
            }
        }
    }
}

impl ControlSchedule {
    /// Builds the λ-rule schedule: `γ_a = γ_b = λθ̇/π` and, if dissipative, `|Γ| = λθ̇/2`.
    pub fn from_lambda(rule: &LambdaRule, sign: GammaSign) -> Result<Self> {
        if !(rule.lambda >= 0.0) {
            return Err(Error::param("lambda", "must be nonnegative"));
        }
        let theta = theta_linear(rule.tau)?;
        let theta_dot = theta.rate(0.0);
        let gamma_a = rule.lambda * theta_dot / PI;
        let mut s = ControlSchedule {
            tau: rule.tau,
            theta,
            alpha: Waveform::constant(0.0),
            phi: rule.phi,
            phi_a: rule.phi_a,
            gamma_a,
            gamma_b: gamma_a,
            big_gamma: 0.0,
            big_theta: rule.big_theta,
            lambda: Some(rule.lambda),
        };
        if rule.dissipative {
            s.big_gamma = resolve_gamma(&s, rule.lambda * theta_dot / 2.0, sign);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::param("tau", "must be positive"));
        }
        let on_grid = |x: f64| (x.sin()).abs() < 1e-12;
        if !on_grid(self.phi_a) {
            return Err(Error::param("phi_a", "must be 0 or pi"));
        }
        if !on_grid(self.big_theta) {
            return Err(Error::param("Theta", "must be 0 or pi"));
        }
        if self.gamma_a < 0.0 || self.gamma_b < 0.0 {
            return Err(Error::param("gamma", "rates must be nonnegative"));
        }
        if !self.theta.is_finite_on(0.0, self.tau) || !self.alpha.is_finite_on(0.0, self.tau) {
            return Err(Error::param("schedule", "theta and alpha must be finite on [0, tau]"));
        }
        Ok(())
    }

    pub fn frame(&self) -> FrameParams {
        FrameParams::two_mode(self.theta.clone(), self.alpha.clone())
    }

    /// `Γ e^{iΘ}` as a real number (Θ ∈ {0, π}).
    pub fn gamma_eff(&self) -> f64 {
        self.big_gamma * self.big_theta.cos().round()
    }

    fn cos_phi_a(&self) -> f64 {
        self.phi_a.cos().round()
    }

    /// PT-symmetric setting up to the time-dependent detuning.
    pub fn is_pt_setting(&self) -> bool {
        self.cos_phi_a() < 0.0 && self.gamma_a == self.gamma_b && self.big_gamma == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct PulseSample {
    pub t: f64,
    pub j: f64,
    pub delta: f64,
    pub ha: CMat,
}

/// Below this, cos(φ+α) or sin α count as exact zeros.
const CANCEL_EPS: f64 = 1e-14;

/// Coefficient matrix of the two-mode Hamiltonian from explicit pulse values.
pub fn coefficient_matrix(s: &ControlSchedule, j: f64, delta: f64) -> CMat {
    let g = I * s.gamma_eff();
    CMat::from_row_slice(
        2,
        2,
        &[
            c(delta / 2.0, 0.0) - I * s.gamma_a * s.cos_phi_a(),
            cis(s.phi) * j + g,
            cis(-s.phi) * j + g,
            c(-delta / 2.0, 0.0) - I * s.gamma_b,
        ],
    )
}

pub fn synthesize_pulses(s: &ControlSchedule, t: f64) -> Result<PulseSample> {
    let th = s.theta.value(t);
    let thd = s.theta.rate(t);
    let al = s.alpha.value(t);
    let ald = s.alpha.rate(t);
    let g = s.gamma_eff();
    let (sp, cp) = (s.phi + al).sin_cos();
    if sp.abs() < 1e-12 {
        return Err(Error::SingularPulse { t });
    }
    let (sin_th, cos_th) = th.sin_cos();
    let j = (thd + g * al.cos() * (2.0 * th).cos() - (s.gamma_a * s.cos_phi_a() - s.gamma_b) * sin_th * cos_th) / sp;

    let cp = if cp.abs() < CANCEL_EPS { 0.0 } else { cp };
    let sa = if al.sin().abs() < CANCEL_EPS { 0.0 } else { al.sin() };
    let s2 = (2.0 * th).sin();
    let num_cot = j * cp;
    let num_csc = g * sa;
    let singular = if s2.abs() < 1e-12 {
        if num_cot != 0.0 || num_csc != 0.0 {
            return Err(Error::SingularDetuning { t });
        }
        0.0
    } else {
        num_cot * (2.0 * th).cos() / s2 + num_csc / s2
    };
    let sin_phi_a = if s.phi_a.sin().abs() < CANCEL_EPS { 0.0 } else { s.phi_a.sin() };
    let delta = ald - 2.0 * (singular + s.gamma_a * sin_phi_a / 2.0);
    Ok(PulseSample { t, j, delta, ha: coefficient_matrix(s, j, delta) })
}

/// `ḟ_r(t)`; together with `X'` it gives `ḟ_r − iX' = R₁₁`, so the passage carries `e^{−in(f_r − iX)}`.
pub fn real_phase_rate(s: &ControlSchedule, p: &PulseSample) -> f64 {
    let t = p.t;
    let th = s.theta.value(t);
    let al = s.alpha.value(t);
    let ald = s.alpha.rate(t);
    let c2 = (2.0 * th).cos();
    0.5 * p.delta * c2 - p.j * (s.phi + al).cos() * (2.0 * th).sin() - 0.5 * ald * c2
        + s.gamma_a * s.phi_a.sin() * th.cos().powi(2)
}

/// `X'(t)`: the single-excitation amplitude of the μ₁ passage scales as `e^{−X(t)}`.
pub fn imag_phase_rate(s: &ControlSchedule, t: f64) -> f64 {
    let th = s.theta.value(t);
    let al = s.alpha.value(t);
    s.gamma_a * s.cos_phi_a() * th.cos().powi(2) + s.gamma_b * th.sin().powi(2) + s.gamma_eff() * al.cos() * (2.0 * th).sin()
}

/// Cumulative phase integrals on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseRecord {
    pub times: Vec<f64>,
    /// `f_r(t)`
    pub f_r: Vec<f64>,
    /// `X(t) = ∫X'`, with `‖ψ(t)‖ = e^{−n X(t)}` along the ket passage.
    pub x: Vec<f64>,
    /// Dual-passage counterpart: `X(t) − (γ_a cos φ_a + γ_b) t`.
    pub x_dual: Vec<f64>,
}

const PHASE_TOL: f64 = 1e-13;

pub fn global_phase(s: &ControlSchedule, grid: &[f64]) -> Result<PhaseRecord> {
    for &t in grid {
        synthesize_pulses(s, t)?;
    }
    let fr_rate = |t: f64| synthesize_pulses(s, t).map(|p| real_phase_rate(s, &p)).unwrap_or(f64::NAN);
    let x_rate = |t: f64| imag_phase_rate(s, t);
    let mut f_r = Vec::with_capacity(grid.len());
    let mut x = Vec::with_capacity(grid.len());
    let (mut acc_r, mut acc_x, mut prev) = (0.0, 0.0, 0.0);
    for &t in grid {
        if t != prev {
            acc_r += adaptive_simpson(&fr_rate, prev, t, PHASE_TOL);
            acc_x += adaptive_simpson(&x_rate, prev, t, PHASE_TOL);
        }
        f_r.push(acc_r);
        x.push(acc_x);
        prev = t;
    }
    if f_r.iter().any(|v| v.is_nan()) {
        return Err(Error::SingularPulse { t: f64::NAN });
    }
    let decay = s.gamma_a * s.cos_phi_a() + s.gamma_b;
    let x_dual = grid.iter().zip(&x).map(|(&t, &xv)| xv - decay * t).collect();
    Ok(PhaseRecord { times: grid.to_vec(), f_r, x, x_dual })
}

/// `|∫₀^τ X'(t) dt|`; the protocol restores the norm when this is ~0.
pub fn check_norm_restoration(s: &ControlSchedule) -> f64 {
    adaptive_simpson(&|t| imag_phase_rate(s, t), 0.0, s.tau, PHASE_TOL).abs()
}
