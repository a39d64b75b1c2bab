//! Instantaneous spectra, PT classification, exceptional points and the coupled-mode
//! scattering matrix.

use crate::error::{Error, Result};
use crate::linalg::{c, cis, CMat, C64, I};
use crate::pulses::{synthesize_pulses, ControlSchedule, PulseSample};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectrumPoint {
    pub t: f64,
    pub e_plus: C64,
    pub e_minus: C64,
    /// Radicand of the closed-form eigenvalues.
    pub discriminant: C64,
    pub gap: f64,
}

fn closed_form(s: &ControlSchedule, p: &PulseSample) -> SpectrumPoint {
    let g = s.gamma_a * cis(s.phi_a) - s.gamma_b;
    let gm = s.gamma_eff();
    let d = p.delta;
    let disc = c(d * d, 0.0) - g * g + 4.0 * (p.j * p.j - gm * gm) + I * (8.0 * p.j * gm * s.phi.cos() - 2.0 * d * g);
    let centre = -I * (s.gamma_a * cis(s.phi_a) + s.gamma_b) / 2.0;
    let root = disc.sqrt() / 2.0;
    SpectrumPoint { t: p.t, e_plus: centre + root, e_minus: centre - root, discriminant: disc, gap: (2.0 * root).norm() }
}

/// Closed-form eigenvalues at `t` (principal square root).
pub fn eigenvalues(s: &ControlSchedule, t: f64) -> Result<SpectrumPoint> {
    Ok(closed_form(s, &synthesize_pulses(s, t)?))
}

/// Eigenvalues on a grid with branches assigned by nearest continuation.
pub fn track_spectrum(s: &ControlSchedule, grid: &[f64]) -> Result<Vec<SpectrumPoint>> {
    let mut out: Vec<SpectrumPoint> = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut p = eigenvalues(s, t)?;
        if let Some(prev) = out.last() {
            let keep = (p.e_plus - prev.e_plus).norm() + (p.e_minus - prev.e_minus).norm();
            let swap = (p.e_minus - prev.e_plus).norm() + (p.e_plus - prev.e_minus).norm();
            if swap < keep {
                std::mem::swap(&mut p.e_plus, &mut p.e_minus);
            }
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PtPhase {
    Unbroken,
    Broken,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PtClass {
    pub symmetric: bool,
    pub phase: PtPhase,
}

/// Symmetric iff `φ_a = π`, `γ_a = γ_b`, `Δ(t) = 0` and `Γ = 0`; unbroken iff also `|J| > γ_a`.
pub fn pt_classify(s: &ControlSchedule, t: f64) -> Result<PtClass> {
    let p = synthesize_pulses(s, t)?;
    let symmetric = s.is_pt_setting() && p.delta.abs() < 1e-12;
    let phase = if !symmetric {
        PtPhase::NotApplicable
    } else if p.j.abs() > s.gamma_a {
        PtPhase::Unbroken
    } else {
        PtPhase::Broken
    };
    Ok(PtClass { symmetric, phase })
}

fn ep_threshold(p: &SpectrumPoint, tau: f64) -> f64 {
    1e-6 * p.e_plus.norm().max(p.e_minus.norm()).max(1.0 / tau)
}

/// Interior exceptional points: sign changes of `Re(disc)` refined by bisection, kept only where
/// the gap closes below `10⁻⁶·max(|E±|, 1/τ)`.
pub fn detect_eps(s: &ControlSchedule, grid: &[f64]) -> Result<Vec<f64>> {
    let re = |t: f64| eigenvalues(s, t).map(|p| p.discriminant.re);
    let edge = 1e-9 * s.tau;
    let mut eps = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &t in grid {
        let v = re(t)?;
        if let Some((t0, v0)) = prev {
            if v0 * v < 0.0 {
                let (mut lo, mut hi, mut flo) = (t0, t, v0);
                loop {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = re(mid)?;
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                let p = eigenvalues(s, root)?;
                if root > edge && root < s.tau - edge && p.gap < ep_threshold(&p, s.tau) {
                    eps.push(root);
                }
            }
        }
        prev = Some((t, v));
    }
    Ok(eps)
}

/// Condition number of the eigenvector matrix of a 2×2 matrix (∞ when defective).
pub fn eigenvector_condition(m: &CMat) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let root = (tr * tr / 4.0 - det).sqrt();
    let es = [tr / 2.0 + root, tr / 2.0 - root];
    let vec = |e: C64| {
        let v = if m[(0, 1)].norm() >= m[(1, 0)].norm() {
            [m[(0, 1)], e - m[(0, 0)]]
        } else {
            [e - m[(1, 1)], m[(1, 0)]]
        };
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / n, v[1] / n]
    };
    let (v1, v2) = (vec(es[0]), vec(es[1]));
    let v = CMat::from_row_slice(2, 2, &[v1[0], v2[0], v1[1], v2[1]]);
    let sv = v.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatteringSample {
    pub t: f64,
    pub s: CMat,
    pub gamma_1: f64,
    pub omega: f64,
}

/// `S = I − i K†(ω − Ha)⁻¹K` with `K = √(2γ₁) I`.
pub fn scattering_matrix(s: &ControlSchedule, t: f64, gamma_1: f64, omega: f64) -> Result<ScatteringSample> {
    if gamma_1 < 0.0 {
        return Err(Error::param("gamma_1", "must be nonnegative"));
    }
    let ha = synthesize_pulses(s, t)?.ha;
    let resolvent = (CMat::identity(2, 2) * c(omega, 0.0) - ha).try_inverse().ok_or(Error::SingularResolvent { t })?;
    if resolvent.iter().any(|z| !z.is_finite()) {
        return Err(Error::SingularResolvent { t });
    }
    let sm = CMat::identity(2, 2) - resolvent * (I * 2.0 * gamma_1);
    Ok(ScatteringSample { t, s: sm, gamma_1, omega })
}

/// Closed-form `S(t)` at `ω = 0` for `φ = π/2`, `α ≡ 0`, `φ_a = 0`, `γ_a = γ_b`.
pub fn scattering_closed_form(s: &ControlSchedule, t: f64, gamma_1: f64) -> Result<CMat> {
    let p = synthesize_pulses(s, t)?;
    let (ga, gm) = (s.gamma_a, s.gamma_eff());
    let d = -ga * ga - (p.j * p.j - gm * gm);
    if d == 0.0 {
        return Err(Error::SingularResolvent { t });
    }
    let s11 = 1.0 + 2.0 * gamma_1 * ga / d;
    Ok(CMat::from_row_slice(
        2,
        2,
        &[c(s11, 0.0), c(2.0 * gamma_1 * (p.j + gm) / d, 0.0), c(-2.0 * gamma_1 * (p.j - gm) / d, 0.0), c(s11, 0.0)],
    ))
}

/// `log₁₀|S₂₁(τ)/S₁₂(τ)|` at `ω = 0`; `+∞` when `S₁₂(τ)` vanishes.
pub fn nonreciprocity(s: &ControlSchedule, gamma_1: f64) -> Result<f64> {
    let sm = scattering_matrix(s, s.tau, gamma_1, 0.0)?.s;
    let (s21, s12) = (sm[(1, 0)].norm(), sm[(0, 1)].norm());
    if s12 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((s21 / s12).log10())
}
