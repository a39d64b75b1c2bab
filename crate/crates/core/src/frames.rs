//! Ancillary frames: the unitary `M†(t)`, the gauge potential, rotated coefficients and the
//! frame unitary `V(t)` on truncated Fock space.

use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::linalg::{c, cis, expm, CMat, CVec, Triplets, C64, I};
use serde::{Deserialize, Serialize};

/// Smooth scalar schedule with an analytic derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Waveform {
    Constant { value: f64 },
    /// `start + (end − start)·t/tau`
    Linear { start: f64, end: f64, tau: f64 },
    /// `offset + amplitude·sin(omega·t + phase)`
    Sinusoid { offset: f64, amplitude: f64, omega: f64, phase: f64 },
    /// `Σ_k coeffs[k]·t^k`
    Polynomial { coeffs: Vec<f64> },
}

impl Waveform {
    pub fn constant(value: f64) -> Self {
        Waveform::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant { value } => *value,
            Waveform::Linear { start, end, tau } => start + (end - start) * t / tau,
            Waveform::Sinusoid { offset, amplitude, omega, phase } => offset + amplitude * (omega * t + phase).sin(),
            Waveform::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &ck| acc * t + ck),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Waveform::Constant { .. } => 0.0,
            Waveform::Linear { start, end, tau } => (end - start) / tau,
            Waveform::Sinusoid { amplitude, omega, phase, .. } => amplitude * omega * (omega * t + phase).cos(),
            Waveform::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &ck)| acc * t + k as f64 * ck),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Waveform::Constant { .. } => true,
            Waveform::Linear { start, end, .. } => start == end,
            Waveform::Sinusoid { amplitude, omega, .. } => *amplitude == 0.0 || *omega == 0.0,
            Waveform::Polynomial { coeffs } => coeffs.iter().skip(1).all(|&x| x == 0.0),
        }
    }

    pub fn is_finite_on(&self, t0: f64, t1: f64) -> bool {
        (0..=64).all(|i| {
            let t = t0 + (t1 - t0) * i as f64 / 64.0;
            self.value(t).is_finite() && self.rate(t).is_finite()
        })
    }
}

/// Angles `θ_k(t)`, `α_k(t)` for `k = 1..N−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    pub thetas: Vec<Waveform>,
    pub alphas: Vec<Waveform>,
}

impl FrameParams {
    pub fn new(thetas: Vec<Waveform>, alphas: Vec<Waveform>) -> Result<Self> {
        if thetas.is_empty() || thetas.len() != alphas.len() {
            return Err(Error::param("frame", "need equally many theta and alpha schedules, at least one each"));
        }
        Ok(FrameParams { thetas, alphas })
    }

    pub fn two_mode(theta: Waveform, alpha: Waveform) -> Self {
        FrameParams { thetas: vec![theta], alphas: vec![alpha] }
    }

    pub fn num_modes(&self) -> usize {
        self.thetas.len() + 1
    }
}

#[derive(Debug, Clone)]
pub struct FrameMatrix {
    pub m_dagger: CMat,
    pub t: f64,
}

impl FrameMatrix {
    /// Coefficients of `μ_k = Σ_j M†_kj a_j` (zero-based `k`).
    pub fn row(&self, k: usize) -> Vec<C64> {
        self.m_dagger.row(k).iter().copied().collect()
    }

    /// Coefficients `w_j` of `μ_k† = Σ_j w_j a_j†`.
    pub fn creation_row(&self, k: usize) -> Vec<C64> {
        self.m_dagger.row(k).iter().map(|z| z.conj()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GaugePotential {
    pub a: CMat,
    pub t: f64,
}

/// Complex value with its time derivative.
#[derive(Clone, Copy)]
struct Jet {
    v: C64,
    d: C64,
}

impl Jet {
    fn mul(self, o: Jet) -> Jet {
        Jet { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

/// `(sinθ e^{iα/2}, cosθ e^{−iα/2}, cosθ e^{iα/2}, −sinθ e^{−iα/2})` with derivatives.
fn angle_jets(theta: &Waveform, alpha: &Waveform, t: f64) -> [Jet; 4] {
    let (th, thd) = (theta.value(t), theta.rate(t));
    let (al, ald) = (alpha.value(t), alpha.rate(t));
    let (s, co) = th.sin_cos();
    let ep = cis(al / 2.0);
    let em = cis(-al / 2.0);
    let hp = I * (ald / 2.0);
    let jet = |amp: f64, damp: f64, e: C64, sign: C64| Jet { v: e * amp, d: e * (damp + sign * amp) };
    [
        jet(s, thd * co, ep, hp),
        jet(co, -thd * s, em, -hp),
        jet(co, -thd * s, ep, hp),
        jet(-s, -thd * co, em, -hp),
    ]
}

fn bright_jets(params: &FrameParams, k: usize, t: f64) -> Vec<Jet> {
    let mut b = vec![Jet { v: c(1.0, 0.0), d: C64::default() }];
    for j in 0..k {
        let [sp, cm, _, _] = angle_jets(&params.thetas[j], &params.alphas[j], t);
        let mut next: Vec<Jet> = b.iter().map(|&x| sp.mul(x)).collect();
        next.push(cm);
        b = next;
    }
    b
}

/// Recursive bright vector `b_k`, `1 ≤ k ≤ N−1`.
pub fn bright_vector(params: &FrameParams, k: usize, t: f64) -> Result<CVec> {
    if k == 0 || k >= params.num_modes() {
        return Err(Error::IndexOutOfRange { index: k, limit: params.num_modes() - 1 });
    }
    Ok(CVec::from_iterator(k + 1, bright_jets(params, k, t).into_iter().map(|j| j.v)))
}

fn frame_jets(params: &FrameParams, t: f64) -> (CMat, CMat) {
    let n = params.num_modes();
    let mut m = CMat::zeros(n, n);
    let mut md = CMat::zeros(n, n);
    for k in 1..n {
        let [_, _, cp, sm] = angle_jets(&params.thetas[k - 1], &params.alphas[k - 1], t);
        let b = bright_jets(params, k - 1, t);
        for (j, &bj) in b.iter().enumerate() {
            let e = cp.mul(bj);
            m[(k - 1, j)] = e.v;
            md[(k - 1, j)] = e.d;
        }
        m[(k - 1, k)] = sm.v;
        md[(k - 1, k)] = sm.d;
    }
    for (j, bj) in bright_jets(params, n - 1, t).into_iter().enumerate() {
        m[(n - 1, j)] = bj.v;
        md[(n - 1, j)] = bj.d;
    }
    (m, md)
}

pub fn frame_matrix(params: &FrameParams, t: f64) -> FrameMatrix {
    FrameMatrix { m_dagger: frame_jets(params, t).0, t }
}

/// Analytic `d M†/dt`.
pub fn frame_matrix_rate(params: &FrameParams, t: f64) -> CMat {
    frame_jets(params, t).1
}

/// `𝒜 = −i (dM†/dt) M`.
pub fn gauge_potential(params: &FrameParams, t: f64) -> GaugePotential {
    let (m, md) = frame_jets(params, t);
    GaugePotential { a: (md * m.adjoint()) * (-I), t }
}

/// Central-difference fallback for [`gauge_potential`].
pub fn gauge_potential_fd(params: &FrameParams, t: f64, h: f64) -> GaugePotential {
    let m = frame_matrix(params, t).m_dagger;
    let md = (frame_matrix(params, t + h).m_dagger - frame_matrix(params, t - h).m_dagger) / c(2.0 * h, 0.0);
    GaugePotential { a: (md * m.adjoint()) * (-I), t }
}

/// `H^μ − 𝒜` with `H^μ = M† Ha M`.
pub fn rotated_coefficients(ha: &CMat, params: &FrameParams, t: f64) -> Result<CMat> {
    let n = params.num_modes();
    if ha.nrows() != n || ha.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ha.nrows() });
    }
    let m = frame_matrix(params, t).m_dagger;
    let a = gauge_potential(params, t).a;
    Ok(&m * ha * m.adjoint() - a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangularCheck {
    pub pass: bool,
    pub residual: f64,
}

/// Largest modulus strictly below the diagonal.
pub fn check_upper_triangular(m: &CMat, tol: f64) -> TriangularCheck {
    let mut residual = 0.0f64;
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            residual = residual.max(m[(i, j)].norm());
        }
    }
    TriangularCheck { pass: residual <= tol, residual }
}

/// `Σ_j w_j a_j` on the truncated space.
pub fn mode_combination(space: &FockSpace, w: &[C64]) -> Result<Triplets> {
    if w.len() != space.num_modes() {
        return Err(Error::DimensionMismatch { expected: space.num_modes(), got: w.len() });
    }
    let mut t = Triplets::new(space.dim());
    for (j, &wj) in w.iter().enumerate() {
        for (r, col, v) in space.annihilation(j)?.entries {
            t.push(r, col, wj * v);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorOrder {
    /// `Π_k V_{α_k} V_{θ_k}`
    AlphaTheta,
    /// `Π_k V_{θ_k} V_{α_k}`
    ThetaAlpha,
}

/// Largest dense dimension accepted by [`frame_unitary`].
pub const FRAME_UNITARY_BUDGET: usize = 4096;

/// `V(t) = Π_k V_{α_k} V_{θ_k}`, mapping the stationary frame onto the moving one.
pub fn frame_unitary(space: &FockSpace, params: &FrameParams, t: f64) -> Result<CMat> {
    frame_unitary_ordered(space, params, t, FactorOrder::AlphaTheta)
}

pub fn frame_unitary_ordered(space: &FockSpace, params: &FrameParams, t: f64, order: FactorOrder) -> Result<CMat> {
    let n = params.num_modes();
    if space.num_modes() != n {
        return Err(Error::DimensionMismatch { expected: n, got: space.num_modes() });
    }
    if space.dim() > FRAME_UNITARY_BUDGET {
        return Err(Error::MemoryBudget { dim: space.dim(), budget: FRAME_UNITARY_BUDGET });
    }
    let dim = space.dim();
    let mut v = CMat::identity(dim, dim);
    for k in 1..n {
        let (theta, alpha) = (&params.thetas[k - 1], &params.alphas[k - 1]);
        let d_alpha = alpha.value(t) - alpha.value(0.0);
        let d_theta = theta.value(t) - theta.value(0.0);
        let alpha0 = alpha.value(0.0);
        let mut beta = vec![C64::default(); n];
        for (j, bj) in bright_jets(params, k - 1, 0.0).into_iter().enumerate() {
            beta[j] = bj.v;
        }
        // b†b, a_k†b and b†a_k on the full space
        let mut bb = CMat::zeros(dim, dim);
        let mut akb = CMat::zeros(dim, dim);
        for i in 0..k {
            for j in 0..k {
                let w = beta[i].conj() * beta[j];
                if w != C64::default() {
                    bb += space.hop(i, j)?.to_dense() * w;
                }
            }
            if beta[i] != C64::default() {
                akb += space.hop(k, i)?.to_dense() * beta[i];
            }
        }
        let nk = space.hop(k, k)?.to_dense();
        let va = expm(&((bb - nk) * (-I * (d_alpha / 2.0))));
        let gen = &akb * cis(alpha0) - akb.adjoint() * cis(-alpha0);
        let vt = expm(&(gen * c(-d_theta, 0.0)));
        v = match order {
            FactorOrder::AlphaTheta => v * va * vt,
            FactorOrder::ThetaAlpha => v * vt * va,
        };
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_residual, max_abs, unitarity_residual};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn lin(a: f64, b: f64) -> Waveform {
        Waveform::Linear { start: a, end: b, tau: 1.0 }
    }

    #[test]
    fn waveform_rates_match_finite_differences() {
        let ws = [
            lin(0.2, 1.3),
            Waveform::Sinusoid { offset: 0.1, amplitude: 0.7, omega: 2.3, phase: 0.4 },
            Waveform::Polynomial { coeffs: vec![0.3, -1.0, 0.5, 2.0] },
        ];
        for w in &ws {
            for &t in &[0.13, 0.5, 0.91] {
                let h = 1e-5;
                let fd = (w.value(t + h) - w.value(t - h)) / (2.0 * h);
                assert!((fd - w.rate(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bright_vectors() {
        let p = FrameParams::two_mode(Waveform::constant(0.0), Waveform::constant(0.0));
        let b = bright_vector(&p, 1, 0.0).unwrap();
        assert!((b[0].norm()) < 1e-15 && (b[1] - c(1.0, 0.0)).norm() < 1e-15);
        let p = FrameParams::two_mode(Waveform::constant(FRAC_PI_4), Waveform::constant(0.0));
        let b = bright_vector(&p, 1, 0.0).unwrap();
        assert!((b[0].re - 0.5f64.sqrt()).abs() < 1e-15 && (b[1].re - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(bright_vector(&p, 0, 0.0).is_err());
        assert!(bright_vector(&p, 2, 0.0).is_err());
    }

    #[test]
    fn two_mode_frame_limits() {
        let p = FrameParams::two_mode(Waveform::constant(0.0), Waveform::constant(0.0));
        assert!(max_abs(&(frame_matrix(&p, 0.0).m_dagger - CMat::identity(2, 2))) < 1e-15);
        let p = FrameParams::two_mode(Waveform::constant(FRAC_PI_2), Waveform::constant(0.0));
        let m = frame_matrix(&p, 0.0).m_dagger;
        assert!(m[(0, 0)].norm() < 1e-15 && m[(1, 1)].norm() < 1e-15);
        assert!((m[(0, 1)] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_mode_frame_matches_closed_form() {
        let p = FrameParams::two_mode(lin(0.1, 1.2), lin(-0.4, 0.9));
        let t = 0.37;
        let (th, al) = (p.thetas[0].value(t), p.alphas[0].value(t));
        let m = frame_matrix(&p, t).m_dagger;
        let expect = CMat::from_row_slice(
            2,
            2,
            &[cis(al / 2.0) * th.cos(), -cis(-al / 2.0) * th.sin(), cis(al / 2.0) * th.sin(), cis(-al / 2.0) * th.cos()],
        );
        assert!(max_abs(&(m - expect)) < 1e-15);
    }

    #[test]
    fn linear_theta_gauge_potential() {
        let p = FrameParams::two_mode(lin(0.0, FRAC_PI_2), Waveform::constant(0.0));
        let a = gauge_potential(&p, 0.3).a;
        assert!(a[(0, 0)].norm() < 1e-15 && a[(1, 1)].norm() < 1e-15);
        assert!((a[(0, 1)] - c(0.0, FRAC_PI_2)).norm() < 1e-14);
        assert!((a[(1, 0)] - c(0.0, -FRAC_PI_2)).norm() < 1e-14);
        let fd = gauge_potential_fd(&p, 0.3, 1e-6).a;
        assert!(max_abs(&(fd - a)) < 1e-8);
        let still = FrameParams::two_mode(Waveform::constant(0.4), Waveform::constant(1.0));
        assert!(max_abs(&gauge_potential(&still, 0.5).a) == 0.0);
    }

    #[test]
    fn triangular_check() {
        let mut m = CMat::zeros(3, 3);
        m[(0, 2)] = c(5.0, 0.0);
        let r = check_upper_triangular(&m, 1e-12);
        assert!(r.pass && r.residual == 0.0);
        m[(2, 1)] = c(0.3, 0.0);
        let r = check_upper_triangular(&m, 1e-12);
        assert!(!r.pass && (r.residual - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rotated_coefficient_basics() {
        let p = FrameParams::two_mode(Waveform::constant(0.4), Waveform::constant(0.2));
        let z = rotated_coefficients(&CMat::zeros(2, 2), &p, 0.1).unwrap();
        assert!(max_abs(&z) == 0.0);
        let h = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.3), c(0.2, -0.3), c(-0.5, 0.0)]);
        let r = rotated_coefficients(&h, &p, 0.1).unwrap();
        assert!(hermitian_residual(&r) < 1e-14);
        assert!(rotated_coefficients(&CMat::zeros(3, 3), &p, 0.1).is_err());
    }

    #[test]
    fn frame_unitary_identity_at_start() {
        let s = FockSpace::new(&[3, 3]).unwrap();
        let p = FrameParams::two_mode(lin(0.2, 1.0), lin(0.3, -0.2));
        let v = frame_unitary(&s, &p, 0.0).unwrap();
        assert!(max_abs(&(v - CMat::identity(s.dim(), s.dim()))) < 1e-14);
        let v = frame_unitary(&s, &p, 0.7).unwrap();
        assert!(unitarity_residual(&v) < 1e-10);
    }
}
