//! Adaptive Dormand–Prince 5(4) integrator for complex vector fields with dense output.

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rel_tol: 1e-10, abs_tol: 1e-10, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct StepReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Largest accepted scaled local error estimate (≤ 1 by construction).
    pub max_scaled_error: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `t0`, returning `y` at each of the ascending `samples`.
///
/// Samples between accepted steps come from the fourth-order continuous extension; the last
/// sample is always hit exactly.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[C64], samples: &[f64], ctl: &StepControl) -> Result<(Vec<Vec<C64>>, StepReport)>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let mut out = Vec::with_capacity(samples.len());
    let mut report = StepReport::default();
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.first().is_some_and(|&s| s < t0) {
        return Err(Error::param("samples", "must be ascending and not before the initial time"));
    }
    let t_end = match samples.last() {
        Some(&t) => t,
        None => return Ok((out, report)),
    };
    let mut next = 0;
    while next < samples.len() && samples[next] == t0 {
        out.push(y0.to_vec());
        next += 1;
    }
    if next == samples.len() {
        return Ok((out, report));
    }

    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<C64>> = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut t = t0;
    f(t, &y, &mut k[0]);
    report.rhs_evals += 1;

    let span = t_end - t0;
    let mut h = initial_step(&y, &k[0], span, ctl);
    let mut fac_old: f64 = 1e-4;

    while next < samples.len() {
        if report.accepted + report.rejected >= ctl.max_steps {
            return Err(Error::StepBudget { t, max_steps: ctl.max_steps });
        }
        h = h.min(ctl.max_step).min(t_end - t);
        if h <= 1e-14 * t.abs().max(span.abs()) {
            return Err(Error::StepUnderflow { t, h });
        }
        let stage = |tmp: &mut [C64], y: &[C64], k: &[Vec<C64>], coeffs: &[(usize, f64)]| {
            for i in 0..n {
                let mut acc = zero;
                for &(s, a) in coeffs {
                    acc += k[s][i] * a;
                }
                tmp[i] = y[i] + acc * h;
            }
        };
        stage(&mut tmp, &y, &k, &[(0, A21)]);
        f(t + C2 * h, &tmp, &mut k[1]);
        stage(&mut tmp, &y, &k, &[(0, A31), (1, A32)]);
        f(t + C3 * h, &tmp, &mut k[2]);
        stage(&mut tmp, &y, &k, &[(0, A41), (1, A42), (2, A43)]);
        f(t + C4 * h, &tmp, &mut k[3]);
        stage(&mut tmp, &y, &k, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        f(t + C5 * h, &tmp, &mut k[4]);
        stage(&mut tmp, &y, &k, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        f(t + h, &tmp, &mut k[5]);
        stage(&mut y_new, &y, &k, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
        f(t + h, &y_new, &mut k[6]);
        report.rhs_evals += 6;

        let mut err2 = 0.0;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let sc = ctl.abs_tol + ctl.rel_tol * y[i].norm().max(y_new[i].norm());
            err2 += (e.norm() / sc).powi(2);
        }
        let err = (err2 / n.max(1) as f64).sqrt();

        if err <= 1.0 {
            report.accepted += 1;
            report.max_scaled_error = report.max_scaled_error.max(err);
            let t_new = if t_end - (t + h) <= 1e-14 * span.abs() { t_end } else { t + h };
            while next < samples.len() && samples[next] <= t_new {
                let s = samples[next];
                if s == t_new {
                    out.push(y_new.clone());
                } else {
                    out.push(dense(&y, &y_new, &k, h, (s - t) / h));
                }
                next += 1;
            }
            y.copy_from_slice(&y_new);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            t = t_new;
            // PI step-size control
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * fac_old.powf(0.04)).clamp(0.2, 10.0);
            fac_old = err.max(1e-4);
            h *= fac;
        } else {
            report.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok((out, report))
}

fn dense(y0: &[C64], y1: &[C64], k: &[Vec<C64>], h: f64, theta: f64) -> Vec<C64> {
    let th1 = 1.0 - theta;
    (0..y0.len())
        .map(|i| {
            let r1 = y0[i];
            let r2 = y1[i] - y0[i];
            let r3 = k[0][i] * h - r2;
            let r4 = r2 - k[6][i] * h - r3;
            let r5 = (k[0][i] * D1 + k[2][i] * D3 + k[3][i] * D4 + k[4][i] * D5 + k[5][i] * D6 + k[6][i] * D7) * h;
            r1 + (r2 + (r3 + (r4 + r5 * th1) * theta) * th1) * theta
        })
        .collect()
}

fn initial_step(y: &[C64], f0: &[C64], span: f64, ctl: &StepControl) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y.iter().zip(f0) {
        let sc = ctl.abs_tol + ctl.rel_tol * yi.norm();
        d0 += (yi.norm() / sc).powi(2);
        d1 += (fi.norm() / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 * span } else { 0.01 * (d0 / d1).sqrt() };
    h.min(span).min(ctl.max_step).max(1e-12 * span)
}
