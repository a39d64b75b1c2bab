//! Small dense/sparse complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// `‖U†U − I‖_max`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMat::identity(n, n)))
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(a: &CMat) -> CMat {
    a.clone().exp()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Sparse matrix in coordinate form; duplicates are summed on application.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn new(dim: usize) -> Self {
        Triplets { dim, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, v: C64) {
        if v != C64::new(0.0, 0.0) {
            self.entries.push((row, col, v));
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Triplets {
        Triplets {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    /// `out = self · x`
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
    }

    /// `out += s · self · X` for a column-major dense `X`.
    pub fn left_mul_acc(&self, s: C64, x: &CMat, out: &mut CMat) {
        let n = x.ncols();
        for &(r, c, v) in &self.entries {
            let w = s * v;
            for j in 0..n {
                out[(r, j)] += w * x[(c, j)];
            }
        }
    }

    /// `out += s · X · self`
    pub fn right_mul_acc(&self, s: C64, x: &CMat, out: &mut CMat) {
        let n = x.nrows();
        for &(r, c, v) in &self.entries {
            let w = s * v;
            for i in 0..n {
                out[(i, c)] += w * x[(i, r)];
            }
        }
    }

    pub fn product(&self, other: &Triplets) -> Triplets {
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); other.dim];
        for &(r, c, v) in &other.entries {
            by_row[r].push((c, v));
        }
        let mut acc = std::collections::BTreeMap::new();
        for &(r, k, v) in &self.entries {
            for &(c, w) in &by_row[k] {
                *acc.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v * w;
            }
        }
        let mut t = Triplets::new(self.dim);
        for ((r, c), v) in acc {
            t.push(r, c, v);
        }
        t
    }
}

/// Composite Simpson integration with adaptive bisection on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let theta = 0.7;
        let g = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-theta, 0.0), c(theta, 0.0), c(0.0, 0.0)]);
        let u = expm(&g);
        assert!((u[(0, 0)].re - theta.cos()).abs() < 1e-14);
        assert!((u[(1, 0)].re - theta.sin()).abs() < 1e-14);
        assert!(unitarity_residual(&u) < 1e-14);
    }

    #[test]
    fn triplets_match_dense() {
        let mut t = Triplets::new(3);
        t.push(0, 1, c(1.0, 2.0));
        t.push(2, 0, c(-0.5, 0.0));
        t.push(2, 0, c(0.25, 1.0));
        let d = t.to_dense();
        let x = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)];
        let mut out = [C64::default(); 3];
        t.apply(&x, &mut out);
        let dx = &d * CVec::from_column_slice(&x);
        for i in 0..3 {
            assert!((out[i] - dx[i]).norm() < 1e-15);
        }
        let sq = t.product(&t).to_dense();
        assert!(max_abs(&(sq - &d * &d)) < 1e-15);
    }

    #[test]
    fn simpson_polynomial_and_trig() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 4.0).abs() < 1e-12);
        let w = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((w - 2.0).abs() < 1e-11);
    }
}
