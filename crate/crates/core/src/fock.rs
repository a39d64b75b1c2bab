//! Truncated multimode Fock spaces, ladder operators, state factories and fidelities.

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, Triplets, C64};
use serde::{Deserialize, Serialize};

/// Default cap on the number of basis states of a space.
pub const DEFAULT_BUDGET: usize = 1 << 15;

/// Default truncation tail-mass threshold for state factories.
pub const DEFAULT_MAX_TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

/// Checked constructor with the default memory budget.
pub fn make_space(num_modes: usize, cutoffs: &[usize]) -> Result<FockSpace> {
    if cutoffs.len() != num_modes {
        return Err(Error::CutoffCount { expected: num_modes, got: cutoffs.len() });
    }
    FockSpace::with_budget(cutoffs, DEFAULT_BUDGET)
}

impl FockSpace {
    pub fn new(cutoffs: &[usize]) -> Result<Self> {
        Self::with_budget(cutoffs, DEFAULT_BUDGET)
    }

    pub fn with_budget(cutoffs: &[usize], budget: usize) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::NoModes);
        }
        let mut dim: usize = 1;
        for (mode, &cutoff) in cutoffs.iter().enumerate() {
            if cutoff < 1 {
                return Err(Error::InvalidCutoff { mode, cutoff });
            }
            dim = dim
                .checked_mul(cutoff + 1)
                .ok_or(Error::MemoryBudget { dim: usize::MAX, budget })?;
        }
        if dim > budget {
            return Err(Error::MemoryBudget { dim, budget });
        }
        // last mode varies fastest
        let mut strides = vec![1; cutoffs.len()];
        for k in (0..cutoffs.len() - 1).rev() {
            strides[k] = strides[k + 1] * (cutoffs[k + 1] + 1);
        }
        Ok(FockSpace { cutoffs: cutoffs.to_vec(), strides, dim })
    }

    pub fn num_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.num_modes() {
            return Err(Error::DimensionMismatch { expected: self.num_modes(), got: occupations.len() });
        }
        let mut idx = 0;
        for (k, &n) in occupations.iter().enumerate() {
            if n > self.cutoffs[k] {
                return Err(Error::IndexOutOfRange { index: n, limit: self.cutoffs[k] });
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        let mut rest = index;
        self.strides
            .iter()
            .map(|&s| {
                let n = rest / s;
                rest %= s;
                n
            })
            .collect()
    }

    fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    pub fn total_number(&self, index: usize) -> usize {
        self.occupations(index).iter().sum()
    }

    pub fn max_total(&self) -> usize {
        self.cutoffs.iter().sum()
    }

    /// Basis indices of the total-number sector `n`, ascending.
    pub fn sector(&self, n: usize) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.total_number(i) == n).collect()
    }

    pub fn sectors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.max_total() + 1];
        for i in 0..self.dim {
            out[self.total_number(i)].push(i);
        }
        out
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(Error::ModeOutOfRange { mode, num_modes: self.num_modes() });
        }
        Ok(())
    }

    /// Sparse annihilation operator of `mode`.
    pub fn annihilation(&self, mode: usize) -> Result<Triplets> {
        self.check_mode(mode)?;
        let mut t = Triplets::new(self.dim);
        let s = self.strides[mode];
        for i in 0..self.dim {
            let n = self.occupation(i, mode);
            if n > 0 {
                t.push(i - s, i, c((n as f64).sqrt(), 0.0));
            }
        }
        Ok(t)
    }

    /// Sparse `a_j† a_k`.
    pub fn hop(&self, j: usize, k: usize) -> Result<Triplets> {
        self.check_mode(j)?;
        self.check_mode(k)?;
        let mut t = Triplets::new(self.dim);
        for i in 0..self.dim {
            let nk = self.occupation(i, k);
            if nk == 0 {
                continue;
            }
            if j == k {
                t.push(i, i, c(nk as f64, 0.0));
                continue;
            }
            let nj = self.occupation(i, j);
            if nj == self.cutoffs[j] {
                continue;
            }
            let target = i - self.strides[k] + self.strides[j];
            t.push(target, i, c(((nk * (nj + 1)) as f64).sqrt(), 0.0));
        }
        Ok(t)
    }

    /// Sparse `Σ_jk Ha_jk a_j† a_k`.
    pub fn quadratic_form(&self, ha: &CMat) -> Result<Triplets> {
        let n = self.num_modes();
        if ha.nrows() != n || ha.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: ha.nrows().max(ha.ncols()) });
        }
        let mut t = Triplets::new(self.dim);
        for j in 0..n {
            for k in 0..n {
                let h = ha[(j, k)];
                if h == C64::default() {
                    continue;
                }
                for (r, col, v) in self.hop(j, k)?.entries {
                    t.push(r, col, h * v);
                }
            }
        }
        Ok(t)
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.dim);
        v[0] = c(1.0, 0.0);
        v
    }

    /// Applies `(Σ_j w_j a_j†)` to `x`.
    pub fn apply_creation_combination(&self, w: &[C64], x: &CVec) -> Result<CVec> {
        if w.len() != self.num_modes() {
            return Err(Error::DimensionMismatch { expected: self.num_modes(), got: w.len() });
        }
        let mut out = CVec::zeros(self.dim);
        for (mode, &wj) in w.iter().enumerate() {
            if wj == C64::default() {
                continue;
            }
            let s = self.strides[mode];
            for i in 0..self.dim {
                let n = self.occupation(i, mode);
                if n < self.cutoffs[mode] {
                    out[i + s] += wj * c(((n + 1) as f64).sqrt(), 0.0) * x[i];
                }
            }
        }
        Ok(out)
    }

    /// `Σ_n amps[n] (Σ_j w_j a_j†)^n / √(n!) |vac⟩`.
    pub fn creation_polynomial(&self, w: &[C64], amps: &[C64]) -> Result<CVec> {
        let mut term = self.vacuum();
        let mut out = CVec::zeros(self.dim);
        for (n, &amp) in amps.iter().enumerate() {
            if n > 0 {
                term = self.apply_creation_combination(w, &term)?.unscale((n as f64).sqrt());
            }
            if amp != C64::default() {
                out.axpy(amp, &term, c(1.0, 0.0));
            }
        }
        Ok(out)
    }

    /// Places single-mode amplitudes on `mode`, all other modes in vacuum.
    pub fn embed_single_mode(&self, mode: usize, amps: &[C64]) -> Result<CVec> {
        self.check_mode(mode)?;
        if amps.len() > self.cutoffs[mode] + 1 {
            return Err(Error::IndexOutOfRange { index: amps.len() - 1, limit: self.cutoffs[mode] });
        }
        let mut v = CVec::zeros(self.dim);
        for (n, &a) in amps.iter().enumerate() {
            v[n * self.strides[mode]] = a;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Annihilation,
    Creation,
    Number,
    /// `a_to† a_mode`
    Hop { to: usize },
}

#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub matrix: CMat,
    pub mode: usize,
    pub kind: OperatorKind,
}

pub fn mode_operator(space: &FockSpace, mode: usize, kind: OperatorKind) -> Result<ModeOperator> {
    let t = match kind {
        OperatorKind::Annihilation => space.annihilation(mode)?,
        OperatorKind::Creation => space.annihilation(mode)?.adjoint(),
        OperatorKind::Number => space.hop(mode, mode)?,
        OperatorKind::Hop { to } => space.hop(to, mode)?,
    };
    Ok(ModeOperator { matrix: t.to_dense(), mode, kind })
}

/// Dense `Σ_jk Ha_jk a_j† a_k` on the full truncated space.
pub fn build_hamiltonian(space: &FockSpace, ha: &CMat) -> Result<CMat> {
    Ok(space.quadratic_form(ha)?.to_dense())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Laboratory,
    Rotated,
}

#[derive(Debug, Clone)]
pub enum StateData {
    Pure(CVec),
    Density(CMat),
    /// Factored mixture `Σ_k w_k |v_k⟩⟨v_k|` with fixed weights.
    Ensemble(Vec<(f64, CVec)>),
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    pub data: StateData,
    pub frame: Frame,
}

impl QuantumState {
    pub fn pure(v: CVec) -> Self {
        QuantumState { data: StateData::Pure(v), frame: Frame::Laboratory }
    }

    pub fn density(m: CMat) -> Self {
        QuantumState { data: StateData::Density(m), frame: Frame::Laboratory }
    }

    pub fn ensemble(components: Vec<(f64, CVec)>) -> Self {
        QuantumState { data: StateData::Ensemble(components), frame: Frame::Laboratory }
    }

    pub fn dim(&self) -> usize {
        match &self.data {
            StateData::Pure(v) => v.len(),
            StateData::Density(m) => m.nrows(),
            StateData::Ensemble(cs) => cs.first().map_or(0, |(_, v)| v.len()),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&CVec> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            _ => None,
        }
    }

    /// Squared norm for kets, trace for mixtures.
    pub fn trace(&self) -> f64 {
        match &self.data {
            StateData::Pure(v) => v.norm_squared(),
            StateData::Density(m) => m.trace().re,
            StateData::Ensemble(cs) => cs.iter().map(|(w, v)| w * v.norm_squared()).sum(),
        }
    }

    /// Diagonal entry `⟨i|ρ|i⟩` in the number basis.
    pub fn population(&self, index: usize) -> f64 {
        match &self.data {
            StateData::Pure(v) => v[index].norm_sqr(),
            StateData::Density(m) => m[(index, index)].re,
            StateData::Ensemble(cs) => cs.iter().map(|(w, v)| w * v[index].norm_sqr()).sum(),
        }
    }

    pub fn to_density(&self) -> CMat {
        match &self.data {
            StateData::Pure(v) => v * v.adjoint(),
            StateData::Density(m) => m.clone(),
            StateData::Ensemble(cs) => {
                let n = self.dim();
                let mut m = CMat::zeros(n, n);
                for (w, v) in cs {
                    m += (v * v.adjoint()).scale(*w);
                }
                m
            }
        }
    }

    /// Pure-state decomposition with nonnegative weights.
    pub fn components(&self) -> Vec<(f64, CVec)> {
        match &self.data {
            StateData::Pure(v) => vec![(1.0, v.clone())],
            StateData::Ensemble(cs) => cs.clone(),
            StateData::Density(m) => {
                let h = (m + m.adjoint()).scale(0.5);
                let eig = h.symmetric_eigen();
                let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                (0..eig.eigenvalues.len())
                    .filter(|&k| eig.eigenvalues[k] > 1e-14 * scale.max(1e-300))
                    .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
                    .collect()
            }
        }
    }

    /// Checks Hermiticity and positivity of mixtures.
    pub fn validate(&self, tol: f64) -> Result<()> {
        match &self.data {
            StateData::Pure(_) => Ok(()),
            StateData::Ensemble(cs) => {
                if cs.iter().any(|(w, _)| *w < -tol) {
                    return Err(Error::param("state", "negative ensemble weight"));
                }
                Ok(())
            }
            StateData::Density(m) => {
                if crate::linalg::hermitian_residual(m) > tol {
                    return Err(Error::param("state", "density matrix is not Hermitian"));
                }
                let min = crate::linalg::hermitian_eigenvalues(m).first().copied().unwrap_or(0.0);
                if min < -tol {
                    return Err(Error::param("state", format!("density matrix has eigenvalue {min:.3e}")));
                }
                Ok(())
            }
        }
    }
}

/// A freshly constructed, renormalized state with its truncation bookkeeping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub state: QuantumState,
    /// Probability mass discarded by truncation.
    pub tail_mass: f64,
    /// Probability mass kept before renormalization.
    pub retained_mass: f64,
}

fn check_tail(tail: f64, max_tail: f64) -> Result<()> {
    if tail > max_tail {
        return Err(Error::TruncationTail { tail, threshold: max_tail });
    }
    Ok(())
}

pub fn fock_state(space: &FockSpace, occupations: &[usize]) -> Result<Prepared> {
    let idx = space.index(occupations)?;
    let mut v = CVec::zeros(space.dim());
    v[idx] = c(1.0, 0.0);
    Ok(Prepared { state: QuantumState::pure(v), tail_mass: 0.0, retained_mass: 1.0 })
}

/// Coherent-state amplitudes `e^{-|α|²/2} α^n / √n!` up to `cutoff`, and the exact tail mass beyond.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> (Vec<C64>, f64) {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut cn = C64::from_polar((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(cn);
    for n in 1..=cutoff {
        cn = cn * alpha / (n as f64).sqrt();
        amps.push(cn);
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    loop {
        cn = cn * alpha / (n as f64).sqrt();
        let p = cn.norm_sqr();
        tail += p;
        if (n as f64) > alpha.norm_sqr() && p < 1e-18 * tail.max(1e-300) || p == 0.0 || n > cutoff + 10_000 {
            break;
        }
        n += 1;
    }
    (amps, tail)
}

fn normalized(space: &FockSpace, mode: usize, amps: &[C64], tail: f64, max_tail: f64) -> Result<Prepared> {
    check_tail(tail, max_tail)?;
    let retained: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let v = space.embed_single_mode(mode, amps)?.unscale(retained.sqrt());
    Ok(Prepared { state: QuantumState::pure(v), tail_mass: tail, retained_mass: retained })
}

pub fn coherent_state(space: &FockSpace, mode: usize, alpha: C64, max_tail: f64) -> Result<Prepared> {
    space.check_mode(mode)?;
    let (amps, tail) = coherent_amplitudes(alpha, space.cutoffs()[mode]);
    normalized(space, mode, &amps, tail, max_tail)
}

/// `(|α⟩ + |−α⟩)` normalized; only even occupations survive.
pub fn cat_state(space: &FockSpace, mode: usize, alpha: C64, max_tail: f64) -> Result<Prepared> {
    space.check_mode(mode)?;
    let cutoff = space.cutoffs()[mode];
    let (amps, _) = coherent_amplitudes(alpha, cutoff);
    let norm2 = 2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp());
    let scale = 2.0 / norm2.sqrt();
    let cat: Vec<C64> = amps
        .iter()
        .enumerate()
        .map(|(n, &a)| if n % 2 == 0 { a * scale } else { C64::default() })
        .collect();
    // tail of the even-only distribution, summed directly
    let mut tail = 0.0;
    let mut cn = amps[cutoff];
    let mut n = cutoff + 1;
    loop {
        cn = cn * alpha / (n as f64).sqrt();
        let p = if n % 2 == 0 { (cn * scale).norm_sqr() } else { 0.0 };
        tail += p;
        if n % 2 == 0 && (n as f64) > alpha.norm_sqr() && p < 1e-18 * tail.max(1e-300) || cn.norm_sqr() == 0.0 || n > cutoff + 10_000 {
            break;
        }
        n += 1;
    }
    normalized(space, mode, &cat, tail, max_tail)
}

/// The logical binomial-code word `(√3|2⟩ + |6⟩)/2`.
pub fn binomial_code_state(space: &FockSpace, mode: usize, max_tail: f64) -> Result<Prepared> {
    space.check_mode(mode)?;
    let full = [(2usize, 3f64.sqrt() / 2.0), (6, 0.5)];
    let cutoff = space.cutoffs()[mode];
    let mut amps = vec![C64::default(); cutoff.min(6) + 1];
    let mut tail = 0.0;
    for (n, a) in full {
        if n <= cutoff {
            amps[n] = c(a, 0.0);
        } else {
            tail += a * a;
        }
    }
    normalized(space, mode, &amps, tail, max_tail)
}

/// Single-mode amplitudes of the binomial-code word.
pub fn binomial_code_amplitudes() -> Vec<C64> {
    let mut amps = vec![C64::default(); 7];
    amps[2] = c(3f64.sqrt() / 2.0, 0.0);
    amps[6] = c(0.5, 0.0);
    amps
}

/// Thermal populations `n̄^n / (1+n̄)^{n+1}` up to `cutoff` and the geometric tail.
pub fn thermal_populations(nbar: f64, cutoff: usize) -> (Vec<f64>, f64) {
    let q = nbar / (1.0 + nbar);
    let p: Vec<f64> = (0..=cutoff).map(|n| q.powi(n as i32) / (1.0 + nbar)).collect();
    (p, q.powi(cutoff as i32 + 1))
}

/// Diagonal thermal mixture on `mode`, other modes in vacuum, as a factored ensemble.
pub fn thermal_state(space: &FockSpace, mode: usize, nbar: f64, max_tail: f64) -> Result<Prepared> {
    space.check_mode(mode)?;
    if !(nbar >= 0.0) {
        return Err(Error::param("nbar", "must be nonnegative"));
    }
    let (p, tail) = thermal_populations(nbar, space.cutoffs()[mode]);
    check_tail(tail, max_tail)?;
    let retained: f64 = p.iter().sum();
    let mut comps = Vec::with_capacity(p.len());
    for (n, &pn) in p.iter().enumerate() {
        let mut amps = vec![C64::default(); n + 1];
        amps[n] = c(1.0, 0.0);
        comps.push((pn / retained, space.embed_single_mode(mode, &amps)?));
    }
    Ok(Prepared { state: QuantumState::ensemble(comps), tail_mass: tail, retained_mass: retained })
}

/// `⟨ψ|ρ|ψ⟩`; not clamped, so unnormalized states can exceed one.
pub fn fidelity(rho: &QuantumState, psi: &CVec) -> Result<f64> {
    if rho.dim() != psi.len() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: psi.len() });
    }
    Ok(match &rho.data {
        StateData::Pure(v) => psi.dotc(v).norm_sqr(),
        StateData::Density(m) => psi.dotc(&(m * psi)).re,
        StateData::Ensemble(cs) => cs.iter().map(|(w, v)| w * psi.dotc(v).norm_sqr()).sum(),
    })
}

/// Uhlmann fidelity `(Tr √(√σ ρ √σ))²`, computed on the support of `σ`.
///
/// Reduces to [`fidelity`] when `σ` is pure. Scales linearly with the trace of `ρ`.
pub fn uhlmann_fidelity(rho: &QuantumState, sigma: &QuantumState) -> Result<f64> {
    UhlmannTarget::new(sigma).fidelity(rho)
}

/// `σ` reduced to an orthonormal basis of its support, reusable across many `ρ`.
#[derive(Debug, Clone)]
pub struct UhlmannTarget {
    dim: usize,
    basis: Vec<CVec>,
    sqrt_sigma: CMat,
}

impl UhlmannTarget {
    pub fn new(sigma: &QuantumState) -> Self {
        let sig = sigma.components();
        let mut basis: Vec<CVec> = Vec::new();
        for (_, v) in &sig {
            let mut u = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let p = b.dotc(&u);
                    u.axpy(-p, b, c(1.0, 0.0));
                }
            }
            let nrm = u.norm();
            if nrm > 1e-10 * v.norm().max(1e-300) {
                basis.push(u.unscale(nrm));
            }
        }
        let mut target = UhlmannTarget { dim: sigma.dim(), basis, sqrt_sigma: CMat::zeros(0, 0) };
        let r = target.basis.len();
        let sig_r = target.project(&sig);
        let eig = ((&sig_r + sig_r.adjoint()).scale(0.5)).symmetric_eigen();
        let sqrt_diag = CVec::from_iterator(r, eig.eigenvalues.iter().map(|&x| c(x.max(0.0).sqrt(), 0.0)));
        target.sqrt_sigma = &eig.eigenvectors * CMat::from_diagonal(&sqrt_diag) * eig.eigenvectors.adjoint();
        target
    }

    fn project(&self, cs: &[(f64, CVec)]) -> CMat {
        let r = self.basis.len();
        let mut m = CMat::zeros(r, r);
        for (w, v) in cs {
            let coords = CVec::from_iterator(r, self.basis.iter().map(|b| b.dotc(v)));
            m += (&coords * coords.adjoint()).scale(*w);
        }
        m
    }

    pub fn fidelity(&self, rho: &QuantumState) -> Result<f64> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: rho.dim() });
        }
        if self.basis.is_empty() {
            return Ok(0.0);
        }
        let rho_r = self.project(&rho.components());
        let inner = &self.sqrt_sigma * rho_r * &self.sqrt_sigma;
        let s: f64 = crate::linalg::hermitian_eigenvalues(&inner).iter().map(|&x| x.max(0.0).sqrt()).sum();
        Ok(s * s)
    }
}
