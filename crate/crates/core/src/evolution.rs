//! Non-Hermitian Schrödinger evolution (ket, dual, ensembles), the Lindblad master equation and
//! verification of the Heisenberg passages.

use crate::error::{Error, Result};
use crate::fock::{FockSpace, QuantumState, StateData};
use crate::frames::frame_matrix;
use crate::linalg::{c, cis, CMat, CVec, Triplets, C64, I};
use crate::ode::{integrate, StepControl, StepReport};
use crate::pulses::{global_phase, synthesize_pulses, ControlSchedule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Output times, ascending, within `[0, τ]`.
    #[serde(default)]
    pub samples: Vec<f64>,
    /// Integrate each total-number sector separately.
    #[serde(default = "yes")]
    pub block: bool,
}

fn yes() -> bool {
    true
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-10, max_step: 0.05, samples: uniform_grid(1.0, 100), block: true }
    }
}

impl IntegratorConfig {
    pub fn with_samples(mut self, samples: Vec<f64>) -> Self {
        self.samples = samples;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.rel_tol *= factor;
        self.abs_tol *= factor;
        self
    }

    pub fn validate(&self, tau: f64) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::param("integrator", "tolerances and max_step must be positive"));
        }
        if self.samples.is_empty() {
            return Err(Error::param("integrator.samples", "need at least one sample time"));
        }
        if self.samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("integrator.samples", "must be strictly increasing"));
        }
        if self.samples[0] < 0.0 || *self.samples.last().unwrap() > tau * (1.0 + 1e-12) {
            return Err(Error::param("integrator.samples", "must lie within [0, tau]"));
        }
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_step: self.max_step, ..Default::default() }
    }
}

/// `n + 1` equally spaced points on `[0, tau]`.
pub fn uniform_grid(tau: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { tau } else { tau * i as f64 / n as f64 }).collect()
}

/// Merges extra times into a grid, keeping it sorted and free of near-duplicates.
pub fn merge_times(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = grid.iter().chain(extra).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    all
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrajectoryMeta {
    pub schedule_hash: String,
    pub cutoffs: Vec<usize>,
    pub blocks: usize,
    pub report: StepReport,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(|v| v.as_slice())
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.times.len());
        self.observables.insert(name.into(), values);
    }

    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

fn merge_reports(a: StepReport, b: StepReport) -> StepReport {
    StepReport {
        accepted: a.accepted + b.accepted,
        rejected: a.rejected + b.rejected,
        rhs_evals: a.rhs_evals + b.rhs_evals,
        max_scaled_error: a.max_scaled_error.max(b.max_scaled_error),
    }
}

/// A set of basis indices closed under the quadratic generator, with local hop tables.
struct Block {
    indices: Vec<usize>,
    /// `(row, col, j, k, value)` of `a_j† a_k` restricted to the block.
    hops: Vec<(usize, usize, usize, usize, f64)>,
}

fn build_blocks(space: &FockSpace, support: &CVec, by_sector: bool) -> Result<Vec<Block>> {
    let groups: Vec<Vec<usize>> = if by_sector {
        space.sectors().into_iter().filter(|s| s.iter().any(|&i| support[i] != C64::default())).collect()
    } else {
        vec![(0..space.dim()).collect()]
    };
    let n = space.num_modes();
    let mut hop_tables = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            hop_tables.push((j, k, space.hop(j, k)?));
        }
    }
    let mut local = vec![usize::MAX; space.dim()];
    let mut blocks = Vec::with_capacity(groups.len());
    for g in groups {
        for (li, &gi) in g.iter().enumerate() {
            local[gi] = li;
        }
        let mut hops = Vec::new();
        for (j, k, t) in &hop_tables {
            for &(r, col, v) in &t.entries {
                if local[col] != usize::MAX && local[r] != usize::MAX {
                    hops.push((local[r], local[col], *j, *k, v.re));
                }
            }
        }
        for &gi in &g {
            local[gi] = usize::MAX;
        }
        blocks.push(Block { indices: g, hops });
    }
    Ok(blocks)
}

/// Integrates `i dψ/dt = (Σ_jk G_jk(t) a_j† a_k) ψ` without renormalization.
pub fn evolve_generator<G>(space: &FockSpace, generator: G, psi0: &CVec, cfg: &IntegratorConfig) -> Result<(Vec<CVec>, StepReport, usize)>
where
    G: Fn(f64) -> Result<CMat> + Sync,
{
    if psi0.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: psi0.len() });
    }
    let blocks = build_blocks(space, psi0, cfg.block)?;
    let ctl = cfg.control();
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let results: Vec<Result<(Vec<Vec<C64>>, StepReport)>> = blocks
        .par_iter()
        .map(|b| {
            let y0: Vec<C64> = b.indices.iter().map(|&i| psi0[i]).collect();
            let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
                dy.iter_mut().for_each(|z| *z = C64::default());
                let g = match generator(t) {
                    Ok(g) => g,
                    Err(e) => {
                        let mut slot = failure.lock().unwrap();
                        slot.get_or_insert(e);
                        dy.iter_mut().for_each(|z| *z = c(f64::NAN, f64::NAN));
                        return;
                    }
                };
                for &(r, col, j, k, v) in &b.hops {
                    dy[r] += g[(j, k)] * v * y[col];
                }
                dy.iter_mut().for_each(|z| *z *= -I);
            };
            integrate(rhs, 0.0, &y0, &cfg.samples, &ctl)
        })
        .collect();
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut states = vec![CVec::zeros(space.dim()); cfg.samples.len()];
    let mut report = StepReport::default();
    for (b, r) in blocks.iter().zip(results) {
        let (ys, rep) = r?;
        report = merge_reports(report, rep);
        for (state, y) in states.iter_mut().zip(ys) {
            for (&gi, v) in b.indices.iter().zip(y) {
                state[gi] = v;
            }
        }
    }
    Ok((states, report, blocks.len()))
}

fn pulses_ok(schedule: &ControlSchedule, cfg: &IntegratorConfig) -> Result<()> {
    schedule.validate()?;
    cfg.validate(schedule.tau)?;
    for &t in &cfg.samples {
        synthesize_pulses(schedule, t)?;
    }
    Ok(())
}

pub(crate) fn digest<T: Serialize>(x: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(x).unwrap_or_default();
    hex::encode(Sha256::digest(bytes))
}

fn ket_trajectory(space: &FockSpace, schedule: &ControlSchedule, states: Vec<CVec>, report: StepReport, blocks: usize, cfg: &IntegratorConfig) -> Result<Trajectory> {
    let number = space.quadratic_form(&CMat::identity(space.num_modes(), space.num_modes()))?;
    let mut trace = Vec::with_capacity(states.len());
    let mut mean_number = Vec::with_capacity(states.len());
    let mut buf = vec![C64::default(); space.dim()];
    for s in &states {
        let n2 = s.norm_squared();
        number.apply(s.as_slice(), &mut buf);
        let nbar: C64 = s.iter().zip(&buf).map(|(a, b)| a.conj() * b).sum();
        trace.push(n2);
        mean_number.push(if n2 > 0.0 { nbar.re / n2 } else { 0.0 });
    }
    let mut traj = Trajectory {
        times: cfg.samples.clone(),
        states: states.into_iter().map(QuantumState::pure).collect(),
        observables: BTreeMap::new(),
        meta: TrajectoryMeta { schedule_hash: digest(schedule), cutoffs: space.cutoffs().to_vec(), blocks, report },
    };
    traj.insert("trace", trace);
    traj.insert("mean_number", mean_number);
    Ok(traj)
}

/// `i dψ/dt = H(t) ψ` with `H = Σ Ha_jk a_j† a_k`; no renormalization at any step.
pub fn evolve_ket(space: &FockSpace, schedule: &ControlSchedule, psi0: &QuantumState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    pulses_ok(schedule, cfg)?;
    let v0 = psi0.as_pure().ok_or_else(|| Error::param("initial_state", "ket evolution needs a pure state"))?;
    let (states, report, blocks) = evolve_generator(space, |t| synthesize_pulses(schedule, t).map(|p| p.ha), v0, cfg)?;
    ket_trajectory(space, schedule, states, report, blocks, cfg)
}

/// `i dφ/dt = H†(t) φ`.
pub fn evolve_dual(space: &FockSpace, schedule: &ControlSchedule, phi0: &QuantumState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    pulses_ok(schedule, cfg)?;
    let v0 = phi0.as_pure().ok_or_else(|| Error::param("initial_state", "dual evolution needs a pure state"))?;
    let (states, report, blocks) = evolve_generator(space, |t| synthesize_pulses(schedule, t).map(|p| p.ha.adjoint()), v0, cfg)?;
    ket_trajectory(space, schedule, states, report, blocks, cfg)
}

/// `dρ/dt = −i(Hρ − ρH†)` via the pure-state decomposition of `ρ₀`, weights held fixed.
pub fn evolve_density(space: &FockSpace, schedule: &ControlSchedule, rho0: &QuantumState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    pulses_ok(schedule, cfg)?;
    let comps = rho0.components();
    if comps.is_empty() {
        return Err(Error::param("initial_state", "empty mixture"));
    }
    let runs: Vec<Result<(Vec<CVec>, StepReport, usize)>> = comps
        .par_iter()
        .map(|(_, v)| evolve_generator(space, |t| synthesize_pulses(schedule, t).map(|p| p.ha), v, cfg))
        .collect();
    let mut per_time: Vec<Vec<(f64, CVec)>> = vec![Vec::with_capacity(comps.len()); cfg.samples.len()];
    let mut report = StepReport::default();
    let mut blocks = 0;
    for ((w, _), r) in comps.iter().zip(runs) {
        let (states, rep, nb) = r?;
        report = merge_reports(report, rep);
        blocks += nb;
        for (slot, s) in per_time.iter_mut().zip(states) {
            slot.push((*w, s));
        }
    }
    let dense = matches!(rho0.data, StateData::Density(_));
    let states: Vec<QuantumState> = per_time
        .into_iter()
        .map(|cs| {
            let st = QuantumState::ensemble(cs);
            if dense {
                QuantumState::density(st.to_density())
            } else {
                st
            }
        })
        .collect();
    let trace = states.iter().map(|s| s.trace()).collect();
    let mut traj = Trajectory {
        times: cfg.samples.clone(),
        states,
        observables: BTreeMap::new(),
        meta: TrajectoryMeta { schedule_hash: digest(schedule), cutoffs: space.cutoffs().to_vec(), blocks, report },
    };
    traj.insert("trace", trace);
    Ok(traj)
}

/// Open two-mode system with a shared reservoir `c = u a + e^{iΘ} v b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladParams {
    pub eta: f64,
    pub beta: f64,
    pub chi: f64,
    pub u: f64,
    pub v: f64,
    #[serde(rename = "Theta")]
    pub big_theta: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub phi: f64,
}

impl LindbladParams {
    pub fn gamma_a(&self) -> f64 {
        self.eta * self.u * self.u + self.beta
    }

    pub fn gamma_b(&self) -> f64 {
        self.eta * self.v * self.v + self.chi
    }

    pub fn big_gamma(&self) -> f64 {
        self.eta * self.u * self.v
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta < 0.0 || self.beta < 0.0 || self.chi < 0.0 {
            return Err(Error::param("lindblad", "damping rates must be nonnegative"));
        }
        if self.big_theta.sin().abs() > 1e-12 {
            return Err(Error::param("Theta", "must be 0 or pi"));
        }
        Ok(())
    }
}

/// Superoperator pieces on a two-mode space; dissipators use `2oρo† − {o†o, ρ}`.
struct LindbladGenerator {
    h: Triplets,
    jumps: Vec<(f64, Triplets, Triplets, Triplets)>,
}

impl LindbladGenerator {
    fn new(space: &FockSpace, p: &LindbladParams) -> Result<Self> {
        if space.num_modes() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: space.num_modes() });
        }
        let hc = CMat::from_row_slice(2, 2, &[c(p.omega_a, 0.0), cis(p.phi) * p.j, cis(-p.phi) * p.j, c(p.omega_b, 0.0)]);
        let h = space.quadratic_form(&hc)?;
        let a = space.annihilation(0)?;
        let b = space.annihilation(1)?;
        let mut cop = Triplets::new(space.dim());
        for &(r, col, v) in &a.entries {
            cop.push(r, col, v * p.u);
        }
        for &(r, col, v) in &b.entries {
            cop.push(r, col, v * cis(p.big_theta) * p.v);
        }
        let mut jumps = Vec::new();
        for (rate, o) in [(p.eta, cop), (p.beta, a), (p.chi, b)] {
            if rate > 0.0 {
                let od = o.adjoint();
                let odo = od.product(&o);
                jumps.push((rate, o, od, odo));
            }
        }
        Ok(LindbladGenerator { h, jumps })
    }

    fn apply(&self, rho: &CMat) -> CMat {
        let n = rho.nrows();
        let mut out = CMat::zeros(n, n);
        self.h.left_mul_acc(-I, rho, &mut out);
        self.h.right_mul_acc(I, rho, &mut out);
        for (rate, o, od, odo) in &self.jumps {
            let mut o_rho = CMat::zeros(n, n);
            o.left_mul_acc(c(1.0, 0.0), rho, &mut o_rho);
            od.right_mul_acc(c(2.0 * rate, 0.0), &o_rho, &mut out);
            odo.left_mul_acc(c(-rate, 0.0), rho, &mut out);
            odo.right_mul_acc(c(-rate, 0.0), rho, &mut out);
        }
        out
    }
}

pub fn evolve_lindblad(space: &FockSpace, p: &LindbladParams, rho0: &QuantumState, cfg: &IntegratorConfig) -> Result<Trajectory> {
    p.validate()?;
    cfg.validate(f64::INFINITY)?;
    let gen = LindbladGenerator::new(space, p)?;
    let r0 = rho0.to_density();
    let n = space.dim();
    if r0.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: r0.nrows() });
    }
    let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| {
        let rho = CMat::from_column_slice(n, n, y);
        dy.copy_from_slice(gen.apply(&rho).as_slice());
    };
    let (ys, report) = integrate(rhs, 0.0, r0.as_slice(), &cfg.samples, &cfg.control())?;
    let states: Vec<QuantumState> = ys.into_iter().map(|y| QuantumState::density(CMat::from_column_slice(n, n, &y))).collect();
    let trace = states.iter().map(|s| s.trace()).collect();
    let mut traj = Trajectory {
        times: cfg.samples.clone(),
        states,
        observables: BTreeMap::new(),
        meta: TrajectoryMeta { schedule_hash: digest(p), cutoffs: space.cutoffs().to_vec(), blocks: 1, report },
    };
    traj.insert("trace", trace);
    Ok(traj)
}

pub(crate) fn expectation(op: &Triplets, rho: &CMat) -> C64 {
    op.entries.iter().map(|&(r, col, v)| v * rho[(col, r)]).sum()
}

/// Largest relative mismatch between `d⟨a⟩/dt`, `d⟨b⟩/dt` along the Lindblad trajectory and the
/// linear first-moment system with `γ_a = ηu² + β`, `γ_b = ηv² + χ`, `Γ = ηuv`.
pub fn first_moment_check(space: &FockSpace, p: &LindbladParams, rho0: &QuantumState, cfg: &IntegratorConfig) -> Result<f64> {
    let traj = evolve_lindblad(space, p, rho0, cfg)?;
    let gen = LindbladGenerator::new(space, p)?;
    let a = space.annihilation(0)?;
    let b = space.annihilation(1)?;
    let coupling_ab = I * p.j * cis(p.phi) + cis(p.big_theta) * p.big_gamma();
    let coupling_ba = I * p.j * cis(-p.phi) + cis(p.big_theta) * p.big_gamma();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for s in &traj.states {
        let rho = s.to_density();
        let drho = gen.apply(&rho);
        let (ea, eb) = (expectation(&a, &rho), expectation(&b, &rho));
        let lhs = [expectation(&a, &drho), expectation(&b, &drho)];
        let rhs = [
            -I * p.omega_a * ea - ea * p.gamma_a() - coupling_ab * eb,
            -I * p.omega_b * eb - eb * p.gamma_b() - coupling_ba * ea,
        ];
        for k in 0..2 {
            worst = worst.max((lhs[k] - rhs[k]).norm());
            scale = scale.max(rhs[k].norm());
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[derive(Debug, Clone, Serialize)]
pub struct PassageReport {
    pub times: Vec<f64>,
    /// `|⟨χ(t)|ψ(t)⟩| / (‖χ‖‖ψ‖)` against the moving frame state.
    pub overlaps: Vec<f64>,
    /// `‖ψ(t)‖ / e^{−n X(t)}`.
    pub norm_ratios: Vec<f64>,
    pub overlap_deficit: f64,
    pub max_norm_ratio_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassageKind {
    /// `μ₁†` under `H`.
    Ket,
    /// `μ₂†` under `H†`.
    Dual,
}

/// Launches `μ_k†(0)ⁿ/√n! |vac⟩` and compares against `μ_k†(t)ⁿ/√n! |vac⟩` at every sample.
pub fn passage_check(space: &FockSpace, schedule: &ControlSchedule, n: usize, kind: PassageKind, cfg: &IntegratorConfig) -> Result<PassageReport> {
    if space.num_modes() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: space.num_modes() });
    }
    let row = match kind {
        PassageKind::Ket => 0,
        PassageKind::Dual => 1,
    };
    let frame = schedule.frame();
    let mut amps = vec![C64::default(); n + 1];
    amps[n] = c(1.0, 0.0);
    let image = |t: f64| space.creation_polynomial(&frame_matrix(&frame, t).creation_row(row), &amps);
    let psi0 = QuantumState::pure(image(0.0)?);
    let traj = match kind {
        PassageKind::Ket => evolve_ket(space, schedule, &psi0, cfg)?,
        PassageKind::Dual => evolve_dual(space, schedule, &psi0, cfg)?,
    };
    let phases = global_phase(schedule, &cfg.samples)?;
    let xs = match kind {
        PassageKind::Ket => &phases.x,
        PassageKind::Dual => &phases.x_dual,
    };
    let mut overlaps = Vec::with_capacity(traj.times.len());
    let mut ratios = Vec::with_capacity(traj.times.len());
    for ((&t, s), &x) in traj.times.iter().zip(&traj.states).zip(xs) {
        let psi = s.as_pure().expect("ket trajectory");
        let chi = image(t)?;
        let nrm = psi.norm();
        overlaps.push(if nrm > 0.0 { chi.dotc(psi).norm() / (chi.norm() * nrm) } else { 1.0 });
        ratios.push(nrm / (-(n as f64) * x).exp());
    }
    let overlap_deficit = 1.0 - overlaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max_norm_ratio_error = ratios.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    Ok(PassageReport { times: traj.times, overlaps, norm_ratios: ratios, overlap_deficit, max_norm_ratio_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, fock_state};
    use crate::pulses::{GammaSign, LambdaRule};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn schedule(lambda: f64, phi_a: f64, dissipative: bool) -> ControlSchedule {
        let rule = LambdaRule { lambda, tau: 1.0, phi: FRAC_PI_2, phi_a, big_theta: 0.0, dissipative };
        ControlSchedule::from_lambda(&rule, GammaSign::NormRestoring).unwrap()
    }

    fn cfg(n: usize) -> IntegratorConfig {
        IntegratorConfig { samples: uniform_grid(1.0, n), ..Default::default() }
    }

    #[test]
    fn hermitian_limit_conserves_norm_and_transfers() {
        let s = FockSpace::new(&[5, 5]).unwrap();
        let sch = schedule(0.0, 0.0, true);
        let psi0 = fock_state(&s, &[5, 0]).unwrap().state;
        let tr = evolve_ket(&s, &sch, &psi0, &cfg(50)).unwrap();
        for &n in tr.observable("trace").unwrap() {
            assert!((n - 1.0).abs() < 1e-9);
        }
        let last = tr.states.last().unwrap().as_pure().unwrap();
        assert!((last[s.index(&[0, 5]).unwrap()].norm_sqr() - 1.0).abs() < 1e-8);
        let dual = evolve_dual(&s, &sch, &psi0, &cfg(50)).unwrap();
        for (a, b) in tr.states.iter().zip(&dual.states) {
            assert!((a.as_pure().unwrap() - b.as_pure().unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn vacuum_is_stationary() {
        let s = FockSpace::new(&[3, 3]).unwrap();
        let sch = schedule(1.2, 0.0, true);
        let tr = evolve_ket(&s, &sch, &QuantumState::pure(s.vacuum()), &cfg(10)).unwrap();
        for st in &tr.states {
            assert!((st.as_pure().unwrap() - s.vacuum()).norm() == 0.0);
        }
    }

    #[test]
    fn block_and_full_space_agree() {
        let s = FockSpace::new(&[4, 4]).unwrap();
        let sch = schedule(1.2, 0.0, true);
        let psi0 = coherent_state(&s, 0, c(0.6, 0.2), 1e-2).unwrap().state;
        let blocked = evolve_ket(&s, &sch, &psi0, &cfg(20)).unwrap();
        let full = evolve_ket(&s, &sch, &psi0, &IntegratorConfig { block: false, ..cfg(20) }).unwrap();
        assert!(blocked.meta.blocks > 1 && full.meta.blocks == 1);
        for (a, b) in blocked.states.iter().zip(&full.states) {
            let d = a.as_pure().unwrap() - b.as_pure().unwrap();
            assert!(d.iter().all(|z| z.norm() < 1e-8));
        }
    }

    #[test]
    fn single_sector_number_is_conserved() {
        let s = FockSpace::new(&[5, 5]).unwrap();
        let sch = schedule(1.2, 0.0, true);
        let tr = evolve_ket(&s, &sch, &fock_state(&s, &[4, 1]).unwrap().state, &cfg(20)).unwrap();
        for &m in tr.observable("mean_number").unwrap() {
            assert!((m - 5.0).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_density_matches_ket() {
        let s = FockSpace::new(&[3, 3]).unwrap();
        let sch = schedule(0.5, 0.0, true);
        let psi0 = coherent_state(&s, 0, c(0.3, 0.0), 1e-2).unwrap().state;
        let ket = evolve_ket(&s, &sch, &psi0, &cfg(10)).unwrap();
        let rho = evolve_density(&s, &sch, &QuantumState::density(psi0.to_density()), &cfg(10)).unwrap();
        for (k, r) in ket.states.iter().zip(&rho.states) {
            let d = k.to_density() - r.to_density();
            assert!(d.iter().all(|z| z.norm() < 1e-8));
        }
    }

    #[test]
    fn ket_passage_is_transitionless() {
        let s = FockSpace::new(&[5, 5]).unwrap();
        for sch in [schedule(PI, PI, false), schedule(1.2, 0.0, true)] {
            let r = passage_check(&s, &sch, 5, PassageKind::Ket, &cfg(50)).unwrap();
            assert!(r.overlap_deficit < 1e-6, "{}", r.overlap_deficit);
            assert!(r.max_norm_ratio_error < 1e-6, "{}", r.max_norm_ratio_error);
        }
    }

    #[test]
    fn dual_passage_tracks_second_mode() {
        let s = FockSpace::new(&[5, 5]).unwrap();
        let mut sch = schedule(0.5, 0.0, true);
        sch.phi = -FRAC_PI_2;
        let r = passage_check(&s, &sch, 5, PassageKind::Dual, &cfg(50)).unwrap();
        assert!(r.overlap_deficit < 1e-6);
        assert!(r.max_norm_ratio_error < 1e-6);
    }

    #[test]
    fn lindblad_decay_oracle() {
        let s = FockSpace::new(&[6, 2]).unwrap();
        let p = LindbladParams { eta: 0.0, beta: 0.3, chi: 0.1, u: 0.0, v: 0.0, big_theta: 0.0, omega_a: 0.7, omega_b: 0.2, j: 0.0, phi: 0.0 };
        let rho0 = fock_state(&s, &[3, 0]).unwrap().state;
        let conf = IntegratorConfig { samples: vec![0.0, 0.5, 1.0], rel_tol: 1e-11, abs_tol: 1e-12, ..Default::default() };
        let tr = evolve_lindblad(&s, &p, &rho0, &conf).unwrap();
        let na = s.hop(0, 0).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            let m = expectation(&na, &st.to_density()).re;
            assert!((m - 3.0 * (-2.0 * 0.3 * t).exp()).abs() < 1e-8);
        }
        for &tr in tr.observable("trace").unwrap() {
            assert!((tr - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lindblad_unitary_limit_keeps_purity() {
        let s = FockSpace::new(&[3, 3]).unwrap();
        let p = LindbladParams { eta: 0.0, beta: 0.0, chi: 0.0, u: 0.3, v: 0.4, big_theta: 0.0, omega_a: 0.5, omega_b: -0.2, j: 0.8, phi: 0.4 };
        let rho0 = coherent_state(&s, 0, c(0.5, 0.1), 1e-2).unwrap().state;
        let tr = evolve_lindblad(&s, &p, &rho0, &cfg(4)).unwrap();
        for st in &tr.states {
            let r = st.to_density();
            assert!(((&r * &r).trace().re - 1.0).abs() < 1e-9);
        }
    }
}
