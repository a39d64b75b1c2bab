//! Configuration-driven experiments: presets, time-series tables, checkpoints, sweeps and
//! the verification suite.

use crate::error::{Error, Result};
use crate::evolution::{
    digest, evolve_density, evolve_dual, evolve_ket, evolve_lindblad, expectation, first_moment_check, merge_times,
    passage_check, uniform_grid, IntegratorConfig, LindbladParams, PassageKind, Trajectory,
};
use crate::fock::{
    binomial_code_state, cat_state, coherent_state, fock_state, thermal_state, FockSpace, Prepared, QuantumState, StateData,
    UhlmannTarget, DEFAULT_MAX_TAIL,
};
use crate::frames::{check_upper_triangular, frame_matrix, rotated_coefficients};
use crate::linalg::C64;
use crate::ode::StepReport;
use crate::pulses::{check_norm_restoration, global_phase, synthesize_pulses, ControlSchedule, GammaSign, LambdaRule};
use crate::spectrum::{detect_eps, nonreciprocity, pt_classify, scattering_matrix, track_spectrum, PtPhase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

/// Shipped presets, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig2a", include_str!("../presets/fig2a.json")),
    ("fig2b", include_str!("../presets/fig2b.json")),
    ("fig3a", include_str!("../presets/fig3a.json")),
    ("fig3b", include_str!("../presets/fig3b.json")),
    ("fig4a", include_str!("../presets/fig4a.json")),
    ("fig4b", include_str!("../presets/fig4b.json")),
    ("fig4c", include_str!("../presets/fig4c.json")),
    ("fig4d", include_str!("../presets/fig4d.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("lindblad-check", include_str!("../presets/lindblad-check.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Passage,
    LindbladCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum ScheduleSpec {
    Explicit(ControlSchedule),
    LambdaRule(LambdaRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Fock {
        occupations: Vec<usize>,
    },
    Coherent {
        alpha: C64,
        #[serde(default)]
        mode: usize,
    },
    Cat {
        alpha: C64,
        #[serde(default)]
        mode: usize,
    },
    /// `(√3|2⟩ + |6⟩)/2`
    Binomial {
        #[serde(default)]
        mode: usize,
    },
    Thermal {
        nbar: f64,
        #[serde(default)]
        mode: usize,
    },
}

fn default_tail() -> f64 {
    DEFAULT_MAX_TAIL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub cutoffs: Vec<usize>,
    #[serde(default = "default_tail")]
    pub max_tail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvolutionMode {
    #[default]
    Ket,
    Dual,
    Density,
}

fn intervals() -> usize {
    200
}

fn ep_grid() -> usize {
    2000
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Uniform intervals on `[0, τ]`.
    #[serde(default = "intervals")]
    pub intervals: usize,
    /// Extra sample times as fractions of `τ`.
    #[serde(default)]
    pub extra_times: Vec<f64>,
    /// Occupation pairs `(n₁, n₂)` reported as `F_n1_n2`.
    #[serde(default)]
    pub fidelities: Vec<[usize; 2]>,
    #[serde(default = "yes")]
    pub spectrum: bool,
    #[serde(default = "yes")]
    pub phases: bool,
    #[serde(default)]
    pub scattering: bool,
    /// External coupling for the S-matrix; [`default_gamma_1`] when absent.
    #[serde(default)]
    pub gamma_1: Option<f64>,
    /// Resolution of the exceptional-point scan.
    #[serde(default = "ep_grid")]
    pub ep_grid: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            intervals: intervals(),
            extra_times: Vec::new(),
            fidelities: Vec::new(),
            spectrum: true,
            phases: true,
            scattering: false,
            gamma_1: None,
            ep_grid: ep_grid(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSpec {
    pub params: LindbladParams,
    #[serde(default = "one")]
    pub tau: f64,
    /// Additional seeded random parameter draws.
    #[serde(default)]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Check {
    /// Observable at `t·τ` within `tol`.
    ValueAt { observable: String, t: f64, expected: f64, tol: f64 },
    /// Largest value of the observable and its location.
    Peak { observable: String, t: f64, expected: f64, tol: f64, t_tol: f64 },
    /// Maximum over `[from, to]·τ` stays below a bound.
    MaxOver { observable: String, from: f64, to: f64, below: f64 },
    /// Interior exceptional points, as fractions of `τ`.
    EpTimes { expected: Vec<f64>, tol: f64 },
    SummaryBelow { summary: String, below: f64 },
    SummaryNear { summary: String, expected: f64, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub name: String,
    /// Only evaluated when the run's λ matches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(flatten)]
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub description: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub gamma_sign: GammaSign,
    #[serde(default)]
    pub lindblad: Option<LindbladSpec>,
    pub initial_state: StateSpec,
    pub space: SpaceSpec,
    #[serde(default = "integrator_default")]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub evolution: EvolutionMode,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
    /// λ values run by `verify`.
    #[serde(default)]
    pub verify_lambdas: Vec<f64>,
}

fn integrator_default() -> IntegratorConfig {
    IntegratorConfig { samples: Vec::new(), ..Default::default() }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    // a provenance record carries the expanded config under "config"
    let value = match value.get("config") {
        Some(inner) if inner.is_object() && value.get("config_hash").is_some() => inner.clone(),
        _ => value,
    };
    serde_path_to_error::deserialize(value).map_err(|e| config_err(&e.path().to_string(), e.inner()))
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}` (known: {})", preset_names().join(", "))))?;
    parse_config(text)
}

/// A preset name or a path to a config (or provenance) file.
pub fn load_config(arg: &str) -> Result<ExperimentConfig> {
    if PRESETS.iter().any(|(n, _)| *n == arg) {
        return preset(arg);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read `{arg}`: {e}")))?;
    parse_config(&text)
}

/// Command-line style adjustments applied before expansion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub gamma_sign: Option<GammaSign>,
    /// Multiplies both integrator tolerances.
    pub tol_scale: Option<f64>,
    /// Sets both integrator tolerances.
    pub tol: Option<f64>,
    pub gamma_1: Option<f64>,
    /// Sets every mode cutoff.
    pub cutoff: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(l) = self.lambda {
            match &mut cfg.schedule {
                Some(ScheduleSpec::LambdaRule(rule)) => rule.lambda = l,
                _ => return Err(config_err("lambda", "override needs a lambda-rule schedule")),
            }
        }
        if let Some(g) = self.gamma_sign {
            cfg.gamma_sign = g;
        }
        if let Some(t) = self.tol {
            cfg.integrator.rel_tol = t;
            cfg.integrator.abs_tol = t;
        }
        if let Some(x) = self.tol_scale {
            if !(x > 0.0) {
                return Err(config_err("tol-scale", "must be positive"));
            }
            cfg.integrator = cfg.integrator.scaled(x);
        }
        if let Some(g) = self.gamma_1 {
            cfg.outputs.scattering = true;
            cfg.outputs.gamma_1 = Some(g);
        }
        if let Some(n) = self.cutoff {
            cfg.space.cutoffs.iter_mut().for_each(|c| *c = n);
        }
        Ok(cfg)
    }
}

fn in_unit(field: &str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(config_err(field, format!("{t} is not a fraction of tau in [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn resolved_schedule(&self) -> Result<ControlSchedule> {
        let s = match &self.schedule {
            Some(ScheduleSpec::Explicit(s)) => s.clone(),
            Some(ScheduleSpec::LambdaRule(rule)) => ControlSchedule::from_lambda(rule, self.gamma_sign)?,
            None => return Err(config_err("schedule", "required for passage experiments")),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn lambda(&self) -> Option<f64> {
        match &self.schedule {
            Some(ScheduleSpec::LambdaRule(r)) => Some(r.lambda),
            Some(ScheduleSpec::Explicit(s)) => s.lambda,
            None => None,
        }
    }

    pub fn tau(&self) -> Result<f64> {
        match self.kind {
            ExperimentKind::Passage => Ok(self.resolved_schedule()?.tau),
            ExperimentKind::LindbladCheck => Ok(self.lindblad.as_ref().map_or(1.0, |l| l.tau)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.outputs;
        if o.intervals == 0 {
            return Err(config_err("outputs.intervals", "must be positive"));
        }
        for t in &o.extra_times {
            in_unit("outputs.extra_times", *t)?;
        }
        let space = FockSpace::new(&self.space.cutoffs)?;
        if !(self.space.max_tail > 0.0) {
            return Err(config_err("space.max_tail", "must be positive"));
        }
        for pair in &o.fidelities {
            if space.num_modes() != 2 || pair[0] > space.cutoffs()[0] || pair[1] > space.cutoffs()[1] {
                return Err(config_err("outputs.fidelities", format!("{pair:?} outside the two-mode space")));
            }
        }
        match self.kind {
            ExperimentKind::Passage => {
                let s = self.resolved_schedule()?;
                if space.num_modes() != 2 {
                    return Err(config_err("space.cutoffs", "passage experiments use two modes"));
                }
                if let Some(g) = o.gamma_1 {
                    if !(g >= 0.0) {
                        return Err(config_err("outputs.gamma_1", "must be nonnegative"));
                    }
                }
                self.integrator.clone().with_samples(vec![0.0]).validate(s.tau).map_err(|e| config_err("integrator", e))?;
            }
            ExperimentKind::LindbladCheck => {
                let l = self.lindblad.as_ref().ok_or_else(|| config_err("lindblad", "required for lindblad-check"))?;
                l.params.validate()?;
                if !(l.tau > 0.0) {
                    return Err(config_err("lindblad.tau", "must be positive"));
                }
                if space.num_modes() != 2 {
                    return Err(config_err("space.cutoffs", "lindblad-check uses two modes"));
                }
            }
        }
        if matches!(self.initial_state, StateSpec::Thermal { .. }) && self.evolution != EvolutionMode::Density && self.kind == ExperimentKind::Passage {
            return Err(config_err("evolution", "a thermal initial state needs `density`"));
        }
        for cp in &self.checkpoints {
            let field = format!("checkpoints.{}", cp.name);
            match &cp.check {
                Check::ValueAt { t, tol, .. } => {
                    in_unit(&field, *t)?;
                    if !(*tol > 0.0) {
                        return Err(config_err(&field, "tol must be positive"));
                    }
                }
                Check::Peak { t, tol, t_tol, .. } => {
                    in_unit(&field, *t)?;
                    if !(*tol > 0.0 && *t_tol > 0.0) {
                        return Err(config_err(&field, "tolerances must be positive"));
                    }
                }
                Check::MaxOver { from, to, .. } => {
                    in_unit(&field, *from)?;
                    in_unit(&field, *to)?;
                    if from > to {
                        return Err(config_err(&field, "empty window"));
                    }
                }
                Check::EpTimes { expected, tol } => {
                    for t in expected {
                        in_unit(&field, *t)?;
                    }
                    if !(*tol > 0.0) {
                        return Err(config_err(&field, "tol must be positive"));
                    }
                }
                Check::SummaryBelow { .. } => {}
                Check::SummaryNear { tol, .. } => {
                    if !(*tol > 0.0) {
                        return Err(config_err(&field, "tol must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Validates and resolves every default so the emitted record is explicit.
    pub fn expand(mut self) -> Result<Self> {
        self.validate()?;
        if self.kind == ExperimentKind::Passage && self.outputs.scattering && self.outputs.gamma_1.is_none() {
            self.outputs.gamma_1 = Some(default_gamma_1(&self.resolved_schedule()?));
        }
        Ok(self)
    }

    fn sample_grid(&self, tau: f64) -> Vec<f64> {
        let mut extra: Vec<f64> = self.outputs.extra_times.iter().map(|f| f * tau).collect();
        extra.extend(self.checkpoints.iter().filter_map(|cp| match cp.check {
            Check::ValueAt { t, .. } => Some(t * tau),
            _ => None,
        }));
        extra.extend(self.integrator.samples.iter().copied().filter(|&t| (0.0..=tau).contains(&t)));
        merge_times(&uniform_grid(tau, self.outputs.intervals), &extra)
    }
}

/// `γ_a/2`; for a lossless cavity, the λ = 1 value `1/(4τ)` so the S-matrix stays nontrivial.
pub fn default_gamma_1(s: &ControlSchedule) -> f64 {
    if s.gamma_a > 0.0 {
        s.gamma_a / 2.0
    } else {
        0.25 / s.tau
    }
}

fn prepare_state(space: &FockSpace, spec: &StateSpec, max_tail: f64) -> Result<Prepared> {
    match spec {
        StateSpec::Fock { occupations } => fock_state(space, occupations),
        StateSpec::Coherent { alpha, mode } => coherent_state(space, *mode, *alpha, max_tail),
        StateSpec::Cat { alpha, mode } => cat_state(space, *mode, *alpha, max_tail),
        StateSpec::Binomial { mode } => binomial_code_state(space, *mode, max_tail),
        StateSpec::Thermal { nbar, mode } => thermal_state(space, *mode, *nbar, max_tail),
    }
}

/// Image `F[μ₁†(τ)]|vac⟩` of a payload `F[a†]|vac⟩` held in mode `a`; `None` otherwise.
pub fn passage_target(space: &FockSpace, schedule: &ControlSchedule, state: &QuantumState) -> Result<Option<QuantumState>> {
    let row = frame_matrix(&schedule.frame(), schedule.tau).creation_row(0);
    let cutoff = space.cutoffs()[0];
    let mut comps = Vec::new();
    for (w, v) in state.components() {
        let mut amps = vec![C64::default(); cutoff + 1];
        for (i, z) in v.iter().enumerate() {
            if *z == C64::default() {
                continue;
            }
            let occ = space.occupations(i);
            if occ[1..].iter().any(|&n| n != 0) {
                return Ok(None);
            }
            amps[occ[0]] = *z;
        }
        comps.push((w, space.creation_polynomial(&row, &amps)?));
    }
    Ok(Some(match comps.len() {
        1 if state.is_pure() => QuantumState::pure(comps.pop().unwrap().1),
        _ => QuantumState::ensemble(comps),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub target: String,
    pub measured: String,
    pub pass: bool,
    /// Measured value, when scalar.
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub library: String,
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub schedule: Option<ControlSchedule>,
    pub cutoffs: Vec<usize>,
    pub samples: usize,
    pub tail_mass: f64,
    pub blocks: usize,
    pub step_report: StepReport,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub label: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summaries: BTreeMap<String, f64>,
    /// Interior exceptional points as fractions of `τ`.
    pub eps: Vec<f64>,
    pub checkpoints: Vec<CheckResult>,
    pub provenance: Provenance,
}

impl ResultBundle {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn passed(&self) -> bool {
        self.checkpoints.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checkpoints.iter().filter(|c| !c.pass).collect()
    }

    /// Header row and 17-significant-digit values.
    pub fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("timeseries.csv"), self.csv())?;
        std::fs::write(dir.join("provenance.json"), serde_json::to_string_pretty(&self.provenance)?)?;
        let report = serde_json::json!({
            "label": self.label,
            "config_hash": self.provenance.config_hash,
            "passed": self.passed(),
            "checkpoints": self.checkpoints,
            "summaries": self.summaries,
            "exceptional_points": self.eps,
        });
        std::fs::write(dir.join("checkpoints.json"), serde_json::to_string_pretty(&report)?)?;
        Ok(())
    }
}

fn label_for(cfg: &ExperimentConfig) -> String {
    let base = cfg.preset.clone().unwrap_or_else(|| "custom".into());
    if !cfg.verify_lambdas.is_empty() {
        if let Some(l) = cfg.lambda() {
            return format!("{base}-lambda{l}");
        }
    }
    base
}

/// Runs one experiment; the config is expanded first.
pub fn run(config: &ExperimentConfig) -> Result<ResultBundle> {
    let cfg = config.clone().expand()?;
    match cfg.kind {
        ExperimentKind::Passage => run_passage(cfg),
        ExperimentKind::LindbladCheck => run_lindblad(cfg),
    }
}

struct Table {
    columns: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl Table {
    fn new(times: &[f64], tau: f64) -> Self {
        Table { columns: vec!["t_over_tau".into()], data: vec![times.iter().map(|t| t / tau).collect()] }
    }

    fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push(name.into());
        self.data.push(values);
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.data[0].len();
        (0..n).map(|i| self.data.iter().map(|c| c[i]).collect()).collect()
    }
}

fn run_passage(cfg: ExperimentConfig) -> Result<ResultBundle> {
    let schedule = cfg.resolved_schedule()?;
    let tau = schedule.tau;
    let space = FockSpace::new(&cfg.space.cutoffs)?;
    let prepared = prepare_state(&space, &cfg.initial_state, cfg.space.max_tail)?;
    let grid = cfg.sample_grid(tau);
    let icfg = cfg.integrator.clone().with_samples(grid.clone());
    let initial = match cfg.evolution {
        EvolutionMode::Density => match &prepared.state.data {
            StateData::Pure(v) => QuantumState::ensemble(vec![(1.0, v.clone())]),
            _ => prepared.state.clone(),
        },
        _ => prepared.state.clone(),
    };
    let traj: Trajectory = match cfg.evolution {
        EvolutionMode::Ket => evolve_ket(&space, &schedule, &initial, &icfg)?,
        EvolutionMode::Dual => evolve_dual(&space, &schedule, &initial, &icfg)?,
        EvolutionMode::Density => evolve_density(&space, &schedule, &initial, &icfg)?,
    };

    let mut table = Table::new(&traj.times, tau);
    let mut summaries = BTreeMap::new();
    for pair in &cfg.outputs.fidelities {
        let idx = space.index(pair)?;
        table.push(format!("F_{}_{}", pair[0], pair[1]), traj.states.iter().map(|s| s.population(idx)).collect());
    }
    let trace: Vec<f64> = traj.states.iter().map(|s| s.trace()).collect();
    summaries.insert("final_trace".into(), *trace.last().unwrap());
    table.push(if cfg.evolution == EvolutionMode::Density { "trace" } else { "sum_F" }, trace);
    if cfg.evolution != EvolutionMode::Dual {
        if let Some(target) = passage_target(&space, &schedule, &prepared.state)? {
            let t = UhlmannTarget::new(&target);
            let f: Vec<f64> = traj.states.par_iter().map(|s| t.fidelity(s)).collect::<Result<_>>()?;
            summaries.insert("final_target_fidelity".into(), *f.last().unwrap());
            table.push("F_target", f);
        }
    }
    let pulses: Vec<_> = grid.iter().map(|&t| synthesize_pulses(&schedule, t)).collect::<Result<_>>()?;
    table.push("J", pulses.iter().map(|p| p.j).collect());
    table.push("Delta", pulses.iter().map(|p| p.delta).collect());
    if cfg.outputs.spectrum {
        let sp = track_spectrum(&schedule, &grid)?;
        table.push("Re_E_plus", sp.iter().map(|p| p.e_plus.re).collect());
        table.push("Im_E_plus", sp.iter().map(|p| p.e_plus.im).collect());
        table.push("Re_E_minus", sp.iter().map(|p| p.e_minus.re).collect());
        table.push("Im_E_minus", sp.iter().map(|p| p.e_minus.im).collect());
    }
    if cfg.outputs.phases {
        let ph = global_phase(&schedule, &grid)?;
        table.push("f_r", ph.f_r);
        table.push("X", ph.x);
    }
    if cfg.outputs.scattering {
        let g1 = cfg.outputs.gamma_1.expect("expanded");
        let ss: Vec<_> = grid.iter().map(|&t| scattering_matrix(&schedule, t, g1, 0.0)).collect::<Result<_>>()?;
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            table.push(format!("S{}{}_re", r + 1, c + 1), ss.iter().map(|s| s.s[(r, c)].re).collect());
            table.push(format!("S{}{}_im", r + 1, c + 1), ss.iter().map(|s| s.s[(r, c)].im).collect());
        }
        summaries.insert("nonreciprocity".into(), nonreciprocity(&schedule, g1)?);
    }
    if schedule.is_pt_setting() {
        let (imag, dev, count) = pt_spectrum_summary(&schedule, &grid)?;
        summaries.insert("pt_max_imag".into(), imag);
        summaries.insert("pt_closed_form_dev".into(), dev);
        summaries.insert("pt_unbroken_samples".into(), count as f64);
    }
    summaries.insert("norm_restoration".into(), check_norm_restoration(&schedule));
    summaries.insert("tail_mass".into(), prepared.tail_mass);
    let eps: Vec<f64> = detect_eps(&schedule, &uniform_grid(tau, cfg.outputs.ep_grid))?.into_iter().map(|t| t / tau).collect();
    summaries.insert("ep_count".into(), eps.len() as f64);

    let rows = table.rows();
    let mut bundle = ResultBundle {
        label: label_for(&cfg),
        columns: table.columns,
        rows,
        summaries,
        eps,
        checkpoints: Vec::new(),
        provenance: Provenance {
            library: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: digest(&cfg),
            schedule: Some(schedule),
            cutoffs: space.cutoffs().to_vec(),
            samples: grid.len(),
            tail_mass: prepared.tail_mass,
            blocks: traj.meta.blocks,
            step_report: traj.meta.report,
            config: cfg,
        },
    };
    bundle.checkpoints = evaluate(&bundle);
    Ok(bundle)
}

/// Largest `|Im E±|` and deviation of the eigensolver from `±√(J²−γ_a²)` over unbroken samples
/// away from the exceptional points.
fn pt_spectrum_summary(s: &ControlSchedule, grid: &[f64]) -> Result<(f64, f64, usize)> {
    let (mut imag, mut dev, mut count) = (0.0f64, 0.0f64, 0);
    let tracked = track_spectrum(s, grid)?;
    for (&t, sp) in grid.iter().zip(&tracked) {
        if pt_classify(s, t)?.phase != PtPhase::Unbroken {
            continue;
        }
        let p = synthesize_pulses(s, t)?;
        let d = p.j * p.j - s.gamma_a * s.gamma_a;
        if d <= 1e-6 * p.j * p.j {
            continue;
        }
        let e = d.sqrt();
        let mut eig: Vec<C64> = p.ha.clone().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_else(|| {
            let (_, tm) = nalgebra::linalg::Schur::new(p.ha.clone()).unpack();
            vec![tm[(0, 0)], tm[(1, 1)]]
        });
        eig.sort_by(|a, b| b.re.total_cmp(&a.re));
        imag = imag.max(sp.e_plus.im.abs()).max(sp.e_minus.im.abs());
        dev = dev.max((eig[0] - e).norm()).max((eig[1] + e).norm());
        count += 1;
    }
    Ok((imag, dev, count))
}

fn random_lindblad(rng: &mut ChaCha8Rng) -> LindbladParams {
    LindbladParams {
        eta: rng.gen_range(0.0..1.0),
        beta: rng.gen_range(0.0..0.5),
        chi: rng.gen_range(0.0..0.5),
        u: rng.gen_range(0.0..1.0),
        v: rng.gen_range(0.0..1.0),
        big_theta: if rng.gen_bool(0.5) { 0.0 } else { PI },
        omega_a: rng.gen_range(-1.0..1.0),
        omega_b: rng.gen_range(-1.0..1.0),
        j: rng.gen_range(-1.0..1.0),
        phi: rng.gen_range(0.0..2.0 * PI),
    }
}

/// `n` seeded random parameter sets for the master equation.
pub fn lindblad_draws(seed: u64, n: usize) -> Vec<LindbladParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_lindblad(&mut rng)).collect()
}

fn run_lindblad(cfg: ExperimentConfig) -> Result<ResultBundle> {
    let spec = cfg.lindblad.clone().expect("validated");
    let space = FockSpace::new(&cfg.space.cutoffs)?;
    let prepared = prepare_state(&space, &cfg.initial_state, cfg.space.max_tail)?;
    let grid = cfg.sample_grid(spec.tau);
    let icfg = cfg.integrator.clone().with_samples(grid.clone());
    let traj = evolve_lindblad(&space, &spec.params, &prepared.state, &icfg)?;
    let a = space.annihilation(0)?;
    let b = space.annihilation(1)?;
    let number = |m: usize| space.hop(m, m);
    let (na, nb) = (number(0)?, number(1)?);
    let mut table = Table::new(&traj.times, spec.tau);
    let rhos: Vec<_> = traj.states.iter().map(|s| s.to_density()).collect();
    let ev = |op: &crate::linalg::Triplets| rhos.iter().map(|r| expectation(op, r)).collect::<Vec<C64>>();
    let (ea, eb) = (ev(&a), ev(&b));
    table.push("trace", traj.observable("trace").unwrap().to_vec());
    table.push("a_re", ea.iter().map(|z| z.re).collect());
    table.push("a_im", ea.iter().map(|z| z.im).collect());
    table.push("b_re", eb.iter().map(|z| z.re).collect());
    table.push("b_im", eb.iter().map(|z| z.im).collect());
    table.push("n_a", ev(&na).iter().map(|z| z.re).collect());
    table.push("n_b", ev(&nb).iter().map(|z| z.re).collect());

    let main = first_moment_check(&space, &spec.params, &prepared.state, &icfg)?;
    let draws = lindblad_draws(spec.seed, spec.draws);
    let worst_draw = draws
        .par_iter()
        .map(|p| first_moment_check(&space, p, &prepared.state, &icfg))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let mut summaries = BTreeMap::new();
    summaries.insert("first_moment_residual_preset".into(), main);
    summaries.insert("first_moment_residual_draws".into(), worst_draw);
    summaries.insert("first_moment_residual".into(), main.max(worst_draw));
    summaries.insert("draws".into(), spec.draws as f64);
    summaries.insert("tail_mass".into(), prepared.tail_mass);

    let rows = table.rows();
    let mut bundle = ResultBundle {
        label: label_for(&cfg),
        columns: table.columns,
        rows,
        summaries,
        eps: Vec::new(),
        checkpoints: Vec::new(),
        provenance: Provenance {
            library: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: digest(&cfg),
            schedule: None,
            cutoffs: space.cutoffs().to_vec(),
            samples: grid.len(),
            tail_mass: prepared.tail_mass,
            blocks: 1,
            step_report: traj.meta.report,
            config: cfg,
        },
    };
    bundle.checkpoints = evaluate(&bundle);
    Ok(bundle)
}

/// Vertex of the parabola through three samples around a discrete maximum.
fn refine_peak(t: &[f64], y: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= t.len() {
        return (t[i], y[i]);
    }
    let (x0, x1, x2) = (t[i - 1], t[i], t[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    let c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom;
    if !(a < 0.0) {
        return (t[i], y[i]);
    }
    let xv = -b / (2.0 * a);
    if xv < x0 || xv > x2 {
        return (t[i], y[i]);
    }
    (xv, c - b * b / (4.0 * a))
}

fn missing(name: &str, what: &str) -> CheckResult {
    CheckResult { name: name.into(), target: format!("{what} available"), measured: "missing".into(), pass: false, value: None }
}

/// Evaluates the bundle's configured checkpoints.
pub fn evaluate(bundle: &ResultBundle) -> Vec<CheckResult> {
    let cfg = &bundle.provenance.config;
    let ts = bundle.column("t_over_tau").unwrap_or_default();
    let lambda = cfg.lambda();
    let mut out = Vec::new();
    for cp in &cfg.checkpoints {
        if let Some(l) = cp.lambda {
            if lambda.map_or(true, |x| (x - l).abs() > 1e-9) {
                continue;
            }
        }
        let name = cp.name.as_str();
        let r = match &cp.check {
            Check::ValueAt { observable, t, expected, tol } => match bundle.column(observable) {
                None => missing(name, observable),
                Some(ys) => {
                    let i = nearest(&ts, *t);
                    let v = ys[i];
                    CheckResult {
                        name: name.into(),
                        target: format!("{observable}({t}τ) = {expected} ± {}", num(*tol)),
                        measured: format!("{v:.6} at {:.4}τ", ts[i]),
                        pass: (v - expected).abs() <= *tol,
                        value: Some(v),
                    }
                }
            },
            Check::Peak { observable, t, expected, tol, t_tol } => match bundle.column(observable) {
                None => missing(name, observable),
                Some(ys) => {
                    let i = ys.iter().enumerate().fold(0, |best, (k, &y)| if y > ys[best] { k } else { best });
                    let (tp, yp) = refine_peak(&ts, &ys, i);
                    CheckResult {
                        name: name.into(),
                        target: format!("peak {observable} = {expected} ± {} at {t}τ ± {t_tol}τ", num(*tol)),
                        measured: format!("{yp:.6} at {tp:.4}τ"),
                        pass: (yp - expected).abs() <= *tol && (tp - t).abs() <= *t_tol,
                        value: Some(yp),
                    }
                }
            },
            Check::MaxOver { observable, from, to, below } => match bundle.column(observable) {
                None => missing(name, observable),
                Some(ys) => {
                    let m = ts
                        .iter()
                        .zip(&ys)
                        .filter(|(t, _)| **t >= from - 1e-12 && **t <= to + 1e-12)
                        .fold(f64::NEG_INFINITY, |m, (_, &y)| m.max(y));
                    CheckResult {
                        name: name.into(),
                        target: format!("max {observable} on [{from}τ, {to}τ] < {below}"),
                        measured: format!("{m:.6}"),
                        pass: m < *below,
                        value: Some(m),
                    }
                }
            },
            Check::EpTimes { expected, tol } => {
                let pass = bundle.eps.len() == expected.len() && bundle.eps.iter().zip(expected).all(|(a, b)| (a - b).abs() <= *tol);
                let show = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
                CheckResult {
                    name: name.into(),
                    target: format!("EPs at [{}]τ ± {tol}τ", show(expected)),
                    measured: format!("[{}]τ", show(&bundle.eps)),
                    pass,
                    value: None,
                }
            }
            Check::SummaryBelow { summary, below } => match bundle.summaries.get(summary) {
                None => missing(name, summary),
                Some(&v) => CheckResult {
                    name: name.into(),
                    target: format!("{summary} < {below:e}"),
                    measured: format!("{v:.3e}"),
                    pass: v < *below,
                    value: Some(v),
                },
            },
            Check::SummaryNear { summary, expected, tol } => match bundle.summaries.get(summary) {
                None => missing(name, summary),
                Some(&v) => CheckResult {
                    name: name.into(),
                    target: format!("{summary} = {expected} ± {}", num(*tol)),
                    measured: format!("{v:.6}"),
                    pass: (v - expected).abs() <= *tol,
                    value: Some(v),
                },
            },
        };
        out.push(r);
    }
    out
}

fn num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e4) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn nearest(ts: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &s) in ts.iter().enumerate() {
        if (s - t).abs() < (ts[best] - t).abs() {
            best = i;
        }
    }
    best
}

/// Bounds for the method-level checks added by [`verify`].
pub const TRIANGULAR_TOL: f64 = 1e-8;
pub const PASSAGE_TOL: f64 = 1e-6;

/// Triangularization residual over the run grid and the `n = 5` ket passage.
pub fn derived_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    if cfg.kind != ExperimentKind::Passage {
        return Ok(Vec::new());
    }
    let s = cfg.resolved_schedule()?;
    let frame = s.frame();
    let mut worst = 0.0f64;
    for t in uniform_grid(s.tau, cfg.outputs.intervals) {
        let r = rotated_coefficients(&synthesize_pulses(&s, t)?.ha, &frame, t)?;
        worst = worst.max(check_upper_triangular(&r, TRIANGULAR_TOL).residual);
    }
    let tri = CheckResult {
        name: "triangularization".into(),
        target: format!("max |(H^μ − A)_21| < {TRIANGULAR_TOL:e}"),
        measured: format!("{worst:.3e}"),
        pass: worst < TRIANGULAR_TOL,
        value: Some(worst),
    };
    let n = 5;
    let space = FockSpace::new(&[n, n])?;
    let icfg = cfg.integrator.clone().with_samples(uniform_grid(s.tau, 100));
    let rep = passage_check(&space, &s, n, PassageKind::Ket, &icfg)?;
    let overlap = CheckResult {
        name: "passage_overlap".into(),
        target: format!("1 − |⟨χ|ψ⟩| < {PASSAGE_TOL:e} (n = {n})"),
        measured: format!("{:.3e}", rep.overlap_deficit),
        pass: rep.overlap_deficit < PASSAGE_TOL,
        value: Some(rep.overlap_deficit),
    };
    let ratio = CheckResult {
        name: "passage_norm".into(),
        target: format!("|‖ψ‖e^{{nX}} − 1| < {PASSAGE_TOL:e} (n = {n})"),
        measured: format!("{:.3e}", rep.max_norm_ratio_error),
        pass: rep.max_norm_ratio_error < PASSAGE_TOL,
        value: Some(rep.max_norm_ratio_error),
    };
    Ok(vec![tri, overlap, ratio])
}

/// Configs run by `verify` for one preset: one per listed λ.
pub fn verify_configs(name: &str, overrides: &Overrides) -> Result<Vec<ExperimentConfig>> {
    let base = overrides.apply(preset(name)?)?;
    if base.verify_lambdas.is_empty() || overrides.lambda.is_some() {
        return Ok(vec![base]);
    }
    base.verify_lambdas
        .iter()
        .map(|&l| Overrides { lambda: Some(l), ..Default::default() }.apply(base.clone()))
        .collect()
}

/// Runs presets (or `all`) with their checkpoints and the method-level checks.
pub fn verify(target: &str, overrides: &Overrides) -> Result<Vec<ResultBundle>> {
    let names: Vec<&str> = if target == "all" { preset_names() } else { vec![target] };
    let mut configs = Vec::new();
    for n in names {
        configs.extend(verify_configs(n, overrides)?);
    }
    configs
        .par_iter()
        .map(|cfg| {
            let mut b = run(cfg)?;
            b.checkpoints.extend(derived_checks(&b.provenance.config)?);
            Ok(b)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    Gamma1,
    Cutoff,
    Tol,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "gamma_1" | "gamma1" => Ok(SweepParam::Gamma1),
            "cutoff" => Ok(SweepParam::Cutoff),
            "tol" => Ok(SweepParam::Tol),
            other => Err(Error::Config(format!("unknown sweep parameter `{other}` (lambda, gamma_1, cutoff, tol)"))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Gamma1 => "gamma_1",
            SweepParam::Cutoff => "cutoff",
            SweepParam::Tol => "tol",
        }
    }

    fn overrides(self, value: f64, base: &Overrides) -> Result<Overrides> {
        let mut o = base.clone();
        match self {
            SweepParam::Lambda => o.lambda = Some(value),
            SweepParam::Gamma1 => o.gamma_1 = Some(value),
            SweepParam::Cutoff => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("cutoff {value} is not a nonnegative integer")));
                }
                o.cutoff = Some(value as usize);
            }
            SweepParam::Tol => o.tol = Some(value),
        }
        Ok(o)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub bundles: Vec<ResultBundle>,
}

/// One run per value, concurrently.
pub fn sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64], overrides: &Overrides) -> Result<SweepResult> {
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| param.overrides(v, overrides)?.apply(base.clone()))
        .collect::<Result<_>>()?;
    let bundles = configs.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { param, values: values.to_vec(), bundles })
}

impl SweepResult {
    /// One row per value: final-row observables, values at the configured extra times, summaries.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let first = &self.bundles[0];
        let cfg = &first.provenance.config;
        let mut columns = vec![self.param.name().to_string(), "passed".into()];
        let obs: Vec<&String> = first.columns.iter().skip(1).collect();
        columns.extend(obs.iter().map(|c| format!("final_{c}")));
        for t in &cfg.outputs.extra_times {
            columns.extend(obs.iter().map(|c| format!("{c}@{t}")));
        }
        let keys: Vec<&String> = first.summaries.keys().collect();
        columns.extend(keys.iter().map(|k| k.to_string()));
        let rows = self
            .values
            .iter()
            .zip(&self.bundles)
            .map(|(&v, b)| {
                let mut row = vec![v, if b.passed() { 1.0 } else { 0.0 }];
                let last = b.rows.last().unwrap();
                row.extend(obs.iter().map(|c| b.column(c).map_or(f64::NAN, |_| last[b.columns.iter().position(|x| x == *c).unwrap()])));
                let ts = b.column("t_over_tau").unwrap_or_default();
                for t in &cfg.outputs.extra_times {
                    let i = nearest(&ts, *t);
                    row.extend(obs.iter().map(|c| b.column(c).map_or(f64::NAN, |col| col[i])));
                }
                row.extend(keys.iter().map(|k| b.summaries.get(*k).copied().unwrap_or(f64::NAN)));
                row
            })
            .collect();
        (columns, rows)
    }

    pub fn csv(&self) -> String {
        let (columns, rows) = self.table();
        let mut out = columns.join(",");
        out.push('\n');
        for r in rows {
            let line = r.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "{line}");
        }
        out
    }
}
