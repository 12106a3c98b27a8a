//! Declarative experiments: configuration, presets, single runs and parameter sweeps.
//!
//! Everything here is deterministic for a fixed configuration; sweeps may run
//! in parallel but rows are always returned in parameter order.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::studies::{self, with_pool};
use crate::analysis::{shape_distance_errors, Soliton};
use crate::density::{parse_density, DensityPoly, Realisation};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::integrators::{NewtonConfig, Problem, SchemeKind, SchemeRun, SkewOp};
use crate::polarisation::{polarise, polarise_gkdv, PolarisedDensity};
use crate::Rational;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Equation {
    /// `H = ∫ ½u_x² − ⅓u³`, `D = ∂x`.
    Kdv,
    /// `H = ∫ ½u_x² − u^p/p`, `D = ∂x`.
    Gkdv { p: u32 },
    /// `H = ∫ ½u_x²`, `D = ∂x`, i.e. `u_t + u_xxx = 0`.
    Airy,
    /// Any density in the DSL, with `D = ∂x`.
    Custom { density: String },
}

impl Equation {
    pub fn density(&self) -> Result<DensityPoly<Rational>> {
        match self {
            Equation::Kdv => parse_density("(1/2)*u_x^2 - (1/3)*u^3"),
            Equation::Gkdv { p } => {
                if *p < 3 {
                    return Err(Error::InvalidParameter(format!("gKdV needs p >= 3, got {p}")));
                }
                parse_density(&format!("(1/2)*u_x^2 - (1/{p})*u^{p}"))
            }
            Equation::Airy => parse_density("(1/2)*u_x^2"),
            Equation::Custom { density } => parse_density(density),
        }
    }

    /// Soliton exponent, when the equation has a known solitary wave.
    pub fn soliton_power(&self) -> Option<u32> {
        match self {
            Equation::Kdv => Some(3),
            Equation::Gkdv { p } => Some(*p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    Soliton { c: f64 },
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_points: usize,
    pub length: f64,
    #[serde(default)]
    pub left: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid1D<f64>> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {}", self.length)));
        }
        Grid1D::over(self.n_points, self.left, self.length)
    }
}

/// Difference operator standing in for `u_x` in the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstDerivative {
    /// δ+, giving `δ⟨2⟩` in the variational derivative and `δ⟨3⟩` in the scheme.
    #[default]
    Forward,
    /// δ⟨1⟩.
    Centered,
}

fn default_theta() -> f64 {
    0.5
}

fn default_blow_up() -> f64 {
    studies::BLOW_UP_FACTOR
}

fn default_log_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub equation: Equation,
    pub scheme: SchemeKind,
    pub grid: GridConfig,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Polarisation arguments; defaults to `max(2, ⌈p/2⌉)`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default)]
    pub first_derivative: FirstDerivative,
    #[serde(default)]
    pub newton: NewtonConfig,
    /// Stop once the sup-norm exceeds this multiple of its initial value.
    #[serde(default = "default_blow_up")]
    pub blow_up_factor: f64,
    /// Write every n-th step to the per-step log (the last step is always written).
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!("t_end ({}) must be at least dt ({})", self.t_end, self.dt)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::ThetaOutOfRange(self.theta));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidParameter("log_every must be at least 1".into()));
        }
        self.grid.build()?;
        let density = self.equation.density()?;
        if self.scheme == SchemeKind::LiCons {
            self.polarisation(&density)?;
        }
        Ok(())
    }

    pub fn initial_data(&self) -> InitialData {
        self.initial.unwrap_or(match self.equation {
            Equation::Airy => InitialData::Sine,
            _ => InitialData::Soliton { c: 1.0 },
        })
    }

    fn polarisation(&self, density: &DensityPoly<Rational>) -> Result<PolarisedDensity<Rational>> {
        let theta = crate::scalar::convert_coefficient::<f64, Rational>(&self.theta);
        let natural = (density.degree() as usize).div_ceil(2).max(2);
        let k = self.k.unwrap_or(natural);
        match self.equation {
            Equation::Gkdv { p } if k == natural => polarise_gkdv(p, theta),
            _ => polarise(density, k, theta),
        }
    }

    /// Soliton used for diagnostics, if the initial data is one.
    pub fn soliton(&self) -> Result<Option<Soliton>> {
        match (self.initial_data(), self.equation.soliton_power()) {
            (InitialData::Soliton { c }, Some(p)) => Ok(Some(Soliton::gkdv(p, c)?)),
            _ => Ok(None),
        }
    }

    /// Builds the problem and the initial state.
    pub fn setup(&self) -> Result<(Problem<f64>, GridFunction<f64>)> {
        self.validate()?;
        let grid = self.grid.build()?;
        let density = self.equation.density()?;
        let polarised = self.polarisation(&density)?;
        let realisation = match self.first_derivative {
            FirstDerivative::Forward => Realisation::forward(grid),
            FirstDerivative::Centered => Realisation::standard(grid),
        };
        let problem = Problem::new(&density, Some(&polarised), &realisation, SkewOp::centered(grid))?;
        let u0 = match self.initial_data() {
            InitialData::Sine => GridFunction::sample(grid, f64::sin),
            InitialData::Soliton { c } => {
                let p = self.equation.soliton_power().unwrap_or(3);
                Soliton::gkdv(p, c)?.sample(grid, 0.0)
            }
        };
        Ok((problem, u0))
    }

    pub fn start(&self) -> Result<SchemeRun<f64>> {
        let (problem, u0) = self.setup()?;
        SchemeRun::new(self.scheme, problem, u0, self.dt, self.newton)
    }

    /// Exact solution at `t`, where one is known in closed form.
    pub fn exact(&self, t: f64) -> Result<Option<GridFunction<f64>>> {
        let grid = self.grid.build()?;
        Ok(match (&self.equation, self.initial_data()) {
            (Equation::Airy, InitialData::Sine) => Some(GridFunction::sample(grid, |x| (x + t).sin())),
            _ => None,
        })
    }
}

/// Names of the built-in presets.
pub const PRESETS: [&str; 9] = [
    "kdv-soliton-fi",
    "kdv-soliton-li",
    "kdv-soliton-fi-cons",
    "kdv-soliton-li-cons",
    "airy",
    "airy-stable",
    "airy-unstable",
    "gkdv-p4",
    "gkdv-p6",
];

fn soliton_grid() -> GridConfig {
    GridConfig { n_points: 32, length: 10.0, left: -5.0 }
}

fn airy_grid() -> GridConfig {
    GridConfig { n_points: 64, length: 2.0 * std::f64::consts::PI, left: 0.0 }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = |equation, scheme, grid, dt, t_end| ExperimentConfig {
        name: name.to_string(),
        equation,
        scheme,
        grid,
        dt,
        t_end,
        theta: 0.5,
        k: None,
        initial: None,
        first_derivative: FirstDerivative::Forward,
        newton: NewtonConfig::default(),
        blow_up_factor: studies::BLOW_UP_FACTOR,
        log_every: 1,
        output: None,
    };
    let kdv = |scheme| base(Equation::Kdv, scheme, soliton_grid(), 0.1, 100.0);
    Ok(match name {
        "kdv-soliton-fi" => kdv(SchemeKind::FiMidpoint),
        "kdv-soliton-li" => kdv(SchemeKind::LiNaive),
        "kdv-soliton-fi-cons" => kdv(SchemeKind::FiCons),
        "kdv-soliton-li-cons" => kdv(SchemeKind::LiCons),
        "airy" | "airy-stable" => {
            ExperimentConfig { log_every: 100, ..base(Equation::Airy, SchemeKind::LiCons, airy_grid(), 0.01, 1000.0) }
        }
        "airy-unstable" => ExperimentConfig { theta: 0.49, ..base(Equation::Airy, SchemeKind::LiCons, airy_grid(), 0.01, 10.0) },
        "gkdv-p4" => base(Equation::Gkdv { p: 4 }, SchemeKind::LiCons, soliton_grid(), 0.01, 10.0),
        "gkdv-p6" => base(Equation::Gkdv { p: 6 }, SchemeKind::LiCons, soliton_grid(), 0.01, 10.0),
        other => return Err(Error::InvalidParameter(format!("unknown preset '{other}'; try one of {}", PRESETS.join(", ")))),
    })
}

/// One row of the per-step log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub step: usize,
    pub t: f64,
    #[serde(rename = "H_d")]
    pub h_d: f64,
    #[serde(rename = "polarised_H_d")]
    pub polarised_h_d: Option<f64>,
    pub sup_norm: f64,
    pub solve_count: usize,
    pub shape_err: Option<f64>,
    pub distance_err: Option<f64>,
}

pub const STEP_COLUMNS: [&str; 8] = ["step", "t", "H_d", "polarised_H_d", "sup_norm", "solve_count", "shape_err", "distance_err"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub schema: u32,
    pub name: String,
    pub scheme: SchemeKind,
    pub dt: f64,
    pub theta: f64,
    pub k: Option<usize>,
    pub steps: usize,
    pub t_final: f64,
    pub solve_count: usize,
    pub bootstrap_solves: usize,
    pub mean_newton_iterations: Option<f64>,
    /// `max_n |H_d(U^n) − H_d(U^0)| / |H_d(U^0)|`.
    pub max_rel_dev_hamiltonian: f64,
    /// Same for the polarised invariant (`li-cons` only).
    pub max_rel_dev_polarised: Option<f64>,
    pub final_energy_error: f64,
    pub final_shape_err: Option<f64>,
    pub final_distance_err: Option<f64>,
    pub final_exact_error: Option<f64>,
    pub initial_sup: f64,
    pub max_sup: f64,
    pub blew_up: bool,
    pub blow_up_step: Option<usize>,
    pub failure: Option<Failure>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<StepRow>,
    pub summary: RunSummary,
    pub final_state: GridFunction<f64>,
}

fn rel_dev(values: impl Iterator<Item = f64>) -> f64 {
    let mut first = None;
    let mut worst = 0.0f64;
    for v in values {
        let f = *first.get_or_insert(v);
        worst = worst.max((v - f).abs() / f.abs().max(f64::MIN_POSITIVE));
    }
    worst
}

/// Runs one experiment to `t_end`, to blow-up, or to the first failed step.
///
/// Failures do not abort: they end the run and are recorded in the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut run = cfg.start()?;
    let soliton = cfg.soliton()?;
    let initial_sup = run.history().next().map(|u| u.sup_norm()).unwrap_or(0.0);
    let mut rows = Vec::new();
    let mut max_sup = initial_sup;
    let mut blow_up_step = None;
    let mut failure = None;
    let record = |run: &SchemeRun<f64>, rows: &mut Vec<StepRow>| -> Result<()> {
        let u = run.current();
        let t = run.t();
        let errs = soliton.as_ref().map(|s| shape_distance_errors(u, t, s));
        let entry = run.conservation_log.last().expect("logged on every step");
        rows.push(StepRow {
            step: run.step_index(),
            t,
            h_d: entry.hamiltonian,
            polarised_h_d: entry.polarised,
            sup_norm: u.sup_norm(),
            solve_count: run.total_solves(),
            shape_err: errs.map(|e| e.shape_err),
            distance_err: errs.map(|e| e.distance_err),
        });
        Ok(())
    };
    let start: Vec<GridFunction<f64>> = run.history().cloned().collect();
    let first_logged = run.step_index() + 1 - start.len();
    let mut h_start = Vec::with_capacity(start.len());
    for (j, u) in start.iter().enumerate().take(start.len() - 1) {
        let errs = soliton.as_ref().map(|s| shape_distance_errors(u, j as f64 * cfg.dt, s));
        let h = run.problem().density.hamiltonian(u)?;
        h_start.push(h);
        rows.push(StepRow {
            step: first_logged + j,
            t: (first_logged + j) as f64 * cfg.dt,
            h_d: h,
            polarised_h_d: None,
            sup_norm: u.sup_norm(),
            solve_count: 0,
            shape_err: errs.map(|e| e.shape_err),
            distance_err: errs.map(|e| e.distance_err),
        });
    }
    record(&run, &mut rows)?;
    let half = 0.5 * cfg.dt;
    while run.t() + half < cfg.t_end {
        if let Err(e) = run.step() {
            failure = Some(Failure { step: run.step_index() + 1, message: e.to_string() });
            break;
        }
        let sup = run.current().sup_norm();
        max_sup = max_sup.max(if sup.is_finite() { sup } else { f64::INFINITY });
        let exploded = !(sup <= cfg.blow_up_factor * initial_sup);
        let last = run.t() + half >= cfg.t_end || exploded;
        if run.step_index() % cfg.log_every == 0 || last {
            record(&run, &mut rows)?;
        }
        if exploded {
            blow_up_step = Some(run.step_index());
            break;
        }
    }
    if failure.is_some() && rows.last().map(|r| r.step) != Some(run.step_index()) {
        record(&run, &mut rows)?;
    }
    let log = &run.conservation_log;
    let h0 = h_start.first().copied().or(log.first().map(|e| e.hamiltonian)).unwrap_or(0.0);
    let final_exact_error = cfg.exact(run.t())?.map(|ex| run.current().sub(&ex).map(|d| d.sup_norm())).transpose()?;
    let summary = RunSummary {
        schema: SCHEMA_VERSION,
        name: cfg.name.clone(),
        scheme: cfg.scheme,
        dt: cfg.dt,
        theta: cfg.theta,
        k: run.problem().polarised.as_ref().map(|p| p.k()).filter(|_| cfg.scheme == SchemeKind::LiCons),
        steps: run.step_index(),
        t_final: run.t(),
        solve_count: run.solve_count,
        bootstrap_solves: run.bootstrap_solves,
        mean_newton_iterations: (!run.newton_iters_log.is_empty())
            .then(|| run.newton_iters_log.iter().sum::<usize>() as f64 / run.newton_iters_log.len() as f64),
        max_rel_dev_hamiltonian: rel_dev(std::iter::once(h0).chain(h_start.iter().copied()).chain(log.iter().map(|e| e.hamiltonian))),
        max_rel_dev_polarised: (cfg.scheme == SchemeKind::LiCons).then(|| rel_dev(log.iter().filter_map(|e| e.polarised))),
        final_energy_error: log.last().map(|e| (e.hamiltonian - h0).abs()).unwrap_or(0.0),
        final_shape_err: rows.last().and_then(|r| r.shape_err),
        final_distance_err: rows.last().and_then(|r| r.distance_err),
        final_exact_error,
        initial_sup,
        max_sup,
        blew_up: blow_up_step.is_some(),
        blow_up_step,
        failure,
    };
    Ok(RunOutput { rows, summary, final_state: run.current().clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum SweepParam {
    Dt(Vec<f64>),
    Theta(Vec<f64>),
}

/// Where global errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// A `fi-cons` run with the smallest swept Δt divided by 64 (or the closed-form solution when one exists).
    #[default]
    Fine,
    /// Closed-form solution only (soliton or travelling sine).
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub theta: f64,
    pub steps: usize,
    pub global_error: Option<f64>,
    pub solve_count: usize,
    pub total_solves: usize,
    pub max_rel_dev_hamiltonian: Option<f64>,
    pub max_rel_dev_polarised: Option<f64>,
    pub final_energy_error: Option<f64>,
    pub blew_up: bool,
    pub error: Option<String>,
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "scheme",
    "dt",
    "theta",
    "steps",
    "global_error",
    "solve_count",
    "total_solves",
    "max_rel_dev_hamiltonian",
    "max_rel_dev_polarised",
    "final_energy_error",
    "blew_up",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSlope {
    pub scheme: SchemeKind,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub schema: u32,
    pub name: String,
    pub param: SweepParam,
    pub t_end: f64,
    pub reference: String,
    /// Why the reference solution could not be computed, if it failed.
    pub reference_error: Option<String>,
    pub convergence_slopes: Vec<SchemeSlope>,
    /// Endpoint energy-error fit of the `li-cons` runs.
    pub energy_drift: Option<studies::DriftStudy>,
    /// `li-cons` against `fi-cons` at matched global error.
    pub matched_cost: Option<Vec<studies::MatchedCost>>,
    /// For θ sweeps: the smallest θ without blow-up and the largest with.
    pub stable_theta_min: Option<f64>,
    pub unstable_theta_max: Option<f64>,
    pub failed_rows: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// `(t, H_d)` samples of one run.
type EnergyLog = Vec<(f64, f64)>;

struct Job {
    scheme: SchemeKind,
    dt: f64,
    theta: f64,
}

/// Runs `cfg` once per parameter value (and per scheme for Δt sweeps).
///
/// A failed row is reported in the output; the sweep itself only errors on bad input.
pub fn sweep(cfg: &ExperimentConfig, param: &SweepParam, schemes: &[SchemeKind], reference: Reference) -> Result<SweepOutput> {
    cfg.validate()?;
    let schemes: Vec<SchemeKind> = if schemes.is_empty() { vec![cfg.scheme] } else { schemes.to_vec() };
    let jobs: Vec<Job> = match param {
        SweepParam::Dt(dts) if !dts.is_empty() => {
            schemes.iter().flat_map(|&scheme| dts.iter().map(move |&dt| Job { scheme, dt, theta: cfg.theta })).collect()
        }
        SweepParam::Theta(thetas) if !thetas.is_empty() => {
            thetas.iter().map(|&theta| Job { scheme: cfg.scheme, dt: cfg.dt, theta }).collect()
        }
        _ => return Err(Error::InvalidParameter("sweep list must not be empty".into())),
    };
    let mut reference_error = None;
    let reference_state = match cfg.exact(cfg.t_end)? {
        Some(exact) => Some(exact),
        None if reference == Reference::Analytic => match cfg.soliton()? {
            Some(s) => Some(s.sample(cfg.grid.build()?, cfg.t_end)),
            None => None,
        },
        None => match param {
            SweepParam::Dt(dts) => {
                let dt_min = dts.iter().cloned().fold(f64::INFINITY, f64::min);
                let fine = ExperimentConfig { scheme: SchemeKind::FiCons, dt: dt_min / 64.0, ..cfg.clone() };
                let computed = fine.start().and_then(|mut run| {
                    run.run_until(cfg.t_end)?;
                    Ok(run.current().clone())
                });
                match computed {
                    Ok(state) => Some(state),
                    Err(e) => {
                        reference_error = Some(e.to_string());
                        None
                    }
                }
            }
            SweepParam::Theta(_) => None,
        },
    };
    let reference_label = match (&reference_state, cfg.exact(cfg.t_end)?.is_some(), reference) {
        (None, _, _) => "none",
        (Some(_), true, _) => "exact",
        (Some(_), false, Reference::Analytic) => "analytic-soliton",
        (Some(_), false, Reference::Fine) => "fi-cons-dt/64",
    };
    let results: Vec<(SweepRow, Option<EnergyLog>)> = with_pool(|| {
        jobs.par_iter()
            .map(|job| {
                let job_cfg = ExperimentConfig { scheme: job.scheme, dt: job.dt, theta: job.theta, ..cfg.clone() };
                let out = run_experiment(&job_cfg);
                match out {
                    Ok(out) => {
                        let global_error = match (&reference_state, &out.summary.failure, out.summary.blew_up) {
                            (Some(r), None, false) => out.final_state.sub(r).ok().map(|d| d.l2_norm()),
                            _ => None,
                        };
                        let energy = (job.scheme == SchemeKind::LiCons && out.summary.failure.is_none())
                            .then(|| out.rows.iter().map(|r| (r.t, r.h_d)).collect());
                        let s = out.summary;
                        let row = SweepRow {
                            scheme: job.scheme,
                            dt: job.dt,
                            theta: job.theta,
                            steps: s.steps,
                            global_error,
                            solve_count: s.solve_count,
                            total_solves: s.solve_count + s.bootstrap_solves,
                            max_rel_dev_hamiltonian: Some(s.max_rel_dev_hamiltonian),
                            max_rel_dev_polarised: s.max_rel_dev_polarised,
                            final_energy_error: Some(s.final_energy_error),
                            blew_up: s.blew_up,
                            error: s.failure.map(|f| format!("step {}: {}", f.step, f.message)),
                        };
                        (row, energy)
                    }
                    Err(e) => (
                        SweepRow {
                            scheme: job.scheme,
                            dt: job.dt,
                            theta: job.theta,
                            steps: 0,
                            global_error: None,
                            solve_count: 0,
                            total_solves: 0,
                            max_rel_dev_hamiltonian: None,
                            max_rel_dev_polarised: None,
                            final_energy_error: None,
                            blew_up: false,
                            error: Some(e.to_string()),
                        },
                        None,
                    ),
                }
            })
            .collect()
    });
    let (rows, energies): (Vec<SweepRow>, Vec<Option<EnergyLog>>) = results.into_iter().unzip();
    let cost_rows = |scheme: SchemeKind| -> Vec<studies::CostRow> {
        rows.iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| studies::CostRow {
                scheme: r.scheme,
                dt: r.dt,
                steps: r.steps,
                global_error: r.global_error,
                solve_count: r.solve_count,
                total_solves: r.total_solves,
                error: r.error.clone(),
            })
            .collect()
    };
    let mut summary = SweepSummary {
        schema: SCHEMA_VERSION,
        name: cfg.name.clone(),
        param: param.clone(),
        t_end: cfg.t_end,
        reference: reference_label.to_string(),
        reference_error,
        convergence_slopes: Vec::new(),
        energy_drift: None,
        matched_cost: None,
        stable_theta_min: None,
        unstable_theta_max: None,
        failed_rows: rows.iter().filter(|r| r.error.is_some()).count(),
    };
    match param {
        SweepParam::Dt(_) => {
            for &scheme in &schemes {
                let slope = studies::convergence_slope(&cost_rows(scheme), scheme).ok();
                summary.convergence_slopes.push(SchemeSlope { scheme, slope });
            }
            let logs: Vec<(f64, Vec<(f64, f64)>)> =
                rows.iter().zip(&energies).filter_map(|(r, e)| e.clone().map(|log| (r.dt, log))).collect();
            summary.energy_drift = studies::energy_drift_study(&logs).ok();
            if schemes.contains(&SchemeKind::LiCons) && schemes.contains(&SchemeKind::FiCons) {
                summary.matched_cost = studies::matched_cost(&cost_rows(SchemeKind::LiCons), &cost_rows(SchemeKind::FiCons)).ok();
            }
        }
        SweepParam::Theta(_) => {
            let ok = |r: &&SweepRow| r.error.is_none();
            summary.stable_theta_min = rows.iter().filter(ok).filter(|r| !r.blew_up).map(|r| r.theta).reduce(f64::min);
            summary.unstable_theta_max = rows.iter().filter(ok).filter(|r| r.blew_up).map(|r| r.theta).reduce(f64::max);
        }
    }
    Ok(SweepOutput { rows, summary })
}
