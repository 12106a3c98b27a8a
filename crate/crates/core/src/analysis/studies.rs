//! Run-level studies: the Airy stability experiment, global-error and cost
//! sweeps, and energy drift fits.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::density::{parse_density, Realisation};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::integrators::{NewtonConfig, Problem, SchemeKind, SchemeRun, SkewOp};
use crate::polarisation::polarise;

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!("need two positive points for a slope, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Discrete L² distance `sqrt(Σ (a−b)² Δx)`.
pub fn l2_distance(a: &GridFunction<f64>, b: &GridFunction<f64>) -> Result<f64> {
    Ok(a.sub(b)?.l2_norm())
}

/// Worker-thread cap from `POLINT_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("POLINT_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs `f` on a pool capped by `POLINT_THREADS` (or rayon's default).
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AiryOutcome {
    pub theta: f64,
    pub dt: f64,
    pub steps_run: usize,
    pub initial_sup: f64,
    pub sup_norms: Vec<f64>,
    pub blew_up: bool,
    pub blow_up_step: Option<usize>,
    /// `|û_k|` for `k = 0, …, N/2` of the last state.
    pub spectrum: Vec<f64>,
    /// Mode with the largest amplitude at the end of the run.
    pub dominant_mode: usize,
    /// `‖U − sin(x + t)‖∞` at the end of the run.
    pub exact_error: f64,
    pub tau_max: f64,
}

/// Blow-up is declared when the sup-norm exceeds this multiple of its initial value.
pub const BLOW_UP_FACTOR: f64 = 1e3;

/// `u_t + u_xxx = 0` from `sin(x)` with the two-step θ-scheme, i.e. the PAVF
/// scheme for the θ-polarisation of `½u_x²` with `D = δ⟨1⟩`.
pub fn airy_experiment(theta: f64, n_steps: usize, grid: Grid1D<f64>, dt: f64) -> Result<AiryOutcome> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    let density = parse_density::<crate::Rational>("(1/2)*u_x^2")?;
    let pd = polarise(&density, 2, crate::scalar::convert_coefficient::<f64, crate::Rational>(&theta))?;
    let realisation = Realisation::forward(grid);
    let problem = Problem::new(&density, Some(&pd), &realisation, SkewOp::centered(grid))?;
    let u0 = GridFunction::sample(grid, f64::sin);
    let initial_sup = u0.sup_norm();
    let mut run = SchemeRun::new(SchemeKind::LiCons, problem, u0, dt, NewtonConfig::default())?;
    let mut sup_norms = vec![initial_sup];
    sup_norms.extend(run.history().skip(1).map(|u| u.sup_norm()));
    let mut blow_up_step = None;
    while run.step_index() < n_steps {
        run.step()?;
        let s = run.current().sup_norm();
        sup_norms.push(s);
        if !(s <= BLOW_UP_FACTOR * initial_sup) {
            blow_up_step = Some(run.step_index());
            break;
        }
    }
    let spectrum = spectrum(run.current());
    let dominant_mode = spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let t = run.t();
    let exact = GridFunction::sample(grid, |x| (x + t).sin());
    Ok(AiryOutcome {
        theta,
        dt,
        steps_run: run.step_index(),
        initial_sup,
        sup_norms,
        blew_up: blow_up_step.is_some(),
        blow_up_step,
        spectrum,
        dominant_mode,
        exact_error: run.current().sub(&exact)?.sup_norm(),
        tau_max: super::stability::tau_max(grid, dt),
    })
}

/// Magnitudes of the discrete Fourier coefficients `k = 0, …, N/2`.
pub fn spectrum(u: &GridFunction<f64>) -> Vec<f64> {
    let n = u.len();
    let mut buf: Vec<num_complex::Complex<f64>> = u.values().iter().map(|&v| num_complex::Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().take(n / 2 + 1).map(|z| z.norm() / n as f64).collect()
}

/// Bisects on θ for the boundary between blow-up and boundedness in the Airy experiment.
pub fn empirical_threshold(grid: Grid1D<f64>, dt: f64, n_steps: usize, lo: f64, hi: f64, iterations: usize) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if airy_experiment(mid, n_steps, grid, dt)?.blew_up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One row of a Δt sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub steps: usize,
    pub global_error: Option<f64>,
    /// Linear solves of the scheme's own steps.
    pub solve_count: usize,
    /// Including the solves spent on starting values.
    pub total_solves: usize,
    pub error: Option<String>,
}

/// Runs every `(scheme, dt)` pair to `t_end` and measures the L² error against `reference`.
///
/// Rows come back in input order (schemes outer, Δt inner) regardless of scheduling.
pub fn cost_accuracy_sweep(
    make_run: &(dyn Fn(SchemeKind, f64) -> Result<SchemeRun<f64>> + Sync),
    schemes: &[SchemeKind],
    dts: &[f64],
    t_end: f64,
    reference: &GridFunction<f64>,
) -> Vec<CostRow> {
    let jobs: Vec<(SchemeKind, f64)> = schemes.iter().flat_map(|&s| dts.iter().map(move |&dt| (s, dt))).collect();
    with_pool(|| {
        jobs.par_iter()
            .map(|&(scheme, dt)| {
                let outcome = make_run(scheme, dt).and_then(|mut run| {
                    run.run_until(t_end)?;
                    let err = l2_distance(run.current(), reference)?;
                    Ok((run.step_index(), err, run.solve_count, run.total_solves()))
                });
                match outcome {
                    Ok((steps, err, solves, total)) => CostRow {
                        scheme,
                        dt,
                        steps,
                        global_error: Some(err),
                        solve_count: solves,
                        total_solves: total,
                        error: None,
                    },
                    Err(e) => CostRow {
                        scheme,
                        dt,
                        steps: 0,
                        global_error: None,
                        solve_count: 0,
                        total_solves: 0,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    })
}

/// Global-error slope of one scheme's rows.
pub fn convergence_slope(rows: &[CostRow], scheme: SchemeKind) -> Result<f64> {
    let (dts, errs): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.scheme == scheme).filter_map(|r| r.global_error.map(|e| (r.dt, e))).unzip();
    loglog_slope(&dts, &errs)
}

/// Solves `cheap` needs versus what `costly` would need for the same error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedCost {
    pub dt: f64,
    pub error: f64,
    pub cheap_solves: usize,
    pub costly_solves_at_error: f64,
}

/// For each row of `cheap`, interpolates (log-log, linear extrapolation at the
/// ends) the solve count `costly` needs to reach the same global error.
pub fn matched_cost(cheap: &[CostRow], costly: &[CostRow]) -> Result<Vec<MatchedCost>> {
    let mut curve: Vec<(f64, f64)> = costly
        .iter()
        .filter_map(|r| r.global_error.filter(|e| *e > 0.0).map(|e| (e.ln(), (r.total_solves as f64).ln())))
        .collect();
    if curve.len() < 2 {
        return Err(Error::InsufficientData("need two reference cost points".into()));
    }
    curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let interp = |le: f64| -> f64 {
        let idx = curve.windows(2).position(|w| le <= w[1].0).unwrap_or(curve.len() - 2);
        let (a, b) = (curve[idx], curve[idx + 1]);
        let s = if b.0 == a.0 { 0.0 } else { (le - a.0) / (b.0 - a.0) };
        (a.1 + s * (b.1 - a.1)).exp()
    };
    Ok(cheap
        .iter()
        .filter_map(|r| {
            r.global_error.map(|e| MatchedCost {
                dt: r.dt,
                error: e,
                cheap_solves: r.total_solves,
                costly_solves_at_error: interp(e.ln()),
            })
        })
        .collect())
}

/// Endpoint energy errors of several runs and the fitted `Δt` power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftStudy {
    pub dts: Vec<f64>,
    pub endpoint_errors: Vec<f64>,
    /// `None` when all endpoint errors are at round-off level.
    pub slope: Option<f64>,
    /// Secular drift per run: mean energy error over the last 2% of the run
    /// minus the mean over the 2% before it.
    pub trailing_drift: Vec<f64>,
    /// Peak-to-peak energy error over the last 2% of each run.
    pub trailing_spread: Vec<f64>,
}

/// Errors at or below this relative size are treated as round-off and not fitted.
pub const ROUND_OFF_LEVEL: f64 = 1e-12;

/// Fits `|H_d(U^n) − H_d(U^0)|` at the final step against `Δt`.
///
/// Each log is a sequence of `(t, H_d)` pairs.
pub fn energy_drift_study(logs: &[(f64, Vec<(f64, f64)>)]) -> Result<DriftStudy> {
    if logs.len() < 3 {
        return Err(Error::InsufficientData(format!("energy drift fit needs at least 3 runs, got {}", logs.len())));
    }
    let mut dts = Vec::new();
    let mut endpoint_errors = Vec::new();
    let mut trailing_drift = Vec::new();
    let mut trailing_spread = Vec::new();
    let mut scale = 0.0f64;
    for (dt, log) in logs {
        let (_, h0) = *log.first().ok_or_else(|| Error::InsufficientData("empty energy log".into()))?;
        let (_, hn) = *log.last().expect("non-empty");
        scale = scale.max(h0.abs());
        let errs: Vec<f64> = log.iter().map(|(_, h)| h - h0).collect();
        let w = (errs.len() / 50).max(1);
        let last = &errs[errs.len().saturating_sub(w)..];
        let before = &errs[errs.len().saturating_sub(2 * w)..errs.len().saturating_sub(w)];
        let mean = |s: &[f64]| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
        trailing_drift.push((mean(last) - mean(before)).abs());
        let (lo, hi) = last.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        trailing_spread.push(hi - lo);
        dts.push(*dt);
        endpoint_errors.push((hn - h0).abs());
    }
    let significant = endpoint_errors.iter().any(|&e| e > ROUND_OFF_LEVEL * scale.max(1.0));
    let slope = if significant { Some(loglog_slope(&dts, &endpoint_errors)?) } else { None };
    Ok(DriftStudy { dts, endpoint_errors, slope, trailing_drift, trailing_spread })
}
