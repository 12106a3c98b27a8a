//! Time stepping for `u_t = D δH/δu` with a constant skew-symmetric `D`.
//!
//! * fully implicit AVF (`FiCons`) and implicit midpoint (`FiMidpoint`), solved by Newton;
//! * the polarised AVF multistep scheme (`LiCons`), one linear solve per step;
//! * a naive lagged-nonlinearity linearly implicit comparator (`LiNaive`).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::density::{expand_factors, CompiledDensity, DensityPoly, Realisation};
use crate::error::{Error, Result};
use crate::grid::{DiffOp, GridFunction};
use crate::linalg::{DenseMatrix, LuFactors};
use crate::polarisation::{CompiledPolarised, PolarisedDensity};
use crate::scalar::{coeff_to_scalar, Coefficient, Scalar};

/// A constant-coefficient skew-symmetric difference operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewOp<T> {
    op: DiffOp<T>,
}

impl<T: Scalar> SkewOp<T> {
    pub fn new(op: DiffOp<T>) -> Result<Self> {
        if !op.is_skew() {
            return Err(Error::NotSkew);
        }
        Ok(Self { op })
    }

    /// `δ⟨1⟩`, the usual realisation of `∂x`.
    pub fn centered(grid: crate::grid::Grid1D<T>) -> Self {
        Self { op: DiffOp::centered(grid) }
    }

    pub fn op(&self) -> &DiffOp<T> {
        &self.op
    }

    pub fn neg(&self) -> Self {
        Self { op: self.op.neg() }
    }

    pub fn apply(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.op.apply(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    /// Residual tolerance relative to `1 + ‖u_n‖∞`.
    pub tol: f64,
    pub max_iters: usize,
    /// Replace the analytic Jacobian by forward differences (debugging aid).
    pub fd_jacobian: bool,
    /// Start from `2u_n − u_{n−1}` instead of `u_n` when a previous state is known.
    pub extrapolate: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-13, max_iters: 200, fd_jacobian: false, extrapolate: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    #[serde(alias = "fi_cons")]
    FiCons,
    #[serde(alias = "li_cons")]
    LiCons,
    #[serde(alias = "fi_midpoint")]
    FiMidpoint,
    #[serde(alias = "li_naive")]
    LiNaive,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::FiCons, SchemeKind::LiCons, SchemeKind::FiMidpoint, SchemeKind::LiNaive];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::FiCons => "fi-cons",
            SchemeKind::LiCons => "li-cons",
            SchemeKind::FiMidpoint => "fi-midpoint",
            SchemeKind::LiNaive => "li-naive",
        }
    }

    pub fn is_linearly_implicit(self) -> bool {
        matches!(self, SchemeKind::LiCons | SchemeKind::LiNaive)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme '{s}'")))
    }
}

/// Outcome of one Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonSolve<T> {
    pub state: GridFunction<T>,
    pub iterations: usize,
    pub residual: T,
}

fn sup<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Newton iteration on `R(U) = (U − u_n)/dt − D f(U)` with Jacobian `I/dt − D J_f(U)`.
///
/// Stops when `‖R‖∞ ≤ tol (1 + ‖u_n‖∞)`, or when the update has shrunk to the
/// round-off level of `U` so that the residual cannot decrease further.
#[allow(clippy::too_many_arguments)]
fn newton<T: Scalar>(
    d: &SkewOp<T>,
    u_n: &GridFunction<T>,
    guess: GridFunction<T>,
    dt: T,
    cfg: &NewtonConfig,
    step: usize,
    f: impl Fn(&GridFunction<T>) -> Result<GridFunction<T>>,
    jac: impl Fn(&GridFunction<T>) -> Result<DenseMatrix<T>>,
) -> Result<NewtonSolve<T>> {
    let grid = *u_n.grid();
    let n = grid.n_points();
    let inv_dt = dt.recip();
    let tol = T::lit(cfg.tol) * (T::one() + u_n.sup_norm());
    let residual_of = |u: &GridFunction<T>| -> Result<GridFunction<T>> {
        let rhs = d.apply(&f(u)?)?;
        u.sub(u_n)?.scale(inv_dt).sub(&rhs)
    };
    let mut u = guess;
    let mut r = residual_of(&u)?;
    let mut res = r.sup_norm();
    let mut iterations = 0;
    let floor = T::lit(16.0) * T::epsilon();
    while res > tol {
        if iterations >= cfg.max_iters || !res.is_finite() {
            return Err(Error::NewtonDiverged { step, iterations, residual: res.to_f64_lossy() });
        }
        let jacobian = if cfg.fd_jacobian {
            fd_jacobian(&u, &r, &residual_of)?
        } else {
            let mut m = jac(&u)?.left_apply(d.op());
            m.scale_in_place(-T::one());
            m.add_diagonal(inv_dt);
            m
        };
        let lu = LuFactors::factor(&jacobian).ok_or(Error::SingularSystem { step, dt: dt.to_f64_lossy() })?;
        let delta = lu.solve(r.values());
        iterations += 1;
        let update = sup(&delta);
        u = GridFunction::new(grid, u.values().iter().zip(&delta).map(|(&a, &b)| a - b).collect())?;
        r = residual_of(&u)?;
        res = r.sup_norm();
        if update <= floor * (T::one() + u.sup_norm()) && res.is_finite() {
            break;
        }
    }
    debug_assert_eq!(u.len(), n);
    Ok(NewtonSolve { state: u, iterations, residual: res })
}

fn fd_jacobian<T: Scalar>(
    u: &GridFunction<T>,
    r: &GridFunction<T>,
    residual_of: &impl Fn(&GridFunction<T>) -> Result<GridFunction<T>>,
) -> Result<DenseMatrix<T>> {
    let n = u.len();
    let mut m = DenseMatrix::zeros(n);
    for j in 0..n {
        let h = T::epsilon().sqrt() * (T::one() + u.values()[j].abs());
        let mut up = u.clone();
        up.values_mut()[j] += h;
        let rp = residual_of(&up)?;
        for i in 0..n {
            m[(i, j)] = (rp.values()[i] - r.values()[i]) / h;
        }
    }
    Ok(m)
}

/// One AVF step: solves `(U − u_n)/dt = D · avf(u_n, U)`.
pub fn step_fully_implicit<T: Scalar>(
    density: &CompiledDensity<T>,
    d: &SkewOp<T>,
    u_n: &GridFunction<T>,
    dt: T,
    cfg: &NewtonConfig,
) -> Result<NewtonSolve<T>> {
    fi_step(density, d, u_n, u_n.clone(), dt, cfg, 0)
}

fn fi_step<T: Scalar>(
    density: &CompiledDensity<T>,
    d: &SkewOp<T>,
    u_n: &GridFunction<T>,
    guess: GridFunction<T>,
    dt: T,
    cfg: &NewtonConfig,
    step: usize,
) -> Result<NewtonSolve<T>> {
    newton(d, u_n, guess, dt, cfg, step, |u| density.avf(u_n, u), |u| density.avf_jacobian(u_n, u))
}

/// One implicit midpoint step: `(U − u_n)/dt = D · δH/δu((U + u_n)/2)`.
pub fn step_midpoint<T: Scalar>(
    density: &CompiledDensity<T>,
    d: &SkewOp<T>,
    u_n: &GridFunction<T>,
    dt: T,
    cfg: &NewtonConfig,
) -> Result<NewtonSolve<T>> {
    midpoint_step(density, d, u_n, u_n.clone(), dt, cfg, 0)
}

fn midpoint_step<T: Scalar>(
    density: &CompiledDensity<T>,
    d: &SkewOp<T>,
    u_n: &GridFunction<T>,
    guess: GridFunction<T>,
    dt: T,
    cfg: &NewtonConfig,
    step: usize,
) -> Result<NewtonSolve<T>> {
    let half = T::lit(0.5);
    let mid = |u: &GridFunction<T>| u.add(u_n).map(|s| s.scale(half));
    newton(
        d,
        u_n,
        guess,
        dt,
        cfg,
        step,
        |u| density.variational_derivative(&mid(u)?),
        |u| {
            let mut h = density.hessian_matrix(&mid(u)?)?;
            h.scale_in_place(half);
            Ok(h)
        },
    )
}

/// The lagged linearisation behind the naive linearly implicit scheme.
///
/// Each term `c · z_1 ⋯ z_d` of `∂G/∂u_J` is treated as
/// * `d = 0`: kept as is;
/// * `d = 1`: averaged between `u_n` and `U`;
/// * `d ≥ 2`: `z_1 ⋯ z_{d−1}` frozen at `u_n`, `z_d` taken at `U`.
///
/// For `G = ½u_x² − ⅓u³` this yields `(U_xxx + u_xxx)/2 + (u U)_x`.
#[derive(Debug, Clone)]
pub struct NaiveLinearisation<T> {
    /// `(outer operator, coefficient, factor operators)` per gradient monomial.
    terms: Vec<(DiffOp<T>, T, Vec<DiffOp<T>>)>,
}

impl<T: Scalar> NaiveLinearisation<T> {
    pub fn new<C: Coefficient>(density: &DensityPoly<C>, realisation: &Realisation<T>) -> Result<Self> {
        let mut terms = Vec::new();
        for z in density.indeterminates() {
            let outer = realisation.op(z)?.clone();
            for m in density.partial(z).terms() {
                let factors = expand_factors(&m.factors)
                    .into_iter()
                    .map(|f| realisation.op(f).cloned())
                    .collect::<Result<Vec<_>>>()?;
                terms.push((outer.clone(), coeff_to_scalar(&m.coeff), factors));
            }
        }
        Ok(Self { terms })
    }

    /// `(A, b)` with the linearised variational derivative equal to `A U + b`.
    pub fn assemble(&self, u_n: &GridFunction<T>) -> Result<(DenseMatrix<T>, GridFunction<T>)> {
        let grid = *u_n.grid();
        let n = grid.n_points();
        let mut a = DenseMatrix::zeros(n);
        let mut b = vec![T::zero(); n];
        let half = T::lit(0.5);
        for (outer, c, factors) in &self.terms {
            let outer_t = outer.transpose();
            match factors.as_slice() {
                [] => {
                    for (bi, v) in b.iter_mut().zip(outer_t.apply_slice(&vec![*c; n])?) {
                        *bi += v;
                    }
                }
                [single] => {
                    a.add_sandwich(outer, &vec![*c * half; n], single, T::one());
                    let old = single.apply_slice(u_n.values())?;
                    let inner: Vec<T> = old.iter().map(|&v| *c * half * v).collect();
                    for (bi, v) in b.iter_mut().zip(outer_t.apply_slice(&inner)?) {
                        *bi += v;
                    }
                }
                [frozen @ .., last] => {
                    let mut w = vec![*c; n];
                    for op in frozen {
                        for (wi, v) in w.iter_mut().zip(op.apply_slice(u_n.values())?) {
                            *wi *= v;
                        }
                    }
                    a.add_sandwich(outer, &w, last, T::one());
                }
            }
        }
        Ok((a, GridFunction::new(grid, b)?))
    }
}

fn solve_step<T: Scalar>(matrix: &DenseMatrix<T>, rhs: &GridFunction<T>, step: usize, dt: T) -> Result<GridFunction<T>> {
    let lu = LuFactors::factor(matrix).ok_or(Error::SingularSystem { step, dt: dt.to_f64_lossy() })?;
    GridFunction::new(*rhs.grid(), lu.solve_checked(rhs.values())?)
}

/// One naive linearly implicit step: `(U − u_n)/dt = D (A U + b)`.
pub fn step_naive_li<T: Scalar>(
    lin: &NaiveLinearisation<T>,
    d: &SkewOp<T>,
    u_n: &GridFunction<T>,
    dt: T,
) -> Result<GridFunction<T>> {
    naive_step(lin, d, u_n, dt, 0)
}

fn naive_step<T: Scalar>(lin: &NaiveLinearisation<T>, d: &SkewOp<T>, u_n: &GridFunction<T>, dt: T, step: usize) -> Result<GridFunction<T>> {
    let (a, b) = lin.assemble(u_n)?;
    let mut m = a.left_apply(d.op());
    m.scale_in_place(-T::one());
    m.add_diagonal(dt.recip());
    let rhs = u_n.scale(dt.recip()).add(&d.apply(&b)?)?;
    solve_step(&m, &rhs, step, dt)
}

/// Linear system of one PAVF step: `(I/(kΔt) − k D A) U^{n+k} = U^n/(kΔt) + k D b`.
fn pavf_system<T: Scalar>(
    pd: &CompiledPolarised<T>,
    d: &SkewOp<T>,
    history: &[GridFunction<T>],
    dt: T,
) -> Result<(DenseMatrix<T>, GridFunction<T>)> {
    let kf = T::from_usize_lossy(pd.k());
    let split = pd.affine_split(history)?;
    let mut m = split.matrix.left_apply(d.op());
    m.scale_in_place(-kf);
    m.add_diagonal((kf * dt).recip());
    let rhs = history[0].scale((kf * dt).recip()).add(&d.apply(&split.offset)?.scale(kf))?;
    Ok((m, rhs))
}

/// One PAVF step from `history = [U^n, …, U^{n+k−1}]`, returning `U^{n+k}`.
pub fn step_pavf<T: Scalar>(
    pd: &CompiledPolarised<T>,
    d: &SkewOp<T>,
    history: &[GridFunction<T>],
    dt: T,
) -> Result<GridFunction<T>> {
    let (m, rhs) = pavf_system(pd, d, history, dt)?;
    solve_step(&m, &rhs, 0, dt)
}

/// Starting values `[u_0, U^1, …, U^{k−1}]` from fully implicit AVF steps.
///
/// Returns the states together with the Newton iteration count of each step.
pub fn bootstrap<T: Scalar>(
    density: &CompiledDensity<T>,
    d: &SkewOp<T>,
    u0: &GridFunction<T>,
    dt: T,
    k: usize,
    cfg: &NewtonConfig,
) -> Result<(Vec<GridFunction<T>>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("bootstrap needs k >= 2, got {k}")));
    }
    let mut states = vec![u0.clone()];
    let mut iters = Vec::with_capacity(k - 1);
    for step in 1..k {
        let prev = states.last().expect("non-empty");
        let solve = fi_step(density, d, prev, prev.clone(), dt, cfg, step)?;
        iters.push(solve.iterations);
        states.push(solve.state);
    }
    Ok((states, iters))
}

/// Everything a scheme needs besides the state: the density, its realisation,
/// `D`, and (for `LiCons`) the polarisation.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub density: CompiledDensity<T>,
    pub naive: NaiveLinearisation<T>,
    pub polarised: Option<CompiledPolarised<T>>,
    pub skew: SkewOp<T>,
    /// Highest total degree of the density; degree ≤ 2 makes every scheme matrix constant.
    pub degree: u32,
}

impl<T: Scalar> Problem<T> {
    pub fn new<C: Coefficient>(
        density: &DensityPoly<C>,
        polarised: Option<&PolarisedDensity<C>>,
        realisation: &Realisation<T>,
        skew: SkewOp<T>,
    ) -> Result<Self> {
        realisation.grid().check_same(skew.op().grid())?;
        Ok(Self {
            density: CompiledDensity::new(density, realisation)?,
            naive: NaiveLinearisation::new(density, realisation)?,
            polarised: polarised.map(|pd| CompiledPolarised::new(pd, realisation)).transpose()?,
            skew,
            degree: density.degree(),
        })
    }
}

/// One entry of the conservation log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationEntry {
    pub t: f64,
    pub hamiltonian: f64,
    pub polarised: Option<f64>,
}

/// Mutable state of a running scheme.
#[derive(Debug, Clone)]
pub struct SchemeRun<T> {
    kind: SchemeKind,
    problem: Problem<T>,
    newton: NewtonConfig,
    history: VecDeque<GridFunction<T>>,
    step: usize,
    t0: T,
    dt: T,
    /// Linear solves spent by the scheme's own steps.
    pub solve_count: usize,
    /// Linear solves spent generating starting values.
    pub bootstrap_solves: usize,
    pub newton_iters_log: Vec<usize>,
    pub conservation_log: Vec<ConservationEntry>,
    cached_lu: Option<LuFactors<T>>,
    previous: Option<GridFunction<T>>,
}

impl<T: Scalar> SchemeRun<T> {
    /// Sets up a run at `t = 0` from `u0`; `LiCons` bootstraps its starting values here.
    pub fn new(kind: SchemeKind, problem: Problem<T>, u0: GridFunction<T>, dt: T, newton: NewtonConfig) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let mut run = Self {
            kind,
            problem,
            newton,
            history: VecDeque::new(),
            step: 0,
            t0: T::zero(),
            dt,
            solve_count: 0,
            bootstrap_solves: 0,
            newton_iters_log: Vec::new(),
            conservation_log: Vec::new(),
            cached_lu: None,
            previous: None,
        };
        match kind {
            SchemeKind::LiCons => {
                let k = run.polarised()?.k();
                let (states, iters) = bootstrap(&run.problem.density, &run.problem.skew, &u0, dt, k, &newton)?;
                run.bootstrap_solves = iters.iter().sum();
                run.history.extend(states);
                run.step = k - 1;
            }
            _ => run.history.push_back(u0),
        }
        run.log()?;
        Ok(run)
    }

    fn polarised(&self) -> Result<&CompiledPolarised<T>> {
        self.problem
            .polarised
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("li-cons needs a polarised density".into()))
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn problem(&self) -> &Problem<T> {
        &self.problem
    }

    /// Index of the newest state.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn t(&self) -> T {
        self.t0 + self.dt * T::from_usize_lossy(self.step)
    }

    pub fn current(&self) -> &GridFunction<T> {
        self.history.back().expect("history is never empty")
    }

    pub fn history(&self) -> impl Iterator<Item = &GridFunction<T>> {
        self.history.iter()
    }

    pub fn total_solves(&self) -> usize {
        self.solve_count + self.bootstrap_solves
    }

    pub fn hamiltonian(&self) -> Result<T> {
        self.problem.density.hamiltonian(self.current())
    }

    /// Polarised invariant over the newest `k` states (`LiCons` only).
    pub fn polarised_hamiltonian(&self) -> Result<Option<T>> {
        match (&self.problem.polarised, self.kind) {
            (Some(pd), SchemeKind::LiCons) => {
                let ws: Vec<GridFunction<T>> = self.history.iter().cloned().collect();
                Ok(Some(pd.value(&ws)?))
            }
            _ => Ok(None),
        }
    }

    fn log(&mut self) -> Result<()> {
        let entry = ConservationEntry {
            t: self.t().to_f64_lossy(),
            hamiltonian: self.hamiltonian()?.to_f64_lossy(),
            polarised: self.polarised_hamiltonian()?.map(|v| v.to_f64_lossy()),
        };
        self.conservation_log.push(entry);
        Ok(())
    }

    /// Advances by one step and appends to the conservation log.
    pub fn step(&mut self) -> Result<()> {
        let next_step = self.step + 1;
        let dt = self.dt;
        let u_n = self.current().clone();
        let guess = match (&self.previous, self.newton.extrapolate) {
            (Some(prev), true) => u_n.scale(T::lit(2.0)).sub(prev)?,
            _ => u_n.clone(),
        };
        let next = match self.kind {
            SchemeKind::FiCons | SchemeKind::FiMidpoint => {
                let p = &self.problem;
                let solve = if self.kind == SchemeKind::FiCons {
                    fi_step(&p.density, &p.skew, &u_n, guess, dt, &self.newton, next_step)?
                } else {
                    midpoint_step(&p.density, &p.skew, &u_n, guess, dt, &self.newton, next_step)?
                };
                self.solve_count += solve.iterations;
                self.newton_iters_log.push(solve.iterations);
                solve.state
            }
            SchemeKind::LiNaive => {
                let u = naive_step(&self.problem.naive, &self.problem.skew, &u_n, dt, next_step)?;
                self.solve_count += 1;
                u
            }
            SchemeKind::LiCons => {
                let history: Vec<GridFunction<T>> = self.history.iter().cloned().collect();
                let pd = self.polarised()?;
                let (m, rhs) = pavf_system(pd, &self.problem.skew, &history, dt)?;
                let singular = || Error::SingularSystem { step: next_step, dt: dt.to_f64_lossy() };
                let x = if self.problem.degree <= 2 {
                    if self.cached_lu.is_none() {
                        self.cached_lu = Some(LuFactors::factor(&m).ok_or_else(singular)?);
                    }
                    self.cached_lu.as_ref().expect("just set").solve_checked(rhs.values())?
                } else {
                    LuFactors::factor(&m).ok_or_else(singular)?.solve_checked(rhs.values())?
                };
                self.solve_count += 1;
                GridFunction::new(*rhs.grid(), x)?
            }
        };
        self.previous = Some(u_n);
        self.history.push_back(next);
        if self.kind != SchemeKind::LiCons || self.history.len() > self.polarised()?.k() {
            self.history.pop_front();
        }
        self.step = next_step;
        self.log()
    }

    /// Steps until `t ≥ t_end` (within half a step).
    pub fn run_until(&mut self, t_end: T) -> Result<()> {
        while self.t() + T::lit(0.5) * self.dt < t_end {
            self.step()?;
        }
        Ok(())
    }
}
