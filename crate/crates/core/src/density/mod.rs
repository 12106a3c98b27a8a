//! Polynomial Hamiltonian densities and their (discrete) variational derivatives.
//!
//! A density `G` is a polynomial in the jet variables `u, u_x, u_xx, ...`. On a
//! grid each jet variable `u_J` is realised by a difference operator `δ_J`, the
//! discrete Hamiltonian is `H_d(u) = Σ_i G((δ_J u)_i) Δx`, and the outer total
//! derivative `(−1)^J D_J` of the Euler operator becomes `δ_Jᵀ`.

pub mod compiled;
pub mod parse;
pub mod poly;

pub use compiled::CompiledPoly;
pub use parse::parse_density;
pub use poly::{collect_factors, expand_factors, DensityPoly, Factors, Indeterminate, Monomial, NU_MAX};

use crate::error::{Error, Result};
use crate::grid::{DiffOp, Grid1D, GridFunction};
use crate::linalg::DenseMatrix;
use crate::quadrature::{gauss_legendre_unit, nodes_for_degree};
use crate::scalar::{Coefficient, Scalar};

/// Which difference operator stands in for each derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct Realisation<T> {
    grid: Grid1D<T>,
    ops: Vec<Option<DiffOp<T>>>,
}

impl<T: Scalar> Realisation<T> {
    /// Order 0 → identity, 1 → δ⟨1⟩, 2 → δ⟨2⟩, 3 → δ⟨3⟩, 4 → δ⟨2⟩∘δ⟨2⟩.
    pub fn standard(grid: Grid1D<T>) -> Self {
        let ops = crate::grid::make_standard_ops(grid);
        let fourth = ops.second.compose(&ops.second).expect("same grid");
        Self { grid, ops: vec![Some(ops.identity), Some(ops.centered), Some(ops.second), Some(ops.third), Some(fourth)] }
    }

    /// Same as [`Realisation::standard`] but with `u_x` realised by the forward difference δ+.
    ///
    /// With this choice the variational derivative of `½u_x²` is `−δ⟨2⟩u`, so
    /// `δ⟨1⟩` as the skew operator produces `δ⟨3⟩` in the scheme.
    pub fn forward(grid: Grid1D<T>) -> Self {
        Self::standard(grid).with_order(1, DiffOp::forward(grid)).expect("order within cap")
    }

    /// Replaces the operator used for one derivative order.
    pub fn with_order(mut self, order: u8, op: DiffOp<T>) -> Result<Self> {
        if order > NU_MAX {
            return Err(Error::DerivativeOrderTooHigh { order, cap: NU_MAX });
        }
        self.grid.check_same(op.grid())?;
        self.ops[order as usize] = Some(op);
        Ok(self)
    }

    pub fn without_order(mut self, order: u8) -> Self {
        if let Some(slot) = self.ops.get_mut(order as usize) {
            *slot = None;
        }
        self
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn op(&self, z: Indeterminate) -> Result<&DiffOp<T>> {
        if z.component() != 0 {
            return Err(Error::InvalidParameter(format!("only scalar problems are supported, got component {}", z.component())));
        }
        self.ops
            .get(z.deriv_order() as usize)
            .and_then(|o| o.as_ref())
            .ok_or(Error::MissingRealisation { order: z.deriv_order() })
    }
}

/// One term `sign · ∂_x^order [inner]` of a variational derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerTerm<C> {
    pub order: u8,
    pub sign: i8,
    pub inner: DensityPoly<C>,
}

/// `δH/δu = Σ_J (−1)^J D_J ∂G/∂u_J`, kept symbolic.
///
/// On a grid the signed outer derivative is realised as `δ_Jᵀ`, which carries
/// the sign itself, so `sign` only matters for the continuous reading.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDerivExpr<C> {
    pub terms: Vec<EulerTerm<C>>,
}

impl<C: Coefficient> VarDerivExpr<C> {
    pub fn eval<T: Scalar>(&self, u: &GridFunction<T>, realisation: &Realisation<T>) -> Result<GridFunction<T>> {
        let grid = *u.grid();
        realisation.grid().check_same(&grid)?;
        let mut out = GridFunction::zeros(grid);
        for term in &self.terms {
            if term.inner.is_zero() {
                continue;
            }
            let inner = eval_density(&term.inner, u, realisation)?;
            let outer = realisation.op(Indeterminate::new(term.order)?)?.transpose();
            out = out.add(&outer.apply(&inner)?)?;
        }
        Ok(out)
    }
}

/// Applies the Euler operator to a density.
pub fn euler_operator<C: Coefficient>(density: &DensityPoly<C>) -> VarDerivExpr<C> {
    let terms = density
        .indeterminates()
        .into_iter()
        .map(|z| EulerTerm {
            order: z.deriv_order(),
            sign: if z.deriv_order() % 2 == 0 { 1 } else { -1 },
            inner: density.partial(z),
        })
        .collect();
    VarDerivExpr { terms }
}

/// Pointwise values `G_d((δ_J u)_i)`.
pub fn eval_density<C: Coefficient, T: Scalar>(
    density: &DensityPoly<C>,
    u: &GridFunction<T>,
    realisation: &Realisation<T>,
) -> Result<GridFunction<T>> {
    let compiled = CompiledDensity::new(density, realisation)?;
    compiled.density_values(u)
}

/// `H_d(u) = Σ_i b_i G_d(...)_i Δx` with unit weights.
pub fn hamiltonian_d<C: Coefficient, T: Scalar>(
    density: &DensityPoly<C>,
    u: &GridFunction<T>,
    realisation: &Realisation<T>,
) -> Result<T> {
    Ok(crate::grid::integral(&eval_density(density, u, realisation)?))
}

/// A density lowered to numeric form together with its first and second partials.
///
/// Jet variable `j` is `vars[j]`, realised by `ops[j]`.
#[derive(Debug, Clone)]
pub struct CompiledDensity<T> {
    grid: Grid1D<T>,
    vars: Vec<Indeterminate>,
    ops: Vec<DiffOp<T>>,
    ops_t: Vec<DiffOp<T>>,
    value: CompiledPoly<T>,
    gradient: Vec<CompiledPoly<T>>,
    hessian: Vec<Vec<CompiledPoly<T>>>,
    gradient_rules: Vec<Vec<(T, T)>>,
    hessian_rules: Vec<Vec<Vec<(T, T)>>>,
}

fn compile<C: Coefficient, T: Scalar>(p: &DensityPoly<C>, vars: &[Indeterminate]) -> CompiledPoly<T> {
    CompiledPoly::new(p.terms().map(|m| {
        let factors = m
            .factors
            .iter()
            .map(|(z, &e)| (vars.iter().position(|v| v == z).expect("variable listed"), e))
            .collect();
        (m.coeff, factors)
    }))
}

impl<T: Scalar> CompiledDensity<T> {
    pub fn new<C: Coefficient>(density: &DensityPoly<C>, realisation: &Realisation<T>) -> Result<Self> {
        let vars = density.indeterminates();
        let ops = vars.iter().map(|&z| realisation.op(z).cloned()).collect::<Result<Vec<_>>>()?;
        let ops_t = ops.iter().map(DiffOp::transpose).collect();
        let gradient_sym: Vec<DensityPoly<C>> = vars.iter().map(|&z| density.partial(z)).collect();
        let hessian_sym: Vec<Vec<DensityPoly<C>>> =
            gradient_sym.iter().map(|g| vars.iter().map(|&z| g.partial(z)).collect()).collect();
        let gradient: Vec<CompiledPoly<T>> = gradient_sym.iter().map(|g| compile(g, &vars)).collect();
        let hessian: Vec<Vec<CompiledPoly<T>>> =
            hessian_sym.iter().map(|row| row.iter().map(|h| compile(h, &vars)).collect()).collect();
        // ∫₀¹ g(ξ) dξ for the gradient, ∫₀¹ ξ h(ξ) dξ for the AVF Jacobian.
        let gradient_rules = gradient.iter().map(|g| gauss_legendre_unit(nodes_for_degree(g.degree()))).collect();
        let hessian_rules = hessian
            .iter()
            .map(|row| row.iter().map(|h| gauss_legendre_unit(nodes_for_degree(h.degree() + 1))).collect())
            .collect();
        Ok(Self {
            grid: *realisation.grid(),
            vars,
            ops,
            ops_t,
            value: compile(density, &density.indeterminates()),
            gradient,
            hessian,
            gradient_rules,
            hessian_rules,
        })
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn vars(&self) -> &[Indeterminate] {
        &self.vars
    }

    /// `(δ_J u)` for every jet variable.
    pub fn jet(&self, u: &GridFunction<T>) -> Result<Vec<Vec<T>>> {
        self.grid.check_same(u.grid())?;
        self.ops.iter().map(|op| op.apply_slice(u.values())).collect()
    }

    pub fn density_values(&self, u: &GridFunction<T>) -> Result<GridFunction<T>> {
        let jet = self.jet(u)?;
        let refs: Vec<&[T]> = jet.iter().map(Vec::as_slice).collect();
        GridFunction::new(self.grid, self.value.eval(&refs, self.grid.n_points()))
    }

    pub fn hamiltonian(&self, u: &GridFunction<T>) -> Result<T> {
        Ok(crate::grid::integral(&self.density_values(u)?))
    }

    /// Exact gradient of `H_d / Δx`: `Σ_J δ_Jᵀ ∂G/∂u_J`.
    pub fn variational_derivative(&self, u: &GridFunction<T>) -> Result<GridFunction<T>> {
        let jet = self.jet(u)?;
        let refs: Vec<&[T]> = jet.iter().map(Vec::as_slice).collect();
        let n = self.grid.n_points();
        let mut out = vec![T::zero(); n];
        for (j, g) in self.gradient.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            let inner = g.eval(&refs, n);
            for (o, v) in out.iter_mut().zip(self.ops_t[j].apply_slice(&inner)?) {
                *o += v;
            }
        }
        GridFunction::new(self.grid, out)
    }

    /// AVF discrete variational derivative `∫₀¹ δH_d/δu[ξu + (1−ξ)v] dξ`, integrated exactly.
    pub fn avf(&self, v: &GridFunction<T>, u: &GridFunction<T>) -> Result<GridFunction<T>> {
        let jet_u = self.jet(u)?;
        let jet_v = self.jet(v)?;
        let n = self.grid.n_points();
        let mut out = vec![T::zero(); n];
        let mut scratch: Vec<Vec<T>> = jet_u.clone();
        for (j, g) in self.gradient.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            let mut inner = vec![T::zero(); n];
            for &(xi, w) in &self.gradient_rules[j] {
                interpolate_jets(&jet_v, &jet_u, xi, &mut scratch);
                let refs: Vec<&[T]> = scratch.iter().map(Vec::as_slice).collect();
                g.eval_into(&refs, w, &mut inner);
            }
            for (o, val) in out.iter_mut().zip(self.ops_t[j].apply_slice(&inner)?) {
                *o += val;
            }
        }
        GridFunction::new(self.grid, out)
    }

    /// Jacobian of [`CompiledDensity::avf`] with respect to its second argument `u`.
    pub fn avf_jacobian(&self, v: &GridFunction<T>, u: &GridFunction<T>) -> Result<DenseMatrix<T>> {
        let jet_u = self.jet(u)?;
        let jet_v = self.jet(v)?;
        let n = self.grid.n_points();
        let mut m = DenseMatrix::zeros(n);
        let mut scratch = jet_u.clone();
        for (j, row) in self.hessian.iter().enumerate() {
            for (l, h) in row.iter().enumerate() {
                if h.is_zero() {
                    continue;
                }
                let mut weight = vec![T::zero(); n];
                for &(xi, w) in &self.hessian_rules[j][l] {
                    interpolate_jets(&jet_v, &jet_u, xi, &mut scratch);
                    let refs: Vec<&[T]> = scratch.iter().map(Vec::as_slice).collect();
                    h.eval_into(&refs, w * xi, &mut weight);
                }
                m.add_sandwich(&self.ops[j], &weight, &self.ops[l], T::one());
            }
        }
        Ok(m)
    }

    /// Hessian of `H_d / Δx`: `Σ_{J,K} δ_Jᵀ diag(∂²G/∂u_J∂u_K) δ_K`.
    pub fn hessian_matrix(&self, u: &GridFunction<T>) -> Result<DenseMatrix<T>> {
        let jet = self.jet(u)?;
        let refs: Vec<&[T]> = jet.iter().map(Vec::as_slice).collect();
        let n = self.grid.n_points();
        let mut m = DenseMatrix::zeros(n);
        for (j, row) in self.hessian.iter().enumerate() {
            for (l, h) in row.iter().enumerate() {
                if h.is_zero() {
                    continue;
                }
                let weight = h.eval(&refs, n);
                m.add_sandwich(&self.ops[j], &weight, &self.ops[l], T::one());
            }
        }
        Ok(m)
    }
}

/// `out = ξ·b + (1−ξ)·a` jet-wise.
pub(crate) fn interpolate_jets<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>], xi: T, out: &mut [Vec<T>]) {
    let one_minus = T::one() - xi;
    for ((o, av), bv) in out.iter_mut().zip(a).zip(b) {
        for ((oi, &ai), &bi) in o.iter_mut().zip(av).zip(bv) {
            *oi = xi * bi + one_minus * ai;
        }
    }
}
