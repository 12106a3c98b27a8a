//! Uniform periodic 1-D grids and circulant finite-difference operators.
//!
//! Every operator here acts by periodic wrap: `(op f)_i = sum_s c_s f_{(i+s) mod N}`.
//! The discrete inner product is the plain sum `sum_i f_i g_i`; the integral
//! uses unit quadrature weights scaled by the cell size.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    n_points: usize,
    dx: T,
    left: T,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(n_points: usize, dx: T) -> Result<Self> {
        Self::with_left(n_points, dx, T::zero())
    }

    /// Grid whose first node sits at `left`.
    pub fn with_left(n_points: usize, dx: T, left: T) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {n_points}")));
        }
        if !(dx > T::zero()) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {dx}")));
        }
        Ok(Self { n_points, dx, left })
    }

    /// `n_points` cells covering `[left, left + length)`.
    pub fn over(n_points: usize, left: T, length: T) -> Result<Self> {
        Self::with_left(n_points, length / T::from_usize_lossy(n_points), left)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn left(&self) -> T {
        self.left
    }

    pub fn length(&self) -> T {
        self.dx * T::from_usize_lossy(self.n_points)
    }

    pub fn node(&self, i: usize) -> T {
        self.left + self.dx * T::from_usize_lossy(i)
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Reduces a (possibly negative) index into `0..n_points`.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n_points as isize) as usize
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self.n_points != other.n_points || self.dx != other.dx {
            return Err(Error::GridMismatch(format!(
                "({} points, dx {}) vs ({} points, dx {})",
                self.n_points, self.dx, other.n_points, other.dx
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    grid: Grid1D<T>,
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Dimension(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: Grid1D<T>, c: T) -> Self {
        Self { grid, values: vec![c; grid.n_points()] }
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(grid: Grid1D<T>, f: impl Fn(T) -> T) -> Self {
        Self { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn from_fn(grid: Grid1D<T>, f: impl FnMut(usize) -> T) -> Self {
        Self { grid, values: (0..grid.n_points()).map(f).collect() }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    /// Shift by whole cells: `result_i = self_{i - cells}`.
    pub fn roll(&self, cells: isize) -> Self {
        Self::from_fn(self.grid, |i| self.values[self.grid.wrap(i as isize - cells)])
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Discrete L2 norm `sqrt(sum_i f_i^2 dx)`.
    pub fn l2_norm(&self) -> T {
        (self.values.iter().map(|&v| v * v).sum::<T>() * self.grid.dx()).sqrt()
    }
}

/// Unscaled pairing `sum_i f_i g_i`.
pub fn inner<T: Scalar>(f: &GridFunction<T>, g: &GridFunction<T>) -> Result<T> {
    f.grid().check_same(g.grid())?;
    Ok(f.values().iter().zip(g.values()).map(|(&a, &b)| a * b).sum())
}

/// Rectangle-rule integral `sum_i b_i f_i dx` with unit weights.
pub fn integral<T: Scalar>(f: &GridFunction<T>) -> T {
    let weights = QuadratureWeights::unit(f.len());
    weights.integrate(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights<T> {
    weights: Vec<T>,
}

impl<T: Scalar> QuadratureWeights<T> {
    pub fn unit(n_points: usize) -> Self {
        Self { weights: vec![T::one(); n_points] }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn integrate(&self, f: &GridFunction<T>) -> T {
        self.weights.iter().zip(f.values()).map(|(&b, &v)| b * v).sum::<T>() * f.grid().dx()
    }
}

/// Circulant stencil operator on a periodic grid.
#[derive(Clone, PartialEq)]
pub struct DiffOp<T> {
    stencil: BTreeMap<isize, T>,
    order: u8,
    grid: Grid1D<T>,
}

impl<T: fmt::Debug> fmt::Debug for DiffOp<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffOp").field("order", &self.order).field("stencil", &self.stencil).finish()
    }
}

impl<T: Scalar> DiffOp<T> {
    /// Builds an operator from `(offset, coefficient)` pairs; repeated offsets add, zeros are dropped.
    pub fn from_stencil(grid: Grid1D<T>, order: u8, entries: impl IntoIterator<Item = (isize, T)>) -> Self {
        let mut stencil = BTreeMap::new();
        for (s, c) in entries {
            *stencil.entry(s).or_insert_with(T::zero) += c;
        }
        stencil.retain(|_, c| *c != T::zero());
        Self { stencil, order, grid }
    }

    pub fn identity(grid: Grid1D<T>) -> Self {
        Self::from_stencil(grid, 0, [(0, T::one())])
    }

    pub fn forward(grid: Grid1D<T>) -> Self {
        let h = grid.dx().recip();
        Self::from_stencil(grid, 1, [(1, h), (0, -h)])
    }

    pub fn backward(grid: Grid1D<T>) -> Self {
        let h = grid.dx().recip();
        Self::from_stencil(grid, 1, [(0, h), (-1, -h)])
    }

    pub fn centered(grid: Grid1D<T>) -> Self {
        let h = (T::lit(2.0) * grid.dx()).recip();
        Self::from_stencil(grid, 1, [(1, h), (-1, -h)])
    }

    pub fn stencil(&self) -> &BTreeMap<isize, T> {
        &self.stencil
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn coefficient(&self, offset: isize) -> T {
        self.stencil.get(&offset).copied().unwrap_or_else(T::zero)
    }

    pub fn apply(&self, f: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.grid.check_same(f.grid())?;
        self.apply_slice(f.values()).map(|values| GridFunction { grid: self.grid, values })
    }

    /// Applies the stencil to raw values of length `n_points`.
    pub fn apply_slice(&self, f: &[T]) -> Result<Vec<T>> {
        let n = self.grid.n_points();
        if f.len() != n {
            return Err(Error::Dimension(format!("{} values on a {n}-point grid", f.len())));
        }
        let mut out = vec![T::zero(); n];
        for (&s, &c) in &self.stencil {
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * f[self.grid.wrap(i as isize + s)];
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Self {
            stencil: self.stencil.iter().map(|(&s, &c)| (-s, c)).collect(),
            order: self.order,
            grid: self.grid,
        }
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let entries = self
            .stencil
            .iter()
            .flat_map(|(&s, &a)| other.stencil.iter().map(move |(&t, &b)| (s + t, a * b)));
        Ok(Self::from_stencil(self.grid, self.order + other.order, entries))
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::from_stencil(self.grid, self.order, self.stencil.iter().map(|(&o, &c)| (o, c * s)))
    }

    pub fn neg(&self) -> Self {
        self.scaled(-T::one())
    }

    pub fn is_skew(&self) -> bool {
        self.stencil.iter().all(|(&s, &c)| self.coefficient(-s) == -c)
    }

    pub fn is_symmetric(&self) -> bool {
        self.stencil.iter().all(|(&s, &c)| self.coefficient(-s) == c)
    }

    /// Fourier symbol at phase `k dx`: `op e^{ikx} = symbol * e^{ikx}`.
    pub fn symbol(&self, phase: T) -> Complex<T> {
        self.stencil
            .iter()
            .map(|(&s, &c)| Complex::from_polar(c, phase * T::lit(s as f64)))
            .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
    }

    /// Row-major dense matrix of the operator.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.grid.n_points();
        let mut m = vec![vec![T::zero(); n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (&s, &c) in &self.stencil {
                row[self.grid.wrap(i as isize + s)] += c;
            }
        }
        m
    }
}

/// The standard periodic difference operators on one grid.
#[derive(Debug, Clone)]
pub struct StandardOps<T> {
    pub identity: DiffOp<T>,
    pub forward: DiffOp<T>,
    pub backward: DiffOp<T>,
    pub centered: DiffOp<T>,
    pub second: DiffOp<T>,
    pub third: DiffOp<T>,
}

impl<T: Scalar> StandardOps<T> {
    pub const NAMES: [&'static str; 6] = ["identity", "forward", "backward", "centered", "second", "third"];

    pub fn get(&self, name: &str) -> Option<&DiffOp<T>> {
        match name {
            "identity" => Some(&self.identity),
            "forward" => Some(&self.forward),
            "backward" => Some(&self.backward),
            "centered" => Some(&self.centered),
            "second" => Some(&self.second),
            "third" => Some(&self.third),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &DiffOp<T>)> {
        Self::NAMES.into_iter().map(move |name| (name, self.get(name).expect("known name")))
    }
}

/// δ+, δ−, δ⟨1⟩, δ⟨2⟩ = δ+∘δ−, δ⟨3⟩ = δ⟨1⟩∘δ⟨2⟩ and the identity.
pub fn make_standard_ops<T: Scalar>(grid: Grid1D<T>) -> StandardOps<T> {
    let forward = DiffOp::forward(grid);
    let backward = DiffOp::backward(grid);
    let centered = DiffOp::centered(grid);
    let second = forward.compose(&backward).expect("same grid");
    let third = centered.compose(&second).expect("same grid");
    StandardOps { identity: DiffOp::identity(grid), forward, backward, centered, second, third }
}
