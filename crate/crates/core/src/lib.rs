//! Conservative time integrators for polynomial Hamiltonian PDEs `u_t = D δH/δu`
//! on uniform periodic 1-D grids.
//!
//! Densities are declared symbolically, their discrete variational derivatives
//! are derived mechanically, and two families of schemes are run from them:
//! fully implicit average-vector-field (AVF) discrete-gradient schemes solved by
//! Newton iteration, and linearly implicit polarised-AVF (PAVF) multistep
//! schemes that need exactly one linear solve per step.
//!
//! The numerical core is generic over the scalar type; the aliases at the crate
//! root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod density;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod integrators;
pub mod linalg;
pub mod polarisation;
pub mod quadrature;
pub mod scalar;
pub mod variational;

pub use error::{Error, Result};
pub use scalar::{Coefficient, Scalar};

/// Exact rational coefficients for symbolic work.
pub type Rational = num_rational::Ratio<i64>;

pub type Grid = grid::Grid1D<f64>;
pub type GridFn = grid::GridFunction<f64>;
pub type Op = grid::DiffOp<f64>;
pub type Density = density::DensityPoly<f64>;
pub type ExactDensity = density::DensityPoly<Rational>;
pub type Polarised = polarisation::PolarisedDensity<f64>;
pub type ExactPolarised = polarisation::PolarisedDensity<Rational>;
