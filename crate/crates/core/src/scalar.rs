//! Numeric traits shared by the symbolic and numerical layers.
//!
//! Symbolic objects (densities, polarisations) are generic over a
//! [`Coefficient`], which may be an exact rational or a float. Everything that
//! touches a grid is generic over a [`Scalar`], which is always a float.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// A ring element usable as a polynomial coefficient.
pub trait Coefficient:
    Clone + Debug + std::fmt::Display + PartialEq + PartialOrd + Num + Neg<Output = Self> + Send + Sync + 'static
{
    /// Exact (where the type allows it) value of `numer / denom`.
    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn as_f64(&self) -> f64;

    fn from_f64_value(v: f64) -> Self;

    /// `(numer, denom)` when the coefficient is an exact rational.
    fn as_ratio(&self) -> Option<(i64, i64)> {
        None
    }

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }
}

impl Coefficient for f64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn from_f64_value(v: f64) -> Self {
        v
    }
}

impl Coefficient for f32 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        (numer as f64 / denom as f64) as f32
    }

    fn as_f64(&self) -> f64 {
        f64::from(*self)
    }

    fn from_f64_value(v: f64) -> Self {
        v as f32
    }
}

impl Coefficient for Ratio<i64> {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(numer, denom)
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64_value(v: f64) -> Self {
        <Ratio<i64> as FromPrimitive>::from_f64(v).unwrap_or_else(|| Ratio::from_integer(0))
    }

    fn as_ratio(&self) -> Option<(i64, i64)> {
        Some((*self.numer(), *self.denom()))
    }
}

/// Floating point type used for grid values, stencils and solves.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Coefficient
    + Copy
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Relative residual accepted after a dense LU solve.
    const LINEAR_RESIDUAL_TOL: f64;

    /// Converts an `f64` literal; panics only if the literal is not representable at all.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        Coefficient::as_f64(&self)
    }
}

impl Scalar for f64 {
    const LINEAR_RESIDUAL_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const LINEAR_RESIDUAL_TOL: f64 = 1e-3;
}

/// Converts a coefficient of any kind into a scalar.
pub fn coeff_to_scalar<C: Coefficient, T: Scalar>(c: &C) -> T {
    T::lit(c.as_f64())
}

/// Converts between coefficient types, exactly when the source is rational.
pub fn convert_coefficient<C: Coefficient, D: Coefficient>(c: &C) -> D {
    match c.as_ratio() {
        Some((n, d)) => D::from_ratio(n, d),
        None => D::from_f64_value(c.as_f64()),
    }
}
