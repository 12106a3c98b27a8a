//! Discrete variational derivatives.
//!
//! [`avf_dvd`] averages the discrete variational derivative along the segment
//! from `v` to `u`; [`pavf_dvd`] does the same in the first slot of a polarised
//! density. The two `furihata_dvd_*` closed forms are independent formulas for the
//! density classes `∂_J u ∂_K u` and `g(∂_J u)`, where they coincide with AVF.

use crate::density::{CompiledDensity, DensityPoly, Indeterminate, Realisation};
use crate::error::{Error, Result};
use crate::grid::{DiffOp, GridFunction};
use crate::polarisation::{AffineOperator, CompiledPolarised, PolarisedDensity};
use crate::scalar::{Coefficient, Scalar};

/// `∫₀¹ δH_d/δu[ξu + (1−ξ)v] dξ`.
pub fn avf_dvd<C: Coefficient, T: Scalar>(
    density: &DensityPoly<C>,
    realisation: &Realisation<T>,
    v: &GridFunction<T>,
    u: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    v.grid().check_same(u.grid())?;
    CompiledDensity::new(density, realisation)?.avf(v, u)
}

/// Operator realising `∂_J`, checked to satisfy `δ_Jᵀ = (−1)^J δ_J`.
fn parity_op<T: Scalar>(realisation: &Realisation<T>, order: u8) -> Result<&DiffOp<T>> {
    let op = realisation.op(Indeterminate::new(order)?)?;
    let ok = if order.is_multiple_of(2) { op.is_symmetric() } else { op.is_skew() };
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "closed form needs a {} realisation of order {order}",
            if order.is_multiple_of(2) { "symmetric" } else { "skew" }
        )));
    }
    Ok(op)
}

fn parity_sign<T: Scalar>(order: u8) -> T {
    if order.is_multiple_of(2) {
        T::one()
    } else {
        -T::one()
    }
}

/// Closed form for the density `∂_J u · ∂_K u`: `((−1)^J + (−1)^K) δ_J δ_K ((u+v)/2)`.
///
/// Requires the realisation of each order to be symmetric (even order) or skew
/// (odd order), which is what makes the closed form agree with summation by parts.
pub fn furihata_dvd_type1<T: Scalar>(
    realisation: &Realisation<T>,
    j: u8,
    k: u8,
    v: &GridFunction<T>,
    u: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    let mid = u.add(v)?.scale(T::lit(0.5));
    let dj = parity_op(realisation, j)?;
    let dk = parity_op(realisation, k)?;
    let sign = parity_sign::<T>(j) + parity_sign::<T>(k);
    Ok(dj.apply(&dk.apply(&mid)?)?.scale(sign))
}

/// Closed form for the density `g(∂_J u)`: `(−1)^J δ_J [(g(δ_J u) − g(δ_J v)) / (δ_J u − δ_J v)]`.
///
/// Where the two jets nearly coincide the quotient is replaced by `g'` at their midpoint.
pub fn furihata_dvd_type2<T: Scalar>(
    realisation: &Realisation<T>,
    g: impl Fn(T) -> T,
    dg: impl Fn(T) -> T,
    j: u8,
    v: &GridFunction<T>,
    u: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    v.grid().check_same(u.grid())?;
    let op = parity_op(realisation, j)?;
    let ju = op.apply(u)?;
    let jv = op.apply(v)?;
    let tol = T::lit(1e-8);
    let quotient = ju.zip_map(&jv, |a, b| {
        let diff = a - b;
        if diff.abs() < tol * (T::one() + a.abs() + b.abs()) {
            dg(T::lit(0.5) * (a + b))
        } else {
            (g(a) - g(b)) / diff
        }
    })?;
    Ok(op.apply(&quotient)?.scale(parity_sign(j)))
}

/// `∫₀¹ δH/δw₁[ξ w_{k+1} + (1−ξ) w₁, w₂, …, w_k] dξ` for `ws = [w₁, …, w_{k+1}]`.
pub fn pavf_dvd<C: Coefficient, T: Scalar>(
    pd: &PolarisedDensity<C>,
    realisation: &Realisation<T>,
    ws: &[GridFunction<T>],
) -> Result<GridFunction<T>> {
    CompiledPolarised::new(pd, realisation)?.dvd(ws)
}

/// Affine decomposition of `w ↦ pavf_dvd([ws…, w])` for known `ws = [w₁, …, w_k]`.
pub fn pavf_affine_split<C: Coefficient, T: Scalar>(
    pd: &PolarisedDensity<C>,
    realisation: &Realisation<T>,
    ws: &[GridFunction<T>],
) -> Result<AffineOperator<T>> {
    pd.check_quadratic()?;
    CompiledPolarised::new(pd, realisation)?.affine_split(ws)
}
