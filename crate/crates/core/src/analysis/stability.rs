//! Von Neumann analysis of the two-step θ-scheme for `H = ½∫u_x²`.
//!
//! Inserting `U^n = ζ^n e^{ikx}` gives
//! `(1 − θτi)ζ² − 2(1 − θ)τiζ − (1 + θτi) = 0`, where `τ` is the product of the
//! time step, the symbol of `D` and the symbol of `−∂²`.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiffOp, Grid1D};
use crate::scalar::Scalar;

/// Both roots of the stability polynomial.
pub fn stability_roots<T: Scalar>(theta: T, tau: T) -> Result<(Complex<T>, Complex<T>)> {
    let i = Complex::new(T::zero(), T::one());
    let one = Complex::new(T::one(), T::zero());
    let a = one - i * (theta * tau);
    let b = -i * (T::lit(2.0) * (T::one() - theta) * tau);
    let c = -(one + i * (theta * tau));
    if a.norm() == T::zero() || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("degenerate stability polynomial at tau = {tau}")));
    }
    // Cancellation-free quadratic formula: q = −(b ± √disc)/2 with the sign that enlarges |q|.
    let disc = (b * b - a * c * T::lit(4.0)).sqrt();
    let plus = b + disc;
    let minus = b - disc;
    let big = if plus.norm() >= minus.norm() { plus } else { minus };
    let q = -big * T::lit(0.5);
    if q.norm() == T::zero() {
        return Ok((Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero())));
    }
    Ok((q / a, c / q))
}

/// `½ − 1/(2τ²)`: the smallest admissible θ for a mode with this `τ`.
pub fn stability_threshold<T: Scalar>(tau: T) -> Result<T> {
    if tau == T::zero() {
        return Err(Error::InvalidParameter("threshold is undefined at tau = 0".into()));
    }
    Ok(T::lit(0.5) - (T::lit(2.0) * tau * tau).recip())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub theta: f64,
    pub tau_samples: Vec<f64>,
    pub root_moduli: Vec<(f64, f64)>,
    pub max_modulus: f64,
    pub stable: bool,
}

/// Root moduli over the given `τ` samples; stable when none exceeds `1 + 1e−12`.
pub fn stability_report(theta: f64, taus: &[f64]) -> Result<StabilityReport> {
    let mut root_moduli = Vec::with_capacity(taus.len());
    for &tau in taus {
        let (z1, z2) = stability_roots(theta, tau)?;
        root_moduli.push((z1.norm(), z2.norm()));
    }
    let max_modulus = root_moduli.iter().map(|&(a, b)| a.max(b)).fold(0.0, f64::max);
    Ok(StabilityReport { theta, tau_samples: taus.to_vec(), root_moduli, max_modulus, stable: max_modulus <= 1.0 + 1e-12 })
}

/// `τ` for phase `kΔx`, using the actual symbols of `D` (`iλ`) and of `lap` (`−μ`).
pub fn discrete_tau<T: Scalar>(d: &DiffOp<T>, lap: &DiffOp<T>, dt: T, phase: T) -> T {
    let lambda = d.symbol(phase).im;
    let mu = -lap.symbol(phase).re;
    dt * lambda * mu
}

/// `τ` for every grid mode `k = 0, …, N−1` with `D = δ⟨1⟩` and `lap = δ⟨2⟩`.
pub fn grid_taus<T: Scalar>(grid: Grid1D<T>, dt: T) -> Vec<T> {
    let ops = crate::grid::make_standard_ops(grid);
    let n = grid.n_points();
    (0..n)
        .map(|k| {
            let phase = T::lit(2.0) * T::PI() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
            discrete_tau(&ops.centered, &ops.second, dt, phase)
        })
        .collect()
}

/// Largest `|τ|` over the grid modes.
pub fn tau_max<T: Scalar>(grid: Grid1D<T>, dt: T) -> T {
    grid_taus(grid, dt).into_iter().fold(T::zero(), |m, t| m.max(t.abs()))
}

/// Evenly spaced samples of `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}
