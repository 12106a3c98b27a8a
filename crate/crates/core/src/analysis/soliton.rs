//! Solitary waves of `u_t + u_xxx + (u^{p−1})_x = 0` and the shape/distance diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction};
use crate::scalar::Scalar;

/// `Φ(ξ) = [A sech²(β ξ)]^{1/(p−2)}` travelling at speed `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Soliton {
    pub p: u32,
    pub c: f64,
    pub amplitude: f64,
    pub width: f64,
}

/// Periodic images summed on each side when sampling on a finite domain.
const IMAGES: i32 = 3;

impl Soliton {
    /// `(3c/2) sech²(√c/2 · ξ)`, the KdV (`p = 3`) solitary wave.
    pub fn kdv(c: f64) -> Result<Self> {
        Self::gkdv(3, c)
    }

    /// `[p c/2 · sech²((p−2)√c/2 · ξ)]^{1/(p−2)}`.
    pub fn gkdv(p: u32, c: f64) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidParameter(format!("solitary waves need p >= 3, got {p}")));
        }
        let pf = f64::from(p);
        Self::with_shape(p, c, pf * c / 2.0, (pf - 2.0) * c.sqrt() / 2.0)
    }

    /// Arbitrary amplitude and width, for checking candidate profiles against the PDE.
    pub fn with_shape(p: u32, c: f64, amplitude: f64, width: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("wave speed must be positive, got {c}")));
        }
        Ok(Self { p, c, amplitude, width })
    }

    /// Profile on the whole line.
    pub fn profile(&self, xi: f64) -> f64 {
        let s = (self.width * xi).cosh().recip();
        let base = self.amplitude * s * s;
        if self.p == 3 {
            base
        } else {
            base.powf(1.0 / f64::from(self.p - 2))
        }
    }

    /// Profile shifted by `shift` and summed over periodic images of length `length`.
    pub fn periodic(&self, x: f64, shift: f64, length: f64) -> f64 {
        let xi = (x - shift).rem_euclid(length);
        let xi = if xi > 0.5 * length { xi - length } else { xi };
        (-IMAGES..=IMAGES).map(|m| self.profile(xi + f64::from(m) * length)).sum()
    }

    pub fn sample<T: Scalar>(&self, grid: Grid1D<T>, t: f64) -> GridFunction<T> {
        let length = grid.length().to_f64_lossy();
        GridFunction::sample(grid, |x| T::lit(self.periodic(x.to_f64_lossy(), self.c * t, length)))
    }

    /// `max |−cΦ' + Φ''' + (Φ^{p−1})'|` over `points`, with derivatives taken by
    /// high-order central differences, independently of the closed form.
    pub fn pde_residual(&self, points: &[f64]) -> f64 {
        let h = 1e-2;
        let f = |x: f64| self.profile(x);
        let g = |x: f64| self.profile(x).powi(self.p as i32 - 1);
        let d1 = |q: &dyn Fn(f64) -> f64, x: f64| {
            (-q(x + 2.0 * h) + 8.0 * q(x + h) - 8.0 * q(x - h) + q(x - 2.0 * h)) / (12.0 * h)
        };
        let d3 = |q: &dyn Fn(f64) -> f64, x: f64| {
            (-q(x + 3.0 * h) + 8.0 * q(x + 2.0 * h) - 13.0 * q(x + h) + 13.0 * q(x - h) - 8.0 * q(x - 2.0 * h) + q(x - 3.0 * h))
                / (8.0 * h * h * h)
        };
        points
            .iter()
            .map(|&x| (-self.c * d1(&f, x) + d3(&f, x) + d1(&g, x)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolitonErrors {
    pub t: f64,
    pub shape_err: f64,
    pub distance_err: f64,
    /// Best-fit translate, in `[ct − L/2, ct + L/2)`.
    pub shift: f64,
}

/// `min_τ ‖U − Φ(· − τ)‖²` and `|argmin − ct|`, by a scan over `4N` shifts
/// followed by successive three-point parabolic refinement.
pub fn shape_distance_errors<T: Scalar>(u: &GridFunction<T>, t: f64, soliton: &Soliton) -> SolitonErrors {
    let grid = u.grid();
    let length = grid.length().to_f64_lossy();
    let dx = grid.dx().to_f64_lossy();
    let xs: Vec<f64> = grid.nodes().map(|x| x.to_f64_lossy()).collect();
    let vals: Vec<f64> = u.values().iter().map(|v| v.to_f64_lossy()).collect();
    let misfit = |tau: f64| -> f64 {
        xs.iter().zip(&vals).map(|(&x, &v)| (v - soliton.periodic(x, tau, length)).powi(2)).sum::<f64>() * dx
    };
    let centre = soliton.c * t;
    let scans = 4 * xs.len();
    let mut h = length / scans as f64;
    let (mut best, mut best_val) = (centre, f64::INFINITY);
    for i in 0..scans {
        let tau = centre - 0.5 * length + i as f64 * h;
        let val = misfit(tau);
        if val < best_val {
            best = tau;
            best_val = val;
        }
    }
    for _ in 0..80 {
        let (fm, f0, fp) = (misfit(best - h), best_val, misfit(best + h));
        let curvature = fm - 2.0 * f0 + fp;
        let step = if curvature > 0.0 { (0.5 * h * (fm - fp) / curvature).clamp(-h, h) } else if fm < fp { -h } else { h };
        let candidate = best + step;
        let val = misfit(candidate);
        if val < best_val {
            best = candidate;
            best_val = val;
        }
        h *= 0.25;
        if h < 1e-13 * length {
            break;
        }
    }
    SolitonErrors { t, shape_err: best_val, distance_err: (best - centre).abs(), shift: best }
}
