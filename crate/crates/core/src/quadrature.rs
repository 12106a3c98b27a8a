//! Gauss–Legendre rules on `[0, 1]`.

use crate::scalar::Scalar;

/// `n`-point Gauss–Legendre nodes and weights on `[0, 1]`; exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre_unit<T: Scalar>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 1, "need at least one node");
    let mut rule = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((T::lit(0.5 * (1.0 - x)), T::lit(0.5 * w)));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    rule
}

/// Nodes needed to integrate a polynomial of the given degree exactly.
pub fn nodes_for_degree(degree: u32) -> usize {
    (degree as usize + 2) / 2
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_monomials_exactly() {
        for n in 1..=8 {
            let rule = gauss_legendre_unit::<f64>(n);
            for deg in 0..(2 * n as i32) {
                let q: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg} got {q}");
            }
        }
    }

    #[test]
    fn node_count() {
        assert_eq!(nodes_for_degree(0), 1);
        assert_eq!(nodes_for_degree(1), 1);
        assert_eq!(nodes_for_degree(2), 2);
        assert_eq!(nodes_for_degree(3), 2);
        assert_eq!(nodes_for_degree(4), 3);
    }
}
