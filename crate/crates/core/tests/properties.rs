use num_complex::Complex;
use polint_core::density::{hamiltonian_d, parse_density, CompiledDensity, DensityPoly, Realisation};
use polint_core::grid::{inner, make_standard_ops, DiffOp, Grid1D, GridFunction};
use polint_core::linalg::{DenseMatrix, LuFactors};
use polint_core::polarisation::{collapse, eval_polarised, polarise};
use polint_core::variational::{avf_dvd, pavf_dvd};
use polint_core::Rational;
use proptest::prelude::*;

fn grid(n: usize, length: f64) -> Grid1D<f64> {
    Grid1D::over(n, 0.0, length).unwrap()
}

fn state(g: Grid1D<f64>, values: &[f64]) -> GridFunction<f64> {
    GridFunction::new(g, values[..g.n_points()].to_vec()).unwrap()
}

fn close(a: &GridFunction<f64>, b: &GridFunction<f64>, tol: f64) -> bool {
    a.sub(b).unwrap().sup_norm() <= tol * (1.0 + a.sup_norm())
}

/// Monomials in `u, u_x, u_xx` of degree at most four.
const MONOMIALS: [&str; 10] = ["u^2", "u_x^2", "u^3", "u*u_x^2", "u_xx^2", "u^4", "u*u_xx", "u^2*u_x", "u_x^2*u_xx", "u^2*u_x^2"];

fn density_src(coeffs: &[i64]) -> String {
    coeffs.iter().zip(MONOMIALS).map(|(c, m)| format!("({c}/7)*{m}")).collect::<Vec<_>>().join(" + ")
}

/// Gaussian elimination with partial pivoting on a copy, written out independently of the library.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn difference_operator_algebra(n in 6usize..40, length in 1.0f64..20.0, vals in prop::collection::vec(-1.0f64..1.0, 40)) {
        let g = grid(n, length);
        let ops = make_standard_ops(g);
        let u = state(g, &vals);
        prop_assert!(ops.centered.is_skew());
        prop_assert!(ops.second.is_symmetric());
        prop_assert!(ops.third.is_skew());
        // δ+ᵀ = −δ−, δ+ᵀδ+ = −δ⟨2⟩ and δ⟨3⟩ = δ⟨1⟩δ⟨2⟩.
        let ft = ops.forward.transpose().apply(&u).unwrap();
        prop_assert!(close(&ft, &ops.backward.apply(&u).unwrap().scale(-1.0), 1e-12));
        let ftf = ops.forward.transpose().compose(&ops.forward).unwrap().apply(&u).unwrap();
        prop_assert!(close(&ftf, &ops.second.apply(&u).unwrap().scale(-1.0), 1e-12));
        let third = ops.centered.apply(&ops.second.apply(&u).unwrap()).unwrap();
        prop_assert!(close(&third, &ops.third.apply(&u).unwrap(), 1e-12));
        // Summation by parts: ⟨δ+ u, v⟩ = −⟨u, δ− v⟩.
        let v = u.roll(3).map(|x| x * x - 0.3);
        let lhs = inner(&ops.forward.apply(&u).unwrap(), &v).unwrap();
        let rhs = -inner(&u, &ops.backward.apply(&v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn symbols_diagonalise_operators(n in 6usize..40, k in 0usize..40) {
        let g = grid(n, 2.0 * std::f64::consts::PI);
        let k = k % n;
        let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        for op in [DiffOp::forward(g), DiffOp::centered(g), make_standard_ops(g).second, make_standard_ops(g).third] {
            let modes: Vec<Complex<f64>> = (0..n).map(|j| Complex::from_polar(1.0, phase * j as f64)).collect();
            let re = GridFunction::new(g, modes.iter().map(|z| z.re).collect()).unwrap();
            let im = GridFunction::new(g, modes.iter().map(|z| z.im).collect()).unwrap();
            let (ar, ai) = (op.apply(&re).unwrap(), op.apply(&im).unwrap());
            let s = op.symbol(phase);
            for j in 0..n {
                let got = Complex::new(ar.values()[j], ai.values()[j]);
                prop_assert!((got - s * modes[j]).norm() <= 1e-9 * (1.0 + s.norm()));
            }
        }
    }

    #[test]
    fn variational_derivative_is_the_gradient(coeffs in prop::collection::vec(-7i64..=7, 10), n in 6usize..16, vals in prop::collection::vec(-1.0f64..1.0, 16)) {
        let g = grid(n, 3.0);
        let d = parse_density::<Rational>(&density_src(&coeffs)).unwrap();
        let r = Realisation::standard(g);
        let u = state(g, &vals);
        let vd = CompiledDensity::new(&d, &r).unwrap().variational_derivative(&u).unwrap();
        let eps = 1e-5;
        for i in 0..n {
            let mut plus = u.clone();
            plus.values_mut()[i] += eps;
            let mut minus = u.clone();
            minus.values_mut()[i] -= eps;
            let fd = (hamiltonian_d(&d, &plus, &r).unwrap() - hamiltonian_d(&d, &minus, &r).unwrap()) / (2.0 * eps * g.dx());
            prop_assert!((fd - vd.values()[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "node {}: {} vs {}", i, fd, vd.values()[i]);
        }
    }

    #[test]
    fn avf_difference_identity(coeffs in prop::collection::vec(-7i64..=7, 10), n in 6usize..24, a in prop::collection::vec(-1.0f64..1.0, 24), b in prop::collection::vec(-1.0f64..1.0, 24)) {
        let g = grid(n, 5.0);
        let d = parse_density::<Rational>(&density_src(&coeffs)).unwrap();
        for r in [Realisation::standard(g), Realisation::forward(g)] {
            let (u, v) = (state(g, &a), state(g, &b));
            let lhs = hamiltonian_d(&d, &u, &r).unwrap() - hamiltonian_d(&d, &v, &r).unwrap();
            let rhs = inner(&avf_dvd(&d, &r, &v, &u).unwrap(), &u.sub(&v).unwrap()).unwrap() * g.dx();
            prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn polarisation_is_consistent_cyclic_quadratic_and_linear(c1 in prop::collection::vec(-7i64..=7, 10), c2 in prop::collection::vec(-7i64..=7, 10), k in 2usize..4, tn in 0i64..=10) {
        let theta = Rational::new(tn, 10);
        let d1 = parse_density::<Rational>(&density_src(&c1)).unwrap();
        let d2 = parse_density::<Rational>(&density_src(&c2)).unwrap();
        let p1 = polarise(&d1, k, theta).unwrap();
        prop_assert!(collapse(&p1) == d1);
        prop_assert!(p1.is_cyclic());
        prop_assert!(p1.check_quadratic().is_ok());
        let sum = polarise(&d1.add(&d2), k, theta).unwrap();
        let parts = p1.add(&polarise(&d2, k, theta).unwrap()).unwrap();
        prop_assert!(sum == parts);
    }

    #[test]
    fn pavf_difference_identity(coeffs in prop::collection::vec(-7i64..=7, 10), k in 2usize..4, n in 6usize..20, vals in prop::collection::vec(-1.0f64..1.0, 80)) {
        let g = grid(n, 4.0);
        let r = Realisation::forward(g);
        let pd = polarise(&parse_density::<Rational>(&density_src(&coeffs)).unwrap(), k, Rational::new(1, 2)).unwrap();
        let ws: Vec<_> = (0..=k).map(|j| state(g, &vals[j * 20..])).collect();
        let later = eval_polarised(&pd, &ws[1..], &r).unwrap();
        let earlier = eval_polarised(&pd, &ws[..k], &r).unwrap();
        let rhs = inner(&pavf_dvd(&pd, &r, &ws).unwrap(), &ws[k].sub(&ws[0]).unwrap()).unwrap() * g.dx();
        prop_assert!(((later - earlier) - rhs).abs() <= 1e-11 * (1.0 + later.abs() + earlier.abs()));
        // All arguments equal: the polarised value is the original Hamiltonian.
        let same = vec![ws[0].clone(); k];
        let h = hamiltonian_d(&collapse(&pd), &ws[0], &r).unwrap();
        prop_assert!((eval_polarised(&pd, &same, &r).unwrap() - h).abs() <= 1e-12 * (1.0 + h.abs()));
    }

    #[test]
    fn lu_matches_gaussian_elimination(n in 4usize..30, dt in 0.001f64..1.0, vals in prop::collection::vec(-1.0f64..1.0, 30), w in prop::collection::vec(0.0f64..2.0, 30)) {
        let g = grid(n, 10.0);
        let ops = make_standard_ops(g);
        // I/dt − δ⟨1⟩ (diag(w) δ⟨2⟩): the shape of a linearly implicit step.
        let mut a = DenseMatrix::from_op(&ops.second);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] *= w[i];
            }
        }
        let mut m = a.left_apply(&ops.centered);
        m.scale_in_place(-1.0);
        m.add_diagonal(1.0 / dt);
        let b = vals[..n].to_vec();
        let lu = LuFactors::factor(&m).unwrap();
        let x = lu.solve(&b);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
        let oracle = gauss_solve(rows, b.clone());
        let scale = oracle.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for (p, q) in x.iter().zip(&oracle) {
            prop_assert!((p - q).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn circulant_solve_matches_fourier_oracle(n in 4usize..24, dt in 0.001f64..0.5, k in 0usize..24) {
        // (I/dt − δ⟨3⟩) x = e^{ikx} has the solution e^{ikx} / (1/dt − σ(k)).
        let g = grid(n, 2.0 * std::f64::consts::PI);
        let ops = make_standard_ops(g);
        let mut m = DenseMatrix::from_op(&ops.third);
        m.scale_in_place(-1.0);
        m.add_diagonal(1.0 / dt);
        let lu = LuFactors::factor(&m).unwrap();
        let k = k % n;
        let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let denom = Complex::new(1.0 / dt, 0.0) - ops.third.symbol(phase);
        let re: Vec<f64> = (0..n).map(|j| (phase * j as f64).cos()).collect();
        let im: Vec<f64> = (0..n).map(|j| (phase * j as f64).sin()).collect();
        let (xr, xi) = (lu.solve(&re), lu.solve(&im));
        for j in 0..n {
            let expect = Complex::from_polar(1.0, phase * j as f64) / denom;
            prop_assert!((Complex::new(xr[j], xi[j]) - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
        }
    }
}

#[test]
fn single_precision_instantiation() {
    let g = Grid1D::<f32>::over(16, 0.0, 4.0).unwrap();
    let d: DensityPoly<Rational> = parse_density("(1/2)*u_x^2 - (1/3)*u^3").unwrap();
    let r = Realisation::forward(g);
    let u = GridFunction::sample(g, |x| (x * 1.3).sin());
    let v = GridFunction::sample(g, |x| (x * 0.7).cos());
    let lhs = hamiltonian_d(&d, &u, &r).unwrap() - hamiltonian_d(&d, &v, &r).unwrap();
    let rhs = inner(&avf_dvd(&d, &r, &v, &u).unwrap(), &u.sub(&v).unwrap()).unwrap() * g.dx();
    assert!((lhs - rhs).abs() < 1e-4 * (1.0 + lhs.abs()));
}
