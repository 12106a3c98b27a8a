//! Dense linear algebra for the per-step systems.

use crate::error::{Error, Result};
use crate::grid::{DiffOp, GridFunction};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix rows must all have length n".into()));
        }
        Ok(Self { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_op(op: &DiffOp<T>) -> Self {
        let n = op.grid().n_points();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for (&s, &c) in op.stencil() {
                m[(i, op.grid().wrap(i as isize + s))] += c;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }

    pub fn scale_in_place(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn add_diagonal(&mut self, s: T) {
        for i in 0..self.n {
            self[(i, i)] += s;
        }
    }

    /// `self += scale * Aᵀ diag(w) B` for circulant `A`, `B`, without forming either densely.
    pub fn add_sandwich(&mut self, a: &DiffOp<T>, w: &[T], b: &DiffOp<T>, scale: T) {
        let grid = a.grid();
        for (i, &wi) in w.iter().enumerate() {
            if wi == T::zero() {
                continue;
            }
            for (&s, &ca) in a.stencil() {
                let row = grid.wrap(i as isize + s);
                let f = scale * ca * wi;
                for (&t, &cb) in b.stencil() {
                    let col = grid.wrap(i as isize + t);
                    self[(row, col)] += f * cb;
                }
            }
        }
    }

    /// `op · self`, for a circulant `op` acting on the left.
    pub fn left_apply(&self, op: &DiffOp<T>) -> Self {
        let mut out = Self::zeros(self.n);
        let grid = op.grid();
        for i in 0..self.n {
            for (&s, &c) in op.stencil() {
                let src = grid.wrap(i as isize + s);
                for j in 0..self.n {
                    out[(i, j)] += c * self[(src, j)];
                }
            }
        }
        out
    }

    pub fn inf_norm(&self) -> T {
        (0..self.n).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<T>()).fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// LU factorisation with partial pivoting, `PA = LU`.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    original: DenseMatrix<T>,
}

impl<T: Scalar> LuFactors<T> {
    /// Returns `None` when a pivot vanishes (numerically singular matrix).
    pub fn factor(a: &DenseMatrix<T>) -> Option<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.inf_norm().max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for k in 0..n {
            let (p, pmax) = (k..n).map(|i| (i, lu[(i, k)].abs())).fold((k, T::zero()), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
            if !(pmax > tiny) {
                return None;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Some(Self { lu, perm, original: a.clone() })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves and checks `‖Ax − b‖∞ ≤ tol·‖b‖∞` with the scalar type's residual tolerance.
    pub fn solve_checked(&self, b: &[T]) -> Result<Vec<T>> {
        let x = self.solve(b);
        let ax = self.original.matvec(&x);
        let residual = ax.iter().zip(b).map(|(&a, &bb)| (a - bb).abs()).fold(T::zero(), T::max);
        let bnorm = b.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        let tolerance = T::lit(T::LINEAR_RESIDUAL_TOL) * bnorm;
        if !(residual <= tolerance) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::ResidualCheck { residual: residual.to_f64_lossy(), tolerance: tolerance.to_f64_lossy() });
        }
        Ok(x)
    }
}

/// Square system `A x = b` with `b` living on a grid.
#[derive(Debug, Clone)]
pub struct LinearSystem<T> {
    pub matrix: DenseMatrix<T>,
    pub rhs: GridFunction<T>,
}

/// Dense LU with partial pivoting plus a residual post-check.
pub fn solve_linear<T: Scalar>(sys: &LinearSystem<T>) -> Result<GridFunction<T>> {
    if sys.matrix.n() != sys.rhs.len() {
        return Err(Error::Dimension(format!("{}x{} matrix with {} right-hand side entries", sys.matrix.n(), sys.matrix.n(), sys.rhs.len())));
    }
    let lu = LuFactors::factor(&sys.matrix).ok_or(Error::SingularSystem { step: 0, dt: f64::NAN })?;
    let x = lu.solve_checked(sys.rhs.values())?;
    GridFunction::new(*sys.rhs.grid(), x)
}
