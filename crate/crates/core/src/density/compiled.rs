use crate::scalar::{coeff_to_scalar, Coefficient, Scalar};

/// A polynomial lowered to numeric coefficients and variable indices, ready for
/// pointwise evaluation on grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPoly<T> {
    terms: Vec<(T, Vec<(usize, u32)>)>,
}

impl<T: Scalar> CompiledPoly<T> {
    pub fn new<C: Coefficient>(terms: impl IntoIterator<Item = (C, Vec<(usize, u32)>)>) -> Self {
        Self { terms: terms.into_iter().map(|(c, f)| (coeff_to_scalar(&c), f)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest power of any single variable; bounds the degree along a straight segment.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, f)| f.iter().map(|(_, e)| e).sum()).max().unwrap_or(0)
    }

    /// Evaluates at every grid point; `vars[j]` holds the values of variable `j`.
    pub fn eval(&self, vars: &[&[T]], n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        self.eval_into(vars, T::one(), &mut out);
        out
    }

    /// `out += weight * self(vars)` pointwise.
    pub fn eval_into(&self, vars: &[&[T]], weight: T, out: &mut [T]) {
        for (c, factors) in &self.terms {
            let cw = *c * weight;
            for (i, o) in out.iter_mut().enumerate() {
                let mut v = cw;
                for &(j, e) in factors {
                    v *= vars[j][i].powi(e as i32);
                }
                *o += v;
            }
        }
    }
}
