use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Coefficient;

/// Largest derivative order an indeterminate may carry.
pub const NU_MAX: u8 = 4;

/// The jet variable `u_J^α`; in one dimension `J` is just the derivative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Indeterminate {
    deriv_order: u8,
    component: u8,
}

impl Indeterminate {
    pub const U: Self = Self { deriv_order: 0, component: 0 };
    pub const U_X: Self = Self { deriv_order: 1, component: 0 };
    pub const U_XX: Self = Self { deriv_order: 2, component: 0 };
    pub const U_XXX: Self = Self { deriv_order: 3, component: 0 };

    pub fn new(deriv_order: u8) -> Result<Self> {
        Self::with_component(deriv_order, 0)
    }

    pub fn with_component(deriv_order: u8, component: u8) -> Result<Self> {
        if deriv_order > NU_MAX {
            return Err(Error::DerivativeOrderTooHigh { order: deriv_order, cap: NU_MAX });
        }
        Ok(Self { deriv_order, component })
    }

    pub fn deriv_order(&self) -> u8 {
        self.deriv_order
    }

    pub fn component(&self) -> u8 {
        self.component
    }

    /// DSL name: `u`, `u_x`, `u_xx`, ...
    pub fn name(&self) -> String {
        let base = if self.component == 0 { "u".to_string() } else { format!("u{}", self.component) };
        if self.deriv_order == 0 {
            base
        } else {
            format!("{base}_{}", "x".repeat(self.deriv_order as usize))
        }
    }
}

impl fmt::Display for Indeterminate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Multiset of indeterminates with positive exponents, in canonical order.
pub type Factors = BTreeMap<Indeterminate, u32>;

pub fn factors_degree(factors: &Factors) -> u32 {
    factors.values().sum()
}

/// Factors listed with repetition in canonical order, e.g. `u^2 u_x -> [u, u, u_x]`.
pub fn expand_factors(factors: &Factors) -> Vec<Indeterminate> {
    factors.iter().flat_map(|(&z, &e)| std::iter::repeat_n(z, e as usize)).collect()
}

pub fn collect_factors(list: impl IntoIterator<Item = Indeterminate>) -> Factors {
    let mut out = Factors::new();
    for z in list {
        *out.entry(z).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial<C> {
    pub coeff: C,
    pub factors: Factors,
}

impl<C: Coefficient> Monomial<C> {
    pub fn degree(&self) -> u32 {
        factors_degree(&self.factors)
    }

    pub fn expanded(&self) -> Vec<Indeterminate> {
        expand_factors(&self.factors)
    }
}

/// Polynomial density in the jet variables, kept merged: one coefficient per factor multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPoly<C> {
    terms: BTreeMap<Factors, C>,
}

impl<C: Coefficient> Default for DensityPoly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> DensityPoly<C> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(c, Factors::new())
    }

    pub fn var(z: Indeterminate) -> Self {
        Self::monomial(C::one(), collect_factors([z]))
    }

    pub fn monomial(coeff: C, factors: Factors) -> Self {
        let mut p = Self::zero();
        p.add_term(coeff, factors);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (C, Factors)>) -> Self {
        let mut p = Self::zero();
        for (c, f) in terms {
            p.add_term(c, f);
        }
        p
    }

    /// Adds `coeff * factors`, merging with an existing equal factor multiset.
    pub fn add_term(&mut self, coeff: C, factors: Factors) {
        let factors: Factors = factors.into_iter().filter(|(_, e)| *e > 0).collect();
        let merged = match self.terms.remove(&factors) {
            Some(existing) => existing + coeff,
            None => coeff,
        };
        if !merged.is_zero() {
            self.terms.insert(factors, merged);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = Monomial<C>> + '_ {
        self.terms.iter().map(|(f, c)| Monomial { coeff: c.clone(), factors: f.clone() })
    }

    pub fn coefficient(&self, factors: &Factors) -> C {
        self.terms.get(factors).cloned().unwrap_or_else(C::zero)
    }

    /// Highest total degree of any term; this is the `p` that fixes how many polarisation slots are needed.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(factors_degree).max().unwrap_or(0)
    }

    pub fn max_deriv_order(&self) -> u8 {
        self.terms.keys().flat_map(|f| f.keys()).map(|z| z.deriv_order()).max().unwrap_or(0)
    }

    /// Indeterminates occurring anywhere, in canonical order.
    pub fn indeterminates(&self) -> Vec<Indeterminate> {
        let mut all: Vec<_> = self.terms.keys().flat_map(|f| f.keys().copied()).collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (f, c) in &other.terms {
            out.add_term(c.clone(), f.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-C::one()))
    }

    pub fn scale(&self, s: &C) -> Self {
        Self::from_terms(self.terms.iter().map(|(f, c)| (c.clone() * s.clone(), f.clone())))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (fa, ca) in &self.terms {
            for (fb, cb) in &other.terms {
                let mut f = fa.clone();
                for (&z, &e) in fb {
                    *f.entry(z).or_insert(0) += e;
                }
                out.add_term(ca.clone() * cb.clone(), f);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(C::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Returns the constant value when the polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<C> {
        match self.terms.len() {
            0 => Some(C::zero()),
            1 => self.terms.get(&Factors::new()).cloned(),
            _ => None,
        }
    }

    /// Formal partial derivative with respect to one indeterminate.
    pub fn partial(&self, z: Indeterminate) -> Self {
        let mut out = Self::zero();
        for (f, c) in &self.terms {
            if let Some(&e) = f.get(&z) {
                let mut g = f.clone();
                if e == 1 {
                    g.remove(&z);
                } else {
                    g.insert(z, e - 1);
                }
                out.add_term(c.clone() * C::from_int(i64::from(e)), g);
            }
        }
        out
    }

    /// Converts coefficients into another coefficient type.
    pub fn cast<D: Coefficient>(&self) -> DensityPoly<D> {
        DensityPoly::from_terms(self.terms.iter().map(|(f, c)| (crate::scalar::convert_coefficient(c), f.clone())))
    }

    /// Renders the polynomial in the density DSL; the output parses back to the same polynomial.
    pub fn to_dsl(&self) -> String
    where
        C: fmt::Display,
    {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(f, c)| {
                let mut s = format!("({c})");
                for (z, e) in f {
                    s.push('*');
                    s.push_str(&z.name());
                    if *e > 1 {
                        s.push_str(&format!("^{e}"));
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    }
}
