//! Polarised densities: `k`-argument, cyclically invariant, per-argument quadratic
//! replacements of a polynomial density that collapse back to it on the diagonal.
//!
//! Each monomial `u_{i1}···u_{ip}` (factors in canonical order) is cut into
//! consecutive pairs `u_{i1}u_{i2}`, `u_{i3}u_{i4}`, ... with a lone last factor
//! when `p` is odd. Pair `r` goes into argument slot `r`, and the result is
//! averaged over the `k` cyclic shifts of the slots.
//!
//! Degree-two monomials `a·b` carry one extra free parameter θ:
//!
//! ```text
//! θ · avg_s (a b)_s  +  (1 − θ) · avg_s ½(a_s b_{s+1} + b_s a_{s+1})
//! ```
//!
//! For `k = 2` and `a = b = z` this is `θ(z₁² + z₂²)/2 + (1 − θ) z₁z₂`. The same
//! blend is used for mixed pairs and for `k > 2`; only the `k = 2`, `a = b`
//! case is covered by the stability analysis in [`crate::analysis::stability`].

use std::collections::BTreeMap;

use serde::Serialize;

use crate::density::{collect_factors, CompiledPoly, DensityPoly, Factors, Indeterminate, Realisation};
use crate::density::poly::factors_degree;
use crate::error::{Error, Result};
use crate::grid::{DiffOp, Grid1D, GridFunction};
use crate::linalg::DenseMatrix;
use crate::quadrature::{gauss_legendre_unit, nodes_for_degree};
use crate::scalar::{Coefficient, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct PolarisedMonomial<C> {
    pub coeff: C,
    pub slots: Vec<Factors>,
}

/// Slot factor lists, one per argument; the key of a merged polarised term.
pub type SlotFactors = Vec<Factors>;

#[derive(Debug, Clone, PartialEq)]
pub struct PolarisedDensity<C> {
    k: usize,
    theta: C,
    terms: BTreeMap<SlotFactors, C>,
}

impl<C: Coefficient> PolarisedDensity<C> {
    pub fn empty(k: usize, theta: C) -> Self {
        Self { k, theta, terms: BTreeMap::new() }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> &C {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = PolarisedMonomial<C>> + '_ {
        self.terms.iter().map(|(s, c)| PolarisedMonomial { coeff: c.clone(), slots: s.clone() })
    }

    pub fn add_term(&mut self, coeff: C, slots: SlotFactors) {
        assert_eq!(slots.len(), self.k, "slot count must equal k");
        let slots: SlotFactors = slots.into_iter().map(|f| f.into_iter().filter(|(_, e)| *e > 0).collect()).collect();
        let merged = match self.terms.remove(&slots) {
            Some(existing) => existing + coeff,
            None => coeff,
        };
        if !merged.is_zero() {
            self.terms.insert(slots, merged);
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::ArgumentCount { expected: self.k, got: other.k });
        }
        let mut out = self.clone();
        for (s, c) in &other.terms {
            out.add_term(c.clone(), s.clone());
        }
        Ok(out)
    }

    /// Left shift of the arguments: `G[w₁,…,w_k] ↦ G[w₂,…,w_k,w₁]`.
    pub fn shifted(&self) -> Self {
        let mut out = Self::empty(self.k, self.theta.clone());
        for (slots, c) in &self.terms {
            let mut rotated = slots.clone();
            // Slot j of the shifted density reads argument j+1.
            rotated.rotate_right(1);
            out.add_term(c.clone(), rotated);
        }
        out
    }

    pub fn is_cyclic(&self) -> bool {
        self.shifted() == *self
    }

    /// Largest total degree found in any single slot.
    pub fn max_slot_degree(&self) -> u32 {
        self.terms.keys().flat_map(|s| s.iter().map(factors_degree)).max().unwrap_or(0)
    }

    /// Errors unless every slot of every term is at most quadratic.
    pub fn check_quadratic(&self) -> Result<()> {
        for slots in self.terms.keys() {
            for (slot, f) in slots.iter().enumerate() {
                let degree = factors_degree(f);
                if degree > 2 {
                    return Err(Error::NonQuadraticSlot { slot, degree });
                }
            }
        }
        Ok(())
    }

    pub fn cast<D: Coefficient>(&self) -> PolarisedDensity<D> {
        let mut out = PolarisedDensity::empty(self.k, crate::scalar::convert_coefficient(&self.theta));
        for (s, c) in &self.terms {
            out.add_term(crate::scalar::convert_coefficient(c), s.clone());
        }
        out
    }

    /// Inspection dump with slot-tagged factors.
    pub fn dump(&self) -> PolarisationDump {
        PolarisationDump {
            k: self.k,
            theta: self.theta.as_f64(),
            terms: self
                .terms
                .iter()
                .map(|(slots, c)| DumpTerm {
                    coeff: c.as_f64(),
                    coeff_text: format!("{c}"),
                    slots: slots
                        .iter()
                        .map(|f| f.iter().map(|(z, &e)| DumpFactor { var: z.name(), exp: e }).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PolarisationDump {
    pub k: usize,
    pub theta: f64,
    pub terms: Vec<DumpTerm>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DumpTerm {
    pub coeff: f64,
    pub coeff_text: String,
    pub slots: Vec<Vec<DumpFactor>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DumpFactor {
    pub var: String,
    pub exp: u32,
}

fn check_args<C: Coefficient>(density: &DensityPoly<C>, k: usize, theta: &C) -> Result<()> {
    let degree = density.degree();
    let required = (degree as usize).div_ceil(2).max(2);
    if k < required {
        return Err(Error::TooFewArguments { k, required, degree });
    }
    if *theta < C::zero() || *theta > C::one() {
        return Err(Error::ThetaOutOfRange(theta.as_f64()));
    }
    Ok(())
}

fn empty_slots(k: usize) -> SlotFactors {
    vec![Factors::new(); k]
}

/// Polarises with the canonical pair grouping.
pub fn polarise<C: Coefficient>(density: &DensityPoly<C>, k: usize, theta: C) -> Result<PolarisedDensity<C>> {
    polarise_with(density, k, theta, |f| f.to_vec())
}

/// Polarises with a caller-chosen ordering of each monomial's factors before pairing.
///
/// `reorder` receives the factors in canonical order and must return a permutation of them.
pub fn polarise_with<C: Coefficient>(
    density: &DensityPoly<C>,
    k: usize,
    theta: C,
    reorder: impl Fn(&[Indeterminate]) -> Vec<Indeterminate>,
) -> Result<PolarisedDensity<C>> {
    check_args(density, k, &theta)?;
    let mut out = PolarisedDensity::empty(k, theta.clone());
    let k_c = C::from_int(k as i64);
    for m in density.terms() {
        let canonical = m.expanded();
        let factors = reorder(&canonical);
        if collect_factors(factors.iter().copied()) != m.factors {
            return Err(Error::InvalidParameter("reordering must permute the monomial's factors".into()));
        }
        let per_shift = m.coeff.clone() / k_c.clone();
        match factors.len() {
            0 => out.add_term(m.coeff.clone(), empty_slots(k)),
            2 => {
                let (a, b) = (factors[0], factors[1]);
                let half = C::from_ratio(1, 2);
                for s in 0..k {
                    let mut same = empty_slots(k);
                    same[s] = collect_factors([a, b]);
                    out.add_term(per_shift.clone() * theta.clone(), same);

                    let next = (s + 1) % k;
                    let split_weight = per_shift.clone() * (C::one() - theta.clone()) * half.clone();
                    let mut ab = empty_slots(k);
                    ab[s] = collect_factors([a]);
                    ab[next] = collect_factors([b]);
                    out.add_term(split_weight.clone(), ab);
                    let mut ba = empty_slots(k);
                    ba[s] = collect_factors([b]);
                    ba[next] = collect_factors([a]);
                    out.add_term(split_weight, ba);
                }
            }
            _ => {
                let groups: Vec<Factors> = factors.chunks(2).map(|c| collect_factors(c.iter().copied())).collect();
                for s in 0..k {
                    let mut slots = empty_slots(k);
                    for (r, g) in groups.iter().enumerate() {
                        slots[(r + s) % k] = g.clone();
                    }
                    out.add_term(per_shift.clone(), slots);
                }
            }
        }
    }
    Ok(out)
}

/// The gKdV polarisation with `k = ⌈p/2⌉` arguments:
///
/// ```text
/// G = (1/2k) Σ (w_i)_x²  −  (1/(pk)) Σ_i w_i Π_{j≠i} w_j²     (p odd)
/// G = (1/2k) Σ (w_i)_x²  −  (1/p) Π_j w_j²                     (p even)
/// ```
///
/// When `k = 2` the derivative term is the θ-blend `½[θ(u_x² + v_x²)/2 + (1 − θ)u_x v_x]`.
pub fn polarise_gkdv<C: Coefficient>(p: u32, theta: C) -> Result<PolarisedDensity<C>> {
    if p < 3 {
        return Err(Error::InvalidParameter(format!("gKdV needs p >= 3, got {p}")));
    }
    if theta < C::zero() || theta > C::one() {
        return Err(Error::ThetaOutOfRange(theta.as_f64()));
    }
    let k = (p as usize).div_ceil(2);
    let mut out = PolarisedDensity::empty(k, theta.clone());
    let ux = Indeterminate::U_X;
    let u = Indeterminate::U;
    if k == 2 {
        let half = C::from_ratio(1, 2);
        for s in 0..2 {
            let mut sq = empty_slots(2);
            sq[s] = collect_factors([ux, ux]);
            out.add_term(half.clone() * theta.clone() * half.clone(), sq);
        }
        let mut cross = empty_slots(2);
        cross[0] = collect_factors([ux]);
        cross[1] = collect_factors([ux]);
        out.add_term(half * (C::one() - theta), cross);
    } else {
        let w = C::from_ratio(1, 2 * k as i64);
        for s in 0..k {
            let mut sq = empty_slots(k);
            sq[s] = collect_factors([ux, ux]);
            out.add_term(w.clone(), sq);
        }
    }
    if p % 2 == 1 {
        let w = -C::from_ratio(1, i64::from(p) * k as i64);
        for i in 0..k {
            let slots = (0..k).map(|j| if j == i { collect_factors([u]) } else { collect_factors([u, u]) }).collect();
            out.add_term(w.clone(), slots);
        }
    } else {
        let slots = (0..k).map(|_| collect_factors([u, u])).collect();
        out.add_term(-C::from_ratio(1, i64::from(p)), slots);
    }
    Ok(out)
}

/// Substitutes one argument into every slot.
pub fn collapse<C: Coefficient>(pd: &PolarisedDensity<C>) -> DensityPoly<C> {
    DensityPoly::from_terms(pd.terms.iter().map(|(slots, c)| {
        let mut merged = Factors::new();
        for f in slots {
            for (&z, &e) in f {
                *merged.entry(z).or_insert(0) += e;
            }
        }
        (c.clone(), merged)
    }))
}

/// `H[w₁,…,w_k] = Σ_i G_d(...)_i Δx` with unit quadrature weights.
pub fn eval_polarised<C: Coefficient, T: Scalar>(
    pd: &PolarisedDensity<C>,
    ws: &[GridFunction<T>],
    realisation: &Realisation<T>,
) -> Result<T> {
    CompiledPolarised::new(pd, realisation)?.value(ws)
}

/// Jet variable of a polarised density: argument slot and indeterminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlotVar {
    pub slot: usize,
    pub var: Indeterminate,
}

/// A polarised density lowered to numeric form, with the slot-1 derivatives
/// needed for the PAVF discrete variational derivative.
#[derive(Debug, Clone)]
pub struct CompiledPolarised<T> {
    k: usize,
    grid: Grid1D<T>,
    vars: Vec<SlotVar>,
    ops: Vec<DiffOp<T>>,
    value: CompiledPoly<T>,
    /// For each slot-1 variable `z`: `(index into vars, ∂G/∂w₁_z, GL rule)`.
    first: Vec<(usize, CompiledPoly<T>, Vec<(T, T)>)>,
    /// For each pair of slot-1 variables: `∂²G/∂w₁_z∂w₁_y` (free of slot 1 when quadratic).
    second: Vec<(usize, usize, CompiledPoly<T>)>,
    quadratic: bool,
}

fn slot_poly<C: Coefficient>(pd: &PolarisedDensity<C>) -> (Vec<SlotVar>, BTreeMap<Vec<(usize, u32)>, C>) {
    let mut vars: Vec<SlotVar> = pd
        .terms
        .keys()
        .flat_map(|slots| slots.iter().enumerate().flat_map(|(s, f)| f.keys().map(move |&z| SlotVar { slot: s, var: z })))
        .collect();
    vars.sort();
    vars.dedup();
    let mut poly = BTreeMap::new();
    for (slots, c) in &pd.terms {
        let mut key: Vec<(usize, u32)> = Vec::new();
        for (s, f) in slots.iter().enumerate() {
            for (&z, &e) in f {
                let idx = vars.iter().position(|v| *v == SlotVar { slot: s, var: z }).expect("listed");
                key.push((idx, e));
            }
        }
        key.sort();
        poly.insert(key, c.clone());
    }
    (vars, poly)
}

fn differentiate<C: Coefficient>(poly: &BTreeMap<Vec<(usize, u32)>, C>, var: usize) -> BTreeMap<Vec<(usize, u32)>, C> {
    let mut out: BTreeMap<Vec<(usize, u32)>, C> = BTreeMap::new();
    for (key, c) in poly {
        if let Some(pos) = key.iter().position(|&(j, _)| j == var) {
            let e = key[pos].1;
            let mut k2 = key.clone();
            if e == 1 {
                k2.remove(pos);
            } else {
                k2[pos].1 = e - 1;
            }
            let add = c.clone() * C::from_int(i64::from(e));
            let entry = out.entry(k2).or_insert_with(C::zero);
            *entry = entry.clone() + add;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn lower<C: Coefficient, T: Scalar>(poly: &BTreeMap<Vec<(usize, u32)>, C>) -> CompiledPoly<T> {
    CompiledPoly::new(poly.iter().map(|(k, c)| (c.clone(), k.clone())))
}

impl<T: Scalar> CompiledPolarised<T> {
    pub fn new<C: Coefficient>(pd: &PolarisedDensity<C>, realisation: &Realisation<T>) -> Result<Self> {
        let (vars, poly) = slot_poly(pd);
        let ops = vars.iter().map(|v| realisation.op(v.var).cloned()).collect::<Result<Vec<_>>>()?;
        let slot1: Vec<usize> = (0..vars.len()).filter(|&j| vars[j].slot == 0).collect();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for &z in &slot1 {
            let d = differentiate(&poly, z);
            // Degree along the segment in slot 1 only; other slots stay fixed.
            let deg_slot1 = d.keys().map(|k| k.iter().filter(|(j, _)| vars[*j].slot == 0).map(|(_, e)| e).sum::<u32>()).max().unwrap_or(0);
            first.push((z, lower(&d), gauss_legendre_unit(nodes_for_degree(deg_slot1))));
            for &y in &slot1 {
                let dd = differentiate(&d, y);
                if !dd.is_empty() {
                    second.push((z, y, lower(&dd)));
                }
            }
        }
        Ok(Self {
            k: pd.k,
            grid: *realisation.grid(),
            vars,
            ops,
            value: lower(&poly),
            first,
            second,
            quadratic: pd.check_quadratic().is_ok(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check(&self, ws: &[GridFunction<T>], expected: usize) -> Result<()> {
        if ws.len() != expected {
            return Err(Error::ArgumentCount { expected, got: ws.len() });
        }
        for w in ws {
            self.grid.check_same(w.grid())?;
        }
        Ok(())
    }

    /// Jet of every slot variable, with slot `s` read from `args[s]`.
    fn jets(&self, args: &[&GridFunction<T>]) -> Result<Vec<Vec<T>>> {
        self.vars.iter().zip(&self.ops).map(|(v, op)| op.apply_slice(args[v.slot].values())).collect()
    }

    pub fn value(&self, ws: &[GridFunction<T>]) -> Result<T> {
        self.check(ws, self.k)?;
        let args: Vec<&GridFunction<T>> = ws.iter().collect();
        let jets = self.jets(&args)?;
        let refs: Vec<&[T]> = jets.iter().map(Vec::as_slice).collect();
        let g = GridFunction::new(self.grid, self.value.eval(&refs, self.grid.n_points()))?;
        Ok(crate::grid::integral(&g))
    }

    /// `∫₀¹ δH/δw₁[ξ w_{k+1} + (1−ξ) w₁, w₂, …, w_k] dξ` for `ws = [w₁, …, w_{k+1}]`.
    pub fn dvd(&self, ws: &[GridFunction<T>]) -> Result<GridFunction<T>> {
        self.check(ws, self.k + 1)?;
        let n = self.grid.n_points();
        let start: Vec<&GridFunction<T>> = ws[..self.k].iter().collect();
        let mut end = start.clone();
        end[0] = &ws[self.k];
        let jets_a = self.jets(&start)?;
        let jets_b = self.jets(&end)?;
        let mut scratch = jets_a.clone();
        let mut out = vec![T::zero(); n];
        for (z, poly, rule) in &self.first {
            if poly.is_zero() {
                continue;
            }
            let mut inner = vec![T::zero(); n];
            for &(xi, w) in rule {
                crate::density::interpolate_jets(&jets_a, &jets_b, xi, &mut scratch);
                let refs: Vec<&[T]> = scratch.iter().map(Vec::as_slice).collect();
                poly.eval_into(&refs, w, &mut inner);
            }
            for (o, v) in out.iter_mut().zip(self.ops[*z].transpose().apply_slice(&inner)?) {
                *o += v;
            }
        }
        GridFunction::new(self.grid, out)
    }

    /// Splits `w ↦ dvd([ws…, w])` into `A w + b` for known `ws = [w₁, …, w_k]`.
    pub fn affine_split(&self, ws: &[GridFunction<T>]) -> Result<AffineOperator<T>> {
        if !self.quadratic {
            return Err(Error::NonQuadraticSlot { slot: 0, degree: 3 });
        }
        self.check(ws, self.k)?;
        let n = self.grid.n_points();
        let mut with_zero = ws.to_vec();
        with_zero.push(GridFunction::zeros(self.grid));
        let offset = self.dvd(&with_zero)?;
        let args: Vec<&GridFunction<T>> = ws.iter().collect();
        let jets = self.jets(&args)?;
        let refs: Vec<&[T]> = jets.iter().map(Vec::as_slice).collect();
        let mut matrix = DenseMatrix::zeros(n);
        let half = T::lit(0.5);
        for (z, y, poly) in &self.second {
            let weight = poly.eval(&refs, n);
            matrix.add_sandwich(&self.ops[*z], &weight, &self.ops[*y], half);
        }
        Ok(AffineOperator { matrix, offset })
    }
}

/// `x ↦ matrix · x + offset`.
#[derive(Debug, Clone)]
pub struct AffineOperator<T> {
    pub matrix: DenseMatrix<T>,
    pub offset: GridFunction<T>,
}

impl<T: Scalar> AffineOperator<T> {
    pub fn apply(&self, x: &GridFunction<T>) -> Result<GridFunction<T>> {
        self.offset.grid().check_same(x.grid())?;
        GridFunction::new(*x.grid(), self.matrix.matvec(x.values()))?.add(&self.offset)
    }
}
