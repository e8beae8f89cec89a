//! Sparse truncated Taylor--Fourier series.
//!
//! A series is a map from pseudomonomial keys `y^l e^{ikt}` to coefficients,
//! truncated at a Taylor degree; Fourier support is always finite because all
//! inputs are band-limited trigonometric polynomials. Keys are ordered by
//! (degree, lexicographic exponent, mode), which is exactly the scheduling
//! order of the coefficient recursion, so iteration doubles as the canonical
//! emission order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::{Coeff, ExactComplex, ScalarMode};

/// Exponent vector l in Z_+^n with |l| = sum of entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, j: usize) -> Self {
        let mut v = vec![0; n];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// l - e_from + e_to, or None when l_from = 0 (the term is absent).
    pub fn shift(&self, from: usize, to: usize) -> Option<MultiIndex> {
        if self.0[from] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[from] -= 1;
        v[to] += 1;
        Some(MultiIndex(v))
    }

    /// l - e_j, or None when l_j = 0.
    pub fn lower(&self, j: usize) -> Option<MultiIndex> {
        if self.0[j] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[j] -= 1;
        Some(MultiIndex(v))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// The scheduling order on multi-indices: `a` precedes `b`
/// (returns `Greater`) when either |a| < |b|, or the degrees agree and the
/// first differing entry of `a` is smaller. Within a fixed degree this is
/// reverse-lexicographic, so iterating keys in (degree, lex) order visits
/// each degree in descending precedence order.
pub fn succ_compare(a: &MultiIndex, b: &MultiIndex) -> Result<Ordering> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch);
    }
    match a.degree().cmp(&b.degree()) {
        Ordering::Less => Ok(Ordering::Greater),
        Ordering::Greater => Ok(Ordering::Less),
        Ordering::Equal => match a.0.cmp(&b.0) {
            Ordering::Less => Ok(Ordering::Greater),
            Ordering::Greater => Ok(Ordering::Less),
            Ordering::Equal => Ok(Ordering::Equal),
        },
    }
}

/// Key of one pseudomonomial `y^l e^{ikt}` in a scalar series.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TermKey {
    pub l: MultiIndex,
    pub k: i64,
}

impl TermKey {
    pub fn new(l: MultiIndex, k: i64) -> Self {
        TermKey { l, k }
    }

    pub fn degree(&self) -> u32 {
        self.l.degree()
    }
}

impl Ord for TermKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.l
            .degree()
            .cmp(&other.l.degree())
            .then_with(|| self.l.0.cmp(&other.l.0))
            .then_with(|| self.k.cmp(&other.k))
    }
}

impl PartialOrd for TermKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Scalar sparse Taylor--Fourier series in n variables, truncated at
/// `max_degree`. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<C: Coeff> {
    n: usize,
    max_degree: u32,
    terms: BTreeMap<TermKey, C>,
}

impl<C: Coeff> Series<C> {
    pub fn zero(n: usize, max_degree: u32) -> Self {
        Series {
            n,
            max_degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn scalar_mode(&self) -> ScalarMode {
        C::MODE
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TermKey, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &TermKey) -> Option<&C> {
        self.terms.get(key)
    }

    /// Add `c * y^l e^{ikt}` into the series. Terms above the truncation
    /// degree are silently dropped; exact zeros are deleted eagerly.
    pub fn add_term(&mut self, l: MultiIndex, k: i64, c: C) -> Result<()> {
        if l.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: l.len(),
            });
        }
        if c.is_zero() || l.degree() > self.max_degree {
            return Ok(());
        }
        let key = TermKey::new(l, k);
        let updated = match self.terms.get(&key) {
            Some(existing) => existing.add(&c),
            None => c,
        };
        if updated.is_zero() {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, updated);
        }
        Ok(())
    }

    /// Single-term constructor.
    pub fn monomial(n: usize, max_degree: u32, l: MultiIndex, k: i64, c: C) -> Result<Self> {
        let mut s = Series::zero(n, max_degree);
        s.add_term(l, k, c)?;
        Ok(s)
    }

    fn check_compat(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::IncompatibleOperands(format!(
                "dimension {} vs {}",
                self.n, other.n
            )));
        }
        if self.max_degree != other.max_degree {
            return Err(Error::IncompatibleOperands(format!(
                "truncation degree {} vs {}",
                self.max_degree, other.max_degree
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compat(other)?;
        let mut out = self.clone();
        for (key, c) in &other.terms {
            out.add_term(key.l.clone(), key.k, c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&C::one().neg()))
    }

    pub fn scale(&self, factor: &C) -> Self {
        let mut out = Series::zero(self.n, self.max_degree);
        if factor.is_zero() {
            return out;
        }
        for (key, c) in &self.terms {
            let v = c.mul(factor);
            if !v.is_zero() {
                out.terms.insert(key.clone(), v);
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&C::one().neg())
    }

    /// Product truncated at the common truncation degree; Fourier modes add.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compat(other)?;
        let mut out = Series::zero(self.n, self.max_degree);
        for (ka, ca) in &self.terms {
            if ka.degree() > self.max_degree {
                continue;
            }
            for (kb, cb) in &other.terms {
                if ka.degree() + kb.degree() > self.max_degree {
                    break; // kb iterates in degree order
                }
                out.add_term(ka.l.add(&kb.l), ka.k + kb.k, ca.mul(cb))?;
            }
        }
        Ok(out)
    }

    /// Copy with a new truncation degree, dropping terms above it.
    pub fn truncated(&self, new_max: u32) -> Self {
        let mut out = Series::zero(self.n, new_max);
        for (key, c) in &self.terms {
            if key.degree() <= new_max {
                out.terms.insert(key.clone(), c.clone());
            }
        }
        out
    }

    /// The homogeneous degree-d part (same truncation degree).
    pub fn homogeneous_part(&self, d: u32) -> Self {
        let mut out = Series::zero(self.n, self.max_degree);
        for (key, c) in &self.terms {
            if key.degree() == d {
                out.terms.insert(key.clone(), c.clone());
            }
        }
        out
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().next().map(|k| k.degree())
    }

    /// Time derivative: each term multiplied by ik.
    pub fn d_dt(&self) -> Self {
        let mut out = Series::zero(self.n, self.max_degree);
        for (key, c) in &self.terms {
            if key.k == 0 {
                continue;
            }
            let v = c.mul(&C::i_times(key.k));
            out.terms.insert(key.clone(), v);
        }
        out
    }

    /// Partial derivative with respect to y_m.
    pub fn partial(&self, m: usize) -> Self {
        let mut out = Series::zero(self.n, self.max_degree);
        for (key, c) in &self.terms {
            if let Some(l) = key.l.lower(m) {
                let v = c.scale_int(key.l.0[m] as i64);
                out.terms.insert(TermKey::new(l, key.k), v);
            }
        }
        out
    }

    /// Substitute y_j -> y_j + phi_j and truncate at `out_degree`. The
    /// substitution components must carry only terms of degree >= 2, so the
    /// degree-s part of the result depends only on phi parts of degree < s.
    pub fn compose(&self, phi: &VectorSeries<C>, out_degree: u32) -> Result<Self> {
        if phi.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: phi.dim(),
            });
        }
        for comp in &phi.comps {
            if comp.min_degree().is_some_and(|d| d < 2) {
                return Err(Error::InvariantViolation(
                    "substitution series must have terms of degree >= 2 only".into(),
                ));
            }
        }
        // bases[j] = y_j + phi_j; powers cached incrementally per variable.
        let mut bases: Vec<Series<C>> = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let mut b = phi.comps[j].truncated(out_degree);
            b.add_term(MultiIndex::unit(self.n, j), 0, C::one())?;
            bases.push(b);
        }
        let mut power_cache: Vec<Vec<Series<C>>> = (0..self.n)
            .map(|_| vec![{
                let mut one = Series::zero(self.n, out_degree);
                one.terms.insert(TermKey::new(MultiIndex::zeros(self.n), 0), C::one());
                one
            }])
            .collect();
        let mut out = Series::zero(self.n, out_degree);
        for (key, c) in &self.terms {
            if key.degree() > out_degree {
                continue;
            }
            let mut prod = Series::monomial(self.n, out_degree, MultiIndex::zeros(self.n), key.k, c.clone())?;
            for j in 0..self.n {
                let e = key.l.0[j] as usize;
                while power_cache[j].len() <= e {
                    let next = power_cache[j].last().unwrap().mul(&bases[j])?;
                    power_cache[j].push(next);
                }
                if e > 0 {
                    prod = prod.mul(&power_cache[j][e])?;
                }
            }
            out = out.add(&prod)?;
        }
        Ok(out)
    }

    /// Numeric evaluation at y with u = e^{it}.
    pub fn eval_c64(&self, y: &[Complex64], u: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (key, c) in &self.terms {
            let mut v = c.to_c64();
            for (j, &e) in key.l.0.iter().enumerate() {
                for _ in 0..e {
                    v *= y[j];
                }
            }
            v *= u.powi(key.k as i32);
            acc += v;
        }
        acc
    }

    /// Sum of coefficient magnitudes at degree d over all modes.
    pub fn one_norm_at_degree(&self, d: u32) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k.degree() == d)
            .map(|(_, c)| c.magnitude())
            .sum()
    }

    pub fn mode_span(&self) -> (i64, i64) {
        let mut lo = 0;
        let mut hi = 0;
        for key in self.terms.keys() {
            lo = lo.min(key.k);
            hi = hi.max(key.k);
        }
        (lo, hi)
    }
}

impl Series<ExactComplex> {
    /// Exact evaluation at Gaussian-rational y and a unit-modulus Gaussian
    /// rational u standing in for e^{it} (so u^{-1} is its conjugate).
    pub fn eval_exact(&self, y: &[ExactComplex], u: &ExactComplex) -> ExactComplex {
        use num::One;
        debug_assert!(u.norm_sq().is_one(), "time sample must lie on the unit circle");
        let mut acc = ExactComplex::zero();
        for (key, c) in &self.terms {
            let mut v = c.clone();
            for (j, &e) in key.l.0.iter().enumerate() {
                for _ in 0..e {
                    v = v.mul(&y[j]);
                }
            }
            let base = if key.k >= 0 { u.clone() } else { u.conj() };
            for _ in 0..key.k.unsigned_abs() {
                v = v.mul(&base);
            }
            acc = acc.add(&v);
        }
        acc
    }
}

/// A vector of component series sharing dimension and truncation degree.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSeries<C: Coeff> {
    pub comps: Vec<Series<C>>,
}

impl<C: Coeff> VectorSeries<C> {
    pub fn zero(n: usize, max_degree: u32) -> Self {
        VectorSeries {
            comps: (0..n).map(|_| Series::zero(n, max_degree)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn max_degree(&self) -> u32 {
        self.comps.first().map_or(0, |c| c.max_degree())
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(VectorSeries { comps })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        VectorSeries {
            comps: self.comps.iter().map(|c| c.neg()).collect(),
        }
    }

    pub fn truncated(&self, new_max: u32) -> Self {
        VectorSeries {
            comps: self.comps.iter().map(|c| c.truncated(new_max)).collect(),
        }
    }

    pub fn homogeneous_part(&self, d: u32) -> Self {
        VectorSeries {
            comps: self.comps.iter().map(|c| c.homogeneous_part(d)).collect(),
        }
    }

    /// Componentwise composition F_j(y + phi, t).
    pub fn compose(&self, phi: &VectorSeries<C>, out_degree: u32) -> Result<Self> {
        let comps = self
            .comps
            .iter()
            .map(|c| c.compose(phi, out_degree))
            .collect::<Result<_>>()?;
        Ok(VectorSeries { comps })
    }

    /// Jacobian matrix entry (s, m) = d comps[s] / d y_m.
    pub fn jacobian(&self) -> Vec<Vec<Series<C>>> {
        self.comps
            .iter()
            .map(|c| (0..self.dim()).map(|m| c.partial(m)).collect())
            .collect()
    }

    /// < jacobian(self), v >: component s = sum_m (d self_s / d y_m) * v_m.
    pub fn jacobian_apply(&self, v: &VectorSeries<C>) -> Result<Self> {
        let n = self.dim();
        let mut out = VectorSeries::zero(n, self.max_degree());
        for s in 0..n {
            let mut acc = Series::zero(n, self.max_degree());
            for m in 0..n {
                acc = acc.add(&self.comps[s].partial(m).mul(&v.comps[m])?)?;
            }
            out.comps[s] = acc;
        }
        Ok(out)
    }

    pub fn d_dt(&self) -> Self {
        VectorSeries {
            comps: self.comps.iter().map(|c| c.d_dt()).collect(),
        }
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.comps.iter().filter_map(|c| c.min_degree()).min()
    }

    pub fn eval_c64(&self, y: &[Complex64], u: Complex64) -> Vec<Complex64> {
        self.comps.iter().map(|c| c.eval_c64(y, u)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExactComplex as EC;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    fn term(n: usize, nmax: u32, l: &[u32], k: i64, c: EC) -> Series<EC> {
        Series::monomial(n, nmax, mi(l), k, c).unwrap()
    }

    #[test]
    fn monomial_product() {
        // y1 * y2 -> y1 y2
        let a = term(2, 4, &[1, 0], 0, EC::integer(1));
        let b = term(2, 4, &[0, 1], 0, EC::integer(1));
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coeff(&TermKey::new(mi(&[1, 1]), 0)), Some(&EC::integer(1)));
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn mode_addition() {
        // (e^{it} y2) * (e^{it} y2) -> e^{2it} y2^2
        let a = term(2, 4, &[0, 1], 1, EC::integer(1));
        let p = a.mul(&a).unwrap();
        assert_eq!(p.coeff(&TermKey::new(mi(&[0, 2]), 2)), Some(&EC::integer(1)));
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn exact_cancellation_is_structural() {
        // (y1 + i y2^2) + (-y1 - i y2^2) -> structurally empty
        let mut a = Series::zero(2, 4);
        a.add_term(mi(&[1, 0]), 0, EC::integer(1)).unwrap();
        a.add_term(mi(&[0, 2]), 0, EC::i()).unwrap();
        let sum = a.add(&a.neg()).unwrap();
        assert!(sum.is_zero());
        assert_eq!(sum.num_terms(), 0);
    }

    #[test]
    fn compose_untouched_variable() {
        // F = x2^2, Phi = (i y2^2, 0) -> y2^2
        let f = term(2, 4, &[0, 2], 0, EC::integer(1));
        let mut phi = VectorSeries::zero(2, 4);
        phi.comps[0].add_term(mi(&[0, 2]), 0, EC::i()).unwrap();
        let g = f.compose(&phi, 4).unwrap();
        assert_eq!(g, term(2, 4, &[0, 2], 0, EC::integer(1)));
    }

    #[test]
    fn compose_truncates_at_requested_degree() {
        // F = x1^2, Phi = (i y2^2, 0):
        //   N=3 -> y1^2 + 2i y1 y2^2; N=4 -> additionally -y2^4
        let f = term(2, 4, &[2, 0], 0, EC::integer(1));
        let mut phi = VectorSeries::zero(2, 4);
        phi.comps[0].add_term(mi(&[0, 2]), 0, EC::i()).unwrap();

        let g3 = f.compose(&phi, 3).unwrap();
        assert_eq!(g3.coeff(&TermKey::new(mi(&[2, 0]), 0)), Some(&EC::integer(1)));
        assert_eq!(
            g3.coeff(&TermKey::new(mi(&[1, 2]), 0)),
            Some(&EC::imaginary(2, 1))
        );
        assert_eq!(g3.num_terms(), 2);

        let g4 = f.compose(&phi, 4).unwrap();
        assert_eq!(g4.coeff(&TermKey::new(mi(&[0, 4]), 0)), Some(&EC::integer(-1)));
        assert_eq!(g4.num_terms(), 3);
    }

    #[test]
    fn derive_time_and_jacobian() {
        // d/dt (e^{2it} y^l) = 2i e^{2it} y^l
        let a = term(2, 4, &[1, 1], 2, EC::integer(1));
        let da = a.d_dt();
        assert_eq!(
            da.coeff(&TermKey::new(mi(&[1, 1]), 2)),
            Some(&EC::imaginary(2, 1))
        );

        // jacobian of Phi = (i y2^2, 0) -> [[0, 2i y2], [0, 0]]
        let mut phi = VectorSeries::zero(2, 4);
        phi.comps[0].add_term(mi(&[0, 2]), 0, EC::i()).unwrap();
        let jac = phi.jacobian();
        assert!(jac[0][0].is_zero());
        assert_eq!(
            jac[0][1].coeff(&TermKey::new(mi(&[0, 1]), 0)),
            Some(&EC::imaginary(2, 1))
        );
        assert!(jac[1][0].is_zero() && jac[1][1].is_zero());

        // d/dt of a t-independent series is zero
        let t_free = term(2, 4, &[2, 0], 0, EC::integer(3));
        assert!(t_free.d_dt().is_zero());
    }

    #[test]
    fn succ_compare_examples() {
        // |k| < |l| wins
        assert_eq!(
            succ_compare(&mi(&[1, 0]), &mi(&[1, 1])).unwrap(),
            Ordering::Greater
        );
        // first differing entry smaller wins
        assert_eq!(
            succ_compare(&mi(&[1, 1]), &mi(&[2, 0])).unwrap(),
            Ordering::Greater
        );
        assert_eq!(
            succ_compare(&mi(&[2, 0]), &mi(&[2, 0])).unwrap(),
            Ordering::Equal
        );
        assert!(succ_compare(&mi(&[1, 0]), &mi(&[1, 0, 0])).is_err());
    }

    #[test]
    fn canonical_key_order_matches_schedule() {
        // (degree, lex) order visits each degree in descending succ order.
        let mut s = Series::zero(2, 3);
        for (l, k) in [([2, 0], 0), ([0, 2], 1), ([1, 1], -1), ([0, 3], 0), ([1, 0], 0)] {
            s.add_term(mi(&l), k, EC::integer(1)).unwrap();
        }
        let keys: Vec<_> = s.iter().map(|(key, _)| (key.l.0.clone(), key.k)).collect();
        assert_eq!(
            keys,
            vec![
                (vec![1, 0], 0),
                (vec![0, 2], 1),
                (vec![1, 1], -1),
                (vec![2, 0], 0),
                (vec![0, 3], 0),
            ]
        );
    }

    #[test]
    fn incompatible_operands_error() {
        let a = Series::<EC>::zero(2, 4);
        let b = Series::<EC>::zero(3, 4);
        assert!(matches!(a.add(&b), Err(Error::IncompatibleOperands(_))));
        let c = Series::<EC>::zero(2, 5);
        assert!(matches!(a.mul(&c), Err(Error::IncompatibleOperands(_))));
    }

    #[test]
    fn exact_eval_on_unit_circle() {
        // e^{-it} y1 at y = (2, 0), u = 3/5 + 4/5 i -> 2 * conj(u)
        let s = term(2, 3, &[1, 0], -1, EC::integer(1));
        let u = EC::from_parts(3, 5, 4, 5);
        let v = s.eval_exact(&[EC::integer(2), EC::zero()], &u);
        assert_eq!(v, EC::from_parts(6, 5, -8, 5));
    }
}
