//! Resonance tests, operator spectra, resonance-lattice rank, small-divisor
//! bounds and the slope diagnostic for the solvability condition.

use num::{BigInt, BigRational, Integer, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{rational_to_f64, Coeff, ExactComplex};
use crate::series::MultiIndex;

/// All multi-indices in Z_+^n with |l| = degree, in lexicographic order.
pub fn multi_indices(n: usize, degree: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if n == 1 {
            prefix.push(degree);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=degree {
            prefix.push(first);
            rec(n - 1, degree - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, degree, &mut Vec::new(), &mut out);
    out
}

/// ik + <l, lambda> - lambda_j, the vector-field divisor (j zero-based).
pub fn vf_divisor<C: Coeff>(l: &MultiIndex, k: i64, j: usize, lambda: &[C]) -> C {
    let mut acc = C::i_times(k);
    for (m, lam) in lambda.iter().enumerate() {
        acc = acc.add(&lam.scale_int(l.0[m] as i64));
    }
    acc.sub(&lambda[j])
}

/// ik + <lambda, l>, the function divisor.
pub fn fn_divisor<C: Coeff>(l: &MultiIndex, k: i64, lambda: &[C]) -> C {
    let mut acc = C::i_times(k);
    for (m, lam) in lambda.iter().enumerate() {
        acc = acc.add(&lam.scale_int(l.0[m] as i64));
    }
    acc
}

/// Resonance test for a vector-field pseudomonomial `y^l e^{ikt} e_j`.
/// Returns the classification together with the divisor value.
pub fn resonant_vf_term<C: Coeff>(
    l: &MultiIndex,
    k: i64,
    j: usize,
    lambda: &[C],
    tol: Option<f64>,
) -> Result<(bool, C)> {
    let div = vf_divisor(l, k, j, lambda);
    let res = C::divisor_is_zero(&div, tol)?;
    Ok((res, div))
}

/// Resonance test for a function pseudomonomial `y^l e^{ikt}`.
pub fn resonant_fn_term<C: Coeff>(
    l: &MultiIndex,
    k: i64,
    lambda: &[C],
    tol: Option<f64>,
) -> Result<(bool, C)> {
    let div = fn_divisor(l, k, lambda);
    let res = C::divisor_is_zero(&div, tol)?;
    Ok((res, div))
}

/// Spectrum of the operator h -> <d_x h, A x> - B h on homogeneous
/// vector polynomials of degree r: the multiset {<l, lambda> - kappa_j}.
/// With a Fourier mode range the entries become ik + <l, lambda> - kappa_j.
/// Deterministic order: l lexicographic, then component, then mode.
pub fn operator_spectrum<C: Coeff>(
    lambda: &[C],
    kappa: &[C],
    r: u32,
    fourier: Option<std::ops::RangeInclusive<i64>>,
) -> Vec<C> {
    let n = lambda.len();
    let mut out = Vec::new();
    for l in multi_indices(n, r) {
        for j in 0..kappa.len() {
            match &fourier {
                None => out.push(vf_divisor(&l, 0, j, lambda).add(&lambda[j]).sub(&kappa[j])),
                Some(range) => {
                    for k in range.clone() {
                        out.push(vf_divisor(&l, k, j, lambda).add(&lambda[j]).sub(&kappa[j]));
                    }
                }
            }
        }
    }
    out
}

/// Integer generator set of the function-resonance lattice
/// {(k, l) : ik + <lambda, l> = 0} and its Z-rank.
#[derive(Debug, Clone)]
pub struct ResonanceLattice {
    pub n: usize,
    /// Rank-increasing enumerated solutions, in (degree, lex, mode) order.
    pub generators: Vec<(i64, Vec<u32>)>,
    pub rank: usize,
    pub max_l: u32,
    pub max_k: i64,
    /// Whether the search bounds provably saturate the rank (all lambda_j
    /// purely imaginary rational and the bounds exceed every denominator).
    pub saturation_reached: bool,
}

/// Incremental integer echelon basis for exact Z-rank computation.
/// Fraction-free: rows stay integral; each reduced row is divided by the
/// gcd of its entries.
struct IntEchelon {
    rows: Vec<Vec<BigInt>>, // kept sorted by leading column
}

impl IntEchelon {
    fn new() -> Self {
        IntEchelon { rows: Vec::new() }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn leading_col(row: &[BigInt]) -> Option<usize> {
        row.iter().position(|v| !v.is_zero())
    }

    /// Reduce `row` against the basis; if a nonzero remainder survives,
    /// insert it and return true.
    fn try_insert(&mut self, mut row: Vec<BigInt>) -> bool {
        for basis in &self.rows {
            let bc = Self::leading_col(basis).unwrap();
            if row[bc].is_zero() {
                continue;
            }
            let a = basis[bc].clone();
            let b = row[bc].clone();
            for (r, s) in row.iter_mut().zip(basis.iter()) {
                *r = &*r * &a - s * &b;
            }
        }
        match Self::leading_col(&row) {
            None => false,
            Some(col) => {
                let g = row
                    .iter()
                    .fold(BigInt::zero(), |acc, v| acc.gcd(v));
                if !g.is_zero() && !g.is_one() {
                    for v in row.iter_mut() {
                        *v = &*v / &g;
                    }
                }
                let pos = self
                    .rows
                    .iter()
                    .position(|r| Self::leading_col(r).unwrap() > col)
                    .unwrap_or(self.rows.len());
                self.rows.insert(pos, row);
                true
            }
        }
    }
}

/// Enumerate resonance relations within `max_l`, `max_k` and compute the
/// Z-rank of their span. Exact mode only: the relation is decided exactly.
pub fn lattice_rank(lambda: &[ExactComplex], max_l: u32, max_k: i64) -> ResonanceLattice {
    let n = lambda.len();
    let mut echelon = IntEchelon::new();
    let mut generators = Vec::new();

    for degree in 0..=max_l {
        for l in multi_indices(n, degree) {
            // ik + <lambda, l> = 0 forces Re<lambda,l> = 0 and an integer
            // k = -Im<lambda,l>.
            let dot = fn_divisor(&l, 0, lambda);
            if !dot.re.is_zero() || !dot.im.denom().is_one() {
                continue;
            }
            let k_big = -dot.im.numer();
            let k = match i64::try_from(&k_big) {
                Ok(v) if v.abs() <= max_k => v,
                _ => continue,
            };
            if degree == 0 && k == 0 {
                continue; // trivial zero vector
            }
            let mut row: Vec<BigInt> = Vec::with_capacity(n + 1);
            row.push(BigInt::from(k));
            row.extend(l.0.iter().map(|&e| BigInt::from(e)));
            if echelon.try_insert(row) {
                generators.push((k, l.0.clone()));
            }
        }
    }

    let saturation_reached = saturation_bounds(lambda)
        .map(|(need_l, need_k)| max_l >= need_l && max_k >= need_k)
        .unwrap_or(false);

    ResonanceLattice {
        n,
        rank: echelon.rank(),
        generators,
        max_l,
        max_k,
        saturation_reached,
    }
}

/// For lambda_j = i p_j / q_j (all purely imaginary rational), the bounds
/// that provably saturate the lattice rank: max_l >= max q_j (so each
/// q_j e_j is enumerated) and max_k >= max |p_j|.
fn saturation_bounds(lambda: &[ExactComplex]) -> Option<(u32, i64)> {
    let mut need_l: u32 = 1;
    let mut need_k: i64 = 0;
    for lam in lambda {
        if !lam.re.is_zero() {
            return None;
        }
        let q = u32::try_from(lam.im.denom()).ok()?;
        let p = i64::try_from(&lam.im.numer().abs()).ok()?;
        need_l = need_l.max(q);
        need_k = need_k.max(p);
    }
    Some((need_l, need_k))
}

/// Small-divisor constants over a finite enumeration range.
#[derive(Debug, Clone)]
pub struct DivisorReport {
    pub n: usize,
    pub degree_bound: u32,
    pub mode_bound: i64,
    /// Empirical infimum of nonzero |ik + <l,lambda> - lambda_j|.
    pub epsilon: f64,
    /// |divisor|^2 of the minimizer, exact.
    pub epsilon_sq: BigRational,
    /// Exact |divisor| when the minimizer is purely real or purely imaginary.
    pub epsilon_exact: Option<BigRational>,
    /// The 1/nu lower bound when every lambda_j = i nu_j with nu_j rational
    /// (nu = lcm of the denominators).
    pub theoretical_inv_nu: Option<BigRational>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d: Option<f64>,
    pub sigma_bar: Option<f64>,
    pub gamma_slope: Option<f64>,
    pub slope_positive: Option<bool>,
}

fn inv_nu_bound(lambda: &[ExactComplex]) -> Option<BigRational> {
    let mut nu = BigInt::one();
    for lam in lambda {
        if !lam.re.is_zero() {
            return None;
        }
        nu = nu.lcm(lam.im.denom());
    }
    Some(BigRational::new(BigInt::one(), nu))
}

struct DivisorScan {
    min_sq: Option<BigRational>,
    min_div: Option<ExactComplex>,
    d1: f64,
    d2: f64,
    any_nonresonant: bool,
}

/// Walk every (l, k, j) with 2 <= |l| <= degree_bound, |k| <= mode_bound
/// and feed each nonzero divisor to `visit`.
fn scan_divisors<F>(lambda: &[ExactComplex], degree_bound: u32, mode_bound: i64, mut visit: F)
where
    F: FnMut(&MultiIndex, i64, usize, &ExactComplex),
{
    let n = lambda.len();
    for degree in 2..=degree_bound {
        for l in multi_indices(n, degree) {
            for k in -mode_bound..=mode_bound {
                for j in 0..n {
                    let div = vf_divisor(&l, k, j, lambda);
                    if !div.is_zero() {
                        visit(&l, k, j, &div);
                    }
                }
            }
        }
    }
}

fn run_scan(lambda: &[ExactComplex], degree_bound: u32, mode_bound: i64) -> DivisorScan {
    let mut scan = DivisorScan {
        min_sq: None,
        min_div: None,
        d1: 0.0,
        d2: 0.0,
        any_nonresonant: false,
    };
    scan_divisors(lambda, degree_bound, mode_bound, |l, _k, _j, div| {
        scan.any_nonresonant = true;
        let sq = div.norm_sq();
        let better = match &scan.min_sq {
            None => true,
            Some(cur) => sq < *cur,
        };
        if better {
            scan.min_sq = Some(sq.clone());
            scan.min_div = Some(div.clone());
        }
        let inv_mag = 1.0 / rational_to_f64(&sq).sqrt();
        // d1 ranges over the subdiagonal coupling indices j = 2..n
        // (1-based); d2 over all entries.
        for (idx, &e) in l.0.iter().enumerate() {
            if idx >= 1 {
                scan.d1 = scan.d1.max((1.0 + e as f64) * inv_mag);
            }
            scan.d2 = scan.d2.max(e as f64 * inv_mag);
        }
    });
    scan
}

fn epsilon_fields(scan: &DivisorScan) -> (f64, BigRational, Option<BigRational>) {
    let sq = scan.min_sq.clone().expect("nonempty scan");
    let div = scan.min_div.clone().expect("nonempty scan");
    let exact = if div.re.is_zero() {
        Some(div.im.abs())
    } else if div.im.is_zero() {
        Some(div.re.abs())
    } else {
        None
    };
    (rational_to_f64(&sq).sqrt(), sq, exact)
}

/// Empirical epsilon over the finite range, plus the theoretical 1/nu bound
/// when it applies.
pub fn epsilon_bound(
    lambda: &[ExactComplex],
    degree_bound: u32,
    mode_bound: i64,
) -> Result<DivisorReport> {
    if degree_bound < 2 || mode_bound < 1 {
        return Err(Error::InvariantViolation(
            "epsilon bound needs degree >= 2 and mode bound >= 1".into(),
        ));
    }
    let scan = run_scan(lambda, degree_bound, mode_bound);
    if !scan.any_nonresonant {
        return Err(Error::DegenerateRange);
    }
    let (epsilon, epsilon_sq, epsilon_exact) = epsilon_fields(&scan);
    Ok(DivisorReport {
        n: lambda.len(),
        degree_bound,
        mode_bound,
        epsilon,
        epsilon_sq,
        epsilon_exact,
        theoretical_inv_nu: inv_nu_bound(lambda),
        d1: None,
        d2: None,
        d: None,
        sigma_bar: None,
        gamma_slope: None,
        slope_positive: None,
    })
}

/// epsilon, the empirical d1/d2/d constants, and the slope
/// 1 - eps^{-1} sigma - d sigma (n-1) of the solvability condition.
pub fn divisor_constants(
    lambda: &[ExactComplex],
    sigma: &[ExactComplex],
    degree_bound: u32,
    mode_bound: i64,
) -> Result<DivisorReport> {
    let mut report = epsilon_bound(lambda, degree_bound, mode_bound)?;
    let scan = run_scan(lambda, degree_bound, mode_bound);
    let n = lambda.len();
    let d = scan.d1.max(scan.d2);
    let sigma_bar = sigma.iter().map(|s| s.magnitude()).fold(0.0, f64::max);
    let slope = 1.0 - sigma_bar / report.epsilon - d * sigma_bar * (n as f64 - 1.0);
    report.d1 = Some(scan.d1);
    report.d2 = Some(scan.d2);
    report.d = Some(d);
    report.sigma_bar = Some(sigma_bar);
    report.gamma_slope = Some(slope);
    report.slope_positive = Some(slope > 0.0);
    Ok(report)
}

/// Corollary-style rationality check on the characteristic exponents.
#[derive(Debug, Clone)]
pub struct RationalityReport {
    /// true iff every lambda_j is purely imaginary (imaginary parts are
    /// rational by representation in exact mode).
    pub purely_imaginary_rational: bool,
    /// Indices (zero-based) of eigenvalues with nonzero real part.
    pub offenders: Vec<usize>,
    pub rank: usize,
    /// Rationality together with rank >= n-1.
    pub consistent_with_integrability: bool,
}

pub fn exponent_rationality(lambda: &[ExactComplex], rank: usize) -> RationalityReport {
    let offenders: Vec<usize> = lambda
        .iter()
        .enumerate()
        .filter(|(_, lam)| !lam.re.is_zero())
        .map(|(idx, _)| idx)
        .collect();
    let rational = offenders.is_empty();
    RationalityReport {
        purely_imaginary_rational: rational,
        offenders,
        rank,
        consistent_with_integrability: rational && rank + 1 >= lambda.len(),
    }
}
