//! First-integral verification, pushforward through a normalization,
//! resonant-structure checks and functional-independence rank.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::resonance::fn_divisor;
use crate::scalar::{Coeff, ExactComplex};
use crate::series::{Series, TermKey, VectorSeries};
use crate::system::PeriodicSystem;

#[derive(Debug, Clone)]
pub struct IntegralReport<C: Coeff> {
    /// Defect = d_t H + <d_x H, A x + F>, truncated at `degree`.
    pub defect: Series<C>,
    pub is_integral_to_degree: bool,
    pub degree: u32,
    /// For the resonant-structure check: offending nonresonant keys.
    pub offenders: Vec<TermKey>,
    pub resonant_structure: Option<bool>,
}

/// Test whether H is a first integral of the system through `degree`.
pub fn is_first_integral<C: Coeff>(
    h: &Series<C>,
    system: &PeriodicSystem<C>,
    degree: u32,
) -> Result<IntegralReport<C>> {
    if h.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: h.dim(),
        });
    }
    let h = h.truncated(degree);
    let rhs = system
        .linear
        .apply_linear(degree)?
        .add(&system.nonlinear.truncated(degree))?;
    let mut defect = h.d_dt();
    for m in 0..system.dim() {
        defect = defect.add(&h.partial(m).mul(&rhs.comps[m])?)?;
    }
    Ok(IntegralReport {
        is_integral_to_degree: defect.is_zero(),
        defect,
        degree,
        offenders: Vec::new(),
        resonant_structure: None,
    })
}

/// H~ = H(y + Phi(y,t), t) truncated at `degree`.
pub fn pushforward<C: Coeff>(
    h: &Series<C>,
    phi: &VectorSeries<C>,
    degree: u32,
) -> Result<Series<C>> {
    h.truncated(degree).compose(&phi.truncated(degree), degree)
}

/// Check that every pseudomonomial of H~ is resonant in the function sense
/// (ik + <lambda, l> = 0); lists the offenders otherwise.
pub fn resonant_function_check<C: Coeff>(
    htilde: &Series<C>,
    lambda: &[C],
    tol: Option<f64>,
) -> Result<IntegralReport<C>> {
    let mut offenders = Vec::new();
    for (key, _) in htilde.iter() {
        let div = fn_divisor(&key.l, key.k, lambda);
        if !C::divisor_is_zero(&div, tol)? {
            offenders.push(key.clone());
        }
    }
    Ok(IntegralReport {
        defect: Series::zero(htilde.dim(), htilde.max_degree()),
        is_integral_to_degree: true,
        degree: htilde.max_degree(),
        resonant_structure: Some(offenders.is_empty()),
        offenders,
    })
}

/// Fixed unit-modulus Gaussian rationals standing in for e^{it} at exact
/// sample times (Pythagorean points on the unit circle, plus t = 0).
fn circle_samples() -> Vec<ExactComplex> {
    vec![
        ExactComplex::one(),
        ExactComplex::from_parts(3, 5, 4, 5),
        ExactComplex::from_parts(-5, 13, 12, 13),
        ExactComplex::from_parts(8, 17, -15, 17),
    ]
}

/// Maximum rank of the stacked gradients of the candidates over exact
/// pseudo-random rational sample points. Coordinates are drawn in [-1, 1]
/// with denominator <= 16; the reported value is the max over `samples`
/// draws, each paired with a unit-circle time sample.
pub fn independence_rank(
    candidates: &[Series<ExactComplex>],
    degree: u32,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateList);
    }
    let n = candidates[0].dim();
    for c in candidates {
        if c.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.dim(),
            });
        }
    }
    let gradients: Vec<Vec<Series<ExactComplex>>> = candidates
        .iter()
        .map(|h| (0..n).map(|m| h.truncated(degree).partial(m)).collect())
        .collect();
    let circle = circle_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0usize;
    for sample_idx in 0..samples.max(1) {
        let point: Vec<ExactComplex> = (0..n)
            .map(|_| {
                let num = rng.gen_range(-16i64..=16);
                ExactComplex::rational(num, 16)
            })
            .collect();
        let u = &circle[sample_idx % circle.len()];
        let rows: Vec<Vec<ExactComplex>> = gradients
            .iter()
            .map(|grad| grad.iter().map(|g| g.eval_exact(&point, u)).collect())
            .collect();
        best = best.max(exact_matrix_rank(rows));
        if best == candidates.len().min(n) {
            break;
        }
    }
    Ok(best)
}

/// Exact rank by Gaussian elimination over the Gaussian rationals.
fn exact_matrix_rank(mut rows: Vec<Vec<ExactComplex>>) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut rank = 0usize;
    for col in 0..cols {
        let pivot = (rank..rows.len()).find(|&r| !rows[r][col].is_zero());
        let Some(p) = pivot else { continue };
        rows.swap(rank, p);
        let inv = rows[rank][col].inv();
        for r in rank + 1..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let factor = rows[r][col].mul(&inv);
            for c in col..cols {
                let delta = rows[rank][c].mul(&factor);
                rows[r][c] = rows[r][c].sub(&delta);
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Lowest-degree homogeneous part of a scalar series.
pub fn lowest_part<C: Coeff>(h: &Series<C>) -> Series<C> {
    match h.min_degree() {
        Some(d) => h.homogeneous_part(d),
        None => h.clone(),
    }
}
