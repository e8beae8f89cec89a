//! Randomized generator of exact band-limited periodic systems, optionally
//! with planted first integrals, for property tests and acceptance runs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::{Coeff, ExactComplex};
use crate::series::{MultiIndex, Series, VectorSeries};
use crate::system::{LinearPart, PeriodicSystem};

/// One generated system plus any first integrals planted by construction.
#[derive(Debug, Clone)]
pub struct CorpusSystem {
    pub system: PeriodicSystem<ExactComplex>,
    pub degree: u32,
    pub planted: Vec<Series<ExactComplex>>,
    /// human-readable description of the plant, parallel to `planted`
    pub plant_labels: Vec<String>,
}

fn small_rational<R: Rng>(rng: &mut R, max_num: i64) -> ExactComplex {
    let num = loop {
        let v = rng.gen_range(-max_num..=max_num);
        if v != 0 {
            break v;
        }
    };
    let den = *[1i64, 2, 3].get(rng.gen_range(0..3)).unwrap();
    ExactComplex::rational(num, den)
}

fn small_imaginary<R: Rng>(rng: &mut R) -> ExactComplex {
    let num = rng.gen_range(-3i64..=3);
    let den = *[1i64, 2, 3].get(rng.gen_range(0..3)).unwrap();
    ExactComplex::imaginary(num, den)
}

fn random_exponents<R: Rng>(rng: &mut R, n: usize, max_degree: u32) -> MultiIndex {
    let degree = rng.gen_range(2..=max_degree.min(3));
    let mut l = vec![0u32; n];
    for _ in 0..degree {
        l[rng.gen_range(0..n)] += 1;
    }
    MultiIndex(l)
}

/// Generates `count` systems with dimensions in {2,3,4}, truncation degrees
/// in {4,5,6}, Fourier band at most 3, eigenvalues i*nu with small rational
/// nu, and subdiagonals either zero or small. Even-indexed systems carry a
/// planted first integral:
///   - x_n, arranged by zeroing the last row of the system, or
///   - e^{-it} x_1, arranged with lambda_1 = i and F_1 = 0.
pub fn generate(count: usize, seed: u64) -> Result<Vec<CorpusSystem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let n = rng.gen_range(2usize..=4);
        let degree = rng.gen_range(4u32..=6);
        let mut lambda: Vec<ExactComplex> =
            (0..n).map(|_| small_imaginary(&mut rng)).collect();
        let mut sigma: Vec<ExactComplex> = if rng.gen_bool(0.5) {
            vec![ExactComplex::zero(); n - 1]
        } else {
            (0..n - 1)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        ExactComplex::rational(1, 10)
                    } else {
                        ExactComplex::zero()
                    }
                })
                .collect()
        };

        let mut protected = vec![false; n];
        let mut planted = Vec::new();
        let mut plant_labels = Vec::new();
        if idx % 2 == 0 {
            if rng.gen_bool(0.5) {
                // H = x_n: the last equation must vanish identically
                lambda[n - 1] = ExactComplex::zero();
                sigma[n - 2] = ExactComplex::zero();
                protected[n - 1] = true;
                let h = Series::monomial(
                    n,
                    degree,
                    MultiIndex::unit(n, n - 1),
                    0,
                    ExactComplex::one(),
                )?;
                planted.push(h);
                plant_labels.push(format!("x{n}"));
            } else {
                // H = e^{-it} x_1: lambda_1 = i and F_1 = 0
                lambda[0] = ExactComplex::i();
                protected[0] = true;
                let h = Series::monomial(
                    n,
                    degree,
                    MultiIndex::unit(n, 0),
                    -1,
                    ExactComplex::one(),
                )?;
                planted.push(h);
                plant_labels.push("e^{-it} x1".to_string());
            }
        }

        let mut nonlinear = VectorSeries::zero(n, degree);
        for comp in 0..n {
            if protected[comp] {
                continue;
            }
            let terms = rng.gen_range(1..=3);
            for _ in 0..terms {
                let l = random_exponents(&mut rng, n, degree);
                let k = rng.gen_range(-3i64..=3);
                let c = small_rational(&mut rng, 2);
                nonlinear.comps[comp].add_term(l, k, c)?;
            }
        }

        let system = PeriodicSystem::with_standard_period(
            LinearPart::new(lambda, sigma)?,
            nonlinear,
        )?;
        out.push(CorpusSystem {
            system,
            degree,
            planted,
            plant_labels,
        });
    }
    Ok(out)
}
