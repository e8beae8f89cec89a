//! The reduced periodic system: a lower-bidiagonal constant linear part plus
//! a band-limited nonlinearity of degree >= 2.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::scalar::Coeff;
use crate::series::{MultiIndex, VectorSeries};

/// Lower-bidiagonal constant matrix: eigenvalues on the diagonal, entries
/// sigma_2..sigma_n just under it. `sigma[j]` couples component j+1 to j
/// (zero-based), i.e. it is the paper's sigma_{j+2}.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPart<C: Coeff> {
    pub lambda: Vec<C>,
    pub sigma: Vec<C>,
}

impl<C: Coeff> LinearPart<C> {
    pub fn new(lambda: Vec<C>, sigma: Vec<C>) -> Result<Self> {
        if sigma.len() + 1 != lambda.len() {
            return Err(Error::InvariantViolation(format!(
                "sigma must have n-1 = {} entries, got {}",
                lambda.len() - 1,
                sigma.len()
            )));
        }
        Ok(LinearPart { lambda, sigma })
    }

    pub fn diagonal(lambda: Vec<C>) -> Self {
        let sigma = vec![C::zero(); lambda.len().saturating_sub(1)];
        LinearPart { lambda, sigma }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.sigma.iter().all(|s| s.is_zero())
    }

    pub fn max_sigma_magnitude(&self) -> f64 {
        self.sigma.iter().map(|s| s.magnitude()).fold(0.0, f64::max)
    }

    /// A*y as a vector of degree-1 series: component s = lambda_s y_s +
    /// sigma_s y_{s-1}.
    pub fn apply_linear(&self, max_degree: u32) -> Result<VectorSeries<C>> {
        let n = self.dim();
        let mut out = VectorSeries::zero(n, max_degree);
        for s in 0..n {
            out.comps[s].add_term(MultiIndex::unit(n, s), 0, self.lambda[s].clone())?;
            if s >= 1 {
                out.comps[s].add_term(MultiIndex::unit(n, s - 1), 0, self.sigma[s - 1].clone())?;
            }
        }
        Ok(out)
    }
}

/// The system of Eq-F4 shape: x' = A x + F(x,t) with F of degree >= 2,
/// written in time units where the period is 2*pi. `period` records the
/// original period before rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSystem<C: Coeff> {
    pub linear: LinearPart<C>,
    pub nonlinear: VectorSeries<C>,
    pub period: f64,
}

impl<C: Coeff> PeriodicSystem<C> {
    pub fn new(linear: LinearPart<C>, nonlinear: VectorSeries<C>, period: f64) -> Result<Self> {
        if linear.dim() != nonlinear.dim() {
            return Err(Error::DimensionMismatch {
                expected: linear.dim(),
                got: nonlinear.dim(),
            });
        }
        if let Some(d) = nonlinear.min_degree() {
            if d < 2 {
                return Err(Error::InvariantViolation(format!(
                    "nonlinearity contains a degree-{d} term; degree >= 2 required"
                )));
            }
        }
        Ok(PeriodicSystem {
            linear,
            nonlinear,
            period,
        })
    }

    pub fn with_standard_period(linear: LinearPart<C>, nonlinear: VectorSeries<C>) -> Result<Self> {
        Self::new(linear, nonlinear, TAU)
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn max_degree(&self) -> u32 {
        self.nonlinear.max_degree()
    }

    /// Full right-hand side A x + F as series, truncated at the nonlinearity
    /// degree.
    pub fn rhs_series(&self) -> Result<VectorSeries<C>> {
        self.linear.apply_linear(self.max_degree())?.add(&self.nonlinear)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExactComplex as EC;

    #[test]
    fn linear_part_shape_is_checked() {
        assert!(LinearPart::new(vec![EC::i(), EC::zero()], vec![]).is_err());
        let lp = LinearPart::new(vec![EC::i(), EC::zero()], vec![EC::integer(1)]).unwrap();
        assert!(!lp.is_diagonal());
        assert_eq!(lp.max_sigma_magnitude(), 1.0);
    }

    #[test]
    fn degree_one_terms_rejected() {
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let mut f = VectorSeries::zero(2, 4);
        f.comps[0]
            .add_term(MultiIndex(vec![1, 0]), 0, EC::integer(1))
            .unwrap();
        assert!(matches!(
            PeriodicSystem::with_standard_period(lp, f),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn bidiagonal_apply() {
        let lp = LinearPart::new(
            vec![EC::i(), EC::zero()],
            vec![EC::rational(1, 10)],
        )
        .unwrap();
        let ay = lp.apply_linear(3).unwrap();
        // component 2 = sigma_2 y_1 + 0 * y_2
        use crate::series::TermKey;
        assert_eq!(
            ay.comps[1].coeff(&TermKey::new(MultiIndex(vec![1, 0]), 0)),
            Some(&EC::rational(1, 10))
        );
        assert_eq!(ay.comps[1].num_terms(), 1);
    }
}
