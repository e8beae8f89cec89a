//! Trajectory-level validation of a computed normalization and empirical
//! convergence diagnostics for the transform series.

use std::fmt;

use nalgebra::DVector;
use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::floquet::{integrate_path, IntegratorOptions};
use crate::normalform::NormalizationResult;
use crate::scalar::Coeff;
use crate::series::VectorSeries;
use crate::system::PeriodicSystem;

/// Default radii for the scaling diagnostic: one decade, geometric.
pub fn default_radii() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

/// Log-log scaling of the conjugacy defect against the initial radius.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub radii: Vec<f64>,
    pub errors: Vec<f64>,
    /// slope between consecutive radii
    pub local_slopes: Vec<f64>,
    pub fitted_slope: f64,
    pub degree: u32,
    /// errors at or below this level are attributed to the integrator
    pub error_floor: f64,
    pub floor_reached: bool,
    pub passed: bool,
}

impl fmt::Display for ScalingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "radius        error         local slope")?;
        for (i, (r, e)) in self.radii.iter().zip(&self.errors).enumerate() {
            let slope = if i == 0 {
                "-".to_string()
            } else {
                format!("{:.4}", self.local_slopes[i - 1])
            };
            writeln!(f, "{r:<13.6e} {e:<13.6e} {slope}")?;
        }
        writeln!(f, "fitted slope: {:.4}", self.fitted_slope)?;
        writeln!(f, "degree: {}", self.degree)?;
        writeln!(f, "error floor: {:.6e}", self.error_floor)?;
        writeln!(
            f,
            "verdict: {}",
            if self.passed {
                if self.floor_reached {
                    "pass (errors at integrator floor)"
                } else {
                    "pass"
                }
            } else {
                "fail"
            }
        )
    }
}

fn pack(z: &[Complex64]) -> DVector<f64> {
    let mut v = DVector::zeros(2 * z.len());
    for (i, c) in z.iter().enumerate() {
        v[2 * i] = c.re;
        v[2 * i + 1] = c.im;
    }
    v
}

fn unpack(v: &DVector<f64>, n: usize) -> Vec<Complex64> {
    (0..n).map(|i| Complex64::new(v[2 * i], v[2 * i + 1])).collect()
}

fn rhs_eval<C: Coeff>(
    lambda: &[Complex64],
    sigma: &[Complex64],
    nonlinear: &VectorSeries<C>,
    z: &[Complex64],
    u: Complex64,
) -> Vec<Complex64> {
    let n = z.len();
    let f = nonlinear.eval_c64(z, u);
    (0..n)
        .map(|s| {
            let mut d = lambda[s] * z[s] + f[s];
            if s >= 1 {
                d += sigma[s - 1] * z[s - 1];
            }
            d
        })
        .collect()
}

/// Integrates the original system from y0 + Phi(y0, 0) and the normal form
/// from y0, and measures max_t |x(t) - y(t) - Phi(y(t), t)| over equispaced
/// sample times. The fitted log-log slope across the radii must reach
/// degree + 1/2 unless every error sits at the integrator floor.
pub fn conjugacy_scaling_check<C: Coeff>(
    system: &PeriodicSystem<C>,
    result: &NormalizationResult<C>,
    radii: &[f64],
    t_span: f64,
    integ: IntegratorOptions,
) -> Result<ScalingReport> {
    let n = system.dim();
    if result.phi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: result.phi.dim(),
        });
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvariantViolation(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    let lambda: Vec<Complex64> = system.linear.lambda.iter().map(|c| c.to_c64()).collect();
    let sigma: Vec<Complex64> = system.linear.sigma.iter().map(|c| c.to_c64()).collect();
    // deterministic generic direction with unit norm
    let dir: Vec<f64> = {
        let raw: Vec<f64> = (1..=n).map(|j| j as f64).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.into_iter().map(|v| v / norm).collect()
    };
    let n_samples = 64usize;
    let times: Vec<f64> = (1..=n_samples)
        .map(|i| t_span * i as f64 / n_samples as f64)
        .collect();

    let mut errors = Vec::with_capacity(radii.len());
    for &rho in radii {
        let y0: Vec<Complex64> = dir.iter().map(|d| Complex64::new(rho * d, 0.0)).collect();
        let phi0 = result.phi.eval_c64(&y0, Complex64::new(1.0, 0.0));
        let x0: Vec<Complex64> = y0.iter().zip(&phi0).map(|(y, p)| y + p).collect();
        // joint state: original trajectory followed by normal-form trajectory
        let rhs = |t: f64, state: &DVector<f64>| {
            let u = Complex64::new(0.0, t).exp();
            let x = unpack(&state.rows(0, 2 * n).into_owned(), n);
            let y = unpack(&state.rows(2 * n, 2 * n).into_owned(), n);
            let dx = rhs_eval(&lambda, &sigma, &system.nonlinear, &x, u);
            let dy = rhs_eval(&lambda, &sigma, &result.g, &y, u);
            let mut out = DVector::zeros(4 * n);
            out.rows_mut(0, 2 * n).copy_from(&pack(&dx));
            out.rows_mut(2 * n, 2 * n).copy_from(&pack(&dy));
            out
        };
        let mut state0 = DVector::zeros(4 * n);
        state0.rows_mut(0, 2 * n).copy_from(&pack(&x0));
        state0.rows_mut(2 * n, 2 * n).copy_from(&pack(&y0));
        let path = integrate_path(&rhs, 0.0, &times, state0, integ)?;
        let mut worst: f64 = 0.0;
        for (t, state) in times.iter().zip(&path) {
            let u = Complex64::new(0.0, *t).exp();
            let x = unpack(&state.rows(0, 2 * n).into_owned(), n);
            let y = unpack(&state.rows(2 * n, 2 * n).into_owned(), n);
            let phi = result.phi.eval_c64(&y, u);
            for s in 0..n {
                worst = worst.max((x[s] - y[s] - phi[s]).norm());
            }
        }
        errors.push(worst);
    }

    let logs: Vec<(f64, f64)> = radii
        .iter()
        .zip(&errors)
        .map(|(r, e)| (r.ln(), e.max(1e-300).ln()))
        .collect();
    let m = logs.len() as f64;
    let (sx, sy): (f64, f64) = logs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (sxx, sxy): (f64, f64) = logs
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 * p.0, a.1 + p.0 * p.1));
    let fitted_slope = if logs.len() >= 2 {
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    } else {
        f64::NAN
    };
    let local_slopes: Vec<f64> = logs
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let error_floor = 100.0 * (integ.rtol + integ.atol) * (1.0 + t_span);
    let floor_reached = errors.iter().all(|e| *e <= error_floor);
    let degree = result.degree;
    let passed = floor_reached || fitted_slope >= degree as f64 + 0.5;
    Ok(ScalingReport {
        radii: radii.to_vec(),
        errors,
        local_slopes,
        fitted_slope,
        degree,
        error_floor,
        floor_reached,
        passed,
    })
}

/// Per-degree 1-norms of the transform series and their ratio sequence. A
/// bounded ratio sequence is evidence (not proof) of a positive radius of
/// convergence.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    /// (degree, sum over components of the coefficient-magnitude sum)
    pub degree_norms: Vec<(u32, f64)>,
    /// norm(s+1) / norm(s); 0 when norm(s) vanishes
    pub ratios: Vec<f64>,
}

impl fmt::Display for GrowthReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "degree  1-norm         ratio")?;
        for (i, (d, norm)) in self.degree_norms.iter().enumerate() {
            let ratio = if i == 0 {
                "-".to_string()
            } else {
                format!("{:.6e}", self.ratios[i - 1])
            };
            writeln!(f, "{d:<7} {norm:<14.6e} {ratio}")?;
        }
        Ok(())
    }
}

pub fn coefficient_growth<C: Coeff>(result: &NormalizationResult<C>) -> GrowthReport {
    let mut degree_norms = Vec::new();
    for d in 2..=result.degree {
        let norm: f64 = result
            .phi
            .comps
            .iter()
            .map(|s| s.one_norm_at_degree(d))
            .sum();
        // avoid the negative-zero rendering of an empty degree
        degree_norms.push((d, norm.max(0.0)));
    }
    let ratios = degree_norms
        .windows(2)
        .map(|w| if w[0].1 > 0.0 { w[1].1 / w[0].1 } else { 0.0 })
        .collect();
    GrowthReport {
        degree_norms,
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalform::{normalize, residual_check, NormalizeOptions};
    use crate::scalar::ExactComplex as EC;
    use crate::series::MultiIndex;
    use crate::system::LinearPart;
    use std::f64::consts::TAU;

    // F1 = x2^2, lambda = (i, 0): the transform is exactly Phi1 = i y2^2.
    fn exact_conjugacy_system(max_degree: u32) -> PeriodicSystem<EC> {
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let mut f = VectorSeries::zero(2, max_degree);
        f.comps[0]
            .add_term(MultiIndex(vec![0, 2]), 0, EC::integer(1))
            .unwrap();
        PeriodicSystem::with_standard_period(lp, f).unwrap()
    }

    // nonresonant pair with a cascading nonlinearity: Phi has terms at every
    // degree up to the truncation
    fn cascading_system(max_degree: u32) -> PeriodicSystem<EC> {
        let lp = LinearPart::diagonal(vec![EC::imaginary(1, 3), EC::imaginary(1, 5)]);
        let mut f = VectorSeries::zero(2, max_degree);
        f.comps[0]
            .add_term(MultiIndex(vec![0, 2]), 0, EC::integer(1))
            .unwrap();
        f.comps[1]
            .add_term(MultiIndex(vec![1, 1]), 0, EC::integer(1))
            .unwrap();
        f.comps[1]
            .add_term(MultiIndex(vec![2, 0]), 1, EC::rational(1, 2))
            .unwrap();
        PeriodicSystem::with_standard_period(lp, f).unwrap()
    }

    #[test]
    fn exact_conjugacy_sits_at_floor() {
        let sys = exact_conjugacy_system(5);
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        assert!(residual_check(&sys, &res, 5).unwrap().is_zero());
        let report = conjugacy_scaling_check(
            &sys,
            &res,
            &default_radii(),
            TAU,
            IntegratorOptions::default(),
        )
        .unwrap();
        assert!(report.floor_reached, "errors {:?}", report.errors);
        assert!(report.passed);
    }

    #[test]
    fn perturbed_transform_has_quadratic_defect() {
        let sys = exact_conjugacy_system(5);
        let mut res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        res.phi.comps[0]
            .add_term(MultiIndex(vec![2, 0]), 0, EC::rational(1, 1000))
            .unwrap();
        let report = conjugacy_scaling_check(
            &sys,
            &res,
            &default_radii(),
            TAU,
            IntegratorOptions::default(),
        )
        .unwrap();
        assert!(
            report.fitted_slope > 1.5 && report.fitted_slope < 2.6,
            "slope {}",
            report.fitted_slope
        );
        assert!(!report.passed);
        // defect shrinks monotonically with the radius
        for w in report.errors.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn truncated_result_keeps_its_order() {
        let sys = cascading_system(5);
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        // the cascade really fills higher degrees
        assert!(res.phi.comps.iter().any(|s| s.one_norm_at_degree(4) > 0.0));
        let truncated = NormalizationResult {
            phi: res.phi.truncated(3),
            g: res.g.truncated(3),
            degree: 3,
            near_resonances: vec![],
        };
        let report = conjugacy_scaling_check(
            &sys,
            &truncated,
            &default_radii(),
            TAU,
            IntegratorOptions::default(),
        )
        .unwrap();
        assert!(
            report.fitted_slope >= 3.5,
            "slope {} errors {:?}",
            report.fitted_slope,
            report.errors
        );
        assert!(report.passed);
    }

    #[test]
    fn radii_must_decrease() {
        let sys = exact_conjugacy_system(4);
        let res = normalize(&sys, 4, &NormalizeOptions::default()).unwrap();
        let r = conjugacy_scaling_check(
            &sys,
            &res,
            &[0.1, 0.2],
            TAU,
            IntegratorOptions::default(),
        );
        assert!(matches!(r, Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn growth_of_finite_transform_vanishes() {
        let sys = exact_conjugacy_system(5);
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        let g = coefficient_growth(&res);
        assert_eq!(g.degree_norms[0], (2, 1.0));
        for (d, norm) in &g.degree_norms[1..] {
            assert_eq!(*norm, 0.0, "degree {d}");
        }
        assert!(g.ratios.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn growth_of_zero_system_is_zero() {
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let sys =
            PeriodicSystem::with_standard_period(lp, VectorSeries::zero(2, 4)).unwrap();
        let res = normalize(&sys, 4, &NormalizeOptions::default()).unwrap();
        let g = coefficient_growth(&res);
        assert!(g.degree_norms.iter().all(|(_, n)| *n == 0.0));
    }

    #[test]
    fn cascade_ratios_are_bounded() {
        let sys = cascading_system(6);
        let res = normalize(&sys, 6, &NormalizeOptions::default()).unwrap();
        let g = coefficient_growth(&res);
        assert!(g.degree_norms.iter().all(|(_, n)| n.is_finite()));
        assert!(g.ratios.iter().all(|r| *r < 100.0), "{:?}", g.ratios);
    }

    #[test]
    fn report_rendering_is_stable() {
        let sys = exact_conjugacy_system(4);
        let res = normalize(&sys, 4, &NormalizeOptions::default()).unwrap();
        let report = conjugacy_scaling_check(
            &sys,
            &res,
            &[0.1, 0.05],
            TAU,
            IntegratorOptions::default(),
        )
        .unwrap();
        let a = report.to_string();
        assert!(a.contains("fitted slope"));
        assert!(a.contains("verdict"));
    }
}
