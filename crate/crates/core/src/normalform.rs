//! Degree-by-degree homological-equation solver producing the distinguished
//! normalization Phi and the distinguished normal form G.
//!
//! Two solution paths are provided and must agree when the linear part is
//! diagonal: the basis-split solver (project the right-hand side onto
//! resonant/nonresonant pseudomonomials and invert the operator on the
//! nonresonant part) and the general coefficient recursion for a lower
//! bidiagonal linear part, which threads the subdiagonal couplings through
//! the scheduling order (degree ascending, exponents lexicographic within a
//! degree, components ascending).

use std::collections::BTreeMap;

use num::{BigInt, BigRational, Zero};
#[cfg(test)]
use num::One;

use crate::error::{Error, Result};
use crate::resonance::vf_divisor;
use crate::scalar::{Coeff, ExactComplex, ScalarMode};
use crate::series::{MultiIndex, TermKey, VectorSeries};
use crate::system::{LinearPart, PeriodicSystem};

/// Which within-degree solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveStrategy {
    /// Coefficient recursion for lower-bidiagonal A (works for diagonal A
    /// too).
    #[default]
    Recursion,
    /// Basis split into resonant/nonresonant pseudomonomials; requires a
    /// diagonal linear part.
    BasisSplit,
}

#[derive(Debug, Clone, Default)]
pub struct NormalizeOptions {
    pub strategy: SolveStrategy,
    /// Resonance tolerance; required in approx mode, ignored in exact mode.
    pub tol: Option<f64>,
}

/// A near-resonant divisor routed to the resonant branch in approx mode.
#[derive(Debug, Clone)]
pub struct NearResonance {
    pub l: MultiIndex,
    pub mode: i64,
    pub component: usize,
    pub divisor_magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct NormalizationResult<C: Coeff> {
    pub phi: VectorSeries<C>,
    pub g: VectorSeries<C>,
    pub degree: u32,
    /// Approx mode only: divisors below tolerance treated as resonant.
    pub near_resonances: Vec<NearResonance>,
}

/// W_s = [F]_s - sum_{j=2}^{s-1} dPhi_j G_{s+1-j}, the inductively known
/// right-hand side at degree s. `phi` and `g` must carry exactly the parts
/// of degree < s.
pub fn compute_w<C: Coeff>(
    s: u32,
    f: &VectorSeries<C>,
    phi: &VectorSeries<C>,
    g: &VectorSeries<C>,
) -> Result<VectorSeries<C>> {
    for prior in [phi, g] {
        if prior.comps.iter().any(|c| {
            c.iter().any(|(key, _)| key.degree() >= s)
        }) {
            return Err(Error::IncompletePrefix(format!(
                "degree-{s} right-hand side requires only parts of degree < {s}"
            )));
        }
    }
    let composed = f.compose(phi, s)?;
    let correction = phi.truncated(s).jacobian_apply(&g.truncated(s))?;
    Ok(composed.homogeneous_part(s).sub(&correction.homogeneous_part(s))?)
}

struct DegreeSolution<C: Coeff> {
    phi: VectorSeries<C>,
    g: VectorSeries<C>,
    near: Vec<NearResonance>,
}

/// Basis-split solution of L Phi = W - G at one degree: resonant terms go to
/// G verbatim (Phi = 0 there), nonresonant terms to Phi = divisor^{-1} W.
fn solve_degree_split<C: Coeff>(
    w: &VectorSeries<C>,
    linear: &LinearPart<C>,
    tol: Option<f64>,
) -> Result<DegreeSolution<C>> {
    if !linear.is_diagonal() {
        return Err(Error::SolverAssertion(
            "basis-split solver requires a diagonal linear part".into(),
        ));
    }
    let n = linear.dim();
    let nmax = w.max_degree();
    let mut phi = VectorSeries::zero(n, nmax);
    let mut g = VectorSeries::zero(n, nmax);
    let mut near = Vec::new();
    for s in 0..n {
        for (key, c) in w.comps[s].iter() {
            let div = vf_divisor(&key.l, key.k, s, &linear.lambda);
            if C::divisor_is_zero(&div, tol)? {
                if C::MODE == ScalarMode::Approx && !div.is_zero() {
                    near.push(NearResonance {
                        l: key.l.clone(),
                        mode: key.k,
                        component: s,
                        divisor_magnitude: div.magnitude(),
                    });
                }
                g.comps[s].add_term(key.l.clone(), key.k, c.clone())?;
            } else {
                phi.comps[s].add_term(key.l.clone(), key.k, div.inv().mul(c))?;
            }
        }
    }
    Ok(DegreeSolution { phi, g, near })
}

/// Coefficient recursion at one degree for a lower-bidiagonal linear part.
/// For each exponent l (lexicographic, i.e. descending scheduling
/// precedence) and component s (ascending), the already-resolved couplings
///   C = sum_{j=2}^n (1+l_j) sigma_j phi^{l-e_{j-1}+e_j}_s
///       - sigma_s phi^l_{s-1}
/// move to the right-hand side; the divisor then either vanishes (the whole
/// right side goes to g, phi = 0) or inverts onto phi with g = 0.
fn solve_degree_recursion<C: Coeff>(
    degree: u32,
    w: &VectorSeries<C>,
    linear: &LinearPart<C>,
    tol: Option<f64>,
) -> Result<DegreeSolution<C>> {
    let n = linear.dim();
    let nmax = w.max_degree();
    let mut phi = VectorSeries::zero(n, nmax);
    let mut g = VectorSeries::zero(n, nmax);
    let mut near = Vec::new();

    for l in crate::resonance::multi_indices(n, degree) {
        for s in 0..n {
            // Gather the right-hand side per Fourier mode: W minus the
            // resolved subdiagonal couplings.
            let mut rhs: BTreeMap<i64, C> = BTreeMap::new();
            let mut accumulate = |k: i64, v: C| {
                let entry = rhs.entry(k).or_insert_with(C::zero);
                *entry = entry.add(&v);
            };
            for (key, c) in w.comps[s].iter() {
                if key.l == l {
                    accumulate(key.k, c.clone());
                }
            }
            for j in 1..n {
                if linear.sigma[j - 1].is_zero() {
                    continue;
                }
                if let Some(shifted) = l.shift(j - 1, j) {
                    let factor = linear.sigma[j - 1].scale_int(1 + l.0[j] as i64);
                    for (key, c) in phi.comps[s].iter() {
                        if key.l == shifted {
                            accumulate(key.k, factor.mul(c).neg());
                        }
                    }
                }
            }
            if s >= 1 && !linear.sigma[s - 1].is_zero() {
                let prev: Vec<(i64, C)> = phi.comps[s - 1]
                    .iter()
                    .filter(|(key, _)| key.l == l)
                    .map(|(key, c)| (key.k, c.clone()))
                    .collect();
                for (k, c) in prev {
                    accumulate(k, linear.sigma[s - 1].mul(&c));
                }
            }

            for (k, v) in rhs {
                if v.is_zero() {
                    continue;
                }
                let div = vf_divisor(&l, k, s, &linear.lambda);
                if C::divisor_is_zero(&div, tol)? {
                    if C::MODE == ScalarMode::Approx && !div.is_zero() {
                        near.push(NearResonance {
                            l: l.clone(),
                            mode: k,
                            component: s,
                            divisor_magnitude: div.magnitude(),
                        });
                    }
                    g.comps[s].add_term(l.clone(), k, v)?;
                } else {
                    phi.comps[s].add_term(l.clone(), k, div.inv().mul(&v))?;
                }
            }
        }
    }
    Ok(DegreeSolution { phi, g, near })
}

/// Solve one degree with the requested strategy.
pub fn solve_degree<C: Coeff>(
    degree: u32,
    w: &VectorSeries<C>,
    linear: &LinearPart<C>,
    opts: &NormalizeOptions,
) -> Result<(VectorSeries<C>, VectorSeries<C>)> {
    let sol = match opts.strategy {
        SolveStrategy::Recursion => solve_degree_recursion(degree, w, linear, opts.tol)?,
        SolveStrategy::BasisSplit => solve_degree_split(w, linear, opts.tol)?,
    };
    Ok((sol.phi, sol.g))
}

/// Drive the homological equations from degree 2 through `degree`.
pub fn normalize<C: Coeff>(
    system: &PeriodicSystem<C>,
    degree: u32,
    opts: &NormalizeOptions,
) -> Result<NormalizationResult<C>> {
    let n = system.dim();
    let f = system.nonlinear.truncated(degree);
    let mut phi = VectorSeries::zero(n, degree);
    let mut g = VectorSeries::zero(n, degree);
    let mut near = Vec::new();
    for s in 2..=degree {
        let w = compute_w(s, &f, &phi, &g)?;
        let sol = match opts.strategy {
            SolveStrategy::Recursion => solve_degree_recursion(s, &w, &system.linear, opts.tol)?,
            SolveStrategy::BasisSplit => solve_degree_split(&w, &system.linear, opts.tol)?,
        };
        phi = phi.add(&sol.phi.truncated(degree))?;
        g = g.add(&sol.g.truncated(degree))?;
        near.extend(sol.near);
    }
    Ok(NormalizationResult {
        phi,
        g,
        degree,
        near_resonances: near,
    })
}

/// The conjugacy defect
///   d_t Phi + <d_y Phi, A y> - A Phi - F(y+Phi,t) + <d_y Phi, G> + G,
/// truncated at `degree`. Identically zero for a valid normalization.
#[derive(Debug, Clone)]
pub struct Residual<C: Coeff> {
    pub series: VectorSeries<C>,
    pub max_degree_checked: u32,
}

impl<C: Coeff> Residual<C> {
    pub fn is_zero(&self) -> bool {
        self.series.is_zero()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.series
            .comps
            .iter()
            .flat_map(|c| c.iter().map(|(_, v)| v.magnitude()))
            .fold(0.0, f64::max)
    }
}

pub fn residual_check<C: Coeff>(
    system: &PeriodicSystem<C>,
    result: &NormalizationResult<C>,
    degree: u32,
) -> Result<Residual<C>> {
    let phi = result.phi.truncated(degree);
    let g = result.g.truncated(degree);
    let ay = system.linear.apply_linear(degree)?;

    let mut lhs = phi.d_dt().add(&phi.jacobian_apply(&ay)?)?;
    // A Phi: component s = lambda_s phi_s + sigma_s phi_{s-1}
    let n = system.dim();
    for s in 0..n {
        let mut a_phi = phi.comps[s].scale(&system.linear.lambda[s]);
        if s >= 1 {
            a_phi = a_phi.add(&phi.comps[s - 1].scale(&system.linear.sigma[s - 1]))?;
        }
        lhs.comps[s] = lhs.comps[s].sub(&a_phi)?;
    }

    let composed = system.nonlinear.truncated(degree).compose(&phi, degree)?;
    let rhs = composed.sub(&phi.jacobian_apply(&g)?)?.sub(&g)?;

    Ok(Residual {
        series: lhs.sub(&rhs)?,
        max_degree_checked: degree,
    })
}

/// Scan a normalization for distinguishedness: every Phi term nonresonant,
/// every G term resonant, in the vector-field sense.
pub fn distinguished_violations<C: Coeff>(
    result: &NormalizationResult<C>,
    linear: &LinearPart<C>,
    tol: Option<f64>,
) -> Result<Vec<(usize, TermKey)>> {
    let mut bad = Vec::new();
    for s in 0..result.phi.dim() {
        for (key, _) in result.phi.comps[s].iter() {
            let div = vf_divisor(&key.l, key.k, s, &linear.lambda);
            if C::divisor_is_zero(&div, tol)? {
                bad.push((s, key.clone()));
            }
        }
        for (key, _) in result.g.comps[s].iter() {
            let div = vf_divisor(&key.l, key.k, s, &linear.lambda);
            if !C::divisor_is_zero(&div, tol)? {
                bad.push((s, key.clone()));
            }
        }
    }
    Ok(bad)
}

/// Compositional inverse of the near-identity map x = y + Phi(y,t):
/// returns Psi with (id + Phi) o (id + Psi) = id through `degree`.
pub fn invert_normalization<C: Coeff>(
    phi: &VectorSeries<C>,
    degree: u32,
) -> Result<VectorSeries<C>> {
    if phi.min_degree().is_some_and(|d| d < 2) {
        return Err(Error::InvariantViolation(
            "normalization must have terms of degree >= 2 only".into(),
        ));
    }
    let n = phi.dim();
    let mut psi = VectorSeries::zero(n, degree);
    // Psi = -Phi(x + Psi); each pass fixes one further degree.
    for _ in 2..=degree.max(2) {
        psi = phi.truncated(degree).compose(&psi, degree)?.neg();
    }
    Ok(psi)
}

/// Exact conjugation diag(1, c, c^2, ...) that maps sigma_j to c sigma_j
/// and keeps the eigenvalues. `scale[j] = c^j`.
#[derive(Debug, Clone)]
pub struct DiagonalScaling {
    pub factors: Vec<ExactComplex>,
}

impl DiagonalScaling {
    pub fn inverse(&self) -> DiagonalScaling {
        DiagonalScaling {
            factors: self.factors.iter().map(|f| f.inv()).collect(),
        }
    }

    /// Push a vector series through x~ = D x: component j picks up factor
    /// d_j and each variable substitution x_m = d_m^{-1} x~_m rescales the
    /// exponent weights.
    pub fn apply_vector(&self, v: &VectorSeries<ExactComplex>) -> Result<VectorSeries<ExactComplex>> {
        let n = v.dim();
        let inv: Vec<ExactComplex> = self.factors.iter().map(|f| f.inv()).collect();
        let mut out = VectorSeries::zero(n, v.max_degree());
        for j in 0..n {
            for (key, c) in v.comps[j].iter() {
                let mut coeff = c.mul(&self.factors[j]);
                for (m, &e) in key.l.0.iter().enumerate() {
                    for _ in 0..e {
                        coeff = coeff.mul(&inv[m]);
                    }
                }
                out.comps[j].add_term(key.l.clone(), key.k, coeff)?;
            }
        }
        Ok(out)
    }

    pub fn apply_system(&self, system: &PeriodicSystem<ExactComplex>) -> Result<PeriodicSystem<ExactComplex>> {
        let n = system.dim();
        let mut sigma = Vec::with_capacity(n.saturating_sub(1));
        for j in 1..n {
            // d_j sigma_j d_{j-1}^{-1}
            sigma.push(
                self.factors[j]
                    .mul(&system.linear.sigma[j - 1])
                    .mul(&self.factors[j - 1].inv()),
            );
        }
        let linear = LinearPart::new(system.linear.lambda.clone(), sigma)?;
        let nonlinear = self.apply_vector(&system.nonlinear)?;
        PeriodicSystem::new(linear, nonlinear, system.period)
    }
}

pub fn rescale_subdiagonal(
    linear: &LinearPart<ExactComplex>,
    c: &BigRational,
) -> Result<(LinearPart<ExactComplex>, DiagonalScaling)> {
    if c <= &BigRational::zero() {
        return Err(Error::InvalidScale);
    }
    let n = linear.dim();
    let c_val = ExactComplex::new(c.clone(), BigRational::from(BigInt::zero()));
    let mut factors = Vec::with_capacity(n);
    let mut cur = ExactComplex::one();
    for _ in 0..n {
        factors.push(cur.clone());
        cur = cur.mul(&c_val);
    }
    let sigma: Vec<ExactComplex> = linear.sigma.iter().map(|s| s.mul(&c_val)).collect();
    let out = LinearPart::new(linear.lambda.clone(), sigma)?;
    Ok((out, DiagonalScaling { factors }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ExactComplex as EC;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex(v.to_vec())
    }

    fn key(l: &[u32], k: i64) -> TermKey {
        TermKey::new(mi(l), k)
    }

    /// x1' = i x1 + c e^{ikt} x2^2, x2' = 0 with the given Fourier mode.
    fn quadratic_example(mode: i64) -> PeriodicSystem<EC> {
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let mut f = VectorSeries::zero(2, 5);
        f.comps[0].add_term(mi(&[0, 2]), mode, EC::integer(1)).unwrap();
        PeriodicSystem::with_standard_period(lp, f).unwrap()
    }

    #[test]
    fn w2_is_f2_and_zero_propagates() {
        let sys = quadratic_example(0);
        let phi = VectorSeries::zero(2, 5);
        let g = VectorSeries::zero(2, 5);
        let w2 = compute_w(2, &sys.nonlinear, &phi, &g).unwrap();
        assert_eq!(w2, sys.nonlinear.homogeneous_part(2).truncated(2));

        // F with no degree-2 or degree-3 part: W2 = W3 = 0
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let mut f = VectorSeries::zero(2, 5);
        f.comps[0].add_term(mi(&[0, 4]), 0, EC::integer(1)).unwrap();
        let sys = PeriodicSystem::with_standard_period(lp, f).unwrap();
        let res = normalize(&sys, 3, &NormalizeOptions::default()).unwrap();
        assert!(res.phi.is_zero() && res.g.is_zero());
    }

    #[test]
    fn w3_hand_expansion() {
        // F = (x1^2, 0), Phi_2 = (i y2^2, 0), G_2 = 0:
        // W3 = degree-3 part of (y1 + i y2^2)^2 = 2i y1 y2^2
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let mut f = VectorSeries::zero(2, 5);
        f.comps[0].add_term(mi(&[2, 0]), 0, EC::integer(1)).unwrap();
        let mut phi = VectorSeries::zero(2, 5);
        phi.comps[0].add_term(mi(&[0, 2]), 0, EC::i()).unwrap();
        let g = VectorSeries::zero(2, 5);
        let w3 = compute_w(3, &f, &phi, &g).unwrap();
        let _ = lp;
        assert_eq!(
            w3.comps[0].coeff(&key(&[1, 2], 0)),
            Some(&EC::imaginary(2, 1))
        );
        assert_eq!(w3.comps[0].num_terms(), 1);
        assert!(w3.comps[1].is_zero());
    }

    #[test]
    fn incomplete_prefix_rejected() {
        let sys = quadratic_example(0);
        let mut phi = VectorSeries::zero(2, 5);
        phi.comps[0].add_term(mi(&[0, 3]), 0, EC::i()).unwrap();
        let g = VectorSeries::zero(2, 5);
        assert!(matches!(
            compute_w(3, &sys.nonlinear, &phi, &g),
            Err(Error::IncompletePrefix(_))
        ));
    }

    #[test]
    fn hand_conjugacy_k0() {
        // x2^2 term: divisor -i, Phi coefficient i, G = 0, exact conjugacy
        let sys = quadratic_example(0);
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        assert_eq!(res.phi.comps[0].coeff(&key(&[0, 2], 0)), Some(&EC::i()));
        assert_eq!(res.phi.comps[0].num_terms(), 1);
        assert!(res.phi.comps[1].is_zero());
        assert!(res.g.is_zero());
        // higher corrections all vanish: checked via the zero residual
        let r = residual_check(&sys, &res, 5).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn hand_conjugacy_k_minus_one() {
        // e^{-it} x2^2: divisor -2i, Phi coefficient i/2
        let sys = quadratic_example(-1);
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        assert_eq!(
            res.phi.comps[0].coeff(&key(&[0, 2], -1)),
            Some(&EC::imaginary(1, 2))
        );
        assert!(res.g.is_zero());
        assert!(residual_check(&sys, &res, 5).unwrap().is_zero());
    }

    #[test]
    fn hand_resonant_k_plus_one() {
        // e^{it} x2^2: divisor 0, term retained verbatim in G
        let sys = quadratic_example(1);
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        assert!(res.phi.is_zero());
        assert_eq!(res.g.comps[0].coeff(&key(&[0, 2], 1)), Some(&EC::integer(1)));
        assert_eq!(res.g.comps[0].num_terms(), 1);
        assert!(residual_check(&sys, &res, 5).unwrap().is_zero());
    }

    #[test]
    fn zero_system() {
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let sys =
            PeriodicSystem::with_standard_period(lp, VectorSeries::zero(2, 4)).unwrap();
        let res = normalize(&sys, 4, &NormalizeOptions::default()).unwrap();
        assert!(res.phi.is_zero() && res.g.is_zero());
    }

    #[test]
    fn already_resonant_system() {
        // x1' = i x1 + x1 x2, x2' = 0: divisor (i+0)-i = 0
        let lp = LinearPart::diagonal(vec![EC::i(), EC::zero()]);
        let mut f = VectorSeries::zero(2, 4);
        f.comps[0].add_term(mi(&[1, 1]), 0, EC::integer(1)).unwrap();
        let sys = PeriodicSystem::with_standard_period(lp, f.clone()).unwrap();
        let res = normalize(&sys, 4, &NormalizeOptions::default()).unwrap();
        assert!(res.phi.is_zero());
        assert_eq!(res.g, f);
    }

    #[test]
    fn idempotence_on_normal_forms() {
        let sys = quadratic_example(1); // fully resonant output
        let res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        let nf = PeriodicSystem::new(sys.linear.clone(), res.g.clone(), sys.period).unwrap();
        let again = normalize(&nf, 5, &NormalizeOptions::default()).unwrap();
        assert!(again.phi.is_zero());
        assert_eq!(again.g, res.g);
    }

    #[test]
    fn perturbed_phi_breaks_residual() {
        let sys = quadratic_example(0);
        let mut res = normalize(&sys, 5, &NormalizeOptions::default()).unwrap();
        res.phi.comps[1]
            .add_term(mi(&[2, 0]), 0, EC::integer(1))
            .unwrap();
        let r = residual_check(&sys, &res, 5).unwrap();
        assert!(!r.is_zero());
        assert_eq!(r.series.min_degree(), Some(2));
    }

    #[test]
    fn undistinguished_choice_detected() {
        // Phi = 0, G = F is the identity conjugacy: the defect identity is
        // satisfied, so only the distinguishedness scan can flag the
        // nonresonant term kept in G.
        let sys = quadratic_example(0);
        let res = NormalizationResult {
            phi: VectorSeries::zero(2, 5),
            g: sys.nonlinear.clone(),
            degree: 5,
            near_resonances: vec![],
        };
        let viol = distinguished_violations(&res, &sys.linear, None).unwrap();
        assert_eq!(viol.len(), 1);
        assert!(residual_check(&sys, &res, 5).unwrap().is_zero());
    }

    #[test]
    fn invert_examples() {
        let n2 = VectorSeries::<EC>::zero(2, 4);
        assert!(invert_normalization(&n2, 4).unwrap().is_zero());

        let mut phi = VectorSeries::zero(2, 4);
        phi.comps[0].add_term(mi(&[0, 2]), 0, EC::i()).unwrap();
        let psi = invert_normalization(&phi, 4).unwrap();
        assert_eq!(psi.comps[0].coeff(&key(&[0, 2], 0)), Some(&EC::imaginary(-1, 1)));
        assert_eq!(psi.comps[0].num_terms(), 1);
        assert!(psi.comps[1].is_zero());
    }

    #[test]
    fn rescale_maps_sigma_and_keeps_lambda() {
        let lp = LinearPart::new(vec![EC::zero(), EC::zero()], vec![EC::integer(1)]).unwrap();
        let c = BigRational::new(BigInt::one(), BigInt::from(10));
        let (scaled, _) = rescale_subdiagonal(&lp, &c).unwrap();
        assert_eq!(scaled.sigma[0], EC::rational(1, 10));
        assert_eq!(scaled.lambda, lp.lambda);

        // c = 1 is the identity
        let (same, _) = rescale_subdiagonal(&lp, &BigRational::one()).unwrap();
        assert_eq!(same, lp);

        // group property: c1 then c2 equals c1*c2
        let c1 = BigRational::new(BigInt::from(2), BigInt::from(3));
        let c2 = BigRational::new(BigInt::from(5), BigInt::from(7));
        let (step, _) = rescale_subdiagonal(&lp, &c1).unwrap();
        let (twice, _) = rescale_subdiagonal(&step, &c2).unwrap();
        let (once, _) = rescale_subdiagonal(&lp, &(c1 * c2)).unwrap();
        assert_eq!(twice, once);

        assert!(matches!(
            rescale_subdiagonal(&lp, &BigRational::zero()),
            Err(Error::InvalidScale)
        ));
    }

    #[test]
    fn bidiagonal_recursion_with_coupling() {
        // sigma != 0 exercise: residual must still vanish identically.
        let lp = LinearPart::new(
            vec![EC::i(), EC::i()],
            vec![EC::rational(1, 10)],
        )
        .unwrap();
        let mut f = VectorSeries::zero(2, 4);
        f.comps[0].add_term(mi(&[0, 2]), 0, EC::integer(1)).unwrap();
        f.comps[1].add_term(mi(&[2, 0]), -1, EC::imaginary(1, 3)).unwrap();
        f.comps[1].add_term(mi(&[1, 1]), 2, EC::rational(1, 2)).unwrap();
        let sys = PeriodicSystem::with_standard_period(lp, f).unwrap();
        let res = normalize(&sys, 4, &NormalizeOptions::default()).unwrap();
        assert!(residual_check(&sys, &res, 4).unwrap().is_zero());
        assert!(distinguished_violations(&res, &sys.linear, None)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn split_requires_diagonal() {
        let lp = LinearPart::new(vec![EC::i(), EC::i()], vec![EC::integer(1)]).unwrap();
        let w = VectorSeries::<EC>::zero(2, 3);
        let opts = NormalizeOptions {
            strategy: SolveStrategy::BasisSplit,
            tol: None,
        };
        assert!(matches!(
            solve_degree(2, &w, &lp, &opts),
            Err(Error::SolverAssertion(_))
        ));
    }
}
