//! Numerical front end: locate a periodic orbit of an autonomous polynomial
//! field, compute its monodromy and characteristic exponents, and reduce the
//! neighbourhood dynamics to a periodic system with constant diagonal linear
//! part (approx scalars), ready for the normal-form pipeline.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::{ApproxComplex, Coeff, ExactComplex};
use crate::series::{MultiIndex, Series, VectorSeries};
use crate::system::{LinearPart, PeriodicSystem};

/// One monomial term of an autonomous polynomial vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTerm {
    pub comp: usize,
    pub exps: MultiIndex,
    pub coeff: f64,
}

/// Autonomous polynomial field x' = f(x) over the reals.
#[derive(Debug, Clone, PartialEq)]
pub struct AutonomousField {
    pub n: usize,
    pub terms: Vec<FieldTerm>,
}

impl AutonomousField {
    pub fn new(n: usize, terms: Vec<FieldTerm>) -> Result<Self> {
        for t in &terms {
            if t.comp >= n || t.exps.len() != n {
                return Err(Error::InvariantViolation(format!(
                    "field term for component {} with {} exponents in dimension {n}",
                    t.comp + 1,
                    t.exps.len()
                )));
            }
        }
        Ok(AutonomousField { n, terms })
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for t in &self.terms {
            let mut v = t.coeff;
            for (j, &e) in t.exps.0.iter().enumerate() {
                v *= x[j].powi(e as i32);
            }
            out[t.comp] += v;
        }
        out
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for t in &self.terms {
            for (m, &e) in t.exps.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut v = t.coeff * e as f64;
                for (j, &ej) in t.exps.0.iter().enumerate() {
                    let p = if j == m { ej - 1 } else { ej };
                    v *= x[j].powi(p as i32);
                }
                out[(t.comp, m)] += v;
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exps.degree()).max().unwrap_or(0)
    }
}

/// Integration tolerances for the adaptive Runge-Kutta stepper.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates y' = f(t, y) from t0 to t1, returning the final state.
pub fn integrate_to<F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: DVector<f64>,
    opt: IntegratorOptions,
) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut states = integrate_path(f, t0, &[t1], y0, opt)?;
    Ok(states.pop().unwrap())
}

/// Integrates y' = f(t, y) from t0, returning the state at each requested
/// time (strictly increasing, all >= t0).
pub fn integrate_path<F>(
    f: &F,
    t0: f64,
    times: &[f64],
    y0: DVector<f64>,
    opt: IntegratorOptions,
) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut y = y0;
    let mut h = ((times.last().copied().unwrap_or(t0) - t0) / 100.0).max(1e-8);
    let mut steps = 0usize;
    for &target in times {
        if target < t - 1e-14 {
            return Err(Error::InvariantViolation(
                "integration targets must be increasing".into(),
            ));
        }
        while t < target - 1e-13 {
            steps += 1;
            if steps > 2_000_000 {
                return Err(Error::IntegrationFailure(
                    "step budget exhausted".into(),
                ));
            }
            let hs = h.min(target - t);
            let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    ys += kj * (hs * DP_A[s][j]);
                }
                k.push(f(t + DP_C[s] * hs, &ys));
            }
            // the 5th-order weights are row 7 of the tableau (FSAL, b7 = 0)
            let mut ynew = y.clone();
            for (j, kj) in k.iter().take(6).enumerate() {
                ynew += kj * (hs * DP_A[6][j]);
            }
            let mut err: f64 = 0.0;
            for i in 0..y.len() {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += DP_E[j] * kj[i];
                }
                e *= hs;
                let sc = opt.atol + opt.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / sc).abs());
            }
            if !ynew.iter().all(|v| v.is_finite()) || ynew.norm() > 1e12 {
                return Err(Error::IntegrationFailure(
                    "solution left the admissible region".into(),
                ));
            }
            if err <= 1.0 {
                t += hs;
                y = ynew;
            }
            let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h = (hs * fac).max(1e-12);
        }
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

/// A refined periodic orbit: anchor point, period and residual return-map
/// defect.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub x0: DVector<f64>,
    pub period: f64,
    pub defect: f64,
}

fn flow_and_monodromy_rhs(field: &AutonomousField) -> impl Fn(f64, &DVector<f64>) -> DVector<f64> + '_ {
    let n = field.n;
    move |_t, state: &DVector<f64>| {
        let x = DVector::from_fn(n, |i, _| state[i]);
        let fx = field.eval(&x);
        let jx = field.jacobian(&x);
        let mut d = DVector::zeros(n + n * n);
        for i in 0..n {
            d[i] = fx[i];
        }
        // columns of the fundamental matrix, stored column-major after x
        for c in 0..n {
            for r in 0..n {
                let mut v = 0.0;
                for m in 0..n {
                    v += jx[(r, m)] * state[n + c * n + m];
                }
                d[n + c * n + r] = v;
            }
        }
        d
    }
}

fn flow_with_variational(
    field: &AutonomousField,
    x0: &DVector<f64>,
    times: &[f64],
    opt: IntegratorOptions,
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    let n = field.n;
    let mut y0 = DVector::zeros(n + n * n);
    for i in 0..n {
        y0[i] = x0[i];
    }
    for c in 0..n {
        y0[n + c * n + c] = 1.0;
    }
    let rhs = flow_and_monodromy_rhs(field);
    let states = integrate_path(&rhs, 0.0, times, y0, opt)?;
    Ok(states
        .into_iter()
        .map(|s| {
            let x = DVector::from_fn(n, |i, _| s[i]);
            let m = DMatrix::from_fn(n, n, |r, c| s[n + c * n + r]);
            (x, m)
        })
        .collect())
}

/// Newton refinement of a seed (point, period) to a periodic orbit, with a
/// phase condition anchored at the seed.
pub fn refine_orbit(
    field: &AutonomousField,
    seed: &DVector<f64>,
    period_guess: f64,
    tol: f64,
    opt: IntegratorOptions,
) -> Result<Orbit> {
    let n = field.n;
    if seed.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: seed.len(),
        });
    }
    if period_guess <= 0.0 {
        return Err(Error::OrbitNotFound("nonpositive period guess".into()));
    }
    let anchor = field.eval(seed);
    if anchor.norm() < 1e-14 {
        return Err(Error::OrbitNotFound("seed is an equilibrium".into()));
    }
    // integrate well below the requested orbit tolerance so the Newton
    // iteration is not driven by quadrature noise
    let opt = IntegratorOptions {
        rtol: opt.rtol.min(tol * 1e-2).max(1e-14),
        atol: opt.atol.min(tol * 1e-3).max(1e-15),
    };
    let mut x0 = seed.clone();
    let mut period = period_guess;
    // stage 1: refine the period alone, holding the point fixed; this keeps
    // the full Newton iteration from drifting toward an equilibrium when the
    // return map is degenerate (e.g. a family of orbits)
    for _ in 0..20 {
        let x_t = integrate_to(
            &|_t: f64, y: &DVector<f64>| field.eval(y),
            0.0,
            period,
            x0.clone(),
            opt,
        )
        .map_err(|e| Error::OrbitNotFound(format!("integration failed: {e}")))?;
        let g = &x_t - &x0;
        let f_end = field.eval(&x_t);
        let denom = f_end.norm_squared();
        if denom < 1e-20 {
            break;
        }
        let dt = -g.dot(&f_end) / denom;
        if !dt.is_finite() {
            break;
        }
        period += dt;
        if period <= 0.1 * period_guess || period >= 10.0 * period_guess {
            period = period_guess;
            break;
        }
        if dt.abs() < 1e-12 {
            break;
        }
    }
    for _ in 0..60 {
        let states = flow_with_variational(field, &x0, &[period], opt)
            .map_err(|e| Error::OrbitNotFound(format!("integration failed: {e}")))?;
        let (x_t, m) = &states[0];
        let g = x_t - &x0;
        let phase = anchor.dot(&(&x0 - seed));
        let defect = g.norm() + phase.abs();
        if defect < tol {
            if field.eval(&x0).norm() < 1e-6 {
                return Err(Error::OrbitNotFound("converged to an equilibrium".into()));
            }
            return Ok(Orbit {
                x0,
                period,
                defect,
            });
        }
        // bordered Newton system: [M - I, f(x_T); f(seed)^T, 0]
        let f_end = field.eval(x_t);
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        for r in 0..n {
            for c in 0..n {
                jac[(r, c)] = m[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            jac[(r, n)] = f_end[r];
            jac[(n, r)] = anchor[r];
        }
        let mut rhs = DVector::zeros(n + 1);
        for r in 0..n {
            rhs[r] = -g[r];
        }
        rhs[n] = -phase;
        let svd = jac.svd(true, true);
        let step = svd
            .solve(&rhs, 1e-12)
            .map_err(|m| Error::OrbitNotFound(m.to_string()))?;
        if !step.iter().all(|v| v.is_finite()) || step.norm() > 1e6 {
            return Err(Error::OrbitNotFound("Newton step diverged".into()));
        }
        for i in 0..n {
            x0[i] += step[i];
        }
        period += step[n];
        if period <= 0.0 || period > 1e4 * period_guess {
            return Err(Error::OrbitNotFound("period iterate left range".into()));
        }
    }
    Err(Error::OrbitNotFound(
        "no convergence within the iteration budget".into(),
    ))
}

/// Integrates the variational equation along the orbit over one period.
pub fn monodromy(
    field: &AutonomousField,
    orbit: &Orbit,
    opt: IntegratorOptions,
) -> Result<DMatrix<f64>> {
    let states = flow_with_variational(field, &orbit.x0, &[orbit.period], opt)?;
    Ok(states[0].1.clone())
}

/// Spectral data of the monodromy matrix: multipliers, principal-branch
/// exponents, and the diagonalizing basis.
#[derive(Debug, Clone)]
pub struct ExponentData {
    pub multipliers: Vec<Complex64>,
    pub exponents: Vec<Complex64>,
    pub v: DMatrix<Complex64>,
    pub v_inv: DMatrix<Complex64>,
}

fn null_space(a: &DMatrix<Complex64>, tol: f64) -> Vec<DVector<Complex64>> {
    let (rows, cols) = a.shape();
    let mut m = a.clone();
    let mut pivot_cols = Vec::new();
    let mut row = 0usize;
    for col in 0..cols {
        let (best, best_val) = (row..rows)
            .map(|r| (r, m[(r, col)].norm()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tol {
            continue;
        }
        m.swap_rows(row, best);
        let p = m[(row, col)];
        for c in col..cols {
            m[(row, c)] /= p;
        }
        for r in 0..rows {
            if r != row {
                let f = m[(r, col)];
                if f.norm() > 0.0 {
                    for c in col..cols {
                        let v = m[(row, c)];
                        m[(r, c)] -= f * v;
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = DVector::from_element(cols, Complex64::new(0.0, 0.0));
        v[free] = Complex64::new(1.0, 0.0);
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -m[(r, free)];
        }
        // deterministic scaling: largest entry mapped to 1
        let (mut bi, mut bn) = (0usize, 0.0f64);
        for (i, e) in v.iter().enumerate() {
            if e.norm() > bn {
                bn = e.norm();
                bi = i;
            }
        }
        let s = v[bi];
        basis.push(v.map(|e| e / s));
    }
    basis
}

/// Eigen-decomposition of a real matrix over the complex numbers, with a
/// deterministic eigenvalue order (descending real part, then ascending
/// imaginary part).
pub fn diagonalize_real(
    m: &DMatrix<f64>,
) -> Result<(Vec<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let mut eigs: Vec<Complex64> = m.clone().complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let scale = m.norm().max(1.0);
    let mc = m.map(|v| Complex64::new(v, 0.0));
    let mut cols: Vec<DVector<Complex64>> = Vec::new();
    let mut used_eigs: Vec<Complex64> = Vec::new();
    let mut i = 0usize;
    while i < eigs.len() {
        let mut j = i + 1;
        while j < eigs.len() && (eigs[j] - eigs[i]).norm() < 1e-8 * scale {
            j += 1;
        }
        let mult = j - i;
        let lam = eigs[i];
        let shifted = &mc - DMatrix::from_diagonal_element(n, n, lam);
        let basis = null_space(&shifted, 1e-10 * scale);
        if basis.len() < mult {
            return Err(Error::NonDiagonalizable("defective eigenvalue cluster".into()));
        }
        for b in basis.into_iter().take(mult) {
            cols.push(b);
            used_eigs.push(lam);
        }
        i = j;
    }
    let v = DMatrix::from_columns(&cols);
    let v_inv = v
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NonDiagonalizable("singular eigenvector matrix".into()))?;
    Ok((used_eigs, v, v_inv))
}

/// Monodromy matrix together with multipliers and principal-branch
/// characteristic exponents.
pub fn monodromy_and_exponents(
    field: &AutonomousField,
    orbit: &Orbit,
    opt: IntegratorOptions,
) -> Result<(DMatrix<f64>, ExponentData)> {
    let m = monodromy(field, orbit, opt)?;
    let (multipliers, v, v_inv) = diagonalize_real(&m)?;
    let exponents = multipliers
        .iter()
        .map(|mu| mu.ln() / orbit.period)
        .collect();
    Ok((
        m,
        ExponentData {
            multipliers,
            exponents,
            v,
            v_inv,
        },
    ))
}

/// Options for the full reduction pipeline.
#[derive(Debug, Clone, Copy)]
pub struct FloquetOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Taylor truncation degree of the reduced nonlinearity.
    pub degree: u32,
    /// Initial Fourier band for Q and the reduced coefficients.
    pub band: usize,
    /// Band growth stops here even if the fit target is missed.
    pub band_cap: usize,
    /// Target sup-norm defect of the Fourier fit of Q.
    pub q_target: f64,
    /// Fitted coefficients below this magnitude are dropped.
    pub coeff_tol: f64,
    /// Orbit refinement tolerance.
    pub orbit_tol: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions {
            rtol: 1e-10,
            atol: 1e-12,
            degree: 6,
            band: 16,
            band_cap: 64,
            q_target: 1e-8,
            coeff_tol: 1e-10,
            orbit_tol: 1e-11,
        }
    }
}

impl FloquetOptions {
    fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions {
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

/// Result of the reduction: orbit, spectral data, periodic transform Q (as
/// Fourier modes), and the reduced system in diagonalized coordinates.
#[derive(Debug, Clone)]
pub struct FloquetReduction {
    pub orbit: Orbit,
    pub monodromy: DMatrix<f64>,
    pub multipliers: Vec<Complex64>,
    pub exponents: Vec<Complex64>,
    pub a_matrix: DMatrix<Complex64>,
    pub v: DMatrix<Complex64>,
    /// Fourier modes of Q(t), indices -band..=band.
    pub q_modes: Vec<DMatrix<Complex64>>,
    /// Fourier modes of the orbit, same indexing as `q_modes`.
    pub orbit_modes: Vec<DVector<Complex64>>,
    pub band: usize,
    pub q_defect: f64,
    pub worst_condition: f64,
    pub warnings: Vec<String>,
    pub reduced: PeriodicSystem<ApproxComplex>,
}

impl FloquetReduction {
    pub fn orbit_at(&self, t: f64) -> DVector<f64> {
        let b = self.band as i64;
        let theta = TAU * t / self.orbit.period;
        let n = self.orbit.x0.len();
        let mut out = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for (idx, mode) in self.orbit_modes.iter().enumerate() {
            let k = idx as i64 - b;
            let u = Complex64::new(0.0, k as f64 * theta).exp();
            out += mode * u;
        }
        out.map(|z| z.re)
    }

    pub fn q_at(&self, t: f64) -> DMatrix<Complex64> {
        let b = self.band as i64;
        let theta = TAU * t / self.orbit.period;
        let n = self.orbit.x0.len();
        let mut out = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (idx, mode) in self.q_modes.iter().enumerate() {
            let k = idx as i64 - b;
            let u = Complex64::new(0.0, k as f64 * theta).exp();
            out += mode * u;
        }
        out
    }

    /// Combined transform R(t) = Q(t) V mapping reduced coordinates to the
    /// orbit frame.
    pub fn r_at(&self, t: f64) -> DMatrix<Complex64> {
        self.q_at(t) * &self.v
    }
}

fn fourier_fit_scalar(values: &[Complex64], band: usize) -> Vec<Complex64> {
    let m = values.len();
    let mut modes = Vec::with_capacity(2 * band + 1);
    for k in -(band as i64)..=(band as i64) {
        let mut c = Complex64::new(0.0, 0.0);
        for (i, v) in values.iter().enumerate() {
            let theta = -TAU * (k as f64) * (i as f64) / (m as f64);
            c += v * Complex64::new(0.0, theta).exp();
        }
        modes.push(c / m as f64);
    }
    modes
}

fn fourier_eval(modes: &[Complex64], band: usize, theta: f64) -> Complex64 {
    let mut out = Complex64::new(0.0, 0.0);
    for (idx, c) in modes.iter().enumerate() {
        let k = idx as i64 - band as i64;
        out += c * Complex64::new(0.0, k as f64 * theta).exp();
    }
    out
}

/// Floquet reduction around a refined orbit: constant matrix A, periodic
/// transform Q, and the reduced system in coordinates diagonalizing A, with
/// time rescaled so the period is 2*pi.
pub fn floquet_transform(
    field: &AutonomousField,
    orbit: &Orbit,
    opt: FloquetOptions,
) -> Result<FloquetReduction> {
    let n = field.n;
    let t_period = orbit.period;
    // the Q fit target is tighter than the user-facing trajectory tolerance,
    // so sample the fundamental matrix with extra headroom
    let tight = IntegratorOptions {
        rtol: (opt.rtol * 1e-2).max(1e-13),
        atol: (opt.atol * 1e-2).max(1e-15),
    };
    let (mono, eig) = monodromy_and_exponents(field, orbit, tight)?;
    let lam_diag = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            eig.exponents[r]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let a_matrix = &eig.v * lam_diag * &eig.v_inv;

    // sample the flow and fundamental matrix on a fine grid; even indices are
    // fit nodes, odd indices check the fit.
    let m_nodes = 256usize.max(4 * opt.band_cap.next_power_of_two());
    let fine = 2 * m_nodes;
    let times: Vec<f64> = (1..=fine).map(|i| t_period * i as f64 / fine as f64).collect();
    let mut path = flow_with_variational(field, &orbit.x0, &times, tight)?;
    let mut samples = Vec::with_capacity(fine + 1);
    samples.push((orbit.x0.clone(), DMatrix::identity(n, n)));
    samples.append(&mut path);

    // Q(t_i) = X(t_i) exp(-A t_i), via the diagonalization of A
    let exp_neg_a = |t: f64| -> DMatrix<Complex64> {
        let d = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                (-eig.exponents[r] * t).exp()
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        &eig.v * d * &eig.v_inv
    };
    let q_exact: Vec<DMatrix<Complex64>> = samples
        .iter()
        .enumerate()
        .map(|(i, (_, x))| {
            let t = t_period * i as f64 / fine as f64;
            x.map(|v| Complex64::new(v, 0.0)) * exp_neg_a(t)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut band = opt.band.max(1);
    let mut q_modes_by_entry: Vec<Vec<Complex64>> = Vec::new();
    let mut q_defect: f64;
    loop {
        q_modes_by_entry.clear();
        for r in 0..n {
            for c in 0..n {
                let vals: Vec<Complex64> =
                    (0..m_nodes).map(|i| q_exact[2 * i][(r, c)]).collect();
                q_modes_by_entry.push(fourier_fit_scalar(&vals, band));
            }
        }
        q_defect = (0..m_nodes)
            .map(|i| {
                let theta = TAU * (2 * i + 1) as f64 / fine as f64;
                let mut worst: f64 = 0.0;
                for r in 0..n {
                    for c in 0..n {
                        let fit =
                            fourier_eval(&q_modes_by_entry[r * n + c], band, theta);
                        worst = worst.max((fit - q_exact[2 * i + 1][(r, c)]).norm());
                    }
                }
                worst
            })
            .fold(0.0, f64::max);
        if q_defect <= opt.q_target {
            break;
        }
        if 2 * band > opt.band_cap || 4 * band >= m_nodes {
            warnings.push(format!(
                "Q fit residual {q_defect:.3e} above target at band cap {band}"
            ));
            break;
        }
        band *= 2;
    }
    let q_modes: Vec<DMatrix<Complex64>> = (0..2 * band + 1)
        .map(|idx| DMatrix::from_fn(n, n, |r, c| q_modes_by_entry[r * n + c][idx]))
        .collect();

    let orbit_modes: Vec<DVector<Complex64>> = {
        let per_comp: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let vals: Vec<Complex64> = (0..m_nodes)
                    .map(|i| Complex64::new(samples[2 * i].0[j], 0.0))
                    .collect();
                fourier_fit_scalar(&vals, band)
            })
            .collect();
        (0..2 * band + 1)
            .map(|idx| DVector::from_fn(n, |j, _| per_comp[j][idx]))
            .collect()
    };

    // condition of the transform at the fit nodes
    let mut worst_condition: f64 = 0.0;
    let mut r_nodes = Vec::with_capacity(m_nodes);
    let mut r_inv_nodes = Vec::with_capacity(m_nodes);
    for i in 0..m_nodes {
        let r_mat = &q_exact[2 * i] * &eig.v;
        let sv = r_mat.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if smin <= 0.0 {
            return Err(Error::InvariantViolation(
                "singular transform Q(t)V at a sample".into(),
            ));
        }
        worst_condition = worst_condition.max(smax / smin);
        let r_inv = r_mat
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::NonDiagonalizable("singular eigenvector matrix".into()))?;
        r_nodes.push(r_mat);
        r_inv_nodes.push(r_inv);
    }
    if worst_condition > 1e6 {
        warnings.push(format!(
            "ill-conditioned transform: worst condition number {worst_condition:.3e}"
        ));
    }

    // Taylor-expand the pulled-back nonlinearity at each fit node, then
    // Fourier-fit every Taylor coefficient.
    let degree = opt.degree.max(2);
    let mut coeff_samples: BTreeMap<(usize, Vec<u32>), Vec<Complex64>> = BTreeMap::new();
    for i in 0..m_nodes {
        let phi = &samples[2 * i].0;
        let r_mat = &r_nodes[i];
        let r_inv = &r_inv_nodes[i];
        // substitution series x_j = phi_j + sum_m R_{jm} z_m
        let subst: Vec<Series<ApproxComplex>> = (0..n)
            .map(|j| {
                let mut s = Series::zero(n, degree);
                s.add_term(
                    MultiIndex::zeros(n),
                    0,
                    ApproxComplex::new(phi[j], 0.0),
                )
                .unwrap();
                for m in 0..n {
                    let c = r_mat[(j, m)];
                    if c.norm() > 0.0 {
                        s.add_term(
                            MultiIndex::unit(n, m),
                            0,
                            ApproxComplex(c),
                        )
                        .unwrap();
                    }
                }
                s
            })
            .collect();
        let mut g: Vec<Series<ApproxComplex>> =
            (0..n).map(|_| Series::zero(n, degree)).collect();
        for term in &field.terms {
            let mut prod = Series::monomial(
                n,
                degree,
                MultiIndex::zeros(n),
                0,
                ApproxComplex::new(term.coeff, 0.0),
            )?;
            for (j, &e) in term.exps.0.iter().enumerate() {
                for _ in 0..e {
                    prod = prod.mul(&subst[j])?;
                }
            }
            g[term.comp] = g[term.comp].add(&prod)?;
        }
        // drop the affine part (it equals f(phi) + Df(phi) R z exactly) and
        // apply R^{-1}
        for s in 0..n {
            let mut h_s = Series::zero(n, degree);
            for m in 0..n {
                let f = ApproxComplex(r_inv[(s, m)]);
                if f.is_zero() {
                    continue;
                }
                h_s = h_s.add(&g[m].scale(&f))?;
            }
            for (key, c) in h_s.iter() {
                if key.degree() < 2 {
                    continue;
                }
                let entry = coeff_samples
                    .entry((s, key.l.0.clone()))
                    .or_insert_with(|| vec![Complex64::new(0.0, 0.0); m_nodes]);
                entry[i] = c.to_c64();
            }
        }
    }

    // time rescale tau = (2 pi / T) t: coefficients and exponents scale by
    // T / (2 pi); integer Fourier modes are preserved.
    let scale = t_period / TAU;
    let mut nonlinear = VectorSeries::zero(n, degree);
    for ((comp, l), vals) in &coeff_samples {
        let modes = fourier_fit_scalar(vals, band);
        for (idx, c) in modes.iter().enumerate() {
            let k = idx as i64 - band as i64;
            let scaled = c * scale;
            if scaled.norm() > opt.coeff_tol {
                nonlinear.comps[*comp].add_term(
                    MultiIndex(l.clone()),
                    k,
                    ApproxComplex(scaled),
                )?;
            }
        }
    }
    let lambda: Vec<ApproxComplex> = eig
        .exponents
        .iter()
        .map(|mu| ApproxComplex(mu * scale))
        .collect();
    let linear = LinearPart::diagonal(lambda);
    let reduced = PeriodicSystem::new(linear, nonlinear, t_period)?;

    Ok(FloquetReduction {
        orbit: orbit.clone(),
        monodromy: mono,
        multipliers: eig.multipliers,
        exponents: eig.exponents,
        a_matrix,
        v: eig.v,
        q_modes,
        orbit_modes,
        band,
        q_defect,
        worst_condition,
        warnings,
        reduced,
    })
}

/// Full pipeline: refine the orbit from a seed, then reduce.
pub fn reduce(
    field: &AutonomousField,
    seed: &DVector<f64>,
    period_guess: f64,
    opt: FloquetOptions,
) -> Result<FloquetReduction> {
    let orbit = refine_orbit(field, seed, period_guess, opt.orbit_tol, opt.integrator())?;
    floquet_transform(field, &orbit, opt)
}

fn snap_rational(x: f64, snap_tol: f64, max_denom: i64) -> Option<(i64, i64)> {
    let mut best: Option<(i64, i64, f64)> = None;
    for q in 1..=max_denom {
        let p = (x * q as f64).round();
        if p.abs() > 1e15 {
            continue;
        }
        let err = (x - p / q as f64).abs();
        if best.map_or(true, |b| err < b.2) {
            best = Some((p as i64, q, err));
        }
    }
    best.and_then(|(p, q, err)| if err < snap_tol { Some((p, q)) } else { None })
}

fn snap_coeff(
    c: &ApproxComplex,
    snap_tol: f64,
    label: &str,
    log: &mut Vec<String>,
) -> Result<ExactComplex> {
    let (re, im) = (c.0.re, c.0.im);
    let (rp, rq) = snap_rational(re, snap_tol, 64).ok_or_else(|| {
        Error::RationalizeFailure(format!("{label}: no rational within tolerance of {re}"))
    })?;
    let (ip, iq) = snap_rational(im, snap_tol, 64).ok_or_else(|| {
        Error::RationalizeFailure(format!("{label}: no rational within tolerance of {im}"))
    })?;
    log.push(format!("{label}: {c} -> {rp}/{rq} + ({ip}/{iq})i"));
    Ok(ExactComplex::from_parts(rp, rq, ip, iq))
}

/// Snaps every coefficient of an approx system to a nearby rational with
/// denominator at most 64, so the exact pipeline can consume it. Fails if any
/// coefficient has no rational within `snap_tol`; every snap is logged.
pub fn rationalize(
    sys: &PeriodicSystem<ApproxComplex>,
    snap_tol: f64,
) -> Result<(PeriodicSystem<ExactComplex>, Vec<String>)> {
    let mut log = Vec::new();
    let lambda: Vec<ExactComplex> = sys
        .linear
        .lambda
        .iter()
        .enumerate()
        .map(|(j, c)| snap_coeff(c, snap_tol, &format!("lambda[{}]", j + 1), &mut log))
        .collect::<Result<_>>()?;
    let sigma: Vec<ExactComplex> = sys
        .linear
        .sigma
        .iter()
        .enumerate()
        .map(|(j, c)| snap_coeff(c, snap_tol, &format!("sigma[{}]", j + 2), &mut log))
        .collect::<Result<_>>()?;
    let n = sys.dim();
    let mut nonlinear = VectorSeries::zero(n, sys.max_degree());
    for (comp, series) in sys.nonlinear.comps.iter().enumerate() {
        for (key, c) in series.iter() {
            let label = format!("term {} | {:?} | {}", comp + 1, key.l.0, key.k);
            let exact = snap_coeff(c, snap_tol, &label, &mut log)?;
            nonlinear.comps[comp].add_term(key.l.clone(), key.k, exact)?;
        }
    }
    let sys = PeriodicSystem::new(LinearPart::new(lambda, sigma)?, nonlinear, sys.period)?;
    Ok((sys, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn limit_cycle_field() -> AutonomousField {
        // x' = x - y - x(x^2+y^2), y' = x + y - y(x^2+y^2); unit circle with
        // period 2*pi, radial exponent -2.
        AutonomousField::new(
            2,
            vec![
                FieldTerm { comp: 0, exps: MultiIndex(vec![1, 0]), coeff: 1.0 },
                FieldTerm { comp: 0, exps: MultiIndex(vec![0, 1]), coeff: -1.0 },
                FieldTerm { comp: 0, exps: MultiIndex(vec![3, 0]), coeff: -1.0 },
                FieldTerm { comp: 0, exps: MultiIndex(vec![1, 2]), coeff: -1.0 },
                FieldTerm { comp: 1, exps: MultiIndex(vec![1, 0]), coeff: 1.0 },
                FieldTerm { comp: 1, exps: MultiIndex(vec![0, 1]), coeff: 1.0 },
                FieldTerm { comp: 1, exps: MultiIndex(vec![2, 1]), coeff: -1.0 },
                FieldTerm { comp: 1, exps: MultiIndex(vec![0, 3]), coeff: -1.0 },
            ],
        )
        .unwrap()
    }

    fn rotation_field() -> AutonomousField {
        AutonomousField::new(
            2,
            vec![
                FieldTerm { comp: 0, exps: MultiIndex(vec![0, 1]), coeff: -1.0 },
                FieldTerm { comp: 1, exps: MultiIndex(vec![1, 0]), coeff: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn field_eval_and_jacobian() {
        let f = limit_cycle_field();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let fx = f.eval(&x);
        assert_relative_eq!(fx[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(fx[1], 1.0, epsilon = 1e-14);
        let j = f.jacobian(&x);
        // d/dx (x - y - x^3 - x y^2) = 1 - 3x^2 - y^2 = -2 at (1,0)
        assert_relative_eq!(j[(0, 0)], -2.0, epsilon = 1e-14);
        assert_relative_eq!(j[(0, 1)], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn integrator_matches_rotation() {
        let f = rotation_field();
        let rhs = |_t: f64, y: &DVector<f64>| f.eval(y);
        let y = integrate_to(
            &rhs,
            0.0,
            std::f64::consts::PI / 2.0,
            DVector::from_vec(vec![1.0, 0.0]),
            IntegratorOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(y[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn refine_limit_cycle_orbit() {
        let f = limit_cycle_field();
        let orbit = refine_orbit(
            &f,
            &DVector::from_vec(vec![1.1, 0.0]),
            6.2,
            1e-11,
            IntegratorOptions::default(),
        )
        .unwrap();
        assert!((orbit.period - TAU).abs() < 1e-8);
        assert!((orbit.x0.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn refine_rotation_orbit() {
        let f = rotation_field();
        let orbit = refine_orbit(
            &f,
            &DVector::from_vec(vec![1.0, 0.0]),
            6.2,
            1e-11,
            IntegratorOptions::default(),
        )
        .unwrap();
        assert!((orbit.period - TAU).abs() < 1e-8);
    }

    #[test]
    fn no_orbit_for_saddle() {
        let f = AutonomousField::new(
            2,
            vec![
                FieldTerm { comp: 0, exps: MultiIndex(vec![1, 0]), coeff: 1.0 },
                FieldTerm { comp: 1, exps: MultiIndex(vec![0, 1]), coeff: -1.0 },
            ],
        )
        .unwrap();
        let r = refine_orbit(
            &f,
            &DVector::from_vec(vec![1.0, 1.0]),
            3.0,
            1e-11,
            IntegratorOptions::default(),
        );
        assert!(matches!(r, Err(Error::OrbitNotFound(_))));
    }

    #[test]
    fn limit_cycle_spectrum() {
        let f = limit_cycle_field();
        let orbit = refine_orbit(
            &f,
            &DVector::from_vec(vec![1.1, 0.0]),
            6.2,
            1e-11,
            IntegratorOptions::default(),
        )
        .unwrap();
        let (m, eig) = monodromy_and_exponents(&f, &orbit, IntegratorOptions::default()).unwrap();
        // multipliers 1 and e^{-4 pi}
        assert!((eig.multipliers[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!((eig.multipliers[1].re - (-4.0 * TAU / 2.0).exp()).abs() < 1e-8);
        assert!((eig.exponents[0]).norm() < 1e-6);
        assert!((eig.exponents[1] - Complex64::new(-2.0, 0.0)).norm() < 1e-6);
        // branch consistency e^{mu T} = multiplier
        for (mu, mult) in eig.exponents.iter().zip(&eig.multipliers) {
            let back = (mu * orbit.period).exp();
            assert!((back - mult).norm() <= 1e-9 * mult.norm().max(1e-3));
        }
        assert_eq!(m.nrows(), 2);
    }

    #[test]
    fn rotation_monodromy_is_identity() {
        let f = rotation_field();
        let orbit = Orbit {
            x0: DVector::from_vec(vec![1.0, 0.0]),
            period: TAU,
            defect: 0.0,
        };
        let m = monodromy(&f, &orbit, IntegratorOptions::default()).unwrap();
        assert!((&m - DMatrix::identity(2, 2)).norm() < 1e-8);
    }

    #[test]
    fn diagonalization_gives_matrix_exponential() {
        // exp(t A) for the quarter-turn generator is the rotation matrix
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let (eigs, v, v_inv) = diagonalize_real(&a).unwrap();
        let t = std::f64::consts::PI / 2.0;
        let d = DMatrix::from_fn(2, 2, |r, c| {
            if r == c {
                (eigs[r] * t).exp()
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let e = &v * d * &v_inv;
        assert!((e[(0, 0)]).norm() < 1e-12);
        assert!((e[(1, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((e[(0, 1)] + Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn transform_limit_cycle() {
        let f = limit_cycle_field();
        let opt = FloquetOptions { degree: 4, ..FloquetOptions::default() };
        let red = reduce(&f, &DVector::from_vec(vec![1.1, 0.0]), 6.2, opt).unwrap();
        assert!(red.q_defect < 1e-8, "q defect {}", red.q_defect);
        // reduced eigenvalues after rescaling (T = 2 pi already): {0, -2}
        let l0 = red.reduced.linear.lambda[0].to_c64();
        let l1 = red.reduced.linear.lambda[1].to_c64();
        assert!(l0.norm() < 1e-6);
        assert!((l1 - Complex64::new(-2.0, 0.0)).norm() < 1e-6);
        // Q(0) is the identity up to the fit defect
        let q0 = red.q_at(0.0);
        assert!(
            (&q0 - DMatrix::from_diagonal_element(2, 2, Complex64::new(1.0, 0.0))).norm() < 1e-6
        );
        // periodicity of the fitted transform
        assert!((red.q_at(0.0) - red.q_at(red.orbit.period)).norm() < 1e-9);
        assert!(red.warnings.is_empty(), "{:?}", red.warnings);
    }

    #[test]
    fn reduced_system_round_trip() {
        let f = limit_cycle_field();
        let opt = FloquetOptions { degree: 6, ..FloquetOptions::default() };
        let red = reduce(&f, &DVector::from_vec(vec![1.1, 0.0]), 6.2, opt).unwrap();
        let t_period = red.orbit.period;
        let delta = DVector::from_vec(vec![0.01, 0.0]);
        let x_start = &red.orbit.x0 + &delta;

        // direct trajectory of the original field over one period
        let rhs = |_t: f64, y: &DVector<f64>| f.eval(y);
        let direct = integrate_to(
            &rhs,
            0.0,
            t_period,
            x_start.clone(),
            IntegratorOptions::default(),
        )
        .unwrap();

        // reduced trajectory in diagonal coordinates, mapped back
        let r0 = red.r_at(0.0);
        let r0_inv = r0.clone().lu().try_inverse().unwrap();
        let dc = delta.map(|v| Complex64::new(v, 0.0));
        let z0 = &r0_inv * dc;
        let lam: Vec<Complex64> = red
            .reduced
            .linear
            .lambda
            .iter()
            .map(|c| c.to_c64())
            .collect();
        let nl = red.reduced.nonlinear.clone();
        let reduced_rhs = move |tau: f64, y: &DVector<f64>| {
            let z: Vec<Complex64> =
                (0..2).map(|i| Complex64::new(y[2 * i], y[2 * i + 1])).collect();
            let u = Complex64::new(0.0, tau).exp();
            let h = nl.eval_c64(&z, u);
            let mut d = DVector::zeros(4);
            for i in 0..2 {
                let dz = lam[i] * z[i] + h[i];
                d[2 * i] = dz.re;
                d[2 * i + 1] = dz.im;
            }
            d
        };
        let y0 = DVector::from_vec(vec![z0[0].re, z0[0].im, z0[1].re, z0[1].im]);
        let y_end =
            integrate_to(&reduced_rhs, 0.0, TAU, y0, IntegratorOptions::default()).unwrap();
        let z_end = DVector::from_vec(vec![
            Complex64::new(y_end[0], y_end[1]),
            Complex64::new(y_end[2], y_end[3]),
        ]);
        let back = red.orbit_at(t_period)
            + (red.r_at(t_period) * z_end).map(|z| z.re);
        assert!(
            (&back - &direct).norm() < 1e-6,
            "round-trip error {}",
            (&back - &direct).norm()
        );
    }

    #[test]
    fn rationalize_snaps_and_rejects() {
        use crate::series::TermKey;
        let mut nl = VectorSeries::zero(2, 4);
        nl.comps[0]
            .add_term(
                MultiIndex(vec![0, 2]),
                -1,
                ApproxComplex::new(0.5 + 1e-9, -1.0 + 2e-10),
            )
            .unwrap();
        let sys = PeriodicSystem::with_standard_period(
            LinearPart::diagonal(vec![
                ApproxComplex::new(0.0, 1.0 - 1e-10),
                ApproxComplex::new(-2.0 + 1e-9, 0.0),
            ]),
            nl.clone(),
        )
        .unwrap();
        let (exact, log) = rationalize(&sys, 1e-6).unwrap();
        assert_eq!(exact.linear.lambda[0], ExactComplex::i());
        assert_eq!(exact.linear.lambda[1], ExactComplex::integer(-2));
        let key = TermKey::new(MultiIndex(vec![0, 2]), -1);
        let c = exact.nonlinear.comps[0].coeff(&key).unwrap();
        assert_eq!(
            *c,
            ExactComplex::from_parts(1, 2, -1, 1)
        );
        // two lambdas, one sigma, one nonlinear term
        assert_eq!(log.len(), 4);

        // a coefficient with no close rational of denominator <= 64 fails
        let mut bad = nl;
        bad.comps[1]
            .add_term(MultiIndex(vec![2, 0]), 0, ApproxComplex::new(0.123456789, 0.0))
            .unwrap();
        let sys2 = PeriodicSystem::with_standard_period(
            LinearPart::diagonal(vec![
                ApproxComplex::new(0.0, 1.0),
                ApproxComplex::new(-2.0, 0.0),
            ]),
            bad,
        )
        .unwrap();
        assert!(matches!(
            rationalize(&sys2, 1e-6),
            Err(Error::RationalizeFailure(_))
        ));
    }
}
