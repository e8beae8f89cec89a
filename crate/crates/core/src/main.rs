//! Command-line front end: normalization, resonance diagnostics, lattice
//! analysis, first-integral checks, Floquet reduction and trajectory
//! verification over the on-disk system format.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use pdnf::error::{Error, Result};
use pdnf::floquet::{self, FloquetOptions};
use pdnf::integrals::{independence_rank, is_first_integral, pushforward, resonant_function_check};
use pdnf::io::{emit, parse_system, SystemFile};
use pdnf::normalform::{
    distinguished_violations, normalize, residual_check, NormalizationResult, NormalizeOptions,
    SolveStrategy,
};
use pdnf::resonance::{divisor_constants, exponent_rationality, lattice_rank};
use pdnf::scalar::{Coeff, ScalarMode};
use pdnf::system::PeriodicSystem;
use pdnf::verify::{coefficient_growth, conjugacy_scaling_check, default_radii};

#[derive(Parser)]
#[command(name = "pdnf", version, about = "Distinguished normal forms of periodic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Approx,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the distinguished normalization of a system file.
    Normalize {
        input: PathBuf,
        /// Truncation degree (defaults to the file's `degree`).
        #[arg(long)]
        degree: Option<u32>,
        /// Expected scalar mode; mismatch with the file is an error.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Resonance tolerance (required in approx mode).
        #[arg(long)]
        tol: Option<f64>,
        /// Use the basis-split solver (diagonal linear part only).
        #[arg(long)]
        basis_split: bool,
        /// Output path for the transform series (default: INPUT.phi).
        #[arg(long)]
        phi_out: Option<PathBuf>,
        /// Output path for the normal form (default: INPUT.g).
        #[arg(long)]
        g_out: Option<PathBuf>,
    },
    /// Small-divisor scan and solvability-slope diagnostics.
    Resonance {
        input: PathBuf,
        /// Degree bound of the scan (defaults to the file's `degree`).
        #[arg(long)]
        degree: Option<u32>,
        /// Fourier mode bound of the scan.
        #[arg(long, default_value_t = 8)]
        fourier_cap: i64,
    },
    /// Resonance-lattice rank and generators.
    Lattice {
        input: PathBuf,
        /// Degree bound on the multi-indices (defaults to the file's `degree`).
        #[arg(long)]
        degree: Option<u32>,
        /// Fourier mode bound on the enumeration.
        #[arg(long, default_value_t = 8)]
        fourier_cap: i64,
    },
    /// Check the file's integral candidates against its system.
    CheckIntegral {
        input: PathBuf,
        #[arg(long)]
        degree: Option<u32>,
        /// Resonance tolerance for approx-mode structure checks.
        #[arg(long)]
        tol: Option<f64>,
        /// Transform file; when given, candidates are pushed forward and
        /// checked for resonant structure.
        #[arg(long)]
        phi: Option<PathBuf>,
        /// Seed for the independence-rank sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reduce an autonomous field near a periodic orbit to a periodic system.
    Floquet {
        input: PathBuf,
        /// Taylor truncation degree of the reduced nonlinearity.
        #[arg(long)]
        degree: Option<u32>,
        /// Fourier band cap for the periodic transform.
        #[arg(long, default_value_t = 64)]
        fourier_cap: usize,
        /// Orbit refinement tolerance.
        #[arg(long, default_value_t = 1e-11)]
        tol: f64,
        /// Snap reduced coefficients to small rationals (all or error).
        #[arg(long)]
        rationalize: bool,
        /// Snap tolerance used with --rationalize.
        #[arg(long, default_value_t = 1e-6)]
        snap_tol: f64,
        /// Output path for the reduced system (default: INPUT.reduced).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory-level scaling check of a computed normalization.
    Verify {
        input: PathBuf,
        /// Transform file emitted by `normalize`.
        #[arg(long)]
        phi: PathBuf,
        /// Normal-form file emitted by `normalize`.
        #[arg(long)]
        g: PathBuf,
        /// Integration span (defaults to one period, 2*pi).
        #[arg(long)]
        t_span: Option<f64>,
    },
}

fn mode_matches(file: &SystemFile, arg: Option<ModeArg>) -> Result<()> {
    if let Some(arg) = arg {
        let want = match arg {
            ModeArg::Exact => ScalarMode::Exact,
            ModeArg::Approx => ScalarMode::Approx,
        };
        if want != file.mode {
            return Err(Error::InvariantViolation(format!(
                "file is in {} mode, --mode {} requested",
                file.mode, want
            )));
        }
    }
    Ok(())
}

fn header(out: &mut String, command: &str, input: &Path) {
    let _ = writeln!(out, "command = {command}");
    let _ = writeln!(out, "input = {}", input.display());
}

fn require_exact(file: &SystemFile) -> Result<&PeriodicSystem<pdnf::scalar::ExactComplex>> {
    file.exact_system.as_ref().ok_or_else(|| {
        Error::InvariantViolation("this command needs an exact-mode system".into())
    })
}

struct NormalizeOutput<C: Coeff> {
    result: NormalizationResult<C>,
    residual_zero: bool,
    violations: usize,
}

fn run_normalize_generic<C: Coeff>(
    system: &PeriodicSystem<C>,
    degree: u32,
    opts: &NormalizeOptions,
) -> Result<NormalizeOutput<C>> {
    let result = normalize(system, degree, opts)?;
    let residual_zero = residual_check(system, &result, degree)?.is_zero();
    let violations = distinguished_violations(&result, &system.linear, opts.tol)?.len();
    Ok(NormalizeOutput {
        result,
        residual_zero,
        violations,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_normalize(
    input: &Path,
    degree: Option<u32>,
    mode: Option<ModeArg>,
    tol: Option<f64>,
    basis_split: bool,
    phi_out: Option<PathBuf>,
    g_out: Option<PathBuf>,
) -> Result<String> {
    let file = parse_system(input)?;
    mode_matches(&file, mode)?;
    let degree = degree.unwrap_or(file.degree);
    let opts = NormalizeOptions {
        strategy: if basis_split {
            SolveStrategy::BasisSplit
        } else {
            SolveStrategy::Recursion
        },
        tol,
    };
    let phi_path = phi_out.unwrap_or_else(|| input.with_extension("phi"));
    let g_path = g_out.unwrap_or_else(|| input.with_extension("g"));

    let mut out = String::new();
    header(&mut out, "normalize", input);
    let _ = writeln!(out, "mode = {}", file.mode);
    let _ = writeln!(out, "degree = {degree}");
    let _ = writeln!(
        out,
        "strategy = {}",
        if basis_split { "basis-split" } else { "recursion" }
    );
    let _ = writeln!(
        out,
        "tol = {}",
        tol.map_or("none".to_string(), |t| format!("{t}"))
    );

    let (phi_terms, g_terms, residual_zero, violations, near) = match file.mode {
        ScalarMode::Exact => {
            let system = file.exact_system.as_ref().unwrap();
            let run = run_normalize_generic(system, degree, &opts)?;
            let phi_sys = PeriodicSystem::new(
                system.linear.clone(),
                run.result.phi.clone(),
                system.period,
            )?;
            let g_sys = PeriodicSystem::new(
                system.linear.clone(),
                run.result.g.clone(),
                system.period,
            )?;
            std::fs::write(&phi_path, emit(&SystemFile::from_exact(phi_sys, degree)))?;
            std::fs::write(&g_path, emit(&SystemFile::from_exact(g_sys, degree)))?;
            let count = |v: &pdnf::series::VectorSeries<_>| {
                v.comps.iter().map(|s| s.num_terms()).sum::<usize>()
            };
            (
                count(&run.result.phi),
                count(&run.result.g),
                run.residual_zero,
                run.violations,
                run.result.near_resonances.len(),
            )
        }
        ScalarMode::Approx => {
            let system = file.approx_system.as_ref().unwrap();
            let run = run_normalize_generic(system, degree, &opts)?;
            let phi_sys = PeriodicSystem::new(
                system.linear.clone(),
                run.result.phi.clone(),
                system.period,
            )?;
            let g_sys = PeriodicSystem::new(
                system.linear.clone(),
                run.result.g.clone(),
                system.period,
            )?;
            std::fs::write(&phi_path, emit(&SystemFile::from_approx(phi_sys, degree)))?;
            std::fs::write(&g_path, emit(&SystemFile::from_approx(g_sys, degree)))?;
            let count = |v: &pdnf::series::VectorSeries<_>| {
                v.comps.iter().map(|s| s.num_terms()).sum::<usize>()
            };
            (
                count(&run.result.phi),
                count(&run.result.g),
                run.residual_zero,
                run.violations,
                run.result.near_resonances.len(),
            )
        }
    };

    let _ = writeln!(out, "phi-file = {}", phi_path.display());
    let _ = writeln!(out, "g-file = {}", g_path.display());
    let _ = writeln!(out, "phi terms = {phi_terms}");
    let _ = writeln!(out, "g terms = {g_terms}");
    let _ = writeln!(out, "near-resonances = {near}");
    let _ = writeln!(
        out,
        "distinguished = {}",
        if violations == 0 { "yes" } else { "no" }
    );
    let _ = writeln!(
        out,
        "residual = {} through degree {degree}",
        if residual_zero { "0" } else { "nonzero" }
    );
    let _ = writeln!(out, "status = ok");
    Ok(out)
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("n/a".to_string(), |x| x.to_string())
}

fn cmd_resonance(input: &Path, degree: Option<u32>, fourier_cap: i64) -> Result<String> {
    let file = parse_system(input)?;
    let system = require_exact(&file)?;
    let degree = degree.unwrap_or(file.degree);
    let report = divisor_constants(
        &system.linear.lambda,
        &system.linear.sigma,
        degree,
        fourier_cap,
    )?;
    let mut out = String::new();
    header(&mut out, "resonance", input);
    let _ = writeln!(out, "degree bound = {degree}");
    let _ = writeln!(out, "mode bound = {fourier_cap}");
    let _ = writeln!(out, "epsilon = {:.12e}", report.epsilon);
    let _ = writeln!(out, "epsilon^2 (exact) = {}", report.epsilon_sq);
    let _ = writeln!(out, "epsilon (exact) = {}", fmt_opt(&report.epsilon_exact));
    let _ = writeln!(out, "1/nu bound = {}", fmt_opt(&report.theoretical_inv_nu));
    let _ = writeln!(out, "d1 = {}", fmt_opt(&report.d1));
    let _ = writeln!(out, "d2 = {}", fmt_opt(&report.d2));
    let _ = writeln!(out, "d = {}", fmt_opt(&report.d));
    let _ = writeln!(out, "sigma bar = {}", fmt_opt(&report.sigma_bar));
    let _ = writeln!(out, "gamma slope = {}", fmt_opt(&report.gamma_slope));
    let _ = writeln!(
        out,
        "solvability condition = {}",
        match report.slope_positive {
            Some(true) => "satisfied",
            Some(false) => "not satisfied",
            None => "n/a",
        }
    );
    let _ = writeln!(out, "status = ok");
    Ok(out)
}

fn cmd_lattice(input: &Path, degree: Option<u32>, fourier_cap: i64) -> Result<String> {
    let file = parse_system(input)?;
    let system = require_exact(&file)?;
    let degree = degree.unwrap_or(file.degree);
    let lattice = lattice_rank(&system.linear.lambda, degree, fourier_cap);
    let rationality = exponent_rationality(&system.linear.lambda, lattice.rank);
    let mut out = String::new();
    header(&mut out, "lattice", input);
    let _ = writeln!(out, "degree bound = {degree}");
    let _ = writeln!(out, "mode bound = {fourier_cap}");
    let _ = writeln!(out, "R_lambda = {}", lattice.rank);
    for (k, l) in &lattice.generators {
        let exps: Vec<String> = l.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(out, "generator: k = {k}, l = [{}]", exps.join(" "));
    }
    let _ = writeln!(
        out,
        "saturation = {}",
        if lattice.saturation_reached {
            "reached"
        } else {
            "not proven at these bounds"
        }
    );
    let _ = writeln!(
        out,
        "exponents purely imaginary rational = {}",
        rationality.purely_imaginary_rational
    );
    let _ = writeln!(
        out,
        "consistent with integrable form = {}",
        rationality.consistent_with_integrability
    );
    let _ = writeln!(out, "status = ok");
    Ok(out)
}

fn cmd_check_integral(
    input: &Path,
    degree: Option<u32>,
    tol: Option<f64>,
    phi: Option<PathBuf>,
    seed: u64,
) -> Result<String> {
    let file = parse_system(input)?;
    let degree = degree.unwrap_or(file.degree);
    let mut out = String::new();
    header(&mut out, "check-integral", input);
    let _ = writeln!(out, "degree = {degree}");
    let _ = writeln!(out, "seed = {seed}");

    match file.mode {
        ScalarMode::Exact => {
            let system = require_exact(&file)?;
            if file.exact_integrals.is_empty() {
                return Err(Error::EmptyCandidateList);
            }
            let phi_series = match &phi {
                Some(p) => {
                    let pf = parse_system(p)?;
                    Some(
                        pf.exact_system
                            .ok_or_else(|| {
                                Error::InvariantViolation(
                                    "transform file must be exact mode with a system".into(),
                                )
                            })?
                            .nonlinear,
                    )
                }
                None => None,
            };
            for (name, h) in &file.exact_integrals {
                let report = is_first_integral(h, system, degree)?;
                let _ = writeln!(
                    out,
                    "candidate {name}: integral through degree {degree} = {}",
                    if report.is_integral_to_degree { "yes" } else { "no" }
                );
                if let Some(phi_series) = &phi_series {
                    let ht = pushforward(h, phi_series, degree)?;
                    let rep = resonant_function_check(&ht, &system.linear.lambda, tol)?;
                    let _ = writeln!(
                        out,
                        "candidate {name}: pushforward resonant = {} ({} offenders)",
                        rep.resonant_structure.unwrap_or(false),
                        rep.offenders.len()
                    );
                }
            }
            let series: Vec<_> = file
                .exact_integrals
                .iter()
                .map(|(_, s)| s.clone())
                .collect();
            let rank = independence_rank(&series, degree, 8, seed)?;
            let _ = writeln!(out, "independence rank = {rank}");
        }
        ScalarMode::Approx => {
            let system = file.approx_system.as_ref().ok_or_else(|| {
                Error::InvariantViolation("file carries no system".into())
            })?;
            if file.approx_integrals.is_empty() {
                return Err(Error::EmptyCandidateList);
            }
            for (name, h) in &file.approx_integrals {
                let report = is_first_integral(h, system, degree)?;
                let _ = writeln!(
                    out,
                    "candidate {name}: integral through degree {degree} = {}",
                    if report.is_integral_to_degree { "yes" } else { "no" }
                );
            }
        }
    }
    let _ = writeln!(out, "status = ok");
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_floquet(
    input: &Path,
    degree: Option<u32>,
    fourier_cap: usize,
    tol: f64,
    rationalize: bool,
    snap_tol: f64,
    out_path: Option<PathBuf>,
) -> Result<String> {
    let file = parse_system(input)?;
    let field = file.field.as_ref().ok_or_else(|| {
        Error::InvariantViolation("floquet mode needs `field` lines".into())
    })?;
    let seed = file.seed.as_ref().ok_or_else(|| {
        Error::InvariantViolation("floquet mode needs `seed` and `seed_period`".into())
    })?;
    let degree = degree.unwrap_or(file.degree);
    let opt = FloquetOptions {
        degree,
        band_cap: fourier_cap,
        orbit_tol: tol,
        ..FloquetOptions::default()
    };
    let red = floquet::reduce(
        field,
        &DVector::from_vec(seed.point.clone()),
        seed.period_guess,
        opt,
    )?;
    let out_path = out_path.unwrap_or_else(|| input.with_extension("reduced"));

    let mut out = String::new();
    header(&mut out, "floquet", input);
    let _ = writeln!(out, "degree = {degree}");
    let _ = writeln!(out, "band cap = {fourier_cap}");
    let _ = writeln!(out, "orbit tol = {tol}");
    let _ = writeln!(out, "period = {:.12}", red.orbit.period);
    let _ = writeln!(out, "orbit defect = {:.3e}", red.orbit.defect);
    for (i, (mult, exp)) in red.multipliers.iter().zip(&red.exponents).enumerate() {
        let _ = writeln!(
            out,
            "exponent {}: multiplier = {:.12e}{:+.12e}i, exponent = {:.12e}{:+.12e}i",
            i + 1,
            mult.re,
            mult.im,
            exp.re,
            exp.im
        );
    }
    let _ = writeln!(out, "fourier band = {}", red.band);
    let _ = writeln!(out, "q defect = {:.3e}", red.q_defect);
    let _ = writeln!(out, "worst condition = {:.3e}", red.worst_condition);
    for w in &red.warnings {
        let _ = writeln!(out, "warning: {w}");
    }

    if rationalize {
        let (exact, log) = floquet::rationalize(&red.reduced, snap_tol)?;
        for entry in &log {
            let _ = writeln!(out, "snap: {entry}");
        }
        std::fs::write(&out_path, emit(&SystemFile::from_exact(exact, degree)))?;
    } else {
        std::fs::write(
            &out_path,
            emit(&SystemFile::from_approx(red.reduced.clone(), degree)),
        )?;
    }
    let _ = writeln!(out, "reduced-file = {}", out_path.display());
    let _ = writeln!(out, "status = ok");
    Ok(out)
}

fn cmd_verify(input: &Path, phi: &Path, g: &Path, t_span: Option<f64>) -> Result<String> {
    let file = parse_system(input)?;
    let phi_file = parse_system(phi)?;
    let g_file = parse_system(g)?;
    if phi_file.mode != file.mode || g_file.mode != file.mode {
        return Err(Error::InvariantViolation(
            "system, transform and normal-form files must share a mode".into(),
        ));
    }
    let t_span = t_span.unwrap_or(TAU);
    let radii = default_radii();
    let integ = pdnf::floquet::IntegratorOptions::default();

    let mut out = String::new();
    header(&mut out, "verify", input);
    let _ = writeln!(out, "phi = {}", phi.display());
    let _ = writeln!(out, "g = {}", g.display());
    let _ = writeln!(out, "t span = {t_span}");

    match file.mode {
        ScalarMode::Exact => {
            let system = file.exact_system.as_ref().unwrap();
            let result = NormalizationResult {
                phi: phi_file
                    .exact_system
                    .ok_or_else(|| {
                        Error::InvariantViolation("transform file carries no terms".into())
                    })?
                    .nonlinear,
                g: g_file
                    .exact_system
                    .ok_or_else(|| {
                        Error::InvariantViolation("normal-form file carries no terms".into())
                    })?
                    .nonlinear,
                degree: phi_file.degree,
                near_resonances: vec![],
            };
            let report = conjugacy_scaling_check(system, &result, &radii, t_span, integ)?;
            let _ = write!(out, "{report}");
            let growth = coefficient_growth(&result);
            let _ = write!(out, "{growth}");
        }
        ScalarMode::Approx => {
            let system = file.approx_system.as_ref().unwrap();
            let result = NormalizationResult {
                phi: phi_file
                    .approx_system
                    .ok_or_else(|| {
                        Error::InvariantViolation("transform file carries no terms".into())
                    })?
                    .nonlinear,
                g: g_file
                    .approx_system
                    .ok_or_else(|| {
                        Error::InvariantViolation("normal-form file carries no terms".into())
                    })?
                    .nonlinear,
                degree: phi_file.degree,
                near_resonances: vec![],
            };
            let report = conjugacy_scaling_check(system, &result, &radii, t_span, integ)?;
            let _ = write!(out, "{report}");
            let growth = coefficient_growth(&result);
            let _ = write!(out, "{growth}");
        }
    }
    let _ = writeln!(out, "status = ok");
    Ok(out)
}

fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Normalize {
            input,
            degree,
            mode,
            tol,
            basis_split,
            phi_out,
            g_out,
        } => cmd_normalize(
            input,
            *degree,
            *mode,
            *tol,
            *basis_split,
            phi_out.clone(),
            g_out.clone(),
        ),
        Command::Resonance {
            input,
            degree,
            fourier_cap,
        } => cmd_resonance(input, *degree, *fourier_cap),
        Command::Lattice {
            input,
            degree,
            fourier_cap,
        } => cmd_lattice(input, *degree, *fourier_cap),
        Command::CheckIntegral {
            input,
            degree,
            tol,
            phi,
            seed,
        } => cmd_check_integral(input, *degree, *tol, phi.clone(), *seed),
        Command::Floquet {
            input,
            degree,
            fourier_cap,
            tol,
            rationalize,
            snap_tol,
            out,
        } => cmd_floquet(
            input,
            *degree,
            *fourier_cap,
            *tol,
            *rationalize,
            *snap_tol,
            out.clone(),
        ),
        Command::Verify {
            input,
            phi,
            g,
            t_span,
        } => cmd_verify(input, phi, g, *t_span),
    }
}

fn write_report(dest: &Option<PathBuf>, body: &str) {
    match dest {
        Some(path) => {
            if std::fs::write(path, body).is_err() {
                eprintln!("could not write report to {}", path.display());
                print!("{body}");
            }
        }
        None => print!("{body}"),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(body) => {
            write_report(&cli.report, &body);
            std::process::exit(0);
        }
        Err(e) => {
            let mut body = String::new();
            let _ = writeln!(body, "status = error");
            let _ = writeln!(body, "error = {}", e.code());
            let _ = writeln!(body, "message = {e}");
            write_report(&cli.report, &body);
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
