//! Line-oriented on-disk format for periodic systems, first-integral
//! candidates, autonomous fields and orbit seeds.
//!
//! ```text
//! # comment
//! n = 2
//! mode = exact
//! degree = 6
//! period = 2pi
//! lambda = i, 0
//! sigma = 0
//! term 1 | 0 2 | 0 | 1
//! integral H
//! iterm 1 0 | -1 | 1
//! seed 1.1 0
//! seed_period = 6.2
//! field 1 | 1 0 | 1
//! ```
//!
//! `term J | l1 .. ln | k | coeff` is a pseudomonomial coeff * x^l e^{ikt}
//! in component J; `iterm` attaches scalar terms to the current integral
//! candidate; `field` lines define an autonomous polynomial field for orbit
//! refinement. Emission is canonical: terms sorted by (degree, succession
//! order on l, mode, component), so parse-emit round-trips byte-identically
//! on canonical files.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::floquet::{AutonomousField, FieldTerm};
use crate::scalar::{parse_approx, parse_exact, ApproxComplex, Coeff, ExactComplex, ScalarMode};
use crate::series::{MultiIndex, Series, TermKey, VectorSeries};
use crate::system::{LinearPart, PeriodicSystem};

/// Initial point and period guess for orbit refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSeed {
    pub point: Vec<f64>,
    pub period_guess: f64,
}

/// Parsed contents of a system file. Exactly one of the `*_system` slots is
/// populated when the file carries a linear part, according to `mode`.
#[derive(Debug, Clone)]
pub struct SystemFile {
    pub mode: ScalarMode,
    pub n: usize,
    pub degree: u32,
    pub period: f64,
    pub exact_system: Option<PeriodicSystem<ExactComplex>>,
    pub approx_system: Option<PeriodicSystem<ApproxComplex>>,
    pub exact_integrals: Vec<(String, Series<ExactComplex>)>,
    pub approx_integrals: Vec<(String, Series<ApproxComplex>)>,
    pub seed: Option<OrbitSeed>,
    pub field: Option<AutonomousField>,
}

impl SystemFile {
    /// Wraps an exact system (used when emitting transform and normal-form
    /// files, which share the source system's linear part).
    pub fn from_exact(system: PeriodicSystem<ExactComplex>, degree: u32) -> Self {
        SystemFile {
            mode: ScalarMode::Exact,
            n: system.dim(),
            degree,
            period: system.period,
            exact_system: Some(system),
            approx_system: None,
            exact_integrals: Vec::new(),
            approx_integrals: Vec::new(),
            seed: None,
            field: None,
        }
    }

    pub fn from_approx(system: PeriodicSystem<ApproxComplex>, degree: u32) -> Self {
        SystemFile {
            mode: ScalarMode::Approx,
            n: system.dim(),
            degree,
            period: system.period,
            exact_system: None,
            approx_system: Some(system),
            exact_integrals: Vec::new(),
            approx_integrals: Vec::new(),
            seed: None,
            field: None,
        }
    }
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn parse_exponents(part: &str, n: usize, line: usize) -> Result<MultiIndex> {
    let vals: Vec<u32> = part
        .split_whitespace()
        .map(|t| {
            t.parse::<u32>()
                .map_err(|_| err(line, 1, format!("bad exponent `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(err(
            line,
            1,
            format!("expected {n} exponents, got {}", vals.len()),
        ));
    }
    Ok(MultiIndex(vals))
}

fn split_fields(rest: &str, expected: usize, line: usize) -> Result<Vec<&str>> {
    let parts: Vec<&str> = rest.split('|').map(|p| p.trim()).collect();
    if parts.len() != expected {
        return Err(err(
            line,
            1,
            format!("expected {expected} `|`-separated fields, got {}", parts.len()),
        ));
    }
    Ok(parts)
}

enum RawCoeff {
    Exact(ExactComplex),
    Approx(ApproxComplex),
}

fn parse_coeff(text: &str, mode: ScalarMode, line: usize) -> Result<RawCoeff> {
    match mode {
        ScalarMode::Exact => parse_exact(text)
            .map(RawCoeff::Exact)
            .map_err(|m| err(line, 1, m)),
        ScalarMode::Approx => parse_approx(text)
            .map(RawCoeff::Approx)
            .map_err(|m| err(line, 1, m)),
    }
}

struct TermRecord {
    line: usize,
    comp: usize,
    l: MultiIndex,
    k: i64,
    coeff: RawCoeff,
}

/// Parses a system file from text.
pub fn parse_str(input: &str) -> Result<SystemFile> {
    let mut n: Option<usize> = None;
    let mut mode: Option<ScalarMode> = None;
    let mut degree: Option<u32> = None;
    let mut period: Option<f64> = None;
    let mut lambda_raw: Option<(usize, String)> = None;
    let mut sigma_raw: Option<(usize, String)> = None;
    let mut terms: Vec<TermRecord> = Vec::new();
    let mut integrals: Vec<(String, Vec<TermRecord>)> = Vec::new();
    let mut seed_point: Option<Vec<f64>> = None;
    let mut seed_period: Option<f64> = None;
    let mut field_terms: Vec<(usize, FieldTerm)> = Vec::new();

    for (idx, raw_line) in input.lines().enumerate() {
        let line = idx + 1;
        let text = raw_line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let need = |v: Option<usize>| v.ok_or_else(|| err(line, 1, "`n = ...` must come first"));
        let need_mode =
            |v: Option<ScalarMode>| v.ok_or_else(|| err(line, 1, "`mode = ...` must come first"));
        if let Some(eq) = text.find('=') {
            let key = text[..eq].trim();
            let value = text[eq + 1..].trim();
            let col = eq + 2;
            match key {
                "n" => {
                    n = Some(
                        value
                            .parse::<usize>()
                            .ok()
                            .filter(|v| *v >= 1)
                            .ok_or_else(|| err(line, col, format!("bad dimension `{value}`")))?,
                    );
                }
                "mode" => {
                    mode = Some(match value {
                        "exact" => ScalarMode::Exact,
                        "approx" => ScalarMode::Approx,
                        other => return Err(err(line, col, format!("unknown mode `{other}`"))),
                    });
                }
                "degree" => {
                    degree = Some(
                        value
                            .parse::<u32>()
                            .ok()
                            .filter(|v| *v >= 2)
                            .ok_or_else(|| {
                                err(line, col, format!("bad truncation degree `{value}`"))
                            })?,
                    );
                }
                "period" => {
                    period = Some(if value == "2pi" {
                        TAU
                    } else {
                        value
                            .parse::<f64>()
                            .ok()
                            .filter(|v| *v > 0.0)
                            .ok_or_else(|| err(line, col, format!("bad period `{value}`")))?
                    });
                }
                "lambda" => lambda_raw = Some((line, value.to_string())),
                "sigma" => sigma_raw = Some((line, value.to_string())),
                "seed_period" => {
                    seed_period = Some(
                        value
                            .parse::<f64>()
                            .ok()
                            .filter(|v| *v > 0.0)
                            .ok_or_else(|| err(line, col, format!("bad seed period `{value}`")))?,
                    );
                }
                other => return Err(err(line, 1, format!("unknown key `{other}`"))),
            }
            continue;
        }
        let (word, rest) = match text.split_once(char::is_whitespace) {
            Some((w, r)) => (w, r.trim()),
            None => (text, ""),
        };
        match word {
            "term" | "iterm" => {
                let n = need(n)?;
                let mode = need_mode(mode)?;
                let (comp, fields) = if word == "term" {
                    let fields = split_fields(rest, 4, line)?;
                    let comp = fields[0]
                        .parse::<usize>()
                        .ok()
                        .filter(|c| (1..=n).contains(c))
                        .ok_or_else(|| {
                            err(line, 1, format!("bad component `{}`", fields[0]))
                        })?;
                    (comp - 1, fields[1..].to_vec())
                } else {
                    (0, split_fields(rest, 3, line)?)
                };
                let l = parse_exponents(fields[0], n, line)?;
                let k = fields[1]
                    .parse::<i64>()
                    .map_err(|_| err(line, 1, format!("bad Fourier mode `{}`", fields[1])))?;
                let coeff = parse_coeff(fields[2], mode, line)?;
                let record = TermRecord {
                    line,
                    comp,
                    l,
                    k,
                    coeff,
                };
                if word == "term" {
                    if record.l.degree() < 2 {
                        return Err(err(
                            line,
                            1,
                            "system terms must have total degree >= 2",
                        ));
                    }
                    terms.push(record);
                } else {
                    integrals
                        .last_mut()
                        .ok_or_else(|| err(line, 1, "`iterm` before any `integral`"))?
                        .1
                        .push(record);
                }
            }
            "integral" => {
                if rest.is_empty() {
                    return Err(err(line, 1, "integral candidate needs a name"));
                }
                integrals.push((rest.to_string(), Vec::new()));
            }
            "seed" => {
                let n = need(n)?;
                let vals: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(line, 1, format!("bad seed coordinate `{t}`")))
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != n {
                    return Err(err(
                        line,
                        1,
                        format!("seed needs {n} coordinates, got {}", vals.len()),
                    ));
                }
                seed_point = Some(vals);
            }
            "field" => {
                let n = need(n)?;
                let fields = split_fields(rest, 3, line)?;
                let comp = fields[0]
                    .parse::<usize>()
                    .ok()
                    .filter(|c| (1..=n).contains(c))
                    .ok_or_else(|| err(line, 1, format!("bad component `{}`", fields[0])))?;
                let exps = parse_exponents(fields[1], n, line)?;
                let coeff = fields[2]
                    .parse::<f64>()
                    .map_err(|_| err(line, 1, format!("bad field coefficient `{}`", fields[2])))?;
                field_terms.push((
                    line,
                    FieldTerm {
                        comp: comp - 1,
                        exps,
                        coeff,
                    },
                ));
            }
            other => return Err(err(line, 1, format!("unknown directive `{other}`"))),
        }
    }

    let n = n.ok_or_else(|| err(1, 1, "missing `n = ...`"))?;
    let mode = mode.ok_or_else(|| err(1, 1, "missing `mode = ...`"))?;
    let degree = degree.ok_or_else(|| err(1, 1, "missing `degree = ...`"))?;
    let period = period.unwrap_or(TAU);

    let parse_coeff_list = |raw: &(usize, String), expected: usize| -> Result<Vec<RawCoeff>> {
        let (line, text) = raw;
        let parts: Vec<&str> = text.split(',').map(|p| p.trim()).collect();
        if expected > 0 && parts.len() == 1 && parts[0] == "0" {
            // shorthand: an all-zero list
            return Ok((0..expected)
                .map(|_| match mode {
                    ScalarMode::Exact => RawCoeff::Exact(ExactComplex::zero()),
                    ScalarMode::Approx => RawCoeff::Approx(ApproxComplex::zero()),
                })
                .collect());
        }
        if parts.len() != expected {
            return Err(err(
                *line,
                1,
                format!("expected {expected} coefficients, got {}", parts.len()),
            ));
        }
        parts
            .iter()
            .map(|p| parse_coeff(p, mode, *line))
            .collect()
    };

    let mut exact_system = None;
    let mut approx_system = None;
    let mut exact_integrals = Vec::new();
    let mut approx_integrals = Vec::new();

    if let Some(ref lraw) = lambda_raw {
        let lambda = parse_coeff_list(lraw, n)?;
        let sigma = match sigma_raw {
            Some(ref sraw) => parse_coeff_list(sraw, n - 1)?,
            None => parse_coeff_list(&(lraw.0, "0".to_string()), n - 1)?,
        };
        match mode {
            ScalarMode::Exact => {
                let lambda: Vec<ExactComplex> = lambda
                    .into_iter()
                    .map(|c| match c {
                        RawCoeff::Exact(v) => v,
                        RawCoeff::Approx(_) => unreachable!(),
                    })
                    .collect();
                let sigma: Vec<ExactComplex> = sigma
                    .into_iter()
                    .map(|c| match c {
                        RawCoeff::Exact(v) => v,
                        RawCoeff::Approx(_) => unreachable!(),
                    })
                    .collect();
                let mut nonlinear = VectorSeries::zero(n, degree);
                for t in &terms {
                    let RawCoeff::Exact(ref c) = t.coeff else {
                        unreachable!()
                    };
                    nonlinear.comps[t.comp]
                        .add_term(t.l.clone(), t.k, c.clone())
                        .map_err(|e| err(t.line, 1, e.to_string()))?;
                }
                exact_system = Some(PeriodicSystem::new(
                    LinearPart::new(lambda, sigma)?,
                    nonlinear,
                    period,
                )?);
            }
            ScalarMode::Approx => {
                let lambda: Vec<ApproxComplex> = lambda
                    .into_iter()
                    .map(|c| match c {
                        RawCoeff::Approx(v) => v,
                        RawCoeff::Exact(_) => unreachable!(),
                    })
                    .collect();
                let sigma: Vec<ApproxComplex> = sigma
                    .into_iter()
                    .map(|c| match c {
                        RawCoeff::Approx(v) => v,
                        RawCoeff::Exact(_) => unreachable!(),
                    })
                    .collect();
                let mut nonlinear = VectorSeries::zero(n, degree);
                for t in &terms {
                    let RawCoeff::Approx(ref c) = t.coeff else {
                        unreachable!()
                    };
                    nonlinear.comps[t.comp]
                        .add_term(t.l.clone(), t.k, c.clone())
                        .map_err(|e| err(t.line, 1, e.to_string()))?;
                }
                approx_system = Some(PeriodicSystem::new(
                    LinearPart::new(lambda, sigma)?,
                    nonlinear,
                    period,
                )?);
            }
        }
    } else if !terms.is_empty() {
        return Err(err(terms[0].line, 1, "`term` requires a `lambda = ...` line"));
    }

    for (name, records) in integrals {
        match mode {
            ScalarMode::Exact => {
                let mut s = Series::zero(n, degree);
                for t in records {
                    let RawCoeff::Exact(c) = t.coeff else {
                        unreachable!()
                    };
                    s.add_term(t.l, t.k, c)
                        .map_err(|e| err(t.line, 1, e.to_string()))?;
                }
                exact_integrals.push((name, s));
            }
            ScalarMode::Approx => {
                let mut s = Series::zero(n, degree);
                for t in records {
                    let RawCoeff::Approx(c) = t.coeff else {
                        unreachable!()
                    };
                    s.add_term(t.l, t.k, c)
                        .map_err(|e| err(t.line, 1, e.to_string()))?;
                }
                approx_integrals.push((name, s));
            }
        }
    }

    let field = if field_terms.is_empty() {
        None
    } else {
        let first_line = field_terms[0].0;
        Some(
            AutonomousField::new(n, field_terms.into_iter().map(|(_, t)| t).collect())
                .map_err(|e| err(first_line, 1, e.to_string()))?,
        )
    };
    let seed = match (seed_point, seed_period) {
        (Some(point), Some(period_guess)) => Some(OrbitSeed {
            point,
            period_guess,
        }),
        (Some(_), None) => {
            return Err(err(1, 1, "`seed` requires a `seed_period = ...` line"));
        }
        (None, Some(_)) => {
            return Err(err(1, 1, "`seed_period` requires a `seed` line"));
        }
        (None, None) => None,
    };

    Ok(SystemFile {
        mode,
        n,
        degree,
        period,
        exact_system,
        approx_system,
        exact_integrals,
        approx_integrals,
        seed,
        field,
    })
}

/// Parses a system file from disk.
pub fn parse_system(path: &Path) -> Result<SystemFile> {
    let text = std::fs::read_to_string(path)?;
    parse_str(&text)
}

fn emit_terms<C: Coeff>(out: &mut String, series: &VectorSeries<C>) {
    let mut all: Vec<(TermKey, usize, &C)> = Vec::new();
    for (comp, s) in series.comps.iter().enumerate() {
        for (key, c) in s.iter() {
            all.push((key.clone(), comp, c));
        }
    }
    all.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    for (key, comp, c) in all {
        let exps: Vec<String> = key.l.0.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(
            out,
            "term {} | {} | {} | {}",
            comp + 1,
            exps.join(" "),
            key.k,
            c
        );
    }
}

fn emit_integral<C: Coeff>(out: &mut String, name: &str, series: &Series<C>) {
    let _ = writeln!(out, "integral {name}");
    for (key, c) in series.iter() {
        let exps: Vec<String> = key.l.0.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(out, "iterm {} | {} | {}", exps.join(" "), key.k, c);
    }
}

fn format_f64(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Canonical textual form; `parse_str(emit(f))` reproduces `f`.
pub fn emit(file: &SystemFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n = {}", file.n);
    let _ = writeln!(out, "mode = {}", file.mode);
    let _ = writeln!(out, "degree = {}", file.degree);
    if (file.period - TAU).abs() < 1e-12 {
        let _ = writeln!(out, "period = 2pi");
    } else {
        let _ = writeln!(out, "period = {}", format_f64(file.period));
    }
    match file.mode {
        ScalarMode::Exact => {
            if let Some(sys) = &file.exact_system {
                let lams: Vec<String> =
                    sys.linear.lambda.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "lambda = {}", lams.join(", "));
                if !sys.linear.sigma.is_empty() {
                    let sigs: Vec<String> =
                        sys.linear.sigma.iter().map(|c| c.to_string()).collect();
                    let _ = writeln!(out, "sigma = {}", sigs.join(", "));
                }
                emit_terms(&mut out, &sys.nonlinear);
            }
            for (name, s) in &file.exact_integrals {
                emit_integral(&mut out, name, s);
            }
        }
        ScalarMode::Approx => {
            if let Some(sys) = &file.approx_system {
                let lams: Vec<String> =
                    sys.linear.lambda.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "lambda = {}", lams.join(", "));
                if !sys.linear.sigma.is_empty() {
                    let sigs: Vec<String> =
                        sys.linear.sigma.iter().map(|c| c.to_string()).collect();
                    let _ = writeln!(out, "sigma = {}", sigs.join(", "));
                }
                emit_terms(&mut out, &sys.nonlinear);
            }
            for (name, s) in &file.approx_integrals {
                emit_integral(&mut out, name, s);
            }
        }
    }
    if let Some(seed) = &file.seed {
        let coords: Vec<String> = seed.point.iter().map(|v| format_f64(*v)).collect();
        let _ = writeln!(out, "seed {}", coords.join(" "));
        let _ = writeln!(out, "seed_period = {}", format_f64(seed.period_guess));
    }
    if let Some(field) = &file.field {
        for t in &field.terms {
            let exps: Vec<String> = t.exps.0.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(
                out,
                "field {} | {} | {}",
                t.comp + 1,
                exps.join(" "),
                format_f64(t.coeff)
            );
        }
    }
    out
}
