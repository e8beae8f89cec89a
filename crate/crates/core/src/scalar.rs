//! Coefficient scalars: exact Gaussian rationals and approximate complex
//! doubles, unified behind the [`Coeff`] trait so the series algebra and the
//! solver are written once.

use std::fmt;

use num::complex::Complex64;
use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMode {
    Exact,
    Approx,
}

impl fmt::Display for ScalarMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarMode::Exact => write!(f, "exact"),
            ScalarMode::Approx => write!(f, "approx"),
        }
    }
}

/// A Gaussian rational a + b*i. `BigRational` keeps both parts in lowest
/// terms with positive denominators, so the representation is canonical and
/// equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        ExactComplex { re, im }
    }

    pub fn from_parts(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        ExactComplex {
            re: BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
            im: BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
        }
    }

    pub fn integer(v: i64) -> Self {
        Self::from_parts(v, 1, 0, 1)
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Self::from_parts(num, den, 0, 1)
    }

    /// b*i with b = num/den.
    pub fn imaginary(num: i64, den: i64) -> Self {
        Self::from_parts(0, 1, num, den)
    }

    pub fn i() -> Self {
        Self::imaginary(1, 1)
    }

    pub fn conj(&self) -> Self {
        ExactComplex {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// |a + b*i|^2 = a^2 + b^2, exact.
    pub fn norm_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn is_purely_imaginary(&self) -> bool {
        self.re.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let im_part = |r: &BigRational| -> String {
            let mag = r.abs();
            if mag.is_one() {
                "i".to_string()
            } else {
                format!("{}i", fmt_rational(&mag))
            }
        };
        if self.im.is_zero() {
            write!(f, "{}", fmt_rational(&self.re))
        } else if self.re.is_zero() {
            let sign = if self.im.is_negative() { "-" } else { "" };
            write!(f, "{}{}", sign, im_part(&self.im))
        } else {
            let sign = if self.im.is_negative() { "-" } else { "+" };
            write!(f, "{}{}{}", fmt_rational(&self.re), sign, im_part(&self.im))
        }
    }
}

/// Parse an exact-complex literal. Grammar (whitespace-insensitive):
/// `[sign] rational [(+|-) [rational] "i"]` or `[sign] [rational] "i"`,
/// with `rational := integer ["/" positive-integer]`; a bare `i` means `1i`.
pub fn parse_exact(input: &str) -> std::result::Result<ExactComplex, String> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty coefficient literal".into());
    }
    let bytes = s.as_bytes();
    let mut pos = 0usize;

    fn parse_sign(bytes: &[u8], pos: &mut usize) -> i32 {
        match bytes.get(*pos) {
            Some(b'+') => {
                *pos += 1;
                1
            }
            Some(b'-') => {
                *pos += 1;
                -1
            }
            _ => 1,
        }
    }

    // Unsigned rational; returns None if no digits at the cursor.
    fn parse_rational(
        bytes: &[u8],
        pos: &mut usize,
    ) -> std::result::Result<Option<BigRational>, String> {
        let start = *pos;
        while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
            *pos += 1;
        }
        if *pos == start {
            return Ok(None);
        }
        let numer: BigInt = std::str::from_utf8(&bytes[start..*pos])
            .unwrap()
            .parse()
            .map_err(|_| "bad integer".to_string())?;
        let denom = if bytes.get(*pos) == Some(&b'/') {
            *pos += 1;
            let dstart = *pos;
            while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
                *pos += 1;
            }
            if *pos == dstart {
                return Err("missing denominator".into());
            }
            let d: BigInt = std::str::from_utf8(&bytes[dstart..*pos])
                .unwrap()
                .parse()
                .map_err(|_| "bad denominator".to_string())?;
            if d.is_zero() {
                return Err("zero denominator".into());
            }
            d
        } else {
            BigInt::one()
        };
        Ok(Some(BigRational::new(numer, denom)))
    }

    let apply = |sign: i32, r: BigRational| if sign < 0 { -r } else { r };

    let sign1 = parse_sign(bytes, &mut pos);
    let rat1 = parse_rational(bytes, &mut pos)?;

    // First token ends with 'i'?
    if bytes.get(pos) == Some(&b'i') {
        pos += 1;
        if pos != bytes.len() {
            return Err(format!("trailing characters in `{s}`"));
        }
        let mag = rat1.unwrap_or_else(BigRational::one);
        return Ok(ExactComplex::new(BigRational::zero(), apply(sign1, mag)));
    }

    let re = match rat1 {
        Some(r) => apply(sign1, r),
        None => return Err(format!("expected a rational in `{s}`")),
    };

    if pos == bytes.len() {
        return Ok(ExactComplex::new(re, BigRational::zero()));
    }

    let sign2 = match bytes[pos] {
        b'+' => 1,
        b'-' => -1,
        _ => return Err(format!("expected `+`, `-` or end in `{s}`")),
    };
    pos += 1;
    let mag = parse_rational(bytes, &mut pos)?.unwrap_or_else(BigRational::one);
    if bytes.get(pos) != Some(&b'i') {
        return Err(format!("expected `i` after imaginary part in `{s}`"));
    }
    pos += 1;
    if pos != bytes.len() {
        return Err(format!("trailing characters in `{s}`"));
    }
    Ok(ExactComplex::new(re, apply(sign2, mag)))
}

/// Complex double; every stored value must be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxComplex(pub Complex64);

impl ApproxComplex {
    pub fn new(re: f64, im: f64) -> Self {
        ApproxComplex(Complex64::new(re, im))
    }
}

impl fmt::Display for ApproxComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `{}` on f64 is shortest round-trip, which keeps emitted files
        // byte-deterministic and re-parsable without loss.
        let re = self.0.re;
        let im = self.0.im;
        if im == 0.0 {
            write!(f, "{re}")
        } else if re == 0.0 {
            write!(f, "{im}i")
        } else if im < 0.0 {
            write!(f, "{re}-{}i", -im)
        } else {
            write!(f, "{re}+{im}i")
        }
    }
}

/// Parse an approx-complex literal: decimal floats in place of rationals,
/// same overall shape as the exact grammar.
pub fn parse_approx(input: &str) -> std::result::Result<ApproxComplex, String> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty coefficient literal".into());
    }
    // Split at the last top-level '+' or '-' that is not part of an exponent
    // and not leading.
    let chars: Vec<char> = s.chars().collect();
    let mut split = None;
    for idx in (1..chars.len()).rev() {
        let c = chars[idx];
        if (c == '+' || c == '-') && chars[idx - 1] != 'e' && chars[idx - 1] != 'E' {
            split = Some(idx);
            break;
        }
    }
    let parse_part = |part: &str, imag: bool| -> std::result::Result<f64, String> {
        let body = if imag {
            let t = part
                .strip_suffix('i')
                .ok_or_else(|| format!("expected `i` in `{part}`"))?;
            match t {
                "" | "+" => "1".to_string(),
                "-" => "-1".to_string(),
                other => other.to_string(),
            }
        } else {
            part.to_string()
        };
        body.parse::<f64>().map_err(|_| format!("bad float `{body}`"))
    };
    let (re, im) = if s.ends_with('i') {
        match split {
            Some(idx) => {
                let (a, b) = s.split_at(idx);
                (parse_part(a, false)?, parse_part(b, true)?)
            }
            None => (0.0, parse_part(&s, true)?),
        }
    } else {
        (parse_part(&s, false)?, 0.0)
    };
    if !re.is_finite() || !im.is_finite() {
        return Err("non-finite coefficient".into());
    }
    Ok(ApproxComplex::new(re, im))
}

/// Ring/field operations shared by both scalar modes. Methods take references
/// so the arbitrary-precision implementation avoids needless clones.
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display {
    const MODE: ScalarMode;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; must not be called on zero.
    fn inv(&self) -> Self;
    /// i*k for an integer Fourier mode k.
    fn i_times(k: i64) -> Self;
    fn from_int(v: i64) -> Self;
    fn scale_int(&self, v: i64) -> Self;
    fn to_c64(&self) -> Complex64;
    fn magnitude(&self) -> f64;

    /// Decide whether a small divisor counts as zero (resonant). Exact mode
    /// tests exactly and ignores the tolerance; approx mode requires one.
    fn divisor_is_zero(divisor: &Self, tol: Option<f64>) -> Result<bool> {
        match Self::MODE {
            ScalarMode::Exact => Ok(divisor.is_zero()),
            ScalarMode::Approx => {
                let tol = tol.ok_or(Error::MissingTolerance)?;
                Ok(divisor.magnitude() < tol)
            }
        }
    }
}

impl Coeff for ExactComplex {
    const MODE: ScalarMode = ScalarMode::Exact;

    fn zero() -> Self {
        ExactComplex::new(BigRational::zero(), BigRational::zero())
    }

    fn one() -> Self {
        ExactComplex::new(BigRational::one(), BigRational::zero())
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn add(&self, other: &Self) -> Self {
        ExactComplex::new(&self.re + &other.re, &self.im + &other.im)
    }

    fn sub(&self, other: &Self) -> Self {
        ExactComplex::new(&self.re - &other.re, &self.im - &other.im)
    }

    fn mul(&self, other: &Self) -> Self {
        ExactComplex::new(
            &self.re * &other.re - &self.im * &other.im,
            &self.re * &other.im + &self.im * &other.re,
        )
    }

    fn neg(&self) -> Self {
        ExactComplex::new(-self.re.clone(), -self.im.clone())
    }

    fn inv(&self) -> Self {
        let n = self.norm_sq();
        assert!(!n.is_zero(), "inverse of zero Gaussian rational");
        ExactComplex::new(&self.re / &n, -&self.im / &n)
    }

    fn i_times(k: i64) -> Self {
        ExactComplex::imaginary(k, 1)
    }

    fn from_int(v: i64) -> Self {
        ExactComplex::integer(v)
    }

    fn scale_int(&self, v: i64) -> Self {
        let f = BigRational::from(BigInt::from(v));
        ExactComplex::new(&self.re * &f, &self.im * &f)
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = r.numer();
    let d = r.denom();
    // Good enough for the sizes that appear in degree-N runs; falls back to
    // a string round-trip only when the parts overflow i128.
    match (i128::try_from(n), i128::try_from(d)) {
        (Ok(n), Ok(d)) => n as f64 / d as f64,
        _ => {
            let s = format!("{n}");
            let t = format!("{d}");
            s.parse::<f64>().unwrap_or(f64::INFINITY) / t.parse::<f64>().unwrap_or(1.0)
        }
    }
}

impl Coeff for ApproxComplex {
    const MODE: ScalarMode = ScalarMode::Approx;

    fn zero() -> Self {
        ApproxComplex::new(0.0, 0.0)
    }

    fn one() -> Self {
        ApproxComplex::new(1.0, 0.0)
    }

    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }

    fn add(&self, other: &Self) -> Self {
        ApproxComplex(self.0 + other.0)
    }

    fn sub(&self, other: &Self) -> Self {
        ApproxComplex(self.0 - other.0)
    }

    fn mul(&self, other: &Self) -> Self {
        ApproxComplex(self.0 * other.0)
    }

    fn neg(&self) -> Self {
        ApproxComplex(-self.0)
    }

    fn inv(&self) -> Self {
        ApproxComplex(self.0.inv())
    }

    fn i_times(k: i64) -> Self {
        ApproxComplex::new(0.0, k as f64)
    }

    fn from_int(v: i64) -> Self {
        ApproxComplex::new(v as f64, 0.0)
    }

    fn scale_int(&self, v: i64) -> Self {
        ApproxComplex(self.0 * v as f64)
    }

    fn to_c64(&self) -> Complex64 {
        self.0
    }

    fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}
