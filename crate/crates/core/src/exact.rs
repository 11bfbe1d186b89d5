//! Exact real numbers of the form `(p/q)·√n` used to declare atom locations
//! whose arithmetic nature matters (e.g. whether two atoms are commensurable).
//!
//! Floating-point values are all rational, so an irrationality claim can only
//! come from an exact declaration. Plain floats are kept as `Float` and are
//! classified heuristically.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactReal {
    /// `num/den · √radicand` with `radicand` square-free and `gcd(num, den) = 1`.
    Surd { num: i64, den: u64, radicand: u64 },
    Float(f64),
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("cannot parse `{0}` as a real number (expected e.g. 1.5, -3/4, sqrt(2), -2*sqrt(3))")]
pub struct ParseExactError(pub String);

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ExactReal {
    pub fn rational(num: i64, den: u64) -> Self {
        Self::surd(num, den, 1)
    }

    /// Normalises `num/den·√radicand`, pulling square factors out of the radicand.
    pub fn surd(num: i64, den: u64, radicand: u64) -> Self {
        assert!(den > 0, "zero denominator");
        if num == 0 || radicand == 0 {
            return ExactReal::Surd {
                num: 0,
                den: 1,
                radicand: 1,
            };
        }
        let mut outside: u64 = 1;
        let mut inside = radicand;
        let mut f = 2u64;
        while f * f <= inside {
            while inside % (f * f) == 0 {
                inside /= f * f;
                outside *= f;
            }
            f += 1;
        }
        let n = num.unsigned_abs() * outside;
        let g = gcd(n, den);
        let sign = if num < 0 { -1 } else { 1 };
        ExactReal::Surd {
            num: sign * (n / g) as i64,
            den: den / g,
            radicand: inside,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ExactReal::Surd { num, den, radicand } => {
                num as f64 / den as f64 * (radicand as f64).sqrt()
            }
            ExactReal::Float(x) => x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ExactReal::Surd { .. })
    }

    /// Whether `self / other` is rational, when both are exact and nonzero.
    pub fn ratio_is_rational(&self, other: &ExactReal) -> Option<bool> {
        match (self, other) {
            (
                ExactReal::Surd {
                    num: n1,
                    radicand: r1,
                    ..
                },
                ExactReal::Surd {
                    num: n2,
                    radicand: r2,
                    ..
                },
            ) if *n1 != 0 && *n2 != 0 => Some(r1 == r2),
            _ => None,
        }
    }
}

/// Heuristic rationality of `x / y` for plain floats: true when the ratio is
/// within `1e-12` (relative) of a fraction with denominator at most `10⁶`.
pub fn float_ratio_looks_rational(x: f64, y: f64) -> bool {
    let r = x / y;
    if !r.is_finite() {
        return false;
    }
    let target = r.abs();
    // continued-fraction convergents
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    let mut rest = target;
    for _ in 0..64 {
        let a = rest.floor();
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > 1e6 {
            return false;
        }
        if ((h2 / k2) - target).abs() <= 1e-12 * target.max(1e-300) {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = rest - a;
        if frac <= 0.0 {
            return true;
        }
        rest = 1.0 / frac;
    }
    false
}

fn parse_rational(s: &str) -> Option<(i64, u64)> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let (n1, d1) = parse_rational(n)?;
        let (n2, d2) = parse_rational(d)?;
        if n2 == 0 {
            return None;
        }
        let num = (n1 as i128) * (d2 as i128) * n2.signum() as i128;
        let den = (d1 as i128) * (n2.unsigned_abs() as i128);
        return Some((i64::try_from(num).ok()?, u64::try_from(den).ok()?));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || c == '.') {
        return None;
    }
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if frac.len() > 15 || int.len() > 15 {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num: i64 = digits.parse().ok()?;
    let den = 10u64.checked_pow(frac.len() as u32)?;
    Some((if neg { -num } else { num }, den))
}

impl FromStr for ExactReal {
    type Err = ParseExactError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseExactError(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(pos) = t.find("sqrt(") {
            let (coef, rest) = t.split_at(pos);
            let inner = rest
                .strip_prefix("sqrt(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(err)?;
            let radicand: u64 = inner.parse().map_err(|_| err())?;
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let (num, den) = match coef {
                "" | "+" => (1, 1),
                "-" => (-1, 1),
                c => parse_rational(c).ok_or_else(err)?,
            };
            return Ok(ExactReal::surd(num, den, radicand));
        }
        if let Some((num, den)) = parse_rational(&t) {
            return Ok(ExactReal::rational(num, den));
        }
        t.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(ExactReal::Float)
            .ok_or_else(err)
    }
}

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ExactReal::Float(x) => write!(f, "{x:?}"),
            ExactReal::Surd { num, den, radicand } => {
                let coef = if den == 1 {
                    format!("{num}")
                } else {
                    format!("{num}/{den}")
                };
                match (radicand, num) {
                    (1, _) => write!(f, "{coef}"),
                    (_, 1) if den == 1 => write!(f, "sqrt({radicand})"),
                    (_, -1) if den == 1 => write!(f, "-sqrt({radicand})"),
                    _ => write!(f, "{coef}*sqrt({radicand})"),
                }
            }
        }
    }
}

impl Serialize for ExactReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExactReal::Float(x) => s.serialize_f64(*x),
            ExactReal::Surd { radicand: 1, den: 1, num } => s.serialize_i64(*num),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ExactReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(ExactReal::rational(i, 1)),
            Raw::Num(x) => Ok(ExactReal::Float(x)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
