//! Scalar fields used for graph and line functions.
//!
//! Two modes are supported: exact rationals ([`Rational`]) for identity
//! checks, and `f64` for norm scans and extrapolated limits.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational scalar.
pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarMode {
    Exact,
    Float,
}

impl Display for ScalarMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScalarMode::Exact => f.write_str("exact"),
            ScalarMode::Float => f.write_str("float"),
        }
    }
}

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    const MODE: ScalarMode;

    /// `num / den` in this field. Panics if `den == 0`.
    fn ratio(num: i64, den: i64) -> Self;

    fn int(v: i64) -> Self {
        Self::ratio(v, 1)
    }

    /// Lossless conversion from a finite `f64` (exact binary expansion for
    /// rationals).
    fn from_f64_lossless(v: f64) -> Option<Self>;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `base^exp` for a small rational base, exact in exact mode.
    fn pow_ratio(num: i64, den: i64, exp: usize) -> Self {
        let base = Self::ratio(num, den);
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc * base.clone();
        }
        acc
    }

    /// Textual form that [`Scalar::parse`] reads back to an equal value.
    fn encode(&self) -> String;

    fn parse(s: &str) -> Result<Self>;
}

impl Scalar for f64 {
    const MODE: ScalarMode = ScalarMode::Float;

    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }

    fn from_f64_lossless(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }

    fn pow_ratio(num: i64, den: i64, exp: usize) -> Self {
        (num as f64 / den as f64).powi(exp as i32)
    }

    fn encode(&self) -> String {
        format!("{self:?}")
    }

    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let q = parse_rational(n, d)?;
            return Ok(q.to_f64_lossy());
        }
        f64::from_str(s).map_err(|e| Error::Inconsistent(format!("bad decimal {s:?}: {e}")))
    }
}

impl Scalar for Rational {
    const MODE: ScalarMode = ScalarMode::Exact;

    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64_lossless(v: f64) -> Option<Self> {
        BigRational::from_f64(v)
    }

    fn encode(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => parse_rational(n, d),
            None => {
                if looks_decimal(s) {
                    return Err(Error::ModeMismatch(format!(
                        "decimal entry {s:?} in exact mode"
                    )));
                }
                BigInt::from_str(s)
                    .map(BigRational::from_integer)
                    .map_err(|e| Error::Inconsistent(format!("bad integer {s:?}: {e}")))
            }
        }
    }
}

fn parse_rational(n: &str, d: &str) -> Result<Rational> {
    let num = BigInt::from_str(n.trim())
        .map_err(|e| Error::Inconsistent(format!("bad numerator {n:?}: {e}")))?;
    let den = BigInt::from_str(d.trim())
        .map_err(|e| Error::Inconsistent(format!("bad denominator {d:?}: {e}")))?;
    if den.is_zero() {
        return Err(Error::Inconsistent("zero denominator".into()));
    }
    Ok(BigRational::new(num, den))
}

/// True for entries written as decimals (`0.5`, `1e-3`, `inf`).
pub fn looks_decimal(s: &str) -> bool {
    let s = s.trim().to_ascii_lowercase();
    s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("nan")
}

/// Mode implied by a single textual entry; `None` for bare integers, which
/// fit either mode.
pub fn entry_mode(s: &str) -> Option<ScalarMode> {
    if s.contains('/') {
        Some(ScalarMode::Exact)
    } else if looks_decimal(s) {
        Some(ScalarMode::Float)
    } else {
        None
    }
}

/// Converts between scalar modes (exact → float is lossy, float → exact is
/// the exact binary expansion).
pub fn convert<A: Scalar, B: Scalar>(a: &A) -> B {
    match (A::MODE, B::MODE) {
        (ScalarMode::Exact, ScalarMode::Exact) => B::parse(&a.encode()).expect("exact re-parse"),
        _ => B::from_f64_lossless(a.to_f64_lossy()).expect("finite value"),
    }
}
