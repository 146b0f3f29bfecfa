//! Functions on the bottom edge: restriction, the dyadic difference
//! operators `A_n`, `D̃`, `D`, and the norms built from them.

use serde::{Deserialize, Serialize};

use crate::address::{bottom_vertex_index, check_level, DyadicPoint};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::harmonic::GraphFunction;
use crate::scalar::{Scalar, ScalarMode};

/// Samples `f(k/2^m)`, `0 ≤ k ≤ 2^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFunction<S> {
    level: usize,
    samples: Vec<S>,
}

impl<S: Scalar> LineFunction<S> {
    pub fn new(level: usize, samples: Vec<S>) -> Result<Self> {
        check_level(level)?;
        if samples.len() != (1usize << level) + 1 {
            return Err(Error::Inconsistent(format!(
                "{} samples for a level-{level} line function (expected {})",
                samples.len(),
                (1usize << level) + 1
            )));
        }
        Ok(LineFunction { level, samples })
    }

    pub fn from_fn(level: usize, f: impl Fn(usize) -> S) -> Result<Self> {
        LineFunction::new(level, (0..=1usize << level).map(f).collect())
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mode(&self) -> ScalarMode {
        S::MODE
    }

    pub fn samples(&self) -> &[S] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<S> {
        self.samples
    }

    /// `f(j / 2^n)`.
    pub fn sample(&self, n: usize, j: usize) -> Result<S> {
        if n > self.level || j > 1usize << n {
            return Err(Error::MissingSample(format!(
                "{j}/2^{n} on a level-{} grid",
                self.level
            )));
        }
        Ok(self.samples[j << (self.level - n)].clone())
    }

    pub fn at(&self, p: DyadicPoint) -> Option<&S> {
        p.index_at(self.level).map(|i| &self.samples[i])
    }

    /// Restriction to the level-`n` grid.
    pub fn downsample(&self, n: usize) -> Result<Self> {
        if n > self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                found: n,
            });
        }
        let step = 1usize << (self.level - n);
        Ok(LineFunction {
            level: n,
            samples: self.samples.iter().step_by(step).cloned().collect(),
        })
    }

    pub fn convert<T: Scalar>(&self) -> LineFunction<T> {
        LineFunction {
            level: self.level,
            samples: self.samples.iter().map(crate::scalar::convert).collect(),
        }
    }

    /// Trapezoid rule for `‖f‖²_{L²(I)}`.
    pub fn l2_norm_sq(&self) -> f64 {
        let h = 1.0 / (1u64 << self.level) as f64;
        let last = self.samples.len() - 1;
        self.samples
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let w = if j == 0 || j == last { 0.5 } else { 1.0 };
                w * v.to_f64_lossy().powi(2)
            })
            .sum::<f64>()
            * h
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.level != other.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                found: other.level,
            });
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64_lossy())
            .fold(0.0, f64::max))
    }
}

/// Bottom-edge samples of `u` on the level-`m` grid.
pub fn restrict<S: Scalar>(u: &GraphFunction<S>) -> Result<LineFunction<S>> {
    let m = u.level();
    LineFunction::from_fn(m, |j| u.at(bottom_vertex_index(m, j)).clone())
}

/// `A_n(f)_k = f(k/2^n) − f((k−1)/2^n)`, `1 ≤ k ≤ 2^n`.
pub fn diff_a<S: Scalar>(f: &LineFunction<S>, n: usize) -> Result<Vec<S>> {
    if n > f.level {
        return Err(Error::LevelMismatch {
            expected: f.level,
            found: n,
        });
    }
    (1..=1usize << n)
        .map(|k| Ok(f.sample(n, k)? - f.sample(n, k - 1)?))
        .collect()
}

/// `‖A_n(f)‖²_{l²}`, exact in exact mode.
pub fn a_norm_sq<S: Scalar>(f: &LineFunction<S>, n: usize) -> Result<S> {
    Ok(diff_a(f, n)?
        .into_iter()
        .fold(S::zero(), |acc, d| acc + d.clone() * d))
}

/// The second difference `D̃f(n,k)`, `n ≥ 1`, `1 ≤ k ≤ 2^n`; vanishes on
/// restrictions of harmonic functions.
pub fn diff_dtilde<S: Scalar>(f: &LineFunction<S>, n: usize, k: usize) -> Result<S> {
    if n < 1 || k < 1 || k > 1usize << n {
        return Err(Error::IndexOutOfRange(format!("D̃ index ({n},{k})")));
    }
    if n + 1 > f.level {
        return Err(Error::MissingSample(format!(
            "D̃({n},{k}) needs level {} samples, have level {}",
            n + 1,
            f.level
        )));
    }
    let g = |j: usize| f.sample(n, j);
    let (mid, near, far) = if k % 2 == 1 {
        (g(k)?, g(k - 1)?, g(k + 1)?)
    } else {
        (g(k - 1)?, g(k)?, g(k - 2)?)
    };
    Ok(
        f.sample(n + 1, 2 * k - 1)? - S::ratio(4, 5) * mid - S::ratio(8, 25) * near
            + S::ratio(3, 25) * far,
    )
}

/// `Df(n,k)`, `n ≥ 2`, `1 ≤ k ≤ 2^n − 1`: `D̃f(n−1, (k+1)/2)` for odd `k`
/// and a five-point stencil centred at `k/2^n` for even `k`.
pub fn diff_d<S: Scalar>(f: &LineFunction<S>, n: usize, k: usize) -> Result<S> {
    if n < 2 || k < 1 || k >= 1usize << n {
        return Err(Error::IndexOutOfRange(format!("D index ({n},{k})")));
    }
    if k % 2 == 1 {
        return diff_dtilde(f, n - 1, k.div_ceil(2));
    }
    if n > f.level {
        return Err(Error::MissingSample(format!(
            "D({n},{k}) needs level {n} samples, have level {}",
            f.level
        )));
    }
    let g = |j: usize| f.sample(n, j);
    Ok(g(k)? - S::ratio(5, 8) * (g(k - 1)? + g(k + 1)?) + S::ratio(1, 8) * (g(k - 2)? + g(k + 2)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DifferenceKind {
    A,
    DTilde,
    D,
}

/// All entries of one difference operator that the data supports.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceTable<S> {
    pub kind: DifferenceKind,
    pub first_level: usize,
    /// `rows[i][k−1]` is the entry at `(first_level + i, k)`.
    pub rows: Vec<Vec<S>>,
}

impl<S: Scalar> DifferenceTable<S> {
    pub fn build(f: &LineFunction<S>, kind: DifferenceKind) -> Result<Self> {
        let m = f.level;
        let (first, last) = match kind {
            DifferenceKind::A => (0, m),
            DifferenceKind::DTilde => (1, m.saturating_sub(1)),
            DifferenceKind::D => (2, m),
        };
        let mut rows = Vec::new();
        for n in first..=last {
            if n > m || (kind == DifferenceKind::DTilde && n + 1 > m) {
                break;
            }
            rows.push(match kind {
                DifferenceKind::A => diff_a(f, n)?,
                DifferenceKind::DTilde => (1..=1usize << n)
                    .map(|k| diff_dtilde(f, n, k))
                    .collect::<Result<_>>()?,
                DifferenceKind::D => (1..1usize << n)
                    .map(|k| diff_d(f, n, k))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(DifferenceTable {
            kind,
            first_level: first,
            rows,
        })
    }

    pub fn get(&self, n: usize, k: usize) -> Option<&S> {
        n.checked_sub(self.first_level)
            .and_then(|i| self.rows.get(i))
            .and_then(|r| k.checked_sub(1).and_then(|j| r.get(j)))
    }
}

/// Which norm a [`NormReport`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum Space {
    Besov { alpha: f64 },
    TTilde { sigma: f64 },
    T { sigma: f64 },
    TInf,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::Besov { alpha } => write!(f, "besov:{alpha}"),
            Space::TTilde { sigma } => write!(f, "ttilde:{sigma}"),
            Space::T { sigma } => write!(f, "t:{sigma}"),
            Space::TInf => write!(f, "tinf"),
        }
    }
}

impl Space {
    /// Rejects parameters outside the range where the norm is defined.
    pub fn validate(self) -> Result<()> {
        match self {
            Space::Besov { alpha } => check_alpha(alpha),
            Space::TTilde { sigma } | Space::T { sigma } => check_sigma(sigma),
            Space::TInf => Ok(()),
        }
    }
}

impl std::str::FromStr for Space {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Inconsistent(format!("bad space spec {s:?}"));
        if s == "tinf" {
            return Ok(Space::TInf);
        }
        let (name, x) = s.split_once(':').ok_or_else(bad)?;
        let x: f64 = x.parse().map_err(|_| bad())?;
        match name {
            "besov" => Ok(Space::Besov { alpha: x }),
            "ttilde" => Ok(Space::TTilde { sigma: x }),
            "t" => Ok(Space::T { sigma: x }),
            _ => Err(bad()),
        }
    }
}

/// A truncated norm together with its per-level contributions.
///
/// For the square-summable spaces `value² = base + Σ terms`; for `T^∞₂`
/// `terms` are per-level maxima and `value` is their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub space: Space,
    pub value: f64,
    /// Endpoint or `L²(I)` contribution (zero for `T^∞₂`).
    pub base: f64,
    pub levels: Vec<usize>,
    pub terms: Vec<f64>,
    /// Running squared value (running maximum for `T^∞₂`).
    pub partials: Vec<f64>,
    pub truncation: usize,
}

impl NormReport {
    fn squared(
        space: Space,
        base: f64,
        levels: Vec<usize>,
        terms: Vec<f64>,
        truncation: usize,
    ) -> Self {
        let mut acc = base;
        let partials = terms
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect();
        NormReport {
            space,
            value: acc.sqrt(),
            base,
            levels,
            terms,
            partials,
            truncation,
        }
    }

    /// `terms[i+1] / terms[i]`; infinite or NaN entries mark vanishing terms.
    pub fn ratios(&self) -> Vec<f64> {
        self.terms.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

fn level_sum<S: Scalar>(
    exec: Execution,
    count: usize,
    f: impl Fn(usize) -> Result<S> + Sync + Send,
) -> Result<f64> {
    let squares = exec::map_range(exec, count, |i| {
        f(i).map(|d| (d.clone() * d).to_f64_lossy())
    });
    let squares = squares.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(exec::ordered_sum(
        Execution::Sequential,
        squares.len(),
        |i| squares[i],
    ))
}

pub fn besov_norm<S: Scalar>(f: &LineFunction<S>, alpha: f64) -> Result<NormReport> {
    besov_norm_with(f, alpha, Execution::default())
}

/// `|f(0)|² + |f(1)|² + Σ_{n ≤ m} 2^{2nα} 2^{−n} ‖A_n f‖²`, for `1/2 < α < 1`.
pub fn besov_norm_with<S: Scalar>(
    f: &LineFunction<S>,
    alpha: f64,
    exec: Execution,
) -> Result<NormReport> {
    check_alpha(alpha)?;
    let m = f.level;
    let base = f.samples[0].to_f64_lossy().powi(2) + f.samples[1usize << m].to_f64_lossy().powi(2);
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for n in 0..=m {
        let s = level_sum(exec, 1usize << n, |i| {
            Ok(f.sample(n, i + 1)? - f.sample(n, i)?)
        })?;
        levels.push(n);
        terms.push(2f64.powf((2.0 * alpha - 1.0) * n as f64) * s);
    }
    Ok(NormReport::squared(
        Space::Besov { alpha },
        base,
        levels,
        terms,
        m,
    ))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            what: "alpha",
            value: alpha,
            range: "(1/2, 1)",
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > CriticalConstants::get().b1 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            what: "sigma",
            value: sigma,
            range: "(log3/log5, inf)",
        })
    }
}

fn level_weight(sigma: f64, n: usize) -> f64 {
    (5f64.powf(sigma) / 3.0).powi(n as i32)
}

pub fn ttilde_norm<S: Scalar>(f: &LineFunction<S>, sigma: f64) -> Result<NormReport> {
    ttilde_norm_with(f, sigma, Execution::default())
}

/// `‖f‖²_{L²(I)} + Σ_{n=1}^{m−1} Σ_k 5^{nσ} 3^{−n} |D̃f(n,k)|²`.
pub fn ttilde_norm_with<S: Scalar>(
    f: &LineFunction<S>,
    sigma: f64,
    exec: Execution,
) -> Result<NormReport> {
    check_sigma(sigma)?;
    let m = f.level;
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for n in 1..m {
        let s = level_sum(exec, 1usize << n, |i| diff_dtilde(f, n, i + 1))?;
        levels.push(n);
        terms.push(level_weight(sigma, n) * s);
    }
    Ok(NormReport::squared(
        Space::TTilde { sigma },
        f.l2_norm_sq(),
        levels,
        terms,
        m,
    ))
}

pub fn t_norm<S: Scalar>(f: &LineFunction<S>, sigma: f64) -> Result<NormReport> {
    t_norm_with(f, sigma, Execution::default())
}

/// `‖f‖²_{L²(I)} + Σ_{n=2}^{m} Σ_{k=1}^{2^n−1} 5^{nσ} 3^{−n} |Df(n,k)|²`.
pub fn t_norm_with<S: Scalar>(
    f: &LineFunction<S>,
    sigma: f64,
    exec: Execution,
) -> Result<NormReport> {
    check_sigma(sigma)?;
    let m = f.level;
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for n in 2..=m {
        let s = level_sum(exec, (1usize << n) - 1, |i| diff_d(f, n, i + 1))?;
        levels.push(n);
        terms.push(level_weight(sigma, n) * s);
    }
    Ok(NormReport::squared(
        Space::T { sigma },
        f.l2_norm_sq(),
        levels,
        terms,
        m,
    ))
}

pub fn tinf_norm<S: Scalar>(f: &LineFunction<S>) -> Result<NormReport> {
    tinf_norm_with(f, Execution::default())
}

/// `sup_{n ≥ 2} 5^n max_k |Df(n,k)|` over the available levels.
pub fn tinf_norm_with<S: Scalar>(f: &LineFunction<S>, exec: Execution) -> Result<NormReport> {
    let m = f.level;
    if m < 2 {
        return Err(Error::InsufficientDepth(format!(
            "T^∞ needs level ≥ 2, have {m}"
        )));
    }
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for n in 2..=m {
        let vals = exec::map_range(exec, (1usize << n) - 1, |i| {
            diff_d(f, n, i + 1).map(|d| d.abs().to_f64_lossy())
        });
        let vals = vals.into_iter().collect::<Result<Vec<f64>>>()?;
        let mx = vals.iter().copied().fold(0.0, f64::max);
        levels.push(n);
        terms.push(5f64.powi(n as i32) * mx);
    }
    let mut run = 0.0f64;
    let partials: Vec<f64> = terms
        .iter()
        .map(|&t| {
            run = run.max(t);
            run
        })
        .collect();
    Ok(NormReport {
        space: Space::TInf,
        value: run,
        base: 0.0,
        levels,
        terms,
        partials,
        truncation: m,
    })
}

/// Dispatches on a [`Space`].
pub fn norm<S: Scalar>(f: &LineFunction<S>, space: Space, exec: Execution) -> Result<NormReport> {
    match space {
        Space::Besov { alpha } => besov_norm_with(f, alpha, exec),
        Space::TTilde { sigma } => ttilde_norm_with(f, sigma, exec),
        Space::T { sigma } => t_norm_with(f, sigma, exec),
        Space::TInf => tinf_norm_with(f, exec),
    }
}

/// Critical exponents and recursion eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    /// `log 3 / log 5`.
    pub b1: f64,
    /// `log(25(17 − √73)/36) / log 5`.
    pub b2: f64,
    /// `(17 + √73)/50`.
    pub lambda_plus: f64,
    /// `(17 − √73)/50`.
    pub lambda_minus: f64,
    /// `log 6 / log 5`.
    pub linear_threshold: f64,
    /// `2 − log 3 / log 5`.
    pub expansion_limit: f64,
}

impl CriticalConstants {
    pub fn get() -> Self {
        let r73 = 73f64.sqrt();
        let ln5 = 5f64.ln();
        let b1 = 3f64.ln() / ln5;
        CriticalConstants {
            b1,
            b2: (25.0 * (17.0 - r73) / 36.0).ln() / ln5,
            lambda_plus: (17.0 + r73) / 50.0,
            lambda_minus: (17.0 - r73) / 50.0,
            linear_threshold: 6f64.ln() / ln5,
            expansion_limit: 2.0 - b1,
        }
    }

    /// `α(σ)`, defined by `5^σ 3^{−1} = 2^{2α−1}`.
    pub fn alpha(sigma: f64) -> f64 {
        (sigma * 5f64.ln() - 3f64.ln()) / (2.0 * 2f64.ln()) + 0.5
    }

    /// Inverse of [`CriticalConstants::alpha`].
    pub fn sigma(alpha: f64) -> f64 {
        ((2.0 * alpha - 1.0) * 2f64.ln() + 3f64.ln()) / 5f64.ln()
    }
}

pub fn constants() -> CriticalConstants {
    CriticalConstants::get()
}

/// Qualitative behaviour of a sequence of per-level ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Convergent,
    Critical,
    Divergent,
    Inconclusive,
}

const TAIL: usize = 4;

/// Like [`classify_ratios`] on consecutive term ratios, except that a tail of
/// exactly vanishing terms (the last five) counts as convergent.
pub fn classify_terms(terms: &[f64], tol: f64) -> Trend {
    if terms.len() > TAIL && terms[terms.len() - TAIL - 1..].iter().all(|t| *t == 0.0) {
        return Trend::Convergent;
    }
    let ratios: Vec<f64> = terms.windows(2).map(|w| w[1] / w[0]).collect();
    classify_ratios(&ratios, tol)
}

/// Classifies the tail of `ratios` (at least four entries are used).
///
/// Critical: every tail ratio within `tol` of 1. Divergent: every tail
/// ratio above `1 + tol`. Convergent: every tail ratio below `1 − tol`.
pub fn classify_ratios(ratios: &[f64], tol: f64) -> Trend {
    if ratios.len() < TAIL {
        return Trend::Inconclusive;
    }
    let tail = &ratios[ratios.len() - TAIL..];
    if tail.iter().any(|r| !r.is_finite()) {
        return Trend::Inconclusive;
    }
    if tail.iter().all(|r| (r - 1.0).abs() <= tol) {
        Trend::Critical
    } else if tail.iter().all(|&r| r > 1.0 + tol) {
        Trend::Divergent
    } else if tail.iter().all(|&r| r < 1.0 - tol) {
        Trend::Convergent
    } else {
        Trend::Inconclusive
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::{apex_vertex, PairIndex};
    use crate::harmonic::{bottom_trace, HarmonicFunction, TentFunction};
    use crate::scalar::Rational;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn linear(m: usize) -> LineFunction<Rational> {
        LineFunction::from_fn(m, |j| Rational::new(j.into(), (1u64 << m).into())).unwrap()
    }

    fn tent_trace(apex: crate::address::VertexId, m: usize) -> LineFunction<Rational> {
        let t = TentFunction::new(apex);
        bottom_trace(&t.on_level::<Rational>(t.level()).unwrap(), m).unwrap()
    }

    #[test]
    fn restrict_examples() {
        let h = HarmonicFunction::new(q(1, 1), q(0, 1), q(0, 1));
        let tr = restrict(&h.on_level(2).unwrap()).unwrap();
        assert_eq!(
            tr.samples(),
            [q(0, 1), q(4, 25), q(1, 5), q(4, 25), q(0, 1)]
        );
        let ones = HarmonicFunction::new(q(1, 1), q(1, 1), q(1, 1))
            .trace(3)
            .unwrap();
        assert!(ones.samples().iter().all(|v| *v == q(1, 1)));
        let t = tent_trace(apex_vertex(PairIndex::new(1, 1).unwrap()), 2);
        assert_eq!(t.samples(), [q(0, 1), q(1, 5), q(0, 1), q(0, 1), q(0, 1)]);
    }

    #[test]
    fn diff_a_examples() {
        let tr = HarmonicFunction::new(q(1, 1), q(0, 1), q(0, 1))
            .trace(3)
            .unwrap();
        assert_eq!(diff_a(&tr, 1).unwrap(), [q(1, 5), q(-1, 5)]);
        assert_eq!(a_norm_sq(&tr, 1).unwrap(), q(2, 25));
        let lin = linear(4);
        assert!(diff_a(&lin, 3).unwrap().iter().all(|d| *d == q(1, 8)));
        assert!(diff_a(&lin, 5).is_err());
    }

    #[test]
    fn dtilde_examples() {
        let tr = HarmonicFunction::new(q(3, 7), q(-1, 2), q(5, 3))
            .trace(7)
            .unwrap();
        for n in 1..7 {
            for k in 1..=1usize << n {
                assert!(diff_dtilde(&tr, n, k).unwrap().is_zero());
            }
        }
        let lin = linear(6);
        for n in 1..6 {
            for k in 1..=1usize << n {
                // odd k gives −3/(25·2^{n+1}), even k the opposite sign
                let sign: i64 = if k % 2 == 1 { -1 } else { 1 };
                let want = Rational::new((3 * sign).into(), (25u64 << (n + 1)).into());
                assert_eq!(diff_dtilde(&lin, n, k).unwrap(), want);
            }
        }
        assert!(diff_dtilde(&lin, 6, 1).is_err());
        assert!(diff_dtilde(&lin, 0, 1).is_err());
    }

    #[test]
    fn dtilde_tent_duality() {
        for n0 in 1..=4 {
            for k0 in 1..=1usize << n0 {
                let f = tent_trace(apex_vertex(PairIndex::new(n0, k0).unwrap()), 6);
                let tab = DifferenceTable::build(&f, DifferenceKind::DTilde).unwrap();
                for (i, row) in tab.rows.iter().enumerate() {
                    let n = i + 1;
                    for (j, v) in row.iter().enumerate() {
                        let want = if n == n0 && j + 1 == k0 {
                            q(1, 5)
                        } else {
                            q(0, 1)
                        };
                        assert_eq!(*v, want, "tent ({n0},{k0}) at ({n},{})", j + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn d_examples() {
        let tr = HarmonicFunction::new(q(1, 1), q(0, 1), q(0, 1))
            .trace(4)
            .unwrap();
        assert!(diff_d(&tr, 2, 2).unwrap().is_zero());
        let half = crate::address::vertex_of_dyadic(DyadicPoint::new(1, 1).unwrap());
        let phi = tent_trace(half, 4);
        assert_eq!(diff_d(&phi, 2, 2).unwrap(), q(1, 2));
        let lin = linear(5);
        for n in 2..=5 {
            for k in (2..(1usize << n)).step_by(2) {
                assert!(diff_d(&lin, n, k).unwrap().is_zero());
            }
            for k in (1..(1usize << n)).step_by(2) {
                assert_eq!(
                    diff_d(&lin, n, k).unwrap(),
                    diff_dtilde(&lin, n - 1, (k + 1) / 2).unwrap()
                );
            }
        }
        assert!(diff_d(&lin, 2, 4).is_err());
        assert!(diff_d(&lin, 1, 1).is_err());
    }

    #[test]
    fn constants_match_decimals() {
        let c = constants();
        assert!((c.b1 - 0.682606).abs() < 1e-6);
        assert!((c.b2 - 1.09991).abs() < 1e-5);
        assert!((CriticalConstants::alpha(1.0) - 0.868483).abs() < 1e-6);
        assert!((CriticalConstants::alpha(c.b2) - 0.984472).abs() < 1e-6);
        assert!((c.linear_threshold - 1.11328).abs() < 1e-5);
        assert!((5f64.powf(c.b2) / 3.0 - 1.0 / c.lambda_plus).abs() < 1e-12);
        for s in [0.7, 1.0, 1.3, 2.0] {
            let a = CriticalConstants::alpha(s);
            assert!((5f64.powf(s) / 3.0 - 2f64.powf(2.0 * a - 1.0)).abs() < 1e-12);
            assert!((CriticalConstants::sigma(a) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn besov_examples() {
        let ones = LineFunction::new(3, vec![1.0; 9]).unwrap();
        let r = besov_norm(&ones, 0.75).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            besov_norm(&ones, 0.4),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(besov_norm(&ones, 1.0).is_err());
        let h = HarmonicFunction::new(1.0, 0.0, 0.0).trace(10).unwrap();
        let conv = besov_norm(&h, 0.868483).unwrap();
        assert_eq!(
            classify_ratios(&conv.ratios()[3..], 0.01),
            Trend::Convergent
        );
        let div = besov_norm(&h, 0.99).unwrap();
        assert!(div.ratios()[4..].iter().all(|&r| r > 1.0));
    }

    #[test]
    fn ttilde_examples() {
        let h = HarmonicFunction::new(1.0, 0.0, 0.0).trace(6).unwrap();
        let r = ttilde_norm(&h, 1.0).unwrap();
        assert!(r.terms.iter().all(|t| t.abs() < 1e-28));
        assert!((r.value.powi(2) - h.l2_norm_sq()).abs() < 1e-15);
        let t = tent_trace(apex_vertex(PairIndex::new(2, 3).unwrap()), 6).convert::<f64>();
        let r = ttilde_norm(&t, 1.0).unwrap();
        let w = 5f64.powi(2) / 9.0 / 25.0;
        assert!((r.terms[1] - w).abs() < 1e-15);
        assert!(r
            .terms
            .iter()
            .enumerate()
            .all(|(i, x)| i == 1 || x.abs() < 1e-28));
        let lin = linear(10).convert::<f64>();
        let r = ttilde_norm(&lin, 1.2).unwrap();
        for (n, t) in r.levels.iter().zip(&r.terms) {
            let want = 9.0 / 2500.0 * (5f64.powf(1.2) / 6.0).powi(*n as i32);
            assert!((t - want).abs() < 1e-12 * want);
        }
        assert_eq!(classify_ratios(&r.ratios(), 0.01), Trend::Divergent);
        assert!(ttilde_norm(&lin, 0.5).is_err());
    }

    #[test]
    fn t_and_tinf_examples() {
        let h = HarmonicFunction::new(1.0, 0.0, 0.0).trace(6).unwrap();
        let r = t_norm(&h, 2.0).unwrap();
        assert!(r.terms.iter().all(|t| t.abs() < 1e-20));
        assert!(tinf_norm(&h).unwrap().value < 1e-9);
        let he = HarmonicFunction::new(q(1, 1), q(0, 1), q(0, 1))
            .trace(8)
            .unwrap();
        assert_eq!(tinf_norm(&he).unwrap().value, 0.0);
        let zero = LineFunction::new(4, vec![0.0; 17]).unwrap();
        assert_eq!(t_norm(&zero, 1.5).unwrap().value, 0.0);
        let half = crate::address::vertex_of_dyadic(DyadicPoint::new(1, 1).unwrap());
        let phi = tent_trace(half, 8).convert::<f64>();
        let r = t_norm(&phi, 2.0).unwrap();
        // Df(2,2) = 1/2 and Df(2,1) = Df(2,3) = D̃f(1,·) = −2/5
        assert!((r.terms[0] - 625.0 / 9.0 * (0.25 + 2.0 * 0.16)).abs() < 1e-12);
        assert!(r.terms.windows(2).all(|w| w[1] > w[0]));
        let ti = tinf_norm(&phi).unwrap();
        assert!((ti.terms[0] - 12.5).abs() < 1e-12);
        assert!(ti.terms.windows(2).all(|w| w[1] > w[0]));
        assert!(tinf_norm(&LineFunction::new(1, vec![0.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn report_partials_are_monotone() {
        let f = LineFunction::from_fn(8, |j| ((j * 7919) % 13) as f64 / 13.0).unwrap();
        for space in [
            Space::Besov { alpha: 0.7 },
            Space::TTilde { sigma: 1.0 },
            Space::T { sigma: 1.0 },
            Space::TInf,
        ] {
            let r = norm(&f, space, Execution::Parallel).unwrap();
            assert!(r.partials.windows(2).all(|w| w[1] >= w[0]), "{space}");
            let s = norm(&f, space, Execution::Sequential).unwrap();
            assert_eq!(r, s);
        }
    }

    #[test]
    fn space_spec_round_trip() {
        for s in ["besov:0.75", "ttilde:1.2", "t:2", "tinf"] {
            let sp: Space = s.parse().unwrap();
            assert_eq!(sp.to_string().parse::<Space>().unwrap(), sp);
        }
        assert!("x:1".parse::<Space>().is_err());
    }

    #[test]
    fn trends() {
        assert_eq!(classify_ratios(&[0.5; 5], 0.01), Trend::Convergent);
        assert_eq!(classify_ratios(&[1.0; 5], 0.01), Trend::Critical);
        assert_eq!(classify_ratios(&[1.5; 5], 0.01), Trend::Divergent);
        assert_eq!(
            classify_ratios(&[0.5, 1.5, 0.5, 1.5], 0.01),
            Trend::Inconclusive
        );
        assert_eq!(classify_ratios(&[0.5; 2], 0.01), Trend::Inconclusive);
        // Only the tail counts, so a leading zero term is harmless.
        assert_eq!(classify_ratios(&[f64::INFINITY, 0.5, 0.5, 0.5, 0.5], 0.01), Trend::Convergent);
    }

    #[test]
    fn vanishing_tail_is_convergent() {
        let mut terms = vec![0.5, 1e-3];
        terms.extend([0.0; 5]);
        assert_eq!(classify_terms(&terms, 0.01), Trend::Convergent);
        assert_eq!(classify_terms(&[1.0, 0.0, 0.0, 0.0, 0.0], 0.01), Trend::Inconclusive);
        assert_eq!(classify_terms(&[2.0, 4.0, 8.0, 16.0, 32.0], 0.01), Trend::Divergent);
    }
}
