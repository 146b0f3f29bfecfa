//! Extension of bottom-edge data to the whole gasket: the tent map `Ẽ`,
//! the corrected map `E`, the truncated scheme `E_m`, and the correctors
//! `v₀`, `v₂` they subtract.

use serde::{Deserialize, Serialize};

use crate::address::{apex_index, PairIndex, VertexId};
use crate::energy::{
    galerkin_rhs, integral, normal_derivative, poisson_solve, richardson, Direction, PoissonProblem,
};
use crate::error::{Error, Result};
use crate::harmonic::{extend_once, extend_to, GraphFunction, HarmonicFunction};
use crate::scalar::Scalar;
use crate::traceops::{diff_d, diff_dtilde, LineFunction};

/// Which corrector a construction targets: `∂_n v(q_j) = δ_{0,j}` or
/// `δ_{2,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectorRole {
    V0,
    V2,
}

impl CorrectorRole {
    pub fn target(self) -> [f64; 3] {
        match self {
            CorrectorRole::V0 => [1.0, 0.0, 0.0],
            CorrectorRole::V2 => [0.0, 0.0, 1.0],
        }
    }

    fn corner(self) -> usize {
        match self {
            CorrectorRole::V0 => 0,
            CorrectorRole::V2 => 2,
        }
    }
}

/// `Σ_j ∂_n v(q_j)` against `∫ Δv dμ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussGreenCheck {
    pub derivative_sum: f64,
    pub laplacian_integral: f64,
}

impl GaussGreenCheck {
    pub fn residual(&self) -> f64 {
        (self.derivative_sum - self.laplacian_integral).abs()
    }
}

/// A zero-boundary function with harmonic Laplacian and Kronecker normal
/// derivatives, sampled on `V_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrector<S> {
    pub role: CorrectorRole,
    pub level: usize,
    pub values: GraphFunction<S>,
    /// Boundary triple of the harmonic function `Δv`.
    pub laplacian_boundary: [S; 3],
    /// Extrapolated `∂_n v(q_j)`.
    pub achieved: [f64; 3],
    /// Unextrapolated last terms of the same readings.
    pub raw: [f64; 3],
    pub checksum: GaussGreenCheck,
    /// `R[j][i]`: reading at `q_j` for `Δv = h_i`, measured at `level`.
    pub measured_matrix: [[f64; 3]; 3],
    /// Laplacian triple obtained by solving the measured system.
    pub measured_boundary: [f64; 3],
}

impl<S: Scalar> Corrector<S> {
    pub fn error(&self) -> f64 {
        max_deviation(&self.achieved, &self.role.target())
    }

    pub fn raw_error(&self) -> f64 {
        max_deviation(&self.raw, &self.role.target())
    }

    /// The corrector restricted to `V_level`.
    pub fn at_level(&self, level: usize) -> Result<GraphFunction<S>> {
        if level > self.level {
            return Err(Error::InsufficientDepth(format!(
                "corrector built to level {}, level {level} requested",
                self.level
            )));
        }
        self.values.truncate(level)
    }
}

fn max_deviation(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Error modes of a boundary reading when `Δu` is harmonic: the terms are
/// exactly `L + a 3^{−n} + b 5^{−n}`.
pub const READING_MODES: [f64; 2] = [1.0 / 3.0, 1.0 / 5.0];

fn boundary_readings(u: &GraphFunction<f64>) -> Result<([f64; 3], [f64; 3])> {
    let mut fit = [0.0; 3];
    let mut raw = [0.0; 3];
    for j in 0..3 {
        let r = normal_derivative(u, &VertexId::boundary(j as u8), Direction::Boundary)?;
        fit[j] = richardson(&r.terms_f64(), &READING_MODES)?;
        raw[j] = r.fit.raw_tail;
    }
    Ok((fit, raw))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let scale = a
        .iter()
        .flatten()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .powi(3);
    if !(d.abs() > 1e-12 * scale) {
        return Err(Error::Solver(format!(
            "derivative-targeting system is singular (det {d:e})"
        )));
    }
    let mut x = [0.0; 3];
    for (i, xi) in x.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][i] = b[r];
        }
        *xi = det(m) / d;
    }
    Ok(x)
}

/// Builds `v₀` (or `v₂`) on `V_m` as the solution of `Δv = h`, `v|_{V₀} = 0`
/// for the harmonic `h` whose boundary triple makes the normal derivatives
/// Kronecker.
///
/// Gauss–Green against the harmonic basis gives `∂_n v(q_j) = Σ_i a_i M_ij`
/// with `M` the harmonic mass matrix, so the triple is `M⁻¹ e_0 = (11, −4, −4)`.
/// The same system is also assembled from measured readings at level `m`
/// and solved in floating point; the two must agree.
pub fn build_corrector<S: Scalar>(role: CorrectorRole, m: usize) -> Result<Corrector<S>> {
    if m < 4 {
        return Err(Error::InsufficientDepth(format!("corrector level {m} < 4")));
    }
    let mut measured_matrix = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut b = [0.0; 3];
        b[i] = 1.0;
        let p = PoissonProblem::harmonic_source(m, &HarmonicFunction { boundary: b })?;
        let (fit, _) = boundary_readings(&poisson_solve(&p)?)?;
        for j in 0..3 {
            measured_matrix[j][i] = fit[j];
        }
    }
    let measured_boundary = solve3(measured_matrix, role.target())?;

    let mut a = [S::int(-4), S::int(-4), S::int(-4)];
    a[role.corner()] = S::int(11);
    let closed: Vec<f64> = a.iter().map(|x| x.to_f64_lossy()).collect();
    let drift = measured_boundary
        .iter()
        .zip(&closed)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if drift > 1e-6 * 11.0 {
        return Err(Error::Inconsistent(format!(
            "measured Laplacian triple {measured_boundary:?} is far from {closed:?}"
        )));
    }

    let h = HarmonicFunction {
        boundary: a.clone(),
    };
    let values = poisson_solve(&PoissonProblem::harmonic_source(m, &h)?)?;
    let (achieved, raw) = boundary_readings(&values.convert::<f64>())?;
    // Vertex quadrature integrates harmonic functions exactly.
    let laplacian_integral = integral(&h.on_level(m)?).to_f64_lossy();
    let checksum = GaussGreenCheck {
        derivative_sum: achieved.iter().sum(),
        laplacian_integral,
    };
    Ok(Corrector {
        role,
        level: m,
        values,
        laplacian_boundary: a,
        achieved,
        raw,
        checksum,
        measured_matrix,
        measured_boundary,
    })
}

/// The `v₂` corrector obtained from `v₀` by the reflection swapping `q₀`
/// and `q₂`.
pub fn reflect_corrector<S: Scalar>(v0: &Corrector<S>) -> Corrector<S> {
    let swap = |t: [f64; 3]| [t[2], t[1], t[0]];
    let swap_m = |m: [[f64; 3]; 3]| [swap(m[2]), swap(m[1]), swap(m[0])];
    let [a, b, c] = v0.laplacian_boundary.clone();
    Corrector {
        role: match v0.role {
            CorrectorRole::V0 => CorrectorRole::V2,
            CorrectorRole::V2 => CorrectorRole::V0,
        },
        level: v0.level,
        values: v0.values.permuted([2, 1, 0]),
        laplacian_boundary: [c, b, a],
        achieved: swap(v0.achieved),
        raw: swap(v0.raw),
        checksum: v0.checksum,
        measured_matrix: swap_m(v0.measured_matrix),
        measured_boundary: swap(v0.measured_boundary),
    }
}

/// Which corrections an extension applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "map", content = "m", rename_all = "lowercase")]
pub enum ExtensionKind {
    /// `Ẽ`: harmonic part and tents only.
    Tilde,
    /// `E`: `Ẽ` minus the `v₀` layers.
    Full,
    /// `E_m`: tents and `v₀` layers up to level `m`, then the `v₂` layer.
    Partial(usize),
}

impl std::fmt::Display for ExtensionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtensionKind::Tilde => write!(f, "tilde"),
            ExtensionKind::Full => write!(f, "full"),
            ExtensionKind::Partial(m) => write!(f, "partial:{m}"),
        }
    }
}

impl std::str::FromStr for ExtensionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tilde" => Ok(ExtensionKind::Tilde),
            "full" => Ok(ExtensionKind::Full),
            _ => s
                .strip_prefix("partial:")
                .and_then(|m| m.parse().ok())
                .map(ExtensionKind::Partial)
                .ok_or_else(|| Error::Inconsistent(format!("unknown extension map {s:?}"))),
        }
    }
}

/// Coefficients of the tent expansion read off bottom-edge data at level
/// `M ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionPlan<S> {
    pub source: LineFunction<S>,
    /// Interpolates `f` at `0`, `1/2`, `1`.
    pub harmonic: HarmonicFunction<S>,
    /// `coefficients[n − 1][k − 1] = 5 D̃f(n,k)` for `1 ≤ n < M`.
    pub coefficients: Vec<Vec<S>>,
}

impl<S: Scalar> ExtensionPlan<S> {
    pub fn new(f: &LineFunction<S>) -> Result<Self> {
        let top = f.level();
        if top == 0 {
            return Err(Error::MissingSample("the sample at 1/2 is required".into()));
        }
        let (f0, fh, f1) = (f.sample(0, 0)?, f.sample(1, 1)?, f.sample(0, 1)?);
        let two = S::int(2);
        let apex = S::int(5) * fh - two.clone() * f0.clone() - two * f1.clone();
        let harmonic = HarmonicFunction {
            boundary: [apex, f0, f1],
        };
        let coefficients = (1..top)
            .map(|n| {
                (1..=1usize << n)
                    .map(|k| Ok(S::int(5) * diff_dtilde(f, n, k)?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(ExtensionPlan {
            source: f.clone(),
            harmonic,
            coefficients,
        })
    }

    pub fn source_level(&self) -> usize {
        self.source.level()
    }

    pub fn coefficient(&self, n: usize, k: usize) -> Option<&S> {
        self.coefficients
            .get(n.checked_sub(1)?)?
            .get(k.checked_sub(1)?)
    }

    /// `h + Σ_{n ≤ depth} Σ_k c_(n,k) φ_x(n,k)` on `V_out`.
    pub fn tents(&self, depth: usize, out: usize) -> Result<GraphFunction<S>> {
        let depth = depth.min(self.coefficients.len());
        if out < depth {
            return Err(Error::LevelMismatch {
                expected: depth,
                found: out,
            });
        }
        let mut g = GraphFunction::new(0, self.harmonic.boundary.to_vec())?;
        for n in 1..=depth {
            g = extend_once(&g)?;
            for (i, c) in self.coefficients[n - 1].iter().enumerate() {
                let x = apex_index(PairIndex::new(n, i + 1)?);
                let v = &mut g.values_mut()[x];
                *v = v.clone() + c.clone();
            }
        }
        extend_to(&g, out)
    }

    pub fn tilde(&self, out: usize) -> Result<GraphFunction<S>> {
        self.check_output(out)?;
        self.tents(self.coefficients.len(), out)
    }

    pub fn full(&self, out: usize, v0: &Corrector<S>) -> Result<GraphFunction<S>> {
        self.check_output(out)?;
        let mut g = self.tilde(out)?;
        self.subtract_v0_layers(&mut g, self.coefficients.len(), v0)?;
        Ok(g)
    }

    /// The `E_m` scheme on `V_out`; requires `m < M` and `out > m`.
    pub fn partial(
        &self,
        m: usize,
        out: usize,
        v0: &Corrector<S>,
        v2: &Corrector<S>,
    ) -> Result<GraphFunction<S>> {
        if m == 0 || m >= self.source_level() {
            return Err(Error::OutOfDomain {
                what: "truncation level",
                value: m as f64,
                range: "1 <= m < source level",
            });
        }
        if out <= m {
            return Err(Error::LevelMismatch {
                expected: m + 1,
                found: out,
            });
        }
        let mut g = self.tents(m, out)?;
        self.subtract_v0_layers(&mut g, m, v0)?;
        let layer = v2.at_level(out - m - 1)?;
        let weight = S::ratio(24, 5);
        for k in 1..(1usize << m) {
            let d = diff_d(&self.source, m + 1, 2 * k)?;
            if d.is_zero() {
                continue;
            }
            let cell = PairIndex::new(m + 1, 2 * k)?.cell_index();
            g.add_in_cell(m + 1, cell, &layer, &-(weight.clone() * d))?;
        }
        Ok(g)
    }

    pub fn extend(
        &self,
        kind: ExtensionKind,
        out: usize,
        v0: Option<&Corrector<S>>,
        v2: Option<&Corrector<S>>,
    ) -> Result<GraphFunction<S>> {
        fn need<'a, S>(c: Option<&'a Corrector<S>>, name: &str) -> Result<&'a Corrector<S>> {
            c.ok_or_else(|| Error::InsufficientDepth(format!("{name} corrector not supplied")))
        }
        match kind {
            ExtensionKind::Tilde => self.tilde(out),
            ExtensionKind::Full => self.full(out, need(v0, "v0")?),
            ExtensionKind::Partial(m) => self.partial(m, out, need(v0, "v0")?, need(v2, "v2")?),
        }
    }

    /// Cells `F_{w(n,k)} F₀ SG` carrying a `v₀` layer, as (level, index).
    pub fn corrector_cells(&self, depth: usize) -> Vec<(usize, usize)> {
        let depth = depth.min(self.coefficients.len());
        (1..=depth)
            .flat_map(|n| (1..=1usize << n).map(move |k| (n + 1, 3 * pair_cell(n, k))))
            .collect()
    }

    fn check_output(&self, out: usize) -> Result<()> {
        if out < self.source_level() {
            return Err(Error::LevelMismatch {
                expected: self.source_level(),
                found: out,
            });
        }
        Ok(())
    }

    fn subtract_v0_layers(
        &self,
        g: &mut GraphFunction<S>,
        depth: usize,
        v0: &Corrector<S>,
    ) -> Result<()> {
        let out = g.level();
        let weight = S::ratio(12, 5);
        for n in 1..=depth.min(self.coefficients.len()) {
            let layer = v0.at_level(out - n - 1)?;
            for (i, c) in self.coefficients[n - 1].iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let cell = 3 * pair_cell(n, i + 1);
                g.add_in_cell(n + 1, cell, &layer, &-(weight.clone() * c.clone()))?;
            }
        }
        Ok(())
    }
}

fn pair_cell(n: usize, k: usize) -> usize {
    PairIndex::new(n, k).expect("pair in range").cell_index()
}

/// Corrector level needed by [`full_extend`] at output level `out`.
pub fn required_corrector_level(out: usize) -> usize {
    out.saturating_sub(2)
}

pub fn tilde_extend<S: Scalar>(f: &LineFunction<S>, out: usize) -> Result<GraphFunction<S>> {
    ExtensionPlan::new(f)?.tilde(out)
}

pub fn full_extend<S: Scalar>(
    f: &LineFunction<S>,
    out: usize,
    v0: &Corrector<S>,
) -> Result<GraphFunction<S>> {
    ExtensionPlan::new(f)?.full(out, v0)
}

pub fn partial_extend<S: Scalar>(
    f: &LineFunction<S>,
    m: usize,
    out: usize,
    v0: &Corrector<S>,
    v2: &Corrector<S>,
) -> Result<GraphFunction<S>> {
    ExtensionPlan::new(f)?.partial(m, out, v0, v2)
}

/// Exact Galerkin load for the corrector's Laplacian, for consumers that
/// need `Δv` on the same grid.
pub fn corrector_laplacian<S: Scalar>(c: &Corrector<S>) -> Result<GraphFunction<S>> {
    galerkin_rhs(
        &HarmonicFunction {
            boundary: c.laplacian_boundary.clone(),
        },
        c.level,
    )
}
