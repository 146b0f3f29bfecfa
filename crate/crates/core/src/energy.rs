//! Discrete energies, the renormalized graph Laplacian, Poisson solves,
//! normal derivatives and Riesz representers of bottom-edge functionals.
//!
//! Conventions: `E_m(u) = (5/3)^m Σ_cells Σ_{i<j} (u(c_i) − u(c_j))²`,
//! `Δ_m u(x) = (3/2) 5^m (Σ_{y∼x} u(y) − 4u(x))`, and the vertex weight
//! `μ_m(x) = (2/3) 3^{−m}` (`(1/3) 3^{−m}` on `V₀`), so that
//! `E_m(u, v) = −Σ_x Δ_m u(x) v(x) μ_m(x)` whenever `v|_{V₀} = 0`.

use serde::{Deserialize, Serialize};

use crate::address::{
    self, bottom_vertex_index, cell_corners, cell_midpoint, check_level, level_offset, pow3,
    vertex_count, DyadicPoint, VertexId,
};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::harmonic::{GraphFunction, HarmonicFunction};
use crate::scalar::Scalar;
use crate::traceops::{diff_d, diff_dtilde, LineFunction};

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// A level-`m` energy value.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyValue<S> {
    pub level: usize,
    pub value: S,
}

pub fn energy<S: Scalar>(u: &GraphFunction<S>) -> EnergyValue<S> {
    energy_with(u, Execution::default())
}

pub fn energy_with<S: Scalar>(u: &GraphFunction<S>, exec: Execution) -> EnergyValue<S> {
    let value = bilinear_raw(u, u, exec);
    EnergyValue {
        level: u.level(),
        value,
    }
}

/// `E_m(u, v)`.
pub fn bilinear_energy<S: Scalar>(u: &GraphFunction<S>, v: &GraphFunction<S>) -> Result<S> {
    bilinear_energy_with(u, v, Execution::default())
}

pub fn bilinear_energy_with<S: Scalar>(
    u: &GraphFunction<S>,
    v: &GraphFunction<S>,
    exec: Execution,
) -> Result<S> {
    if u.level() != v.level() {
        return Err(Error::LevelMismatch {
            expected: u.level(),
            found: v.level(),
        });
    }
    Ok(bilinear_raw(u, v, exec))
}

fn bilinear_raw<S: Scalar>(u: &GraphFunction<S>, v: &GraphFunction<S>, exec: Execution) -> S {
    let m = u.level();
    let sum = exec::ordered_sum(exec, pow3(m), |cell| {
        let c = cell_corners(m, cell);
        PAIRS.iter().fold(S::zero(), |acc, &(i, j)| {
            acc + (u.at(c[i]).clone() - u.at(c[j]).clone())
                * (v.at(c[i]).clone() - v.at(c[j]).clone())
        })
    });
    S::pow_ratio(5, 3, m) * sum
}

/// `μ_m(x)`.
pub fn vertex_measure<S: Scalar>(idx: usize, m: usize) -> S {
    let w = if idx < 3 {
        S::ratio(1, 3)
    } else {
        S::ratio(2, 3)
    };
    w * S::pow_ratio(1, 3, m)
}

/// Vertex quadrature `Σ_x μ_m(x) u(x)`, equal to the sum over cells of the
/// corner average times the cell measure.
pub fn integral<S: Scalar>(u: &GraphFunction<S>) -> S {
    let m = u.level();
    exec::ordered_sum(Execution::default(), vertex_count(m), |i| {
        vertex_measure::<S>(i, m) * u.at(i).clone()
    })
}

/// `Δ_m u(x)` at an interior vertex.
pub fn graph_laplacian<S: Scalar>(u: &GraphFunction<S>, x: &VertexId) -> Result<S> {
    if x.is_boundary() {
        return Err(Error::Inconsistent(format!("{x} is a boundary vertex")));
    }
    let m = u.level();
    if x.level() > m {
        return Err(Error::IndexOutOfRange(format!("{x} is not in V_{m}")));
    }
    Ok(laplacian_at(u, x.index()))
}

fn laplacian_at<S: Scalar>(u: &GraphFunction<S>, idx: usize) -> S {
    let m = u.level();
    let ux = u.at(idx).clone();
    let s = address::neighbors(idx, m)
        .into_iter()
        .fold(S::zero(), |acc, y| acc + u.at(y).clone() - ux.clone());
    S::ratio(3, 2) * S::pow_ratio(5, 1, m) * s
}

/// `Δ_m u` at every interior vertex (zero on `V₀`).
pub fn laplacian<S: Scalar>(u: &GraphFunction<S>) -> GraphFunction<S> {
    laplacian_with(u, Execution::default())
}

pub fn laplacian_with<S: Scalar>(u: &GraphFunction<S>, exec: Execution) -> GraphFunction<S> {
    let m = u.level();
    let values = exec::map_range(exec, vertex_count(m), |i| {
        if i < 3 {
            S::zero()
        } else {
            laplacian_at(u, i)
        }
    });
    GraphFunction::new(m, values).expect("level already checked")
}

/// `Δ_m u = f` on the interior of `V_m` with `u|_{V₀}` prescribed. The
/// boundary entries of `rhs` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonProblem<S> {
    pub boundary: [S; 3],
    pub rhs: GraphFunction<S>,
}

impl<S: Scalar> PoissonProblem<S> {
    pub fn new(boundary: [S; 3], rhs: GraphFunction<S>) -> Self {
        PoissonProblem { boundary, rhs }
    }

    pub fn level(&self) -> usize {
        self.rhs.level()
    }

    /// Constant right-hand side with zero boundary data.
    pub fn constant(m: usize, value: S) -> Result<Self> {
        Ok(PoissonProblem {
            boundary: [S::zero(), S::zero(), S::zero()],
            rhs: GraphFunction::from_fn(m, |_| value.clone())?,
        })
    }

    /// Zero boundary data and the load that makes the discrete solution the
    /// exact restriction of the solution with harmonic `Δu = h`.
    pub fn harmonic_source(m: usize, h: &HarmonicFunction<S>) -> Result<Self> {
        Ok(PoissonProblem {
            boundary: [S::zero(), S::zero(), S::zero()],
            rhs: galerkin_rhs(h, m)?,
        })
    }
}

/// `∫_{SG} h_i h_j dμ` for the harmonic basis `h_i(q_j) = δ_ij`.
pub fn mass_matrix<S: Scalar>() -> [[S; 3]; 3] {
    let d = S::ratio(7, 45);
    let o = S::ratio(4, 45);
    [
        [d.clone(), o.clone(), o.clone()],
        [o.clone(), d.clone(), o.clone()],
        [o.clone(), o, d],
    ]
}

/// Load `r(x) = μ_m(x)^{−1} ∫ h φ_x dμ` for a harmonic `h`, where `φ_x`
/// is the level-`m` tent at `x`.
pub fn galerkin_rhs<S: Scalar>(h: &HarmonicFunction<S>, m: usize) -> Result<GraphFunction<S>> {
    let hv = h.on_level(m)?;
    let mass = mass_matrix::<S>();
    let cell_measure = S::pow_ratio(1, 3, m);
    let values = exec::map_range(Execution::default(), vertex_count(m), |x| {
        if x < 3 {
            return S::zero();
        }
        let mut acc = S::zero();
        for (cell, i) in address::vertex_cells(x, m) {
            let c = cell_corners(m, cell);
            for (j, &cj) in c.iter().enumerate() {
                acc = acc + mass[i as usize][j].clone() * hv.at(cj).clone();
            }
        }
        acc * cell_measure.clone() / vertex_measure::<S>(x, m)
    });
    GraphFunction::new(m, values)
}

pub fn poisson_solve<S: Scalar>(p: &PoissonProblem<S>) -> Result<GraphFunction<S>> {
    poisson_solve_with(p, Execution::default())
}

/// Direct solve by eliminating the cell tree from the finest level up.
///
/// Each level-`j` cell owns its three midpoints. Eliminating them folds
/// their loads onto the cell corners with the harmonic extension weights;
/// the back substitution then adds a local correction `K⁻¹(−λ/2s)` to the
/// harmonic extension of the corner values.
pub fn poisson_solve_with<S: Scalar>(
    p: &PoissonProblem<S>,
    exec: Execution,
) -> Result<GraphFunction<S>> {
    let m = p.level();
    check_level(m)?;
    let n = vertex_count(m);
    // λ(x) = 2 μ_m(x) f(x): the linear term of E_m(u) + Σ λ u.
    let scale = S::ratio(4, 3) * S::pow_ratio(1, 3, m);
    let mut load: Vec<S> = exec::map_range(exec, n, |i| {
        if i < 3 {
            S::zero()
        } else {
            scale.clone() * p.rhs.at(i).clone()
        }
    });
    let weight = |opp: usize, corner: usize| {
        if opp == corner {
            S::ratio(1, 5)
        } else {
            S::ratio(2, 5)
        }
    };
    for j in (0..m).rev() {
        let contrib = {
            let load = &load;
            exec::map_range(exec, pow3(j), |cell| {
                let mids = [0, 1, 2].map(|o| load[cell_midpoint(j, cell, o)].clone());
                let mut out = [S::zero(), S::zero(), S::zero()];
                for (i, slot) in out.iter_mut().enumerate() {
                    for (o, l) in mids.iter().enumerate() {
                        *slot = slot.clone() + weight(o, i) * l.clone();
                    }
                }
                out
            })
        };
        for (cell, c) in contrib.into_iter().enumerate() {
            for (corner, v) in cell_corners(j, cell).into_iter().zip(c) {
                if corner >= 3 {
                    load[corner] = load[corner].clone() + v;
                }
            }
        }
    }
    let mut u = vec![S::zero(); n];
    u[..3].clone_from_slice(&p.boundary);
    for j in 0..m {
        let half_inv_s = S::ratio(1, 2) * S::pow_ratio(3, 5, j + 1);
        let (old, rest) = u.split_at_mut(level_offset(j + 1));
        let block = &mut rest[..3 * pow3(j)];
        let old: &[S] = old;
        let load = &load;
        exec::for_each_chunk_mut(exec, block, 3 * 243, |t, chunk| {
            for (local, out) in chunk.chunks_mut(3).enumerate() {
                let cell = t * 243 + local;
                let c = cell_corners(j, cell).map(|i| old[i].clone());
                let z = [0, 1, 2]
                    .map(|o| -(load[cell_midpoint(j, cell, o)].clone()) * half_inv_s.clone());
                let zsum = z[0].clone() + z[1].clone() + z[2].clone();
                for (o, slot) in out.iter_mut().enumerate() {
                    let harmonic = crate::harmonic::midpoint(&c, o);
                    let corr = (z[o].clone() + zsum.clone() * S::ratio(1, 2)) * S::ratio(1, 5);
                    *slot = harmonic + corr;
                }
            }
        });
    }
    GraphFunction::new(m, u)
}

/// Matrix-free conjugate gradients on the interior unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub fn poisson_solve_cg(
    p: &PoissonProblem<f64>,
    tol: f64,
) -> Result<(GraphFunction<f64>, CgReport)> {
    let m = p.level();
    check_level(m)?;
    let n = vertex_count(m);
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            if i < 3 {
                vec![]
            } else {
                address::neighbors(i, m)
            }
        })
        .collect();
    let mut u = vec![0.0; n];
    u[..3].copy_from_slice(&p.boundary);
    // (4u − Σ u_y)(x) = −(2/3) 5^{−m} f(x), boundary values moved right.
    let c = -(2.0 / 3.0) * 5f64.powi(-(m as i32));
    let mut b = vec![0.0; n];
    for i in 3..n {
        b[i] = c * p.rhs.at(i)
            + nbrs[i]
                .iter()
                .filter(|&&y| y < 3)
                .map(|&y| u[y])
                .sum::<f64>();
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 3..n {
            out[i] = 4.0 * x[i]
                - nbrs[i]
                    .iter()
                    .filter(|&&y| y >= 3)
                    .map(|&y| x[y])
                    .sum::<f64>();
        }
    };
    let dot = |a: &[f64], b: &[f64]| a[3..].iter().zip(&b[3..]).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut q = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let max_iter = 10 * n + 100;
    let mut it = 0;
    while rr.sqrt() > tol * bnorm.max(f64::MIN_POSITIVE) {
        if it >= max_iter {
            return Err(Error::Solver(format!(
                "CG stalled at residual {}",
                rr.sqrt() / bnorm
            )));
        }
        apply(&d, &mut q);
        let alpha = rr / dot(&d, &q);
        for i in 3..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 3..n {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
        it += 1;
    }
    u[3..].copy_from_slice(&x[3..]);
    let rel = if bnorm > 0.0 { rr.sqrt() / bnorm } else { 0.0 };
    Ok((
        GraphFunction::new(m, u)?,
        CgReport {
            iterations: it,
            relative_residual: rel,
        },
    ))
}

/// Direction of a normal derivative: `Boundary` at `q_i`, otherwise the
/// corner through which the vertex is approached (`Up` = `q₀`, `Left` =
/// `q₁`, `Right` = `q₂`). On the bottom edge `Left` reads the cell to the
/// right of the point and `Right` the cell to its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Boundary,
    Up,
    Left,
    Right,
}

impl Direction {
    fn corner(self) -> Option<u8> {
        match self {
            Direction::Boundary => None,
            Direction::Up => Some(0),
            Direction::Left => Some(1),
            Direction::Right => Some(2),
        }
    }
}

/// Three-term geometric extrapolation `s_n ≈ L + c ρ^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub rho: f64,
    pub raw_tail: f64,
    /// False when the tail does not contract (`|ρ| ≥ 1`); `limit` is then
    /// the raw tail.
    pub converging: bool,
}

pub fn extrapolate(seq: &[f64]) -> Result<Extrapolation> {
    if seq.len() < 3 {
        return Err(Error::InsufficientDepth(format!(
            "{} terms, need 3",
            seq.len()
        )));
    }
    let [s0, s1, s2] = [seq[seq.len() - 3], seq[seq.len() - 2], seq[seq.len() - 1]];
    let (d1, d2) = (s1 - s0, s2 - s1);
    if d2 == 0.0 {
        return Ok(Extrapolation {
            limit: s2,
            rho: 0.0,
            raw_tail: s2,
            converging: true,
        });
    }
    let rho = d2 / d1;
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Ok(Extrapolation {
            limit: s2,
            rho,
            raw_tail: s2,
            converging: false,
        });
    }
    Ok(Extrapolation {
        limit: s2 + d2 * rho / (1.0 - rho),
        rho,
        raw_tail: s2,
        converging: true,
    })
}

/// Removes geometric error modes with known ratios, one after another.
pub fn richardson(seq: &[f64], ratios: &[f64]) -> Result<f64> {
    if seq.len() < ratios.len() + 1 {
        return Err(Error::InsufficientDepth(format!(
            "{} terms for {} modes",
            seq.len(),
            ratios.len()
        )));
    }
    let mut s = seq.to_vec();
    for &r in ratios {
        s = s
            .windows(2)
            .map(|w| (w[1] - r * w[0]) / (1.0 - r))
            .collect();
    }
    Ok(*s.last().expect("nonempty"))
}

/// A renormalized difference sequence and its extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReading<S> {
    pub vertex: VertexId,
    pub direction: Direction,
    /// Absolute level of each term.
    pub levels: Vec<usize>,
    pub terms: Vec<S>,
    pub fit: Extrapolation,
}

impl<S: Scalar> DerivativeReading<S> {
    pub fn limit(&self) -> f64 {
        self.fit.limit
    }

    pub fn terms_f64(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.to_f64_lossy()).collect()
    }
}

/// `(5/3)^{|w|+n} (2u(x) − u(F_w F_i^n q_j) − u(F_w F_i^n q_k))` for
/// `x = F_w q_i`, `n = 0, 1, …` as deep as `u` allows.
pub fn normal_derivative<S: Scalar>(
    u: &GraphFunction<S>,
    vertex: &VertexId,
    direction: Direction,
) -> Result<DerivativeReading<S>> {
    let corner = match direction.corner() {
        None if vertex.is_boundary() => vertex.corner(),
        None => {
            return Err(Error::Inconsistent(format!(
                "{vertex} is not a boundary vertex"
            )))
        }
        Some(c) => c,
    };
    let w = vertex.address_with_corner(corner).ok_or_else(|| {
        Error::Inconsistent(format!("{vertex} is not a q{corner} corner of any cell"))
    })?;
    let m = u.level();
    if w.len() > m {
        return Err(Error::InsufficientDepth(format!(
            "{vertex} is not in V_{m}"
        )));
    }
    let ux = u.at(vertex.index()).clone();
    let (j, k) = match corner {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    let mut word = w.clone();
    for n in 0..=(m - w.len()) {
        if n > 0 {
            word.push(corner);
        }
        let y = VertexId::new(word.clone(), j)?.index();
        let z = VertexId::new(word.clone(), k)?.index();
        let d = S::int(2) * ux.clone() - u.at(y).clone() - u.at(z).clone();
        levels.push(w.len() + n);
        terms.push(S::pow_ratio(5, 3, w.len() + n) * d);
    }
    let fit = extrapolate(&terms.iter().map(|t| t.to_f64_lossy()).collect::<Vec<_>>())?;
    Ok(DerivativeReading {
        vertex: vertex.clone(),
        direction,
        levels,
        terms,
        fit,
    })
}

/// The bottom-edge formula for one-sided derivatives,
/// `(5/3)^m (4f(x) − 5f(x ± 2^{−m−1}) + f(x ± 2^{−m}))`, with `+` for
/// [`Direction::Left`] and `−` for [`Direction::Right`].
pub fn edge_derivative<S: Scalar>(
    f: &LineFunction<S>,
    x: DyadicPoint,
    side: Direction,
) -> Result<DerivativeReading<S>> {
    let x = x.reduced();
    let plus = match side {
        Direction::Left => true,
        Direction::Right => false,
        _ => return Err(Error::Inconsistent("side must be left or right".into())),
    };
    let one = DyadicPoint::one();
    if (plus && x == one) || (!plus && x == DyadicPoint::zero()) {
        return Err(Error::OutOfDomain {
            what: "point",
            value: x.value(),
            range: "no room on the requested side",
        });
    }
    let l = x.level();
    let top = f.level();
    if top < l + 3 {
        return Err(Error::InsufficientDepth(format!(
            "need samples to level {}, have {top}",
            l + 3
        )));
    }
    let mut levels = Vec::new();
    let mut terms = Vec::new();
    for m in l..top {
        let j = x.index_at(m + 1).expect("point on grid");
        let (near, far) = if plus { (j + 1, j + 2) } else { (j - 1, j - 2) };
        let d = S::int(4) * f.sample(m + 1, j)? - S::int(5) * f.sample(m + 1, near)?
            + f.sample(m + 1, far)?;
        levels.push(m);
        terms.push(S::pow_ratio(5, 3, m) * d);
    }
    let fit = extrapolate(&terms.iter().map(|t| t.to_f64_lossy()).collect::<Vec<_>>())?;
    let vertex = address::vertex_of_dyadic(x);
    Ok(DerivativeReading {
        vertex,
        direction: side,
        levels,
        terms,
        fit,
    })
}

/// Linear functionals of bottom-edge data with Riesz representers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceFunctional {
    /// `f ↦ D̃f(1,1)`.
    DTilde11,
    /// `f ↦ D̃f(1,2)`.
    DTilde12,
    /// `f ↦ Df(2,2)`.
    D22,
}

impl TraceFunctional {
    pub fn apply<S: Scalar>(self, f: &LineFunction<S>) -> Result<S> {
        match self {
            TraceFunctional::DTilde11 => diff_dtilde(f, 1, 1),
            TraceFunctional::DTilde12 => diff_dtilde(f, 1, 2),
            TraceFunctional::D22 => diff_d(f, 2, 2),
        }
    }

    /// Coefficients on the level-2 grid, `f ↦ Σ_j a_j f(j/4)`.
    pub fn stencil<S: Scalar>(self) -> [S; 5] {
        [0, 1, 2, 3, 4].map(|j| {
            let e = LineFunction::from_fn(2, |i| if i == j { S::one() } else { S::zero() })
                .expect("level 2 is always allowed");
            self.apply(&e).expect("level-2 data suffices")
        })
    }
}

/// The zero-boundary `J_m` with `E_m(v, J_m) = −ℓ(v|_I)` for every
/// zero-boundary `v` on `V_m`, i.e. `Δ_m J_m = a_x / μ_m(x)` on the
/// stencil points of `ℓ` and zero elsewhere.
pub fn riesz_representer<S: Scalar>(
    m: usize,
    functional: TraceFunctional,
) -> Result<GraphFunction<S>> {
    if m < 2 {
        return Err(Error::InsufficientDepth(format!(
            "representer level {m} < 2"
        )));
    }
    let mut rhs = GraphFunction::<S>::zeros(m)?;
    for (j, a) in functional.stencil::<S>().into_iter().enumerate() {
        let idx = bottom_vertex_index(2, j);
        if idx >= 3 {
            rhs.values_mut()[idx] = a / vertex_measure::<S>(idx, m);
        }
    }
    poisson_solve(&PoissonProblem::new([S::zero(), S::zero(), S::zero()], rhs))
}

/// `Σ_x μ_m(x) f(x) g(x)`.
pub fn pairing<S: Scalar>(f: &GraphFunction<S>, g: &GraphFunction<S>) -> Result<S> {
    if f.level() != g.level() {
        return Err(Error::LevelMismatch {
            expected: f.level(),
            found: g.level(),
        });
    }
    let m = f.level();
    Ok(exec::ordered_sum(
        Execution::default(),
        vertex_count(m),
        |i| vertex_measure::<S>(i, m) * f.at(i).clone() * g.at(i).clone(),
    ))
}
