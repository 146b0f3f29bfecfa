//! Tent-function expansions `u = h + Σ_n Σ_{x ∈ Ṽ_n} c_x φ_x` and the
//! discrete Sobolev norms built on them.

use serde::{Deserialize, Serialize};

use crate::address::{cell_corners, cell_midpoint, level_offset, pow3, vertex_count, VertexId};
use crate::energy::{laplacian, vertex_measure};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::harmonic::{extend_once, GraphFunction, HarmonicFunction};
use crate::scalar::{Scalar, ScalarMode};
use crate::traceops::CriticalConstants;

/// Harmonic part plus tent coefficients on `Ṽ_1, …, Ṽ_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TentExpansion<S> {
    pub harmonic: HarmonicFunction<S>,
    /// `coefficients[n − 1][i]` belongs to the vertex `level_offset(n) + i`.
    pub coefficients: Vec<Vec<S>>,
}

impl<S: Scalar> TentExpansion<S> {
    pub fn level(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficient(&self, v: &VertexId) -> Option<&S> {
        let n = v.level();
        if n == 0 || n > self.level() {
            return None;
        }
        self.coefficients[n - 1].get(v.index() - level_offset(n))
    }

    pub fn reconstruct(&self) -> Result<GraphFunction<S>> {
        reconstruct(self)
    }
}

pub fn tent_coefficients<S: Scalar>(u: &GraphFunction<S>) -> TentExpansion<S> {
    tent_coefficients_with(u, Execution::default())
}

/// `c_x = u(x) − (harmonic prediction from u|_{V_{n−1}})(x)` for `x ∈ Ṽ_n`.
pub fn tent_coefficients_with<S: Scalar>(
    u: &GraphFunction<S>,
    exec: Execution,
) -> TentExpansion<S> {
    let harmonic = HarmonicFunction {
        boundary: [u.at(0).clone(), u.at(1).clone(), u.at(2).clone()],
    };
    let coefficients = (1..=u.level())
        .map(|n| {
            let parent = n - 1;
            let per_cell = exec::map_range(exec, pow3(parent), |cell| {
                let c = cell_corners(parent, cell).map(|i| u.at(i).clone());
                [0, 1, 2].map(|o| {
                    u.at(cell_midpoint(parent, cell, o)).clone()
                        - crate::harmonic::midpoint(&c, o as usize)
                })
            });
            per_cell.into_iter().flatten().collect()
        })
        .collect();
    TentExpansion {
        harmonic,
        coefficients,
    }
}

/// `h + Σ c_x φ_x` on `V_m`.
pub fn reconstruct<S: Scalar>(e: &TentExpansion<S>) -> Result<GraphFunction<S>> {
    let mut g = GraphFunction::new(0, e.harmonic.boundary.to_vec())?;
    for (i, row) in e.coefficients.iter().enumerate() {
        let n = i + 1;
        g = extend_once(&g)?;
        let off = level_offset(n);
        for (j, c) in row.iter().enumerate() {
            let v = &mut g.values_mut()[off + j];
            *v = v.clone() + c.clone();
        }
    }
    Ok(g)
}

/// A discrete Sobolev norm with per-level contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevNorm {
    pub sigma: f64,
    pub value: f64,
    /// `‖h‖²_{L²}` (coefficient form) or `‖u‖²_{L²}` (`σ = 2` form).
    pub base: f64,
    pub levels: Vec<usize>,
    pub terms: Vec<f64>,
    pub partials: Vec<f64>,
}

impl SobolevNorm {
    fn from_terms(sigma: f64, base: f64, levels: Vec<usize>, terms: Vec<f64>) -> Self {
        let mut acc = base;
        let partials = terms
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect();
        SobolevNorm {
            sigma,
            value: acc.sqrt(),
            base,
            levels,
            terms,
            partials,
        }
    }
}

/// Vertex quadrature of `u²`.
pub fn l2_norm_sq<S: Scalar>(u: &GraphFunction<S>) -> f64 {
    let m = u.level();
    exec::ordered_sum(Execution::default(), vertex_count(m), |i| {
        vertex_measure::<f64>(i, m) * u.at(i).to_f64_lossy().powi(2)
    })
}

pub fn sobolev_norm<S: Scalar>(e: &TentExpansion<S>, sigma: f64) -> Result<SobolevNorm> {
    sobolev_norm_at(e, sigma, e.level())
}

/// Coefficient form, valid for `log3/log5 < σ < 2 − log3/log5`; `‖h‖_{L²}`
/// uses vertex quadrature at level `quadrature_level`.
pub fn sobolev_norm_at<S: Scalar>(
    e: &TentExpansion<S>,
    sigma: f64,
    quadrature_level: usize,
) -> Result<SobolevNorm> {
    let c = CriticalConstants::get();
    if !(sigma > c.b1 && sigma < c.expansion_limit) {
        return Err(Error::OutOfDomain {
            what: "sigma",
            value: sigma,
            range: "(log3/log5, 2 - log3/log5)",
        });
    }
    let base = l2_norm_sq(&e.harmonic.on_level(quadrature_level)?);
    let w = 5f64.powf(sigma) / 3.0;
    let (levels, terms) = e
        .coefficients
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n = i + 1;
            let s: f64 = row.iter().map(|x| x.to_f64_lossy().powi(2)).sum();
            (n, w.powi(n as i32) * s)
        })
        .unzip();
    Ok(SobolevNorm::from_terms(sigma, base, levels, terms))
}

/// `‖u‖²_{L²} + ‖Δu‖²_{L²}` by vertex quadrature; `rhs` must be the
/// discrete Laplacian of `u` on the interior.
pub fn sigma2_norm<S: Scalar>(u: &GraphFunction<S>, rhs: &GraphFunction<S>) -> Result<SobolevNorm> {
    if u.level() != rhs.level() {
        return Err(Error::LevelMismatch {
            expected: u.level(),
            found: rhs.level(),
        });
    }
    let m = u.level();
    let lap = laplacian(u);
    let interior = 3..vertex_count(m);
    match S::MODE {
        ScalarMode::Exact => {
            if interior.clone().any(|i| lap.at(i) != rhs.at(i)) {
                return Err(Error::Inconsistent("rhs is not the Laplacian of u".into()));
            }
        }
        ScalarMode::Float => {
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for i in interior.clone() {
                num = num.max((lap.at(i).clone() - rhs.at(i).clone()).abs().to_f64_lossy());
                den = den.max(rhs.at(i).abs().to_f64_lossy());
            }
            if num > 1e-9 * den.max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "rhs deviates from the Laplacian of u by {num:e} (relative)"
                )));
            }
        }
    }
    let mut masked = rhs.clone();
    for v in &mut masked.values_mut()[..3] {
        *v = S::zero();
    }
    let base = l2_norm_sq(u);
    Ok(SobolevNorm::from_terms(
        2.0,
        base,
        vec![m],
        vec![l2_norm_sq(&masked)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::{apex_vertex, PairIndex};
    use crate::energy::{poisson_solve, PoissonProblem};
    use crate::harmonic::TentFunction;
    use crate::scalar::Rational;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    #[test]
    fn harmonic_has_no_tents() {
        let h = HarmonicFunction::new(q(1, 2), q(-1, 3), q(2, 1));
        let e = tent_coefficients(&h.on_level(5).unwrap());
        assert_eq!(e.harmonic, h);
        assert!(e.coefficients.iter().flatten().all(|c| c.is_zero()));
    }

    #[test]
    fn single_tent() {
        let x: VertexId = "0:2".parse().unwrap();
        let e = tent_coefficients(
            &TentFunction::new(x.clone())
                .on_level::<Rational>(4)
                .unwrap(),
        );
        assert!(e.harmonic.boundary.iter().all(|b| b.is_zero()));
        for (i, row) in e.coefficients.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let want = if level_offset(i + 1) + j == x.index() {
                    q(1, 1)
                } else {
                    q(0, 1)
                };
                assert_eq!(*c, want);
            }
        }
    }

    #[test]
    fn harmonic_plus_tent() {
        let h = HarmonicFunction::new(q(1, 1), q(0, 1), q(0, 1));
        let x = apex_vertex(PairIndex::new(2, 1).unwrap());
        let t = TentFunction::new(x.clone())
            .on_level::<Rational>(4)
            .unwrap();
        let u = h.on_level(4).unwrap().plus(&t.scaled(&q(3, 1))).unwrap();
        let e = tent_coefficients(&u);
        assert_eq!(e.harmonic, h);
        assert_eq!(e.coefficient(&x), Some(&q(3, 1)));
        let nonzero = e
            .coefficients
            .iter()
            .flatten()
            .filter(|c| !c.is_zero())
            .count();
        assert_eq!(nonzero, 1);
        assert_eq!(reconstruct(&e).unwrap(), u);
    }

    #[test]
    fn norm_examples() {
        let zero = GraphFunction::<f64>::zeros(4).unwrap();
        assert_eq!(
            sobolev_norm(&tent_coefficients(&zero), 1.0).unwrap().value,
            0.0
        );
        let n = 3;
        let x = apex_vertex(PairIndex::new(n, 2).unwrap());
        let t = TentFunction::new(x).on_level::<f64>(5).unwrap();
        let r = sobolev_norm(&tent_coefficients(&t), 1.1).unwrap();
        let want = (5f64.powf(1.1) / 3.0).powi(n as i32);
        assert!((r.terms[n - 1] - want).abs() < 1e-12 * want);
        assert!(sobolev_norm(&tent_coefficients(&t), 0.5).is_err());
        assert!(sobolev_norm(&tent_coefficients(&t), 1.5).is_err());
    }

    #[test]
    fn harmonic_l2_quadrature_stabilizes() {
        let h = HarmonicFunction::new(1.0, 0.0, 0.0);
        let e = tent_coefficients(&h.on_level(2).unwrap());
        let a = sobolev_norm_at(&e, 1.0, 8).unwrap().value;
        let b = sobolev_norm_at(&e, 1.0, 10).unwrap().value;
        assert!((a - b).abs() < 5e-4, "{a} {b}");
        // ∫h₀² = 7/45
        assert!((b * b - 7.0 / 45.0).abs() < 1e-3);
    }

    #[test]
    fn sigma2_examples() {
        let h = HarmonicFunction::new(1.0, 0.0, 0.0).on_level(5).unwrap();
        let r = sigma2_norm(&h, &laplacian(&h)).unwrap();
        assert!(r.terms[0] < 1e-20);
        let p = PoissonProblem::constant(8, 1.0).unwrap();
        let u = poisson_solve(&p).unwrap();
        let r = sigma2_norm(&u, &p.rhs).unwrap();
        assert!((r.terms[0] - 1.0).abs() < 1e-2);
        let z = GraphFunction::<f64>::zeros(3).unwrap();
        assert_eq!(sigma2_norm(&z, &z).unwrap().value, 0.0);
        assert!(sigma2_norm(&h, &p.rhs.truncate(5).unwrap()).is_err());
    }
}
