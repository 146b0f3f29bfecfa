//! Numerical experiments with declared tolerances and serializable reports.

mod experiments;
mod report;

pub use experiments::*;
pub use report::{Check, ExperimentReport, Series, Tolerance};

use crate::address::DyadicPoint;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::scalar::{Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub max_level: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { max_level: 10, seed: 0 }
    }
}

/// Experiment ids in suite order.
pub const EXPERIMENTS: &[&str] = &[
    "recursion",
    "b2",
    "dtilde",
    "roundtrip",
    "corrector",
    "matching",
    "symmetric",
    "one-sided",
    "one-sided-harmonic",
    "riesz",
    "thresholds",
    "norms",
    "tent-t-norms",
    "partial-matching",
];

fn unit_triple() -> [Rational; 3] {
    [Rational::int(1), Rational::int(0), Rational::int(0)]
}

/// Runs one experiment with parameters derived from `cfg`.
pub fn run_experiment(id: &str, cfg: SuiteConfig) -> Result<ExperimentReport> {
    let mut r = dispatch(id, cfg)?;
    if r.id != id {
        r.summary = r.summary.replacen(&r.id, id, 1);
        r.id = id.to_string();
    }
    Ok(r)
}

fn dispatch(id: &str, cfg: SuiteConfig) -> Result<ExperimentReport> {
    let m = cfg.max_level;
    let need = |min: usize| {
        if m < min {
            Err(Error::InsufficientDepth(format!("{id} needs --max-level >= {min}")))
        } else {
            Ok(())
        }
    };
    let half = DyadicPoint::new(1, 1)?;
    match id {
        "recursion" => {
            need(2)?;
            check_recursion_random(100, m.min(10), cfg.seed)
        }
        "b2" => {
            need(6)?;
            estimate_b2(unit_triple(), (m - 4)..=m)
        }
        "dtilde" => {
            need(4)?;
            check_dtilde_duality(20, m.min(9), (m - 3).min(6), cfg.seed)
        }
        "roundtrip" => {
            need(6)?;
            check_roundtrip(50, m.min(6), m, cfg.seed)
        }
        "corrector" => {
            need(6)?;
            check_corrector(m)
        }
        "matching" => {
            need(5)?;
            check_matching_failure(m)
        }
        "symmetric" => {
            need(7)?;
            check_symmetric_derivative(Recipe::Poisson { rhs: 1.0 }, half, 5, m)
        }
        "one-sided" => {
            need(6)?;
            check_one_sided_derivative(Recipe::Poisson { rhs: 1.0 }, DyadicPoint::new(2, 1)?, m, 1e-3)
        }
        "one-sided-harmonic" => {
            need(6)?;
            check_one_sided_derivative(Recipe::Harmonic { boundary: [1.0, 0.0, 0.0] }, DyadicPoint::zero(), m, 1e-6)
        }
        "riesz" => {
            need(6)?;
            check_riesz_identity(6, 4)
        }
        "thresholds" => {
            need(6)?;
            scan_thresholds(m)
        }
        "norms" => {
            need(6)?;
            let sigmas = [0.8, 0.9, 1.0, 1.05];
            let mut merged = ExperimentReport::declare("norms", Tolerance::Exact);
            let t0 = std::time::Instant::now();
            for family in [
                Family::Harmonic,
                Family::Tent,
                Family::Poisson,
                Family::Linear,
                Family::Synthetic { decay: 0.4, seed: cfg.seed },
                // T̃ ratio 2·0.36·5^σ/3 crosses 1 near σ = 0.887.
                Family::Synthetic { decay: 0.6, seed: cfg.seed + 1 },
            ] {
                let r = scan_norm_equivalence(family, &sigmas, m)?;
                let name = r.inputs.get("family").cloned().unwrap_or_default();
                for c in &r.checks {
                    merged.require(&format!("{name} {}", c.name), c.pass);
                }
                merged.notes.extend(r.notes.iter().map(|n| format!("{name} {n}")));
                merged.series.extend(r.series.into_iter().map(|mut s| {
                    s.name = format!("{name} {}", s.name);
                    s
                }));
            }
            merged.input("sigmas", format!("{sigmas:?}")).input("level", m).levels(1..=m);
            Ok(merged.finish(t0))
        }
        "tent-t-norms" => {
            need(6)?;
            check_tent_t_norms(m)
        }
        "partial-matching" => {
            need(8)?;
            check_partial_matching(6.min(m), (m + 2).min(crate::address::max_level()))
        }
        _ => Err(Error::Inconsistent(format!("unknown experiment {id:?}"))),
    }
}

/// Expands a selector (`all`, an id, or a comma-separated list of ids).
pub fn select(selector: &str) -> Result<Vec<&'static str>> {
    if selector == "all" {
        return Ok(EXPERIMENTS.to_vec());
    }
    selector
        .split(',')
        .map(|s| {
            EXPERIMENTS
                .iter()
                .copied()
                .find(|id| *id == s.trim())
                .ok_or_else(|| Error::Inconsistent(format!("unknown experiment {s:?}")))
        })
        .collect()
}

/// Runs experiments independently and returns reports in suite order. An
/// experiment that errors becomes a failed report carrying the error.
pub fn run_suite(ids: &[&str], cfg: SuiteConfig, exec: Execution) -> Vec<ExperimentReport> {
    exec::map_range(exec, ids.len(), |i| {
        run_experiment(ids[i], cfg).unwrap_or_else(|e| {
            let mut r = ExperimentReport::declare(ids[i], Tolerance::Exact);
            r.note(format!("error: {e}"));
            r.require("completed", false);
            r.finish(std::time::Instant::now())
        })
    })
}
