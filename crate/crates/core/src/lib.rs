//! Trace and extension calculus between functions on the Sierpinski gasket
//! and functions on its bottom edge.
//!
//! The modules follow the data flow: [`address`] indexes cells and vertices,
//! [`harmonic`] extends vertex data, [`energy`] measures and solves on the
//! graph, [`sobolev`] expands into tent functions, [`traceops`] works on the
//! bottom edge, [`extension`] maps bottom-edge data back onto the gasket, and
//! [`verify`] runs the numerical experiments.

pub mod address;
pub mod energy;
pub mod error;
pub mod exec;
pub mod extension;
pub mod harmonic;
pub mod scalar;
pub mod sobolev;
pub mod traceops;
pub mod verify;

pub use address::{max_level, set_max_level, DyadicPoint, PairIndex, VertexId, VertexSet, Word};
pub use error::{Error, Result};
pub use exec::Execution;
pub use harmonic::{GraphFunction, HarmonicFunction, TentFunction};
pub use scalar::{Rational, Scalar, ScalarMode};
pub use traceops::{LineFunction, NormReport};

/// Environment variable overriding the level cap.
pub const MAX_LEVEL_ENV: &str = "GASKET_MAX_LEVEL";

/// Applies [`MAX_LEVEL_ENV`] if set; returns the active cap.
pub fn configure_from_env() -> Result<usize> {
    match std::env::var(MAX_LEVEL_ENV) {
        Ok(v) => {
            let level: usize = v.trim().parse().map_err(|_| {
                Error::Inconsistent(format!("{MAX_LEVEL_ENV}={v:?} is not a level"))
            })?;
            Ok(set_max_level(level))
        }
        Err(_) => Ok(max_level()),
    }
}
