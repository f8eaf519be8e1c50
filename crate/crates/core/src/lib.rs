//! Solvers for the Matsubara-frequency discretized IPT-DMFT equations on
//! finite vertex-transitive Hubbard graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalar`] and [`linalg`]: precision-generic scalars and dense kernels.
//! * [`model`]: Hubbard graphs and the impurity/environment split.
//! * [`ipt`]: the discretized IPT map and self-energy update.
//! * [`dmft`]: bath update, DMFT map and the damped fixed-point driver.
//! * [`nevanlinna`]: Pick-matrix diagnostics and continued-fraction continuation.
//! * [`bipartite`]: polynomial reduction for bipartite graphs and root finding.
//! * [`scan`] and [`io`]: parameter sweeps and canonical serialization.

pub mod bipartite;
pub mod dmft;
pub mod io;
pub mod ipt;
pub mod linalg;
pub mod model;
pub mod nevanlinna;
pub mod scalar;
pub mod scan;

pub use scalar::{ExtFloat, Real};

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("singular denominator at Matsubara index {index}{}", iteration.map(|k| format!(" (iteration {k})")).unwrap_or_default())]
    Singular {
        index: i64,
        iteration: Option<usize>,
    },

    #[error("Cayley transform pole at index {0}")]
    CayleyPole(usize),

    #[error("continued fraction breaks down at level {0}")]
    Degenerate(usize),

    #[error("interpolant misses node {index} by relative error {error:e}")]
    NodeMismatch { index: usize, error: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
