//! Error type shared by every pipeline stage.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration input.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A domain-type invariant was violated at construction.
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    /// A field sample stopped being finite during a marching solve.
    #[error("non-finite {quantity} at z index {z_index}, t index {t_index}")]
    NonFinite {
        quantity: &'static str,
        z_index: usize,
        t_index: usize,
    },

    /// Step-halving changed the solution by more than the stated tolerance.
    #[error(
        "{what} not converged: step halving changed the solution by {observed:.3e} \
         (tolerance {tolerance:.1e}); refine the grid"
    )]
    Convergence {
        what: &'static str,
        observed: f64,
        tolerance: f64,
    },

    /// Trigger detuning below the far-detuning floor.
    #[error(
        "far-detuning violation: |delta| = {delta_abs:.3e} ns^-1 is below the \
         floor {floor:.3e} ns^-1"
    )]
    FarDetuning { delta_abs: f64, floor: f64 },

    /// Pair emission kinematically closed for the requested masses.
    #[error("kinematically forbidden: m_i + m_j = {mass_sum} eV exceeds E31 = {e31} eV")]
    KinematicallyForbidden { mass_sum: f64, e31: f64 },

    /// A least-squares fit with no usable data.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Failure inside one transverse sample, tagged with its index.
    #[error("transverse sample {index} (r = {r_mm} mm): {source}")]
    Sample {
        index: usize,
        r_mm: f64,
        #[source]
        source: Box<Error>,
    },

    /// Failure inside one density-scan point, tagged with its density.
    #[error("scan point at N = {density:.3e} um^-3: {source}")]
    ScanPoint {
        density: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Walks through sample/scan tags to the root cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } | Error::ScanPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
