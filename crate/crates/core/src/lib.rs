//! Simulation engine for building macroscopic two-photon coherence in a dense
//! three-level medium: density-matrix dynamics under pump/Stokes pulses,
//! envelope propagation through the target, externally triggered two-photon
//! emission, transverse beam-profile sweeps, and density-scan analysis.

// negated float comparisons in the input validators are deliberate NaN guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bloch;
pub mod config;
pub mod domain;
pub mod error;
pub mod export;
pub mod mat3;
pub mod propagation;
pub mod transverse;
pub mod trigger;
pub mod units;

pub use error::{Error, Result};
