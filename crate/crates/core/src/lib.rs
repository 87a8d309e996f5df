//! Simulation and analysis of an optically driven two-level emitter whose
//! transition frequency is modulated by a surface acoustic wave.
//!
//! Frequencies are angular (rad/s) and times are in seconds throughout; see
//! [`units`] for conversions from the GHz/ns values used in files.

// negated comparisons are how NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod experiments;
mod fit;
pub mod linalg;
pub mod model;
pub mod pulses;
pub mod solver;
pub mod special;
pub mod spectroscopy;
pub mod textio;
pub mod units;

pub use error::{Error, Result};
pub use linalg::{BlochVector, ComplexMatrix2, DensityState, C64};
pub use model::SystemParams;
pub use pulses::{PulseEnvelope, TimeGrid};
pub use solver::{SolverConfig, Trajectory};
