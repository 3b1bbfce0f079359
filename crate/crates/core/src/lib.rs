//! Time-bin entangled photon pairs: closed-form predictions, a Monte Carlo
//! model of the source, fibers and analyzers, and fringe analysis.
//!
//! Analytical code is generic over [`Scalar`] (`f32` or `f64`); the engine
//! works in `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod apparatus;
pub mod channel;
pub mod engine;
mod error;
pub mod quantum;
mod scalar;
pub mod source;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use analysis::{fit_fringe, fit_fringe_with, subtract_accidentals, FitOptions, FringePoint, Weighting};
pub use apparatus::{Analyzer, Arrangement, DetectorSpec, InterferometerSpec};
pub use engine::{run_phase_scan, run_pulses, DetectionModel, ExperimentConfig, RunResult, Simulation};
pub use quantum::{coincidence_probability, entropy_of_entanglement, ideal_visibility, TimeBin};
pub use source::{estimate_mu, multipair_visibility, SourceConfig};

pub type State = quantum::TimeBinState<f64>;
pub type Fiber = channel::FiberSpec<f64>;
pub type Windows = apparatus::CoincidenceWindows<f64>;
pub type Scan = analysis::FringeScan<f64>;
pub type Fit = analysis::FitResult<f64>;

pub type State32 = quantum::TimeBinState<f32>;
pub type Fiber32 = channel::FiberSpec<f32>;
pub type Scan32 = analysis::FringeScan<f32>;
pub type Fit32 = analysis::FitResult<f32>;
