//! Event-level Monte Carlo of the full experiment, pulse by pulse.
//!
//! Only pulses where something can happen are visited: pair emissions and
//! dark counts are independent Bernoulli processes over pulses, sampled by
//! geometric skips and merged in pulse order.

mod config;
mod histogram;
mod run;

pub use config::{DetectionModel, ExperimentConfig, DEFAULT_BATCH_SIZE, DEFAULT_WINDOW};
pub use histogram::CoincidenceHistogram;
pub use run::{
    run_phase_scan, run_phase_scan_detailed, run_pulses, scan_from_runs, scan_point_seed, uniform_phases, RunResult,
    Simulation,
};
