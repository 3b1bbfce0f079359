use serde::{Deserialize, Serialize};

use crate::apparatus::{Analyzer, CoincidenceWindows, DetectorSpec};
use crate::channel::FiberSpec;
use crate::error::{Error, Result};
use crate::source::SourceConfig;

/// How a detector behaves when several pairs reach it in one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionModel {
    /// Every photon is a candidate; the earliest live one fires the diode.
    #[default]
    Geiger,
    /// Each detector registers the photon of exactly one pair, drawn
    /// uniformly from those emitted in the pulse. Two pairs emitted together
    /// are then as likely to be mixed as any uncorrelated pair, which gives
    /// the `1/n` fringe dilution.
    SinglePhoton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    /// Spool in front of detector A; in the folded arrangement both photons
    /// travel through it and `fiber_b` is unused.
    pub fiber_a: FiberSpec<f64>,
    pub fiber_b: FiberSpec<f64>,
    pub analyzer: Analyzer,
    pub detector_a: DetectorSpec,
    pub detector_b: DetectorSpec,
    pub windows: CoincidenceWindows<f64>,
    pub n_pulses: u64,
    pub rng_seed: u64,
    /// Pulses per independently seeded batch.
    pub batch_size: u64,
    pub detection_model: DetectionModel,
    /// Histogram resolution, seconds.
    pub histogram_bin: f64,
    /// Neighbouring pulses on each side used to measure accidentals.
    pub off_pulse_span: u32,
}

pub const DEFAULT_BATCH_SIZE: u64 = 1 << 20;
pub const DEFAULT_WINDOW: f64 = 400e-12;

impl Default for ExperimentConfig {
    /// Folded setup at 0 km with noisy detectors. Dark rate, dead time and
    /// mean pair number are tuned so that accidental subtraction lifts the
    /// visibility by about 4 points at 0 km and 8 points at 11 km; the phase
    /// wander caps the net visibility near 0.95.
    fn default() -> Self {
        let source = SourceConfig {
            mean_pairs: 0.018,
            ..SourceConfig::default()
        };
        let fiber = FiberSpec {
            phase_jitter_rms_rad: 0.32,
            ..FiberSpec::default()
        };
        let detector = DetectorSpec {
            dark_rate: 3.0e5,
            dead_time: 1e-6,
            ..DetectorSpec::default()
        };
        Self {
            windows: CoincidenceWindows::new(DEFAULT_WINDOW, source.bin_separation),
            analyzer: Analyzer::folded(source.bin_separation),
            n_pulses: 40_000_000,
            source,
            fiber_a: fiber,
            fiber_b: fiber,
            detector_a: detector,
            detector_b: detector,
            rng_seed: 1,
            batch_size: DEFAULT_BATCH_SIZE,
            detection_model: DetectionModel::Geiger,
            histogram_bin: 20e-12,
            off_pulse_span: 4,
        }
    }
}

impl ExperimentConfig {
    /// Lossless, noiseless folded setup: perfect detectors, no fiber, no
    /// circulator loss, no phase wander.
    pub fn ideal(mean_pairs: f64, n_pulses: u64) -> Self {
        let source = SourceConfig {
            mean_pairs,
            ..SourceConfig::default()
        };
        let analyzer = match Analyzer::folded(source.bin_separation) {
            Analyzer::Folded { interferometer, .. } => Analyzer::Folded {
                interferometer,
                circulator_loss_db: 0.0,
            },
            other => other,
        };
        Self {
            windows: CoincidenceWindows::new(DEFAULT_WINDOW, source.bin_separation),
            source,
            fiber_a: FiberSpec::default(),
            fiber_b: FiberSpec::default(),
            analyzer,
            detector_a: DetectorSpec::ideal(),
            detector_b: DetectorSpec::ideal(),
            n_pulses,
            rng_seed: 1,
            batch_size: DEFAULT_BATCH_SIZE,
            detection_model: DetectionModel::Geiger,
            histogram_bin: 20e-12,
            off_pulse_span: 4,
        }
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }

    pub fn with_fiber_length(self, length_km: f64) -> Self {
        Self {
            fiber_a: self.fiber_a.with_length(length_km),
            fiber_b: self.fiber_b.with_length(length_km),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.fiber_a.validate()?;
        self.fiber_b.validate()?;
        self.analyzer.validate(self.source.bin_separation)?;
        self.detector_a.validate()?;
        self.detector_b.validate()?;
        self.windows.validate()?;
        let fail = |msg: String| Err(Error::Config(msg));
        if (self.windows.delay - self.source.bin_separation).abs() > 1e-15 {
            return fail(format!(
                "window delay ({:e} s) must match the source bin_separation ({:e} s)",
                self.windows.delay, self.source.bin_separation
            ));
        }
        if self.windows.gate_length() >= self.source.pulse_period() {
            return fail(format!(
                "detector gate ({:e} s) must be shorter than the pulse period ({:e} s)",
                self.windows.gate_length(),
                self.source.pulse_period()
            ));
        }
        if self.n_pulses == 0 {
            return fail("n_pulses must be > 0".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be > 0".into());
        }
        if !(self.histogram_bin > 0.0 && self.histogram_bin.is_finite()) {
            return fail(format!("histogram_bin must be > 0, got {}", self.histogram_bin));
        }
        if self.off_pulse_span == 0 {
            return fail("off_pulse_span must be >= 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        ExperimentConfig::ideal(0.01, 1000).validate().unwrap();
    }

    #[test]
    fn inconsistencies_rejected() {
        let mut c = ExperimentConfig::default();
        c.windows.window_width = 1.3e-9;
        assert!(c.validate().unwrap_err().to_string().contains("window_width"));
        let c = ExperimentConfig {
            analyzer: Analyzer::folded(1.0e-9),
            ..ExperimentConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("bin_separation"));
        let c = ExperimentConfig {
            n_pulses: 0,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.source.rep_rate = 5e8;
        assert!(c.validate().unwrap_err().to_string().contains("gate"));
    }
}
