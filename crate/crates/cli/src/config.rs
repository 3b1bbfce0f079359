//! TOML configuration. Every key is optional and falls back to the library
//! default; physical quantities carry their unit in the key name.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use timebin::engine::DEFAULT_BATCH_SIZE;
use timebin::{Analyzer, DetectionModel, ExperimentConfig, InterferometerSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub n_pulses: Option<u64>,
    pub batch_size: Option<u64>,
    pub detection_model: Option<DetectionModel>,
    pub off_pulse_span: Option<u32>,
    pub histogram_bin_ps: Option<f64>,
    pub source: SourceSection,
    pub fiber_a: FiberSection,
    pub fiber_b: FiberSection,
    pub analyzer: AnalyzerSection,
    pub detector_a: DetectorSection,
    pub detector_b: DetectorSection,
    pub windows: WindowSection,
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub rep_rate_mhz: Option<f64>,
    pub mean_pairs: Option<f64>,
    pub arm_transmission_short: Option<f64>,
    pub arm_transmission_long: Option<f64>,
    pub phi_pump_rad: Option<f64>,
    pub bin_separation_ns: Option<f64>,
    pub pulse_width_ps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub length_km: Option<f64>,
    pub attenuation_db_per_km: Option<f64>,
    pub dispersion_slope_ps_nm2_km: Option<f64>,
    pub zero_dispersion_wavelength_nm: Option<f64>,
    pub center_wavelength_nm: Option<f64>,
    pub filter_bandwidth_nm: Option<f64>,
    pub phase_jitter_rms_rad: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrangementKey {
    #[default]
    Folded,
    TwoIndependent,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzerSection {
    pub arrangement: ArrangementKey,
    /// Interferometer path difference; defaults to the source bin separation.
    pub delay_ns: Option<f64>,
    /// Phase of each interferometer for `run`; scans override it.
    pub phi_analyzer_rad: Option<f64>,
    pub excess_loss_db: Option<f64>,
    /// Folded arrangement only.
    pub circulator_loss_db: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: Option<f64>,
    pub dark_rate_hz: Option<f64>,
    pub dead_time_us: Option<f64>,
    pub jitter_rms_ps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub window_width_ps: Option<f64>,
    /// Defaults to the source bin separation.
    pub delay_ns: Option<f64>,
    /// Defaults to half the window width.
    pub guard_ps: Option<f64>,
}

/// Either an explicit `phases_rad` list or `points` evenly spaced phases
/// from `start_rad` towards `stop_rad`.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub phases_rad: Option<Vec<f64>>,
    pub points: Option<usize>,
    pub start_rad: Option<f64>,
    pub stop_rad: Option<f64>,
    /// Include `stop_rad` itself; off by default so a full turn is not
    /// sampled twice.
    pub endpoint: bool,
    pub repetitions: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPlan {
    pub phases: Vec<f64>,
    pub repetitions: u32,
}

impl ScanSection {
    pub fn plan(&self) -> CliResult<ScanPlan> {
        let invalid = |m: String| Err(CliError::Validation(m));
        let phases = match (&self.phases_rad, self.points) {
            (Some(_), Some(_)) => return invalid("scan: give either phases_rad or points, not both".into()),
            (None, None) => return invalid("scan: one of phases_rad or points is required".into()),
            (Some(list), None) => {
                if self.start_rad.is_some() || self.stop_rad.is_some() {
                    return invalid("scan: start_rad/stop_rad only apply with points".into());
                }
                list.clone()
            }
            (None, Some(n)) => {
                if n == 0 {
                    return invalid("scan: points must be >= 1".into());
                }
                let start = self.start_rad.unwrap_or(0.0);
                let stop = self.stop_rad.unwrap_or(TAU);
                let steps = if self.endpoint { n.saturating_sub(1).max(1) } else { n };
                (0..n)
                    .map(|i| start + (stop - start) * i as f64 / steps as f64)
                    .collect()
            }
        };
        if phases.is_empty() {
            return invalid("scan: phase list is empty".into());
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return invalid(format!("scan: phase {bad} is not finite"));
        }
        let repetitions = self.repetitions.unwrap_or(1);
        if repetitions == 0 {
            return invalid("scan: repetitions must be >= 1".into());
        }
        Ok(ScanPlan { phases, repetitions })
    }
}

/// Writes `value * 10^exp` into `target`. Dividing by an exact power of ten
/// keeps e.g. 5 us at exactly `5e-6`.
fn set(target: &mut f64, value: Option<f64>, exp: i32) {
    if let Some(v) = value {
        *target = if exp >= 0 {
            v * 10f64.powi(exp)
        } else {
            v / 10f64.powi(-exp)
        };
    }
}

fn scaled(value: f64, exp: i32) -> f64 {
    let mut out = 0.0;
    set(&mut out, Some(value), exp);
    out
}

fn apply_fiber(fiber: &mut timebin::Fiber, s: &FiberSection) {
    set(&mut fiber.length_km, s.length_km, 0);
    set(&mut fiber.attenuation_db_per_km, s.attenuation_db_per_km, 0);
    set(&mut fiber.dispersion_slope_ps_nm2_km, s.dispersion_slope_ps_nm2_km, 0);
    set(
        &mut fiber.zero_dispersion_wavelength_nm,
        s.zero_dispersion_wavelength_nm,
        0,
    );
    set(&mut fiber.center_wavelength_nm, s.center_wavelength_nm, 0);
    set(&mut fiber.filter_bandwidth_nm, s.filter_bandwidth_nm, 0);
    set(&mut fiber.phase_jitter_rms_rad, s.phase_jitter_rms_rad, 0);
}

fn apply_detector(det: &mut timebin::DetectorSpec, s: &DetectorSection) {
    set(&mut det.efficiency, s.efficiency, 0);
    set(&mut det.dark_rate, s.dark_rate_hz, 0);
    set(&mut det.dead_time, s.dead_time_us, -6);
    set(&mut det.jitter_rms, s.jitter_rms_ps, -12);
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Overlays the file on the library defaults and validates the result.
    pub fn experiment(&self) -> CliResult<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        if let Some(v) = self.seed {
            c.rng_seed = v;
        }
        if let Some(v) = self.n_pulses {
            c.n_pulses = v;
        }
        c.batch_size = self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE);
        if let Some(v) = self.detection_model {
            c.detection_model = v;
        }
        if let Some(v) = self.off_pulse_span {
            c.off_pulse_span = v;
        }
        set(&mut c.histogram_bin, self.histogram_bin_ps, -12);

        let s = &self.source;
        set(&mut c.source.rep_rate, s.rep_rate_mhz, 6);
        set(&mut c.source.mean_pairs, s.mean_pairs, 0);
        set(&mut c.source.arm_transmission_short, s.arm_transmission_short, 0);
        set(&mut c.source.arm_transmission_long, s.arm_transmission_long, 0);
        set(&mut c.source.phi_pump, s.phi_pump_rad, 0);
        set(&mut c.source.bin_separation, s.bin_separation_ns, -9);
        set(&mut c.source.pulse_width, s.pulse_width_ps, -12);

        apply_fiber(&mut c.fiber_a, &self.fiber_a);
        apply_fiber(&mut c.fiber_b, &self.fiber_b);
        apply_detector(&mut c.detector_a, &self.detector_a);
        apply_detector(&mut c.detector_b, &self.detector_b);

        let a = &self.analyzer;
        let delay = a.delay_ns.map_or(c.source.bin_separation, |d| scaled(d, -9));
        let interferometer = InterferometerSpec::new(
            delay,
            a.phi_analyzer_rad.unwrap_or(0.0),
            a.excess_loss_db.unwrap_or(0.0),
        );
        c.analyzer = match a.arrangement {
            ArrangementKey::Folded => Analyzer::Folded {
                interferometer,
                circulator_loss_db: a.circulator_loss_db.unwrap_or(match c.analyzer {
                    Analyzer::Folded { circulator_loss_db, .. } => circulator_loss_db,
                    Analyzer::TwoIndependent { .. } => 0.0,
                }),
            },
            ArrangementKey::TwoIndependent => {
                if a.circulator_loss_db.is_some() {
                    return Err(CliError::Validation(
                        "analyzer.circulator_loss_db only applies to the folded arrangement".into(),
                    ));
                }
                Analyzer::TwoIndependent {
                    a: interferometer,
                    b: interferometer,
                }
            }
        };

        let w = &self.windows;
        set(&mut c.windows.window_width, w.window_width_ps, -12);
        c.windows.delay = w.delay_ns.map_or(c.source.bin_separation, |d| scaled(d, -9));
        c.windows.guard = w.guard_ps.map_or(c.windows.window_width / 2.0, |g| scaled(g, -12));

        c.validate()?;
        Ok(c)
    }

    pub fn scan_plan(&self) -> CliResult<ScanPlan> {
        self.scan
            .as_ref()
            .ok_or_else(|| CliError::Validation("the scan command needs a [scan] section".into()))?
            .plan()
    }
}

#[derive(Serialize)]
struct Hashed<'a> {
    experiment: &'a ExperimentConfig,
    scan: Option<&'a ScanPlan>,
}

/// SHA-256 of the fully resolved configuration, so equivalent files that
/// differ only in layout or omitted defaults share a hash.
pub fn config_hash(experiment: &ExperimentConfig, scan: Option<&ScanPlan>) -> String {
    let canonical = toml::to_string(&Hashed { experiment, scan }).expect("config serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
