//! Analyzer interferometers, gated Geiger-mode detectors and the
//! pump-referenced coincidence windows.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::TimeBin;
use crate::scalar::{lit, Scalar};

/// Unbalanced fiber Michelson used as a time-bin analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSpec {
    /// Long-arm minus short-arm travel time, seconds.
    pub delay: f64,
    phi_analyzer: f64,
    /// Insertion loss beyond the intrinsic beamsplitter, dB.
    pub excess_loss_db: f64,
}

impl InterferometerSpec {
    pub fn new(delay: f64, phi_analyzer: f64, excess_loss_db: f64) -> Self {
        Self {
            delay,
            phi_analyzer: phi_analyzer.rem_euclid(TAU),
            excess_loss_db,
        }
    }

    /// Analyzer phase, reduced to `[0, 2 pi)`.
    pub fn phi_analyzer(&self) -> f64 {
        self.phi_analyzer
    }

    pub fn set_phi_analyzer(&mut self, phi: f64) {
        self.phi_analyzer = phi.rem_euclid(TAU);
    }

    fn validate(&self) -> Result<()> {
        if !(self.delay > 0.0) {
            return Err(Error::Config(format!(
                "interferometer delay must be > 0, got {}",
                self.delay
            )));
        }
        if !(self.excess_loss_db >= 0.0) {
            return Err(Error::Config("interferometer excess_loss_db must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    /// Both photons share one interferometer; one detector sits behind a
    /// circulator on the input port, the other on the output port.
    Folded,
    /// A 50/50 coupler after the source feeds two fibers, each with its own
    /// interferometer and one monitored output.
    TwoIndependent,
}

/// Analyzer side of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arrangement", rename_all = "snake_case")]
pub enum Analyzer {
    Folded {
        interferometer: InterferometerSpec,
        /// Loss of the circulator on the return path to detector A, dB.
        circulator_loss_db: f64,
    },
    TwoIndependent {
        a: InterferometerSpec,
        b: InterferometerSpec,
    },
}

impl Analyzer {
    pub fn folded(delay: f64) -> Self {
        Analyzer::Folded {
            interferometer: InterferometerSpec::new(delay, 0.0, 0.0),
            circulator_loss_db: 1.0,
        }
    }

    pub fn two_independent(delay: f64) -> Self {
        Analyzer::TwoIndependent {
            a: InterferometerSpec::new(delay, 0.0, 0.0),
            b: InterferometerSpec::new(delay, 0.0, 0.0),
        }
    }

    pub fn arrangement(&self) -> Arrangement {
        match self {
            Analyzer::Folded { .. } => Arrangement::Folded,
            Analyzer::TwoIndependent { .. } => Arrangement::TwoIndependent,
        }
    }

    pub fn interferometers(&self) -> Vec<&InterferometerSpec> {
        match self {
            Analyzer::Folded { interferometer, .. } => vec![interferometer],
            Analyzer::TwoIndependent { a, b } => vec![a, b],
        }
    }

    /// Sets the phase of every interferometer; scans move them together.
    pub fn set_phi_analyzer(&mut self, phi: f64) {
        match self {
            Analyzer::Folded { interferometer, .. } => interferometer.set_phi_analyzer(phi),
            Analyzer::TwoIndependent { a, b } => {
                a.set_phi_analyzer(phi);
                b.set_phi_analyzer(phi);
            }
        }
    }

    pub fn with_phi_analyzer(mut self, phi: f64) -> Self {
        self.set_phi_analyzer(phi);
        self
    }

    /// Phase of the interferometer seen by detector A.
    pub fn phi_analyzer(&self) -> f64 {
        match self {
            Analyzer::Folded { interferometer, .. } => interferometer.phi_analyzer(),
            Analyzer::TwoIndependent { a, .. } => a.phi_analyzer(),
        }
    }

    /// Offset between the measured triple-coincidence fringe and the
    /// post-selected probability `P_c(2 phi_I - phi_P)`. In the folded
    /// arrangement the two detectors watch complementary ports, which shifts
    /// the fringe by pi.
    pub fn fringe_offset(&self) -> f64 {
        match self {
            Analyzer::Folded { .. } => PI,
            Analyzer::TwoIndependent { .. } => 0.0,
        }
    }

    pub fn validate(&self, bin_separation: f64) -> Result<()> {
        for i in self.interferometers() {
            i.validate()?;
            if (i.delay - bin_separation).abs() > 1e-15 {
                return Err(Error::Config(format!(
                    "analyzer delay ({:e} s) must match the source bin_separation ({:e} s)",
                    i.delay, bin_separation
                )));
            }
        }
        if let Analyzer::Folded { circulator_loss_db, .. } = self {
            if !(*circulator_loss_db >= 0.0) {
                return Err(Error::Config("circulator_loss_db must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Gated Geiger-mode avalanche photodiode. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Dark count rate while armed, counts/s.
    pub dark_rate: f64,
    pub dead_time: f64,
    /// RMS timing jitter, seconds.
    pub jitter_rms: f64,
}

impl Default for DetectorSpec {
    /// Liquid-nitrogen cooled germanium APD.
    fn default() -> Self {
        Self {
            efficiency: 0.10,
            dark_rate: 3.0e4,
            dead_time: 10e-6,
            jitter_rms: 100e-12,
        }
    }
}

impl DetectorSpec {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            dead_time: 0.0,
            jitter_rms: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Config(format!(
                "detector efficiency must lie in [0, 1], got {}",
                self.efficiency
            )));
        }
        for (name, v) in [
            ("dark_rate", self.dark_rate),
            ("dead_time", self.dead_time),
            ("jitter_rms", self.jitter_rms),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("detector {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Probability that at least one dark count falls in an armed interval.
    pub fn dark_probability(&self, armed: f64) -> f64 {
        -(-self.dark_rate * armed).exp_m1()
    }
}

/// Three pump-referenced windows centred on `0`, `delay` and `2 delay`,
/// each half-open `[c - w/2, c + w/2)`. The detector gate spans all three
/// plus `guard` on either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceWindows<T> {
    pub window_width: T,
    pub delay: T,
    pub guard: T,
}

impl<T: Scalar> CoincidenceWindows<T> {
    pub fn new(window_width: T, delay: T) -> Self {
        Self {
            window_width,
            delay,
            guard: window_width / lit(2.0),
        }
    }

    pub fn bin_offsets(&self) -> [T; 3] {
        [T::zero(), self.delay, lit::<T>(2.0) * self.delay]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_width > T::zero()) {
            return Err(Error::Config("window_width must be > 0".into()));
        }
        if !(self.window_width < self.delay) {
            return Err(Error::Config(format!(
                "window_width ({}) must be smaller than the bin separation ({}) so windows do not overlap",
                self.window_width, self.delay
            )));
        }
        if !(self.guard >= T::zero()) {
            return Err(Error::Config("window guard must be >= 0".into()));
        }
        Ok(())
    }

    /// Armed interval `[start, end)` of the detectors relative to the pump.
    pub fn gate(&self) -> (T, T) {
        let half = self.window_width / lit(2.0);
        (-half - self.guard, lit::<T>(2.0) * self.delay + half + self.guard)
    }

    pub fn gate_length(&self) -> T {
        let (a, b) = self.gate();
        b - a
    }
}

pub fn classify_bin<T: Scalar>(click_time: T, windows: &CoincidenceWindows<T>) -> Option<TimeBin> {
    let half = windows.window_width / lit(2.0);
    windows
        .bin_offsets()
        .iter()
        .zip(TimeBin::ALL)
        .find(|(&c, _)| click_time >= c - half && click_time < c + half)
        .map(|(_, bin)| bin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClickOrigin {
    Photon,
    Dark,
}

/// What one detector reported for one pump pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClickRecord {
    NoClick,
    Click { time: f64, origin: ClickOrigin },
}

impl ClickRecord {
    pub fn time(&self) -> Option<f64> {
        match *self {
            ClickRecord::Click { time, .. } => Some(time),
            ClickRecord::NoClick => None,
        }
    }

    /// Keeps the earlier of two candidate events; a Geiger diode fires once.
    pub fn earliest(self, other: ClickRecord) -> ClickRecord {
        match (self.time(), other.time()) {
            (Some(a), Some(b)) if b < a => other,
            (None, Some(_)) => other,
            _ => self,
        }
    }
}

/// Registers one photon (or none) within an armed interval of length
/// `pulse_period` starting at zero.
pub fn detect_click<R: Rng + ?Sized>(
    photon_arrival: Option<f64>,
    det: &DetectorSpec,
    pulse_period: f64,
    rng: &mut R,
) -> ClickRecord {
    let photon = photon_arrival
        .and_then(|t| photon_click_time(t, det, rng))
        .filter(|t| (0.0..pulse_period).contains(t))
        .map_or(ClickRecord::NoClick, |time| ClickRecord::Click {
            time,
            origin: ClickOrigin::Photon,
        });
    let dark = dark_click_offset(det, pulse_period, rng).map_or(ClickRecord::NoClick, |time| ClickRecord::Click {
        time,
        origin: ClickOrigin::Dark,
    });
    photon.earliest(dark)
}

/// Detection of one photon: efficiency draw, then Gaussian timing jitter.
pub fn photon_click_time<R: Rng + ?Sized>(arrival: f64, det: &DetectorSpec, rng: &mut R) -> Option<f64> {
    if det.efficiency < 1.0 && rng.random::<f64>() >= det.efficiency {
        return None;
    }
    Some(arrival + jitter(det.jitter_rms, rng))
}

pub(crate) fn jitter<R: Rng + ?Sized>(rms: f64, rng: &mut R) -> f64 {
    if rms > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        rms * z
    } else {
        0.0
    }
}

/// Offset of the first dark count in an armed interval, if any.
pub fn dark_click_offset<R: Rng + ?Sized>(det: &DetectorSpec, armed: f64, rng: &mut R) -> Option<f64> {
    let p = det.dark_probability(armed);
    if p <= 0.0 || rng.random::<f64>() >= p {
        return None;
    }
    Some(first_dark_offset(det.dark_rate, armed, p, rng))
}

/// Time of the first event of a Poisson process of `rate` conditioned on
/// falling inside `[0, armed)`; `p` is the probability of that condition.
pub(crate) fn first_dark_offset<R: Rng + ?Sized>(rate: f64, armed: f64, p: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let t = -(-u * p).ln_1p() / rate;
    t.min(armed * (1.0 - f64::EPSILON))
}

/// Both clicks in the central window of the same pump pulse.
pub fn triple_coincidence(click_a: &ClickRecord, click_b: &ClickRecord, windows: &CoincidenceWindows<f64>) -> bool {
    let middle = |c: &ClickRecord| c.time().and_then(|t| classify_bin(t, windows)) == Some(TimeBin::Middle);
    middle(click_a) && middle(click_b)
}

/// Rate of central-window coincidences from uncorrelated clicks.
///
/// `s1` and `s2` are rates of clicks spread uniformly in time. Each lands in
/// a given pulse's window of width `window` with probability `s * window`,
/// so pulses at rate `f` give `f (s1 window)(s2 window)`. When the windows
/// tile time (`f window = 1`) this is the familiar `s1 s2 window`.
pub fn accidental_rate<T: Scalar>(s1: T, s2: T, window: T, f: T) -> T {
    f * (s1 * window) * (s2 * window)
}
