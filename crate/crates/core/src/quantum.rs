//! Two-photon time-bin states and the closed-form interference formulas.
//!
//! Everything here is a pure function of the state amplitudes and phases, and
//! doubles as the analytical reference that the Monte Carlo engine is tested
//! against.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// `alpha |early, early> + beta e^{i phi_pump} |late, late>` with real,
/// non-negative amplitudes and `alpha^2 + beta^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinState<T> {
    alpha: T,
    beta: T,
    phi_pump: T,
}

impl<T: Scalar> TimeBinState<T> {
    pub fn new(alpha: T, beta: T, phi_pump: T) -> Result<Self> {
        if !(alpha >= T::zero() && beta >= T::zero()) {
            return Err(Error::InvalidState(format!(
                "amplitudes must be non-negative, got alpha={alpha}, beta={beta}"
            )));
        }
        let norm = alpha * alpha + beta * beta;
        if (norm - T::one()).abs() > T::norm_tolerance() {
            return Err(Error::InvalidState(format!("alpha^2 + beta^2 = {norm}, expected 1")));
        }
        if !phi_pump.is_finite() {
            return Err(Error::InvalidState("pump phase must be finite".into()));
        }
        Ok(Self { alpha, beta, phi_pump })
    }

    /// State with population `alpha_sq` in the early bin.
    pub fn from_alpha_sq(alpha_sq: T, phi_pump: T) -> Result<Self> {
        if !(alpha_sq >= T::zero() && alpha_sq <= T::one()) {
            return Err(Error::Domain(format!("alpha^2 = {alpha_sq} outside [0, 1]")));
        }
        Self::new(alpha_sq.sqrt(), (T::one() - alpha_sq).sqrt(), phi_pump)
    }

    pub fn maximally_entangled(phi_pump: T) -> Self {
        let a = T::FRAC_1_SQRT_2();
        Self {
            alpha: a,
            beta: a,
            phi_pump,
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn phi_pump(&self) -> T {
        self.phi_pump
    }

    pub fn alpha_sq(&self) -> T {
        self.alpha * self.alpha
    }

    pub fn with_phi_pump(self, phi_pump: T) -> Self {
        Self { phi_pump, ..self }
    }
}

/// Arrival slot of a photon behind an unbalanced analyzer, relative to the
/// pump clock: early pulse via the short arm, the two ambiguous paths, or
/// late pulse via the long arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeBin {
    First,
    Middle,
    Last,
}

impl TimeBin {
    pub const ALL: [TimeBin; 3] = [TimeBin::First, TimeBin::Middle, TimeBin::Last];

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// Output port of an analyzer interferometer. The long arm enters `Plus` with
/// a `+1` sign and `Minus` with `-1`; the short arm enters both with `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    Plus,
    Minus,
}

impl Port {
    pub const ALL: [Port; 2] = [Port::Plus, Port::Minus];

    fn index(self) -> usize {
        self as usize
    }

    fn sign(self) -> f64 {
        match self {
            Port::Plus => 1.0,
            Port::Minus => -1.0,
        }
    }
}

/// Pure state of the pair after one pass through the analyzer, restricted to
/// the terms where both photons took the same arm.
///
/// Amplitudes are ordered first/first, middle via the early pulse (both
/// long), middle via the late pulse (both short), last/last. The two middle
/// terms are kept separate; they only interfere once projected onto the
/// central slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerState<T> {
    pub amplitudes: [Complex<T>; 4],
    pub phi_analyzer: T,
}

impl<T: Scalar> AnalyzerState<T> {
    pub fn first(&self) -> Complex<T> {
        self.amplitudes[0]
    }

    pub fn middle_early(&self) -> Complex<T> {
        self.amplitudes[1]
    }

    pub fn middle_late(&self) -> Complex<T> {
        self.amplitudes[2]
    }

    pub fn last(&self) -> Complex<T> {
        self.amplitudes[3]
    }

    pub fn total_probability(&self) -> T {
        self.amplitudes.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// Probability of the coherent projection onto the central slot.
    pub fn middle_projection(&self) -> T {
        (self.middle_early() + self.middle_late()).norm_sqr()
    }
}

/// Entropy of entanglement in bits, with `0 log 0 = 0`.
pub fn entropy_of_entanglement<T: Scalar>(alpha_sq: T) -> Result<T> {
    if !(alpha_sq >= T::zero() && alpha_sq <= T::one()) {
        return Err(Error::Domain(format!("alpha^2 = {alpha_sq} outside [0, 1]")));
    }
    let h = |p: T| {
        if p <= T::zero() {
            T::zero()
        } else {
            -p * p.log2()
        }
    };
    Ok(h(alpha_sq) + h(T::one() - alpha_sq))
}

/// Fringe visibility of the post-selected state, `2 alpha beta`.
pub fn ideal_visibility<T: Scalar>(state: &TimeBinState<T>) -> T {
    lit::<T>(2.0) * state.alpha * state.beta
}

/// Two-photon fringe phase `2 phi_I - phi_P`.
pub fn fringe_phase<T: Scalar>(state: &TimeBinState<T>, phi_analyzer: T) -> T {
    lit::<T>(2.0) * phi_analyzer - state.phi_pump
}

pub fn evolve_through_analyzer<T: Scalar>(state: &TimeBinState<T>, phi_analyzer: T) -> AnalyzerState<T> {
    let s = T::FRAC_1_SQRT_2();
    let two_phi = lit::<T>(2.0) * phi_analyzer;
    let a = state.alpha * s;
    let b = state.beta * s;
    AnalyzerState {
        amplitudes: [
            Complex::new(a, T::zero()),
            Complex::from_polar(a, two_phi),
            Complex::from_polar(b, state.phi_pump),
            Complex::from_polar(b, two_phi + state.phi_pump),
        ],
        phi_analyzer,
    }
}

/// Post-selected probability of a central-slot coincidence,
/// `0.5 [alpha^2 + beta^2 + 2 alpha beta cos(2 phi_I - phi_P)]`.
pub fn coincidence_probability<T: Scalar>(state: &TimeBinState<T>, phi_analyzer: T) -> T {
    let half = lit::<T>(0.5);
    let a = state.alpha;
    let b = state.beta;
    half * (a * a + b * b + lit::<T>(2.0) * a * b * fringe_phase(state, phi_analyzer).cos())
}

/// Joint detection outcome of one pair: slot and port for each photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairOutcome {
    pub bin_1: TimeBin,
    pub port_1: Port,
    pub bin_2: TimeBin,
    pub port_2: Port,
}

const N_OUTCOMES: usize = 36;

impl PairOutcome {
    fn index(&self) -> usize {
        ((self.bin_1.index() * 2 + self.port_1.index()) * 3 + self.bin_2.index()) * 2 + self.port_2.index()
    }

    fn from_index(i: usize) -> Self {
        Self {
            port_2: Port::ALL[i % 2],
            bin_2: TimeBin::from_index((i / 2) % 3),
            port_1: Port::ALL[(i / 6) % 2],
            bin_1: TimeBin::from_index(i / 12),
        }
    }

    pub fn all() -> impl Iterator<Item = PairOutcome> {
        (0..N_OUTCOMES).map(Self::from_index)
    }
}

/// Full outcome distribution of a pair sent through unbalanced analyzers,
/// photon 1 through one with phase `phi_1` and photon 2 through one with
/// phase `phi_2` (the same device in the folded arrangement).
///
/// Unlike [`AnalyzerState`] this keeps the mixed-arm terms and both output
/// ports of each analyzer, so the probabilities sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcomeDistribution<T> {
    probs: [T; N_OUTCOMES],
}

impl<T: Scalar> PairOutcomeDistribution<T> {
    pub fn new(state: &TimeBinState<T>, phi_1: T, phi_2: T) -> Self {
        let half = lit::<T>(0.5);
        let pulses = [
            Complex::new(state.alpha, T::zero()),
            Complex::from_polar(state.beta, state.phi_pump),
        ];
        // transmission amplitude of one photon: (long arm?, port) -> amplitude
        let arm = |long: bool, port: Port, phi: T| -> Complex<T> {
            if long {
                Complex::from_polar(half * lit::<T>(port.sign()), phi)
            } else {
                Complex::new(half, T::zero())
            }
        };
        let mut amps = [Complex::new(T::zero(), T::zero()); N_OUTCOMES];
        for (pulse, c) in pulses.iter().enumerate() {
            for long_1 in [false, true] {
                for long_2 in [false, true] {
                    for port_1 in Port::ALL {
                        for port_2 in Port::ALL {
                            let outcome = PairOutcome {
                                bin_1: TimeBin::from_index(pulse + long_1 as usize),
                                port_1,
                                bin_2: TimeBin::from_index(pulse + long_2 as usize),
                                port_2,
                            };
                            amps[outcome.index()] =
                                amps[outcome.index()] + c * arm(long_1, port_1, phi_1) * arm(long_2, port_2, phi_2);
                        }
                    }
                }
            }
        }
        let mut probs = [T::zero(); N_OUTCOMES];
        for (p, a) in probs.iter_mut().zip(amps.iter()) {
            *p = a.norm_sqr();
        }
        Self { probs }
    }

    pub fn probability(&self, outcome: &PairOutcome) -> T {
        self.probs[outcome.index()]
    }

    pub fn total(&self) -> T {
        self.probs.iter().fold(T::zero(), |acc, &p| acc + p)
    }

    /// Inverse-CDF draw for a uniform variate `u` in `[0, 1)`.
    pub fn sample(&self, u: T) -> PairOutcome {
        let mut acc = T::zero();
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p <= T::zero() {
                continue;
            }
            acc = acc + p;
            last = i;
            if u < acc {
                return PairOutcome::from_index(i);
            }
        }
        PairOutcome::from_index(last)
    }
}
