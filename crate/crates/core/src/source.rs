//! Pulsed pair source: pump interferometer amplitudes and Poissonian
//! multi-pair emission.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::TimeBinState;
use crate::scalar::{lit, Scalar};

/// Pump laser, pump interferometer and down-conversion waveguide.
///
/// All quantities are SI: Hz, seconds, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Pump repetition rate.
    pub rep_rate: f64,
    /// Mean number of pairs per pump pulse.
    pub mean_pairs: f64,
    /// Power transmission of the short pump arm.
    pub arm_transmission_short: f64,
    /// Power transmission of the long pump arm.
    pub arm_transmission_long: f64,
    pub phi_pump: f64,
    /// Delay between the two pump pulses.
    pub bin_separation: f64,
    /// RMS duration of each pump pulse.
    pub pulse_width: f64,
}

/// RMS width of a Gaussian pulse with 100 ps FWHM.
pub const DEFAULT_PULSE_WIDTH: f64 = 100e-12 / 2.354_820_045_030_949_3;

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            rep_rate: 8.0e7,
            mean_pairs: 0.01,
            arm_transmission_short: 1.0,
            arm_transmission_long: 1.0,
            phi_pump: 0.0,
            bin_separation: 1.2e-9,
            pulse_width: DEFAULT_PULSE_WIDTH,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return fail(format!("source rep_rate must be > 0, got {}", self.rep_rate));
        }
        if !(self.mean_pairs >= 0.0 && self.mean_pairs.is_finite()) {
            return fail(format!("source mean_pairs must be >= 0, got {}", self.mean_pairs));
        }
        for (name, t) in [
            ("arm_transmission_short", self.arm_transmission_short),
            ("arm_transmission_long", self.arm_transmission_long),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return fail(format!("source {name} must lie in [0, 1], got {t}"));
            }
        }
        if !(self.bin_separation > 0.0) {
            return fail(format!(
                "source bin_separation must be > 0, got {}",
                self.bin_separation
            ));
        }
        if !(self.pulse_width > 0.0 && self.pulse_width < self.bin_separation) {
            return fail(format!(
                "pulse_width ({:e} s) must be positive and shorter than bin_separation ({:e} s)",
                self.pulse_width, self.bin_separation
            ));
        }
        if !self.phi_pump.is_finite() {
            return fail("source phi_pump must be finite".into());
        }
        Ok(())
    }

    pub fn pulse_period(&self) -> f64 {
        1.0 / self.rep_rate
    }

    pub fn state(&self) -> Result<TimeBinState<f64>> {
        state_from_attenuations(self.arm_transmission_short, self.arm_transmission_long, self.phi_pump)
    }
}

/// Pair state produced when the pump arms transmit `t_a` (short) and `t_b`
/// (long) of the pump power. Pair amplitudes follow the pump field, so they
/// scale with the square root of the power transmission.
pub fn state_from_attenuations<T: Scalar>(t_a: T, t_b: T, phi_pump: T) -> Result<TimeBinState<T>> {
    let unit = |t: T| t >= T::zero() && t <= T::one();
    if !unit(t_a) || !unit(t_b) {
        return Err(Error::Domain(format!(
            "arm transmissions ({t_a}, {t_b}) outside [0, 1]"
        )));
    }
    let total = t_a + t_b;
    if total <= T::zero() {
        return Err(Error::Domain("both pump arms fully attenuated".into()));
    }
    let alpha = (t_a / total).sqrt();
    let beta = (t_b / total).sqrt();
    // renormalize away the rounding of the two square roots
    let norm = (alpha * alpha + beta * beta).sqrt();
    TimeBinState::new(alpha / norm, beta / norm, phi_pump)
}

/// Number of pairs emitted by one pump pulse.
pub fn sample_pair_count<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mu).expect("positive finite mean");
    poisson.sample(rng) as u64
}

/// Number of pairs in a pulse known to contain at least one.
pub fn sample_nonzero_pair_count<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    assert!(mu > 0.0, "zero-truncated Poisson needs a positive mean");
    if mu > 30.0 {
        loop {
            let n = sample_pair_count(mu, rng);
            if n > 0 {
                return n;
            }
        }
    }
    let p_nonzero = -(-mu).exp_m1();
    let target = rng.random::<f64>() * p_nonzero;
    let mut pmf = (-mu).exp() * mu;
    let mut acc = pmf;
    let mut n = 1u64;
    while acc <= target && pmf > 0.0 {
        n += 1;
        pmf *= mu / n as f64;
        acc += pmf;
    }
    n
}

const SERIES_MAX_TERMS: usize = 200;

/// Visibility expected when `n` simultaneous pairs dilute the fringe to
/// `1/n`, averaged over Poissonian emission with at least one pair:
/// `v_max e^{-mu} / (1 - e^{-mu}) sum_{n>=1} mu^n / (n! n)`.
pub fn multipair_visibility<T: Scalar>(mu: T, v_max: T) -> Result<T> {
    if !(mu > T::zero() && mu.is_finite()) {
        return Err(Error::Domain(format!("mean pair number must be > 0, got {mu}")));
    }
    let rel_tol = lit::<T>(1e-15).max(T::epsilon());
    // Poisson pmf terms keep the partial sums bounded by 1
    let mut pmf = (-mu).exp() * mu;
    let mut sum = pmf;
    for n in 2..=SERIES_MAX_TERMS {
        let nf = T::from_usize(n).unwrap();
        pmf = pmf * mu / nf;
        let term = pmf / nf;
        sum = sum + term;
        if nf > mu && term < rel_tol * sum {
            break;
        }
    }
    let p_nonzero = -(-mu).exp_m1();
    Ok(v_max * sum / p_nonzero)
}

/// Mean pair number inferred from the two singles rates, the average rate of
/// zero-delay coincidences and the pump rate: `s1 s2 / (4 rc f)`.
///
/// Ignores dark counts and multi-pair corrections, so it is only a rough
/// estimate above `mu ~ 0.3`.
pub fn estimate_mu<T: Scalar>(s1: T, s2: T, rc: T, f: T) -> Result<T> {
    let denom = lit::<T>(4.0) * rc * f;
    if denom == T::zero() {
        return Err(Error::Domain("coincidence rate times pump rate is zero".into()));
    }
    if !(s1 > T::zero() && s2 > T::zero() && rc > T::zero() && f > T::zero()) {
        return Err(Error::Domain(format!(
            "rates must be positive, got s1={s1}, s2={s2}, rc={rc}, f={f}"
        )));
    }
    Ok(s1 * s2 / denom)
}
