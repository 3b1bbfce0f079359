//! Optical fiber: loss, chromatic pulse spreading and slow phase wander.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// A fiber spool followed by the spectral filter in front of it.
///
/// Units follow fiber datasheet conventions and are part of the field names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec<T> {
    pub length_km: T,
    pub attenuation_db_per_km: T,
    /// Dispersion slope `S0` at the zero-dispersion wavelength, ps/(nm^2 km).
    pub dispersion_slope_ps_nm2_km: T,
    pub zero_dispersion_wavelength_nm: T,
    pub center_wavelength_nm: T,
    /// FWHM of the (Gaussian) photon spectrum after filtering.
    pub filter_bandwidth_nm: T,
    /// RMS wander of the two-photon fringe phase during one integration.
    pub phase_jitter_rms_rad: T,
}

impl<T: Scalar> Default for FiberSpec<T> {
    /// Zero-length standard single-mode fiber at 1314 nm behind a 40 nm
    /// filter. Loss and dispersion slope are generic datasheet values.
    fn default() -> Self {
        Self {
            length_km: T::zero(),
            attenuation_db_per_km: lit(0.35),
            dispersion_slope_ps_nm2_km: lit(0.092),
            zero_dispersion_wavelength_nm: lit(1314.0),
            center_wavelength_nm: lit(1314.0),
            filter_bandwidth_nm: lit(40.0),
            phase_jitter_rms_rad: T::zero(),
        }
    }
}

impl<T: Scalar> FiberSpec<T> {
    pub fn with_length(self, length_km: T) -> Self {
        Self { length_km, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        check(self.length_km >= T::zero(), "fiber length_km must be >= 0")?;
        check(
            self.attenuation_db_per_km >= T::zero(),
            "fiber attenuation must be >= 0",
        )?;
        check(
            self.filter_bandwidth_nm > T::zero(),
            "fiber filter_bandwidth must be > 0",
        )?;
        check(
            self.phase_jitter_rms_rad >= T::zero(),
            "fiber phase jitter must be >= 0",
        )?;
        check(
            self.dispersion_slope_ps_nm2_km.is_finite()
                && self.zero_dispersion_wavelength_nm.is_finite()
                && self.center_wavelength_nm.is_finite(),
            "fiber dispersion parameters must be finite",
        )
    }
}

/// Fraction of photons surviving the spool, `10^(-a L / 10)`.
pub fn survival_probability<T: Scalar>(fiber: &FiberSpec<T>) -> T {
    db_to_transmission(fiber.attenuation_db_per_km * fiber.length_km)
}

pub fn db_to_transmission<T: Scalar>(loss_db: T) -> T {
    lit::<T>(10.0).powf(-loss_db / lit(10.0))
}

/// RMS spread of group delay across the filtered spectrum, in seconds.
///
/// With `D(l) = S0 (l - l0)` the relative group delay is
/// `L S0 (l - l0)^2 / 2`. For a Gaussian spectrum of RMS width `s` centred a
/// distance `d` from `l0` its standard deviation is `L S0 s sqrt(d^2 + s^2/2)`.
pub fn dispersion_spread<T: Scalar>(fiber: &FiberSpec<T>) -> T {
    let sigma_nm = fiber.filter_bandwidth_nm / fwhm_per_sigma::<T>();
    let detuning = fiber.center_wavelength_nm - fiber.zero_dispersion_wavelength_nm;
    let ps = fiber.length_km
        * fiber.dispersion_slope_ps_nm2_km.abs()
        * sigma_nm
        * (detuning * detuning + sigma_nm * sigma_nm / lit(2.0)).sqrt();
    ps * lit(1e-12)
}

fn fwhm_per_sigma<T: Scalar>() -> T {
    lit::<T>(8.0 * std::f64::consts::LN_2).sqrt()
}

/// Photon wavepacket width after the spool: `sqrt(w^2 + sigma_D^2)`.
pub fn broadened_pulse_width<T: Scalar>(fiber: &FiberSpec<T>, input_width: T) -> T {
    let spread = dispersion_spread(fiber);
    if spread == T::zero() {
        return input_width;
    }
    input_width.hypot(spread)
}

/// Probability that a Gaussian wavepacket of RMS `width` is detected past the
/// midpoint towards a neighbouring slot `bin_separation` away:
/// `2 Phi(-separation / (2 width))`, kept strictly below one.
pub fn bin_overlap_probability<T: Scalar>(width: T, bin_separation: T) -> T {
    let z = bin_separation / (lit::<T>(2.0) * width);
    let p = lit::<T>(2.0) * std_normal_cdf(-z);
    p.min(T::one() - T::epsilon())
}

/// Fringe visibility left after averaging over a Gaussian phase wander of
/// RMS `jitter_rms`.
pub fn apply_phase_jitter<T: Scalar>(visibility: T, jitter_rms: T) -> T {
    visibility * (-jitter_rms * jitter_rms / lit(2.0)).exp()
}

pub fn std_normal_cdf<T: Scalar>(x: T) -> T {
    let x = x.to_f64().unwrap_or(f64::NAN);
    let p = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
    T::from_f64(p).unwrap()
}
