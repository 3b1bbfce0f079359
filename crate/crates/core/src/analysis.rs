//! Fringe scans, accidental subtraction, sinusoidal fits and the theory
//! curves they are compared against.
//!
//! The fit model is `c(phi) = O [1 + V cos(phi - phi0)]`. Written as
//! `O + a cos(phi) + b sin(phi)` it is linear in `(O, a, b)`, so a weighted
//! least-squares solve gives the optimum for fixed weights. Poisson weights
//! are refined a few times from the fitted model. `V` and its uncertainty
//! follow from the parameter covariance.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::entropy_of_entanglement;
use crate::scalar::{lit, Scalar};
use crate::source::multipair_visibility;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint<T> {
    pub phase: T,
    pub raw_count: u64,
    pub accidental_estimate: T,
    /// Integration time behind the point, seconds.
    pub integration: T,
}

/// Coincidence counts versus analyzer phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan<T> {
    pub points: Vec<FringePoint<T>>,
    subtracted: bool,
    clamped: Vec<usize>,
}

impl<T: Scalar> FringeScan<T> {
    pub fn new(points: Vec<FringePoint<T>>) -> Self {
        Self {
            points,
            subtracted: false,
            clamped: Vec::new(),
        }
    }

    pub fn is_net(&self) -> bool {
        self.subtracted
    }

    /// Indices of points whose accidental estimate exceeded the raw count.
    pub fn clamped_points(&self) -> &[usize] {
        &self.clamped
    }

    /// Counts entering the fit: raw, or raw minus accidentals (floored at
    /// zero) once subtracted.
    pub fn counts(&self) -> Vec<T> {
        self.points.iter().map(|p| self.count(p)).collect()
    }

    fn count(&self, p: &FringePoint<T>) -> T {
        let raw = T::from_u64(p.raw_count).unwrap();
        if self.subtracted {
            (raw - p.accidental_estimate).max(T::zero())
        } else {
            raw
        }
    }
}

pub fn subtract_accidentals<T: Scalar>(scan: &FringeScan<T>) -> FringeScan<T> {
    let clamped = scan
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.accidental_estimate > T::from_u64(p.raw_count).unwrap())
        .map(|(i, _)| i)
        .collect();
    FringeScan {
        points: scan.points.clone(),
        subtracted: true,
        clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `sigma_i^2 = max(raw_i, 1)`.
    #[default]
    Poisson,
    /// Equal weights; the covariance is rescaled by the reduced chi-square.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions<T> {
    pub weighting: Weighting,
    /// Hold the fringe origin at this phase instead of fitting it.
    pub fixed_phase_origin: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    /// Fitted visibility clamped to `[0, 1]`.
    pub visibility: T,
    /// Fitted visibility before clamping.
    pub raw_visibility: T,
    pub clamped: bool,
    pub visibility_sigma: T,
    /// `O V`, counts.
    pub amplitude: T,
    /// `O`, counts.
    pub offset: T,
    pub phase_origin: T,
    pub residual_chi2: T,
    pub dof: usize,
}

pub const MIN_FIT_POINTS: usize = 5;
const POISSON_REFITS: usize = 4;

fn model_at<T: Scalar>(params: &[T], phase: T, fixed_origin: Option<T>) -> T {
    match fixed_origin {
        None => params[0] + params[1] * phase.cos() + params[2] * phase.sin(),
        Some(origin) => params[0] + params[1] * (phase - origin).cos(),
    }
}

pub fn fit_fringe<T: Scalar>(scan: &FringeScan<T>) -> Result<FitResult<T>> {
    fit_fringe_with(scan, &FitOptions::default())
}

pub fn fit_fringe_with<T: Scalar>(scan: &FringeScan<T>, options: &FitOptions<T>) -> Result<FitResult<T>> {
    check_design(scan)?;
    let y = scan.counts();
    let var: Vec<T> = scan
        .points
        .iter()
        .map(|p| match options.weighting {
            Weighting::Poisson => T::from_u64(p.raw_count.max(1)).unwrap(),
            Weighting::Uniform => T::one(),
        })
        .collect();

    let solve = |var: &[T]| match options.fixed_phase_origin {
        None => weighted_least_squares(scan, &y, var, |phi: T| vec![T::one(), phi.cos(), phi.sin()]),
        Some(origin) => weighted_least_squares(scan, &y, var, move |phi: T| vec![T::one(), (phi - origin).cos()]),
    };
    let (mut params, mut cov, mut chi2) = solve(&var)?;
    if options.weighting == Weighting::Poisson {
        // Observed-count weights favour downward fluctuations; refit with
        // variances taken from the model.
        for _ in 0..POISSON_REFITS {
            let var: Vec<T> = scan
                .points
                .iter()
                .map(|p| {
                    let model = model_at(&params, p.phase, options.fixed_phase_origin);
                    let background = if scan.subtracted {
                        p.accidental_estimate
                    } else {
                        T::zero()
                    };
                    (model + background).max(T::one())
                })
                .collect();
            (params, cov, chi2) = solve(&var)?;
        }
    }
    let n_params = params.len();
    let dof = scan.points.len() - n_params;
    if options.weighting == Weighting::Uniform && dof > 0 {
        let s2 = chi2 / T::from_usize(dof).unwrap();
        for row in cov.iter_mut() {
            for c in row.iter_mut() {
                *c = *c * s2;
            }
        }
    }

    let offset = params[0];
    if !(offset > T::zero()) {
        return Err(Error::DegenerateFit(format!("fitted offset {offset} is not positive")));
    }

    // gradient of V with respect to the linear parameters
    let (raw_visibility, phase_origin, grad) = match options.fixed_phase_origin {
        None => {
            let (a, b) = (params[1], params[2]);
            let r = a.hypot(b);
            let v = r / offset;
            let grad = if r > T::zero() {
                Some(vec![-v / offset, a / (offset * r), b / (offset * r)])
            } else {
                None
            };
            (v, b.atan2(a), grad)
        }
        Some(origin) => {
            let v = params[1] / offset;
            (v, origin, Some(vec![-v / offset, T::one() / offset]))
        }
    };
    let sigma = match grad {
        Some(g) => quadratic_form(&cov, &g).sqrt(),
        // at V = 0 the direction is undefined; use the mean radial variance
        None => ((cov[1][1] + cov[2][2]) / lit(2.0)).sqrt() / offset,
    };

    let visibility = raw_visibility.max(T::zero()).min(T::one());
    Ok(FitResult {
        visibility,
        raw_visibility,
        clamped: visibility != raw_visibility,
        visibility_sigma: sigma,
        amplitude: offset * raw_visibility,
        offset,
        phase_origin,
        residual_chi2: chi2,
        dof,
    })
}

fn check_design<T: Scalar>(scan: &FringeScan<T>) -> Result<()> {
    let n = scan.points.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "{n} points, at least {MIN_FIT_POINTS} needed"
        )));
    }
    let tau: T = lit(TAU);
    let mut phases: Vec<f64> = scan
        .points
        .iter()
        .map(|p| {
            let r = p.phase % tau;
            let r = if r < T::zero() { r + tau } else { r };
            r.to_f64().unwrap()
        })
        .collect();
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateFit("non-finite phase".into()));
    }
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    phases.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if phases.len() >= 2 && (phases[0] + TAU - phases[phases.len() - 1]) < 1e-12 {
        phases.pop();
    }
    if phases.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "{} distinct phases, at least 3 needed",
            phases.len()
        )));
    }
    // smallest arc covering all phases: 2 pi minus the widest empty gap
    let mut widest = phases[0] + TAU - phases[phases.len() - 1];
    for w in phases.windows(2) {
        widest = widest.max(w[1] - w[0]);
    }
    let span = TAU - widest;
    if span < std::f64::consts::FRAC_PI_2 {
        return Err(Error::DegenerateFit(format!(
            "phases span {span:.3} rad, less than pi/2"
        )));
    }
    Ok(())
}

/// Solves the weighted normal equations for the regressors produced by
/// `rows`, returning parameters, covariance and chi-square.
fn weighted_least_squares<T: Scalar>(
    scan: &FringeScan<T>,
    y: &[T],
    var: &[T],
    rows: impl Fn(T) -> Vec<T>,
) -> Result<(Vec<T>, Vec<Vec<T>>, T)> {
    let k = rows(T::zero()).len();
    let mut normal = vec![vec![T::zero(); k]; k];
    let mut rhs = vec![T::zero(); k];
    let design: Vec<Vec<T>> = scan.points.iter().map(|p| rows(p.phase)).collect();
    for ((x, &yi), &vi) in design.iter().zip(y).zip(var) {
        let w = T::one() / vi;
        for r in 0..k {
            rhs[r] = rhs[r] + w * x[r] * yi;
            for c in 0..k {
                normal[r][c] = normal[r][c] + w * x[r] * x[c];
            }
        }
    }
    let cov = invert(normal).ok_or_else(|| Error::DegenerateFit("singular normal equations".into()))?;
    let params: Vec<T> = (0..k)
        .map(|r| (0..k).fold(T::zero(), |acc, c| acc + cov[r][c] * rhs[c]))
        .collect();
    let chi2 = design.iter().zip(y).zip(var).fold(T::zero(), |acc, ((x, &yi), &vi)| {
        let model = x.iter().zip(&params).fold(T::zero(), |m, (&xi, &p)| m + xi * p);
        acc + (yi - model) * (yi - model) / vi
    });
    Ok((params, cov, chi2))
}

/// Gauss-Jordan inverse with partial pivoting, for the tiny normal matrices
/// used here.
fn invert<T: Scalar>(mut m: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tiny = scale * T::epsilon() * lit(64.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if !(m[pivot][col].abs() > tiny) {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let d = m[col][col];
        for j in 0..n {
            m[col][j] = m[col][j] / d;
            inv[col][j] = inv[col][j] / d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for j in 0..n {
                    m[row][j] = m[row][j] - f * m[col][j];
                    inv[row][j] = inv[row][j] - f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

fn quadratic_form<T: Scalar>(m: &[Vec<T>], g: &[T]) -> T {
    let mut acc = T::zero();
    for (r, gr) in g.iter().enumerate() {
        for (c, gc) in g.iter().enumerate() {
            acc = acc + *gr * m[r][c] * *gc;
        }
    }
    acc.max(T::zero())
}

/// Standard deviation of the fitted visibility over `resamples` bootstrap
/// replicas of the scan points. Replicas that cannot be fitted are skipped.
pub fn bootstrap_visibility_sigma<T: Scalar, R: Rng + ?Sized>(
    scan: &FringeScan<T>,
    resamples: usize,
    rng: &mut R,
) -> Result<T> {
    fit_fringe(scan)?;
    let n = scan.points.len();
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let points = (0..n).map(|_| scan.points[rng.random_range(0..n)]).collect();
        let replica = FringeScan {
            points,
            subtracted: scan.subtracted,
            clamped: Vec::new(),
        };
        if let Ok(fit) = fit_fringe(&replica) {
            values.push(fit.raw_visibility);
        }
    }
    if values.len() < 2 {
        return Err(Error::DegenerateFit("no bootstrap replica could be fitted".into()));
    }
    let m = T::from_usize(values.len()).unwrap();
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / m;
    let var = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / (m - T::one());
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementCurvePoint<T> {
    pub alpha_sq: T,
    pub entropy: T,
    pub visibility: T,
    /// Visibility multiplied by the curve's scale factor.
    pub scaled_visibility: T,
}

/// Visibility against entropy of entanglement for `alpha^2` swept evenly
/// from 0.5 to 1.
pub fn visibility_vs_entanglement_curve<T: Scalar>(
    n_points: usize,
    scale: T,
) -> Result<Vec<EntanglementCurvePoint<T>>> {
    if n_points < 2 {
        return Err(Error::Domain(format!("curve needs at least 2 points, got {n_points}")));
    }
    let half: T = lit(0.5);
    let last = T::from_usize(n_points - 1).unwrap();
    (0..n_points)
        .map(|i| {
            let alpha_sq = half + half * T::from_usize(i).unwrap() / last;
            let entropy = entropy_of_entanglement(alpha_sq)?;
            // 2 alpha beta, written so the endpoints come out exact
            let visibility = lit::<T>(2.0) * (alpha_sq * (T::one() - alpha_sq)).sqrt();
            Ok(EntanglementCurvePoint {
                alpha_sq,
                entropy,
                visibility,
                scaled_visibility: scale * visibility,
            })
        })
        .collect()
}

pub fn visibility_vs_mu_curve<T: Scalar>(mu_grid: &[T], v_max: T) -> Result<Vec<(T, T)>> {
    mu_grid
        .iter()
        .map(|&mu| Ok((mu, multipair_visibility(mu, v_max)?)))
        .collect()
}
