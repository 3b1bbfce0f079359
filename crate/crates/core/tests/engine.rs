use std::f64::consts::PI;

use timebin::apparatus::accidental_rate;
use timebin::engine::{uniform_phases, RunResult};
use timebin::{
    fit_fringe, run_phase_scan, run_pulses, subtract_accidentals, Analyzer, DetectionModel, ExperimentConfig, Fit,
    Simulation,
};

fn ideal(mu: f64, pulses: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::ideal(mu, pulses).with_seed(seed)
}

fn with_alpha_sq(mut c: ExperimentConfig, alpha_sq: f64) -> ExperimentConfig {
    c.source.arm_transmission_short = alpha_sq;
    c.source.arm_transmission_long = 1.0 - alpha_sq;
    c
}

fn net_fit(c: &ExperimentConfig, points: usize) -> Fit {
    let scan = run_phase_scan(c, &uniform_phases(points)).unwrap();
    fit_fringe(&subtract_accidentals(&scan)).unwrap()
}

fn within(value: f64, expected: f64, sigma: f64, k: f64) -> bool {
    (value - expected).abs() <= k * sigma
}

#[test]
fn nothing_in_nothing_out() {
    let r = run_pulses(&ideal(0.0, 1_000_000, 1)).unwrap();
    let empty = RunResult::empty(&ideal(0.0, 1_000_000, 1));
    assert_eq!(r.singles_a + r.singles_b, 0);
    assert_eq!(r.triple_coincidences, 0);
    assert_eq!(r.histogram_a, empty.histogram_a);
    assert_eq!(r.off_pulse_coincidences, 0);
    assert_eq!(r.pulses, 1_000_000);
}

#[test]
fn fringe_contrast_at_low_mu() {
    let c = ideal(0.01, 10_000_000, 2);
    let bright = run_pulses(&ExperimentConfig {
        analyzer: c.analyzer.clone().with_phi_analyzer(PI / 2.0),
        ..c.clone()
    });
    let dark = run_pulses(&ExperimentConfig {
        analyzer: c.analyzer.clone().with_phi_analyzer(0.0),
        ..c.clone()
    });
    let (bright, dark) = (bright.unwrap().triple_coincidences, dark.unwrap().triple_coincidences);
    // the folded arrangement puts the maximum at a two-photon phase of pi
    assert!(bright >= 50 * dark.max(1), "{bright} vs {dark}");
}

#[test]
fn identical_seed_identical_result() {
    let mut c = ExperimentConfig::default().with_seed(9);
    c.n_pulses = 2_000_000;
    c.batch_size = 300_000;
    assert_eq!(run_pulses(&c).unwrap(), run_pulses(&c).unwrap());
    let other = run_pulses(&c.clone().with_seed(10)).unwrap();
    assert_ne!(run_pulses(&c).unwrap(), other);
}

#[test]
fn thread_count_does_not_matter() {
    let mut c = ExperimentConfig::default().with_seed(4);
    c.n_pulses = 2_000_000;
    c.batch_size = 250_000;
    let run_with = |n| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| run_pulses(&c).unwrap())
    };
    assert_eq!(run_with(1), run_with(3));
}

#[test]
fn maximally_entangled_scan_has_unit_visibility() {
    let fit = net_fit(&ideal(0.01, 2_000_000, 3), 16);
    assert!(within(fit.raw_visibility, 1.0, fit.visibility_sigma, 3.0), "{fit:?}");
}

#[test]
fn unbalanced_state_scan() {
    let fit = net_fit(&with_alpha_sq(ideal(0.01, 4_000_000, 5), 0.8), 16);
    assert!(within(fit.raw_visibility, 0.8, fit.visibility_sigma, 3.0), "{fit:?}");
}

#[test]
fn dark_counts_match_accidental_rate() {
    let mut c = ideal(0.0, 10_000_000, 6);
    c.detector_a.dark_rate = 1e7;
    c.detector_b.dark_rate = 1e7;
    let r = run_pulses(&c).unwrap();
    let w = c.windows.window_width;
    let in_window = |n: u64| n as f64 / (r.pulses as f64 * w);
    let predicted = accidental_rate(
        in_window(r.bin_singles_a[1]),
        in_window(r.bin_singles_b[1]),
        w,
        r.rep_rate,
    );
    let measured = r.triple_coincidences as f64 / r.duration();
    let sigma = (predicted / r.duration()).sqrt();
    assert!(r.triple_coincidences > 100);
    assert!(
        within(measured, predicted, sigma, 3.0),
        "{measured} vs {predicted} +- {sigma}"
    );
}

#[test]
fn bookkeeping_invariants() {
    let mut c = ExperimentConfig::default().with_fiber_length(11.0).with_seed(8);
    c.n_pulses = 4_000_000;
    let r = run_pulses(&c).unwrap();
    assert_eq!(r.histogram_a.total(), r.singles_a);
    assert_eq!(r.histogram_b.total(), r.singles_b);
    assert!(r.bin_singles_a.iter().sum::<u64>() <= r.singles_a);
    assert!(r.triple_coincidences <= r.singles_a.min(r.singles_b));
    assert!(r.zero_delay_coincidences >= r.triple_coincidences);
}

#[test]
fn side_peaks_follow_amplitudes() {
    let alpha_sq = 0.8;
    let mut c = with_alpha_sq(ideal(0.01, 10_000_000, 11), alpha_sq);
    c.detection_model = DetectionModel::SinglePhoton;
    let r = run_pulses(&c).unwrap();
    for bins in [r.bin_singles_a, r.bin_singles_b] {
        let (early, late) = (bins[0] as f64, bins[2] as f64);
        let ratio = early / late;
        let sigma = ratio * (1.0 / early + 1.0 / late).sqrt();
        assert!(within(ratio, alpha_sq / (1.0 - alpha_sq), sigma, 3.0), "{bins:?}");
    }
}

#[test]
fn arrangements_agree() {
    let folded = net_fit(&ideal(0.01, 2_000_000, 12), 16);
    let mut c = ideal(0.01, 4_000_000, 12);
    c.analyzer = Analyzer::two_independent(c.source.bin_separation);
    let split = net_fit(&c, 16);
    let combined = folded.visibility_sigma.hypot(split.visibility_sigma);
    assert!(
        within(folded.raw_visibility, split.raw_visibility, combined, 3.0),
        "{folded:?} {split:?}"
    );
    assert!(within(split.raw_visibility, 1.0, split.visibility_sigma, 3.0));
}

fn lossy(loss_db: f64, seed: u64) -> ExperimentConfig {
    let mut c = ideal(0.02, 8_000_000, seed);
    c.detector_a.efficiency = 0.3;
    c.detector_b.efficiency = 0.3;
    c.fiber_a.length_km = 1.0;
    c.fiber_a.attenuation_db_per_km = loss_db;
    c.fiber_a.dispersion_slope_ps_nm2_km = 0.0;
    c
}

#[test]
fn singles_scale_with_survival() {
    // both photons of a pair can reach A, so clicks go as t - t^2/4; keep t small
    let thin = |mut c: ExperimentConfig| {
        c.detector_a.efficiency = 0.03;
        c.n_pulses = 30_000_000;
        c
    };
    let (near, far) = (thin(lossy(0.0, 13)), thin(lossy(3.0, 13)));
    let t_near = Simulation::new(near.clone()).unwrap().transmission()[0];
    let t_far = Simulation::new(far.clone()).unwrap().transmission()[0];
    let (a, b) = (
        run_pulses(&near).unwrap().singles_a as f64,
        run_pulses(&far).unwrap().singles_a as f64,
    );
    let ratio = b / a;
    let sigma = ratio * (1.0 / a + 1.0 / b).sqrt();
    assert!(
        within(ratio, t_far / t_near, sigma, 3.0),
        "{ratio} vs {}",
        t_far / t_near
    );
}

#[test]
fn loss_leaves_net_visibility_unchanged() {
    let mut near = lossy(0.0, 14);
    let mut far = lossy(3.0, 15);
    for c in [&mut near, &mut far] {
        c.detector_a.dark_rate = 1e5;
        c.detector_b.dark_rate = 1e5;
        c.n_pulses = 4_000_000;
    }
    let (a, b) = (net_fit(&near, 12), net_fit(&far, 12));
    let combined = a.visibility_sigma.hypot(b.visibility_sigma);
    assert!(within(a.raw_visibility, b.raw_visibility, combined, 3.0), "{a:?} {b:?}");
}
