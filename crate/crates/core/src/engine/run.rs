use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DetectionModel, ExperimentConfig};
use super::histogram::CoincidenceHistogram;
use crate::analysis::{FringePoint, FringeScan};
use crate::apparatus::{classify_bin, first_dark_offset, Analyzer};
use crate::channel::{db_to_transmission, dispersion_spread, survival_probability};
use crate::error::{Error, Result};
use crate::quantum::{PairOutcome, PairOutcomeDistribution, Port, TimeBin, TimeBinState};
use crate::source::{estimate_mu, sample_nonzero_pair_count};

/// Counts accumulated over a run. All fields are integers, so merging
/// batches in any order gives the same result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub pulses: u64,
    pub rep_rate: f64,
    pub singles_a: u64,
    pub singles_b: u64,
    /// Singles falling in the first, middle and last windows.
    pub bin_singles_a: [u64; 3],
    pub bin_singles_b: [u64; 3],
    pub histogram_a: CoincidenceHistogram,
    pub histogram_b: CoincidenceHistogram,
    /// Both detectors in the middle window of the same pulse.
    pub triple_coincidences: u64,
    /// Both detectors in the same window (any of the three) of one pulse.
    pub zero_delay_coincidences: u64,
    /// A in the middle window of pulse `k`, B in the middle window of pulse
    /// `k +- j` with `1 <= j <= off_pulse_span`.
    pub off_pulse_coincidences: u64,
    /// Number of (pulse, neighbour) pairs examined for the above.
    pub off_pulse_exposure: u64,
}

impl RunResult {
    pub fn empty(config: &ExperimentConfig) -> Self {
        let (start, end) = config.windows.gate();
        let hist = CoincidenceHistogram::new(start, end, config.histogram_bin);
        Self {
            pulses: 0,
            rep_rate: config.source.rep_rate,
            singles_a: 0,
            singles_b: 0,
            bin_singles_a: [0; 3],
            bin_singles_b: [0; 3],
            histogram_a: hist.clone(),
            histogram_b: hist,
            triple_coincidences: 0,
            zero_delay_coincidences: 0,
            off_pulse_coincidences: 0,
            off_pulse_exposure: 0,
        }
    }

    /// Pump-equivalent integration time, seconds.
    pub fn duration(&self) -> f64 {
        self.pulses as f64 / self.rep_rate
    }

    pub fn merge(mut self, other: &RunResult) -> RunResult {
        self.pulses += other.pulses;
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        for i in 0..3 {
            self.bin_singles_a[i] += other.bin_singles_a[i];
            self.bin_singles_b[i] += other.bin_singles_b[i];
        }
        self.histogram_a.merge(&other.histogram_a);
        self.histogram_b.merge(&other.histogram_b);
        self.triple_coincidences += other.triple_coincidences;
        self.zero_delay_coincidences += other.zero_delay_coincidences;
        self.off_pulse_coincidences += other.off_pulse_coincidences;
        self.off_pulse_exposure += other.off_pulse_exposure;
        self
    }

    /// Expected accidental triple coincidences over the run, from the
    /// off-pulse rate.
    pub fn accidental_estimate(&self) -> f64 {
        if self.off_pulse_exposure == 0 {
            return 0.0;
        }
        self.off_pulse_coincidences as f64 * self.pulses as f64 / self.off_pulse_exposure as f64
    }

    pub fn singles_rate_a(&self) -> f64 {
        self.singles_a as f64 / self.duration()
    }

    pub fn singles_rate_b(&self) -> f64 {
        self.singles_b as f64 / self.duration()
    }

    /// Mean pair number from singles and zero-delay coincidence rates.
    pub fn mu_estimate(&self) -> Result<f64> {
        let rc = self.zero_delay_coincidences as f64 / self.duration();
        estimate_mu(self.singles_rate_a(), self.singles_rate_b(), rc, self.rep_rate)
    }
}

/// A validated experiment ready to run. Cheap to share between threads.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ExperimentConfig,
    /// Outcome tables indexed by the analyzer each photon enters.
    outcomes: [[PhasedOutcomes; 2]; 2],
    /// Probability that a photon bound for A or B is detected there.
    transmission: [f64; 2],
    /// RMS timing spread of a photon bound for A or B, emission excluded.
    timing: [f64; 2],
    /// Thinning probability applied per photon before routing (Geiger model).
    t_max: f64,
    pair_probability: f64,
    pair_mean: f64,
    dark_probability: [f64; 2],
    phase_jitter: f64,
}

const A: usize = 0;
const B: usize = 1;

impl Simulation {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let state = config.source.state()?;
        let (phis, loss, circulator, folded) = match &config.analyzer {
            Analyzer::Folded {
                interferometer,
                circulator_loss_db,
            } => (
                [interferometer.phi_analyzer(); 2],
                [interferometer.excess_loss_db; 2],
                *circulator_loss_db,
                true,
            ),
            Analyzer::TwoIndependent { a, b } => (
                [a.phi_analyzer(), b.phi_analyzer()],
                [a.excess_loss_db, b.excess_loss_db],
                0.0,
                false,
            ),
        };
        let fibers = if folded {
            [config.fiber_a, config.fiber_a]
        } else {
            [config.fiber_a, config.fiber_b]
        };
        let detectors = [config.detector_a, config.detector_b];
        let mut transmission = [0.0; 2];
        let mut timing = [0.0; 2];
        for d in [A, B] {
            let circ = if d == A { circulator } else { 0.0 };
            transmission[d] =
                survival_probability(&fibers[d]) * db_to_transmission(loss[d] + circ) * detectors[d].efficiency;
            timing[d] = dispersion_spread(&fibers[d]).hypot(detectors[d].jitter_rms);
        }
        let phase_jitter = if folded {
            config.fiber_a.phase_jitter_rms_rad
        } else {
            config
                .fiber_a
                .phase_jitter_rms_rad
                .hypot(config.fiber_b.phase_jitter_rms_rad)
        };
        let t_max = transmission[A].max(transmission[B]);
        let mu = config.source.mean_pairs;
        let pair_mean = match config.detection_model {
            // pairs with no photon left after thinning never click
            DetectionModel::Geiger => mu * t_max * (2.0 - t_max),
            DetectionModel::SinglePhoton => mu,
        };
        let gate = config.windows.gate_length();
        let dark_probability = [detectors[A].dark_probability(gate), detectors[B].dark_probability(gate)];
        let outcomes = [
            [
                PhasedOutcomes::new(&state, phis[0], phis[0]),
                PhasedOutcomes::new(&state, phis[0], phis[1]),
            ],
            [
                PhasedOutcomes::new(&state, phis[1], phis[0]),
                PhasedOutcomes::new(&state, phis[1], phis[1]),
            ],
        ];
        Ok(Self {
            outcomes,
            transmission,
            timing,
            t_max,
            pair_probability: -(-pair_mean).exp_m1(),
            pair_mean,
            dark_probability,
            phase_jitter,
            config,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Detection probability of a photon routed to detector A and B.
    pub fn transmission(&self) -> [f64; 2] {
        self.transmission
    }

    pub fn run(&self) -> RunResult {
        let n = self.config.n_pulses;
        let size = self.config.batch_size;
        let batches = n.div_ceil(size);
        (0..batches)
            .into_par_iter()
            .map(|b| self.run_batch(b, (n - b * size).min(size)))
            .reduce_with(|acc, r| acc.merge(&r))
            .unwrap_or_else(|| RunResult::empty(&self.config))
    }

    fn run_batch(&self, batch: u64, len: u64) -> RunResult {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(batch);
        let mut out = RunResult::empty(cfg);
        out.pulses = len;

        let mut streams = [
            EventStream::new(self.pair_probability, &mut rng),
            EventStream::new(self.dark_probability[A], &mut rng),
            EventStream::new(self.dark_probability[B], &mut rng),
        ];
        let (gate_start, gate_end) = cfg.windows.gate();
        let gate_len = gate_end - gate_start;
        let dark_rate = [cfg.detector_a.dark_rate, cfg.detector_b.dark_rate];
        let dead_time = [cfg.detector_a.dead_time, cfg.detector_b.dead_time];
        let period = cfg.source.pulse_period();
        let mut dead_until = [f64::NEG_INFINITY; 2];
        let mut candidates: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut middle: [Vec<u64>; 2] = [Vec::new(), Vec::new()];

        loop {
            let k = streams.iter().map(|s| s.next).min().unwrap();
            if k >= len {
                break;
            }
            candidates[A].clear();
            candidates[B].clear();
            if streams[0].next == k {
                self.emit_pairs(&mut rng, &mut candidates);
                streams[0].advance(&mut rng);
            }
            for d in [A, B] {
                let s = &mut streams[1 + d];
                if s.next == k {
                    let t = first_dark_offset(dark_rate[d], gate_len, self.dark_probability[d], &mut rng);
                    candidates[d].push(gate_start + t);
                    s.advance(&mut rng);
                }
            }

            let base = k as f64 * period;
            let mut clicks = [None; 2];
            for d in [A, B] {
                // a gated Geiger diode fires once, on the earliest live event
                let first = candidates[d]
                    .iter()
                    .copied()
                    .filter(|&t| t >= gate_start && t < gate_end && base + t >= dead_until[d])
                    .min_by(|x, y| x.total_cmp(y));
                if let Some(t) = first {
                    dead_until[d] = base + t + dead_time[d];
                    clicks[d] = Some((t, classify_bin(t, &cfg.windows)));
                }
            }
            record(&mut out, &clicks, k, &mut middle);
        }

        let span = cfg.off_pulse_span as u64;
        out.off_pulse_coincidences = count_neighbours(&middle[A], &middle[B], span);
        out.off_pulse_exposure = (1..=span).map(|j| 2 * len.saturating_sub(j)).sum();
        out
    }

    /// Photons of the pairs emitted in one pulse, as pump-referenced arrival
    /// times per detector.
    fn emit_pairs(&self, rng: &mut ChaCha8Rng, candidates: &mut [Vec<f64>; 2]) {
        let n = sample_nonzero_pair_count(self.pair_mean, rng);
        let shift = if self.phase_jitter > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            let (s, c) = (self.phase_jitter * z).sin_cos();
            (c, s)
        } else {
            (1.0, 0.0)
        };
        let dists = &self.outcomes;
        let folded = matches!(self.config.analyzer, Analyzer::Folded { .. });
        match self.config.detection_model {
            DetectionModel::Geiger => {
                let t = self.t_max;
                let q = t * (2.0 - t);
                for _ in 0..n {
                    let emitted = self.emission_offset(rng);
                    let u = rng.random::<f64>() * q;
                    let alive = if u < t * (1.0 - t) {
                        [true, false]
                    } else if u < 2.0 * t * (1.0 - t) {
                        [false, true]
                    } else {
                        [true, true]
                    };
                    let arms = if folded {
                        [0, 0]
                    } else {
                        [rng.random_range(0..2), rng.random_range(0..2)]
                    };
                    let outcome = dists[arms[0]][arms[1]].sample(shift, rng.random());
                    let photons = [(outcome.bin_1, outcome.port_1), (outcome.bin_2, outcome.port_2)];
                    for (i, &(bin, port)) in photons.iter().enumerate() {
                        if !alive[i] {
                            continue;
                        }
                        let dest = if folded {
                            Some(if port == Port::Minus { A } else { B })
                        } else {
                            (port == Port::Plus).then_some(arms[i])
                        };
                        if let Some(d) = dest {
                            if self.transmission[d] >= t || rng.random::<f64>() * t < self.transmission[d] {
                                candidates[d].push(self.arrival(bin, emitted, d, rng));
                            }
                        }
                    }
                }
            }
            DetectionModel::SinglePhoton => {
                let dist = if folded { &dists[0][0] } else { &dists[0][1] };
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let first: (PairOutcome, f64) = (dist.sample(shift, rng.random()), self.emission_offset(rng));
                let second = if i == j {
                    first
                } else {
                    (dist.sample(shift, rng.random()), self.emission_offset(rng))
                };
                // photon 1 of pair i is watched by A, photon 2 of pair j by B
                let watched = [
                    (first.0.bin_1, first.0.port_1, first.1),
                    (second.0.bin_2, second.0.port_2, second.1),
                ];
                for (d, &(bin, port, emitted)) in watched.iter().enumerate() {
                    let monitored = if folded && d == A { Port::Minus } else { Port::Plus };
                    if port == monitored && rng.random::<f64>() < self.transmission[d] {
                        candidates[d].push(self.arrival(bin, emitted, d, rng));
                    }
                }
            }
        }
    }

    fn emission_offset(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.config.source.pulse_width * z
    }

    fn arrival(&self, bin: TimeBin, emitted: f64, d: usize, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        bin.index() as f64 * self.config.source.bin_separation + emitted + self.timing[d] * z
    }
}

/// Pair outcome probabilities as functions of a pump phase shift `d`:
/// each is `a + b cos d + c sin d`, fixed by three evaluations.
#[derive(Debug, Clone)]
struct PhasedOutcomes {
    outcomes: Vec<PairOutcome>,
    coeffs: Vec<[f64; 3]>,
}

impl PhasedOutcomes {
    fn new(state: &TimeBinState<f64>, phi_1: f64, phi_2: f64) -> Self {
        let at = |d: f64| PairOutcomeDistribution::new(&state.with_phi_pump(state.phi_pump() + d), phi_1, phi_2);
        let (p0, p1, p2) = (at(0.0), at(FRAC_PI_2), at(PI));
        let outcomes: Vec<PairOutcome> = PairOutcome::all().collect();
        let coeffs = outcomes
            .iter()
            .map(|o| {
                let a = 0.5 * (p0.probability(o) + p2.probability(o));
                [a, 0.5 * (p0.probability(o) - p2.probability(o)), p1.probability(o) - a]
            })
            .collect();
        Self { outcomes, coeffs }
    }

    /// Inverse-CDF draw at shift `(cos d, sin d)` for `u` in `[0, 1)`.
    fn sample(&self, (cos, sin): (f64, f64), u: f64) -> PairOutcome {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, [a, b, c]) in self.coeffs.iter().enumerate() {
            let p = a + b * cos + c * sin;
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                break;
            }
        }
        self.outcomes[last]
    }
}

type Click = Option<(f64, Option<TimeBin>)>;

fn record(out: &mut RunResult, clicks: &[Click; 2], k: u64, middle: &mut [Vec<u64>; 2]) {
    for (d, click) in clicks.iter().enumerate() {
        if let Some((t, bin)) = *click {
            let (singles, bins, hist) = if d == A {
                (&mut out.singles_a, &mut out.bin_singles_a, &mut out.histogram_a)
            } else {
                (&mut out.singles_b, &mut out.bin_singles_b, &mut out.histogram_b)
            };
            *singles += 1;
            hist.record(t);
            if let Some(b) = bin {
                bins[b.index()] += 1;
                if b == TimeBin::Middle {
                    middle[d].push(k);
                }
            }
        }
    }
    if let (Some((_, Some(a))), Some((_, Some(b)))) = (clicks[A], clicks[B]) {
        if a == b {
            out.zero_delay_coincidences += 1;
            if a == TimeBin::Middle {
                out.triple_coincidences += 1;
            }
        }
    }
}

/// Pairs `(a, b)` from two sorted pulse lists with `1 <= |a - b| <= span`.
fn count_neighbours(a: &[u64], b: &[u64], span: u64) -> u64 {
    let mut lo = 0;
    let mut count = 0;
    for &ka in a {
        while lo < b.len() && b[lo] + span < ka {
            lo += 1;
        }
        let mut i = lo;
        while i < b.len() && b[i] <= ka + span {
            if b[i] != ka {
                count += 1;
            }
            i += 1;
        }
    }
    count
}

/// Pulse indices at which a Bernoulli(p) process fires, by geometric skips.
struct EventStream {
    geometric: Option<Geometric>,
    next: u64,
}

impl EventStream {
    fn new(p: f64, rng: &mut ChaCha8Rng) -> Self {
        let geometric = (p > 0.0).then(|| Geometric::new(p.min(1.0)).expect("probability in (0, 1]"));
        let mut s = Self { geometric, next: 0 };
        s.next = s.gap(rng);
        s
    }

    fn gap(&self, rng: &mut ChaCha8Rng) -> u64 {
        match &self.geometric {
            Some(g) => g.sample(rng),
            None => u64::MAX,
        }
    }

    fn advance(&mut self, rng: &mut ChaCha8Rng) {
        self.next = self.next.saturating_add(1).saturating_add(self.gap(rng));
    }
}

pub fn run_pulses(config: &ExperimentConfig) -> Result<RunResult> {
    Ok(Simulation::new(config.clone())?.run())
}

const SCAN_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed used for point `index` of a scan started from `seed`.
pub fn scan_point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(SCAN_SEED_STRIDE.wrapping_mul(index as u64 + 1))
}

/// Runs one experiment per entry of `phases`, the two-photon analyzer phase
/// (the sum of the phases seen by the two photons, so each interferometer
/// is set to half of it).
pub fn run_phase_scan_detailed(config: &ExperimentConfig, phases: &[f64]) -> Result<Vec<RunResult>> {
    config.validate()?;
    if let Some(p) = phases.iter().find(|p| !p.is_finite()) {
        return Err(Error::Config(format!("scan phase {p} is not finite")));
    }
    phases
        .iter()
        .enumerate()
        .map(|(i, &phase)| {
            let mut c = config.clone();
            c.analyzer.set_phi_analyzer(phase / 2.0);
            c.rng_seed = scan_point_seed(config.rng_seed, i);
            run_pulses(&c)
        })
        .collect()
}

pub fn run_phase_scan(config: &ExperimentConfig, phases: &[f64]) -> Result<FringeScan<f64>> {
    let runs = run_phase_scan_detailed(config, phases)?;
    Ok(scan_from_runs(phases, &runs))
}

pub fn scan_from_runs(phases: &[f64], runs: &[RunResult]) -> FringeScan<f64> {
    FringeScan::new(
        phases
            .iter()
            .zip(runs)
            .map(|(&phase, r)| FringePoint {
                phase,
                raw_count: r.triple_coincidences,
                accidental_estimate: r.accidental_estimate(),
                integration: r.duration(),
            })
            .collect(),
    )
}

/// `n` phases evenly spaced over `[0, 2 pi)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * std::f64::consts::TAU / n as f64).collect()
}
