use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use timebin::analysis::{visibility_vs_entanglement_curve, visibility_vs_mu_curve};
use timebin::{fit_fringe, run_phase_scan, run_pulses, subtract_accidentals, FringePoint, Scan};

use crate::config::{config_hash, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::output::{num, Provenance, Table};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const SCAN_CSV: &str = "scan.csv";
pub const FIT_CSV: &str = "fit_report.csv";

const FIT_COLUMNS: [&str; 13] = [
    "repetition",
    "points",
    "v_raw",
    "v_raw_sigma",
    "v_net",
    "v_net_unclamped",
    "delta_v",
    "chi2",
    "dof",
    "phase_origin_rad",
    "clamped_points",
    "seed",
    "config_hash",
];

fn load(config: &Path, seed: Option<u64>) -> CliResult<(ConfigFile, timebin::ExperimentConfig)> {
    let file = ConfigFile::load(config)?;
    let mut experiment = file.experiment()?;
    if let Some(s) = seed {
        experiment.rng_seed = s;
    }
    Ok((file, experiment))
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let (_, c) = load(config, seed)?;
    let r = run_pulses(&c)?;
    let prov = Provenance {
        command: "run",
        config_hash: config_hash(&c, None),
        seed: Some(c.rng_seed),
    };

    let mut summary = Table::new(&[
        "pulses",
        "duration_s",
        "phi_analyzer_rad",
        "singles_a",
        "singles_b",
        "triple_coincidences",
        "zero_delay_coincidences",
        "off_pulse_coincidences",
        "accidental_estimate",
        "mu_estimate",
    ]);
    summary.push(vec![
        r.pulses.to_string(),
        num(r.duration()),
        num(c.analyzer.phi_analyzer()),
        r.singles_a.to_string(),
        r.singles_b.to_string(),
        r.triple_coincidences.to_string(),
        r.zero_delay_coincidences.to_string(),
        r.off_pulse_coincidences.to_string(),
        num(r.accidental_estimate()),
        r.mu_estimate().map(num).unwrap_or_default(),
    ]);
    summary.write(out, SUMMARY_CSV, &prov)?;

    let mut hist = Table::new(&["time_ns", "counts_a", "counts_b"]);
    let (a, b) = (&r.histogram_a, &r.histogram_b);
    for (i, (ca, cb)) in a.counts().iter().zip(b.counts()).enumerate() {
        hist.push(vec![num(a.bin_center(i) * 1e9), ca.to_string(), cb.to_string()]);
    }
    hist.write(out, HISTOGRAM_CSV, &prov)?;
    Ok(())
}

fn fit_row(rep: u32, scan: &Scan, seed: Option<u64>, hash: &str) -> CliResult<Vec<String>> {
    let with_rep = |e: timebin::Error| -> CliError {
        match CliError::from(e) {
            CliError::Degenerate(m) => CliError::Degenerate(format!("repetition {rep}: {m}")),
            other => other,
        }
    };
    let raw = fit_fringe(scan).map_err(with_rep)?;
    let net_scan = subtract_accidentals(scan);
    let net = fit_fringe(&net_scan).map_err(with_rep)?;
    Ok(vec![
        rep.to_string(),
        scan.points.len().to_string(),
        num(raw.visibility),
        num(raw.visibility_sigma),
        num(net.visibility),
        num(net.raw_visibility),
        num(net.visibility_sigma),
        num(net.residual_chi2),
        net.dof.to_string(),
        num(net.phase_origin),
        net_scan.clamped_points().len().to_string(),
        seed.map_or_else(|| "none".into(), |s| s.to_string()),
        hash.to_string(),
    ])
}

fn scan_rows(table: &mut Table, rep: u32, scan: &Scan) {
    let net = subtract_accidentals(scan).counts();
    for (p, n) in scan.points.iter().zip(net) {
        table.push(vec![
            rep.to_string(),
            num(p.phase),
            p.raw_count.to_string(),
            num(p.accidental_estimate),
            num(n),
            num(p.integration),
        ]);
    }
}

const SCAN_COLUMNS: [&str; 6] = ["repetition", "phase_rad", "raw", "accidental", "net", "integration_s"];

pub fn scan(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let (file, c) = load(config, seed)?;
    let plan = file.scan_plan()?;
    let hash = config_hash(&c, Some(&plan));
    let prov = Provenance {
        command: "scan",
        config_hash: hash.clone(),
        seed: Some(c.rng_seed),
    };

    let mut scans = Vec::new();
    for rep in 0..plan.repetitions {
        let cfg = c.clone().with_seed(c.rng_seed.wrapping_add(rep as u64));
        scans.push((rep, cfg.rng_seed, run_phase_scan(&cfg, &plan.phases)?));
    }
    let mut table = Table::new(&SCAN_COLUMNS);
    for (rep, _, s) in &scans {
        scan_rows(&mut table, *rep, s);
    }
    // the data is worth keeping even if it cannot be fitted
    table.write(out, SCAN_CSV, &prov)?;

    let mut report = Table::new(&FIT_COLUMNS);
    for (rep, seed, s) in &scans {
        report.push(fit_row(*rep, s, Some(*seed), &hash)?);
    }
    report.write(out, FIT_CSV, &prov)?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub enum CurveKind {
    VersusEntanglement {
        points: usize,
        scale: Option<f64>,
    },
    VersusMu {
        points: usize,
        mu_min: f64,
        mu_max: f64,
        v_max: f64,
    },
}

pub fn curve(kind: CurveKind, out: &Path) -> CliResult<()> {
    let bad = |m: String| Err(CliError::Parse(m));
    let (name, table, params) = match kind {
        CurveKind::VersusEntanglement { points, scale } => {
            if let Some(s) = scale {
                if !(s > 0.0 && s <= 1.0) {
                    return bad(format!("--scale must lie in (0, 1], got {s}"));
                }
            }
            let pts = visibility_vs_entanglement_curve(points, scale.unwrap_or(1.0))
                .map_err(|e| CliError::Parse(e.to_string()))?;
            let mut t = if scale.is_some() {
                Table::new(&["alpha_sq", "entropy", "visibility", "scaled_visibility"])
            } else {
                Table::new(&["alpha_sq", "entropy", "visibility"])
            };
            for p in pts {
                let mut row = vec![num(p.alpha_sq), num(p.entropy), num(p.visibility)];
                if scale.is_some() {
                    row.push(num(p.scaled_visibility));
                }
                t.push(row);
            }
            ("v_vs_e.csv", t, format!("v_vs_e points={points} scale={scale:?}"))
        }
        CurveKind::VersusMu {
            points,
            mu_min,
            mu_max,
            v_max,
        } => {
            if points < 2 {
                return bad(format!("--points must be >= 2, got {points}"));
            }
            if !(mu_min > 0.0 && mu_max > mu_min && mu_max.is_finite()) {
                return bad(format!("need 0 < --mu-min < --mu-max, got {mu_min} and {mu_max}"));
            }
            if !(v_max > 0.0 && v_max <= 1.0) {
                return bad(format!("--v-max must lie in (0, 1], got {v_max}"));
            }
            let last = (points - 1) as f64;
            let grid: Vec<f64> = (0..points)
                .map(|i| {
                    if i == points - 1 {
                        mu_max
                    } else {
                        mu_min + (mu_max - mu_min) * i as f64 / last
                    }
                })
                .collect();
            let mut t = Table::new(&["mu", "visibility"]);
            for (mu, v) in visibility_vs_mu_curve(&grid, v_max).map_err(|e| CliError::Parse(e.to_string()))? {
                t.push(vec![num(mu), num(v)]);
            }
            (
                "v_vs_mu.csv",
                t,
                format!("v_vs_mu points={points} mu_min={mu_min} mu_max={mu_max} v_max={v_max}"),
            )
        }
    };
    let hash = Sha256::digest(params.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    table.write(
        out,
        name,
        &Provenance {
            command: "curve",
            config_hash: hash,
            seed: None,
        },
    )?;
    Ok(())
}

/// `# key: value` lines at the top of a CSV file.
fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().take_while(|l| l.starts_with('#')).find_map(|l| {
        l.trim_start_matches('#')
            .trim()
            .strip_prefix(key)?
            .strip_prefix(':')
            .map(str::trim)
    })
}

struct Columns {
    repetition: Option<usize>,
    phase: usize,
    raw: usize,
    accidental: usize,
    integration: Option<usize>,
}

fn parse_scan_csv(text: &str, path: &Path) -> CliResult<BTreeMap<u32, Vec<FringePoint<f64>>>> {
    let bad = |line: u64, m: String| CliError::Parse(format!("{}: line {line}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need =
        |name: &str| find(name).ok_or_else(|| CliError::Parse(format!("{}: missing column {name}", path.display())));
    let cols = Columns {
        repetition: find("repetition"),
        phase: need("phase_rad")?,
        raw: need("raw")?,
        accidental: need("accidental")?,
        integration: find("integration_s"),
    };

    let mut groups: BTreeMap<u32, Vec<FringePoint<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> CliResult<&str> {
            record.get(i).ok_or_else(|| bad(line, format!("missing {name}")))
        };
        let float = |i: usize, name: &str| -> CliResult<f64> {
            let s = field(i, name)?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("{name} {s:?} is not a finite number")))
        };
        let rep = match cols.repetition {
            Some(i) => {
                let s = field(i, "repetition")?;
                s.parse::<u32>()
                    .map_err(|_| bad(line, format!("repetition {s:?} is not a non-negative integer")))?
            }
            None => 0,
        };
        let raw_text = field(cols.raw, "raw")?;
        let raw = raw_text.parse::<u64>().map_err(|_| {
            if raw_text.starts_with('-') {
                bad(line, format!("negative raw count {raw_text}"))
            } else {
                bad(line, format!("raw count {raw_text:?} is not a non-negative integer"))
            }
        })?;
        let accidental = float(cols.accidental, "accidental")?;
        if accidental < 0.0 {
            return Err(bad(line, format!("negative accidental estimate {accidental}")));
        }
        let integration = match cols.integration {
            Some(i) => float(i, "integration_s")?,
            None => 0.0,
        };
        groups.entry(rep).or_default().push(FringePoint {
            phase: float(cols.phase, "phase_rad")?,
            raw_count: raw,
            accidental_estimate: accidental,
            integration,
        });
    }
    if groups.is_empty() {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(groups)
}

pub fn fit(input: &Path, out: &Path) -> CliResult<()> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let groups = parse_scan_csv(&text, input)?;
    let hash = match header_value(&text, "config_hash") {
        Some(h) => h.to_string(),
        None => Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect(),
    };
    let seed = header_value(&text, "seed").and_then(|s| s.parse::<u64>().ok());
    let mut report = Table::new(&FIT_COLUMNS);
    for (rep, points) in groups {
        let scan = Scan::new(points);
        report.push(fit_row(rep, &scan, seed.map(|s| s.wrapping_add(rep as u64)), &hash)?);
    }
    report.write(
        out,
        FIT_CSV,
        &Provenance {
            command: "fit",
            config_hash: hash,
            seed,
        },
    )?;
    Ok(())
}
