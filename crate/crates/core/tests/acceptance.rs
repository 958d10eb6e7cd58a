//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_FAILURES` are still evaluated in full and
//! reported as FAIL; they do not fail the run. Any other failure, or a known
//! failure that starts passing, makes the run exit nonzero.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use serde_json::Value;
use su11_core::config::InterferometerConfig;
use su11_core::dispersion::MaterialRegistry;
use su11_core::jsa::{build_jsa, build_single_crystal_jsa_with, SingleCrystalPhase};
use su11_core::modes::{reweight_high_gain, schmidt_decompose};
use su11_core::scenarios::*;

/// Delay scan at 2.40 mm: a central background hump outranks the two-colour
/// peaks and the pair sum sits 2.7 grid steps off the pump frequency.
const KNOWN_FAILURES: &[u32] = &[6];

type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn zero_gap_identity() -> Outcome {
    let t = Instant::now();
    let two = common::config(256, 0.0, 0.0, 0.0, 7.0);
    let single = two.clone().with_crystal_length_mm(6.0).unwrap();
    let f2 = build_jsa(&two).unwrap();
    let f1 = build_single_crystal_jsa_with(&single, two.grid(), SingleCrystalPhase::Propagation).unwrap();
    let f1_abs = build_single_crystal_jsa_with(&single, two.grid(), SingleCrystalPhase::Omitted).unwrap();
    let mut amp = 0.0f64;
    let mut modulus = 0.0f64;
    for ((a, b), c) in f2.values().iter().zip(f1.values()).zip(f1_abs.values()) {
        amp = amp.max((a - b).norm());
        modulus = modulus.max((a.norm() - c.re.abs()).abs());
    }
    let tol = two.rank_tolerance();
    let w2 = schmidt_decompose(&f2, tol).unwrap();
    let w1 = schmidt_decompose(&f1, tol).unwrap();
    let n = w2.weights().len().max(w1.weights().len());
    let at = |w: &[f64], k: usize| w.get(k).copied().unwrap_or(0.0);
    let weights = (0..n)
        .map(|k| (at(w2.weights(), k) - at(w1.weights(), k)).abs())
        .fold(0.0, f64::max);
    let el = t.elapsed();
    outcome(
        amp < 1e-10 && modulus < 1e-10 && weights < 1e-8 && within(el, 30.0),
        format!(
            "max|F2-F1| = {amp:.2e}, max||F2|-|F1|| = {modulus:.2e}, max|dlambda| = {weights:.2e}, {:.1} s",
            el.as_secs_f64()
        ),
    )
}

fn reweighting_oracle() -> Outcome {
    let v: Value = serde_json::from_str(include_str!("data/reweight_oracle.json")).unwrap();
    let floats = |x: &Value| x.as_array().unwrap().iter().map(|f| f.as_f64().unwrap()).collect::<Vec<_>>();
    let cases = v["cases"].as_array().unwrap();
    let mut rel = 0.0f64;
    let mut low = 0.0f64;
    for c in cases {
        let lambda = floats(&c["lambda"]);
        let hg = reweight_high_gain(&lambda, c["gain"].as_f64().unwrap()).unwrap();
        for (a, b) in hg.lambda_tilde.iter().zip(floats(&c["lambda_tilde"])) {
            rel = rel.max((a - b).abs() / b.abs());
        }
        rel = rel.max((hg.total_photon_scale / c["total_photon_scale"].as_f64().unwrap() - 1.0).abs());
        let lg = reweight_high_gain(&lambda, 1e-3).unwrap();
        for (a, b) in lg.lambda_tilde.iter().zip(&lambda) {
            low = low.max((a - b).abs());
        }
    }
    outcome(
        cases.len() == 20 && rel <= 1e-12 && low < 1e-5,
        format!("{} vectors, max relative error {rel:.2e}, low-gain max|dlambda| = {low:.2e}", cases.len()),
    )
}

fn largest_gvd(cfg: &InterferometerConfig) -> InterferometerConfig {
    cfg.rod_sets()
        .iter()
        .map(|s| cfg.clone().with_rods(s.rods.clone()))
        .max_by(|a, b| a.gap_gvd().unwrap().total_cmp(&b.gap_gvd().unwrap()))
        .unwrap()
}

fn gain_study(cfg: &InterferometerConfig) -> Outcome {
    let t = Instant::now();
    let rows = run_gain_study(&largest_gvd(cfg), &[7.0, 10.0]).unwrap();
    let el = t.elapsed();
    let (k7, k10) = (rows[0].k, rows[1].k);
    outcome(
        (k7 - 1.55).abs() <= 0.15 && (k10 - 1.06).abs() <= 0.10 && within(el, 300.0),
        format!(
            "K(7) = {k7:.4} (g2 {:.4}), K(10) = {k10:.4} (g2 {:.4}), {:.1} s",
            rows[0].g2,
            rows[1].g2,
            el.as_secs_f64()
        ),
    )
}

fn narrowing(rows: &[GvdSweepRow]) -> Outcome {
    let ok = rows.iter().all(|r| r.error.is_none());
    let decreasing = rows.windows(2).all(|w| w[1].fwhm_constructive < w[0].fwhm_constructive);
    let last = rows.last().unwrap().fwhm_constructive;
    let trend: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.4}:{:.3}", r.k_double_prime_d, r.fwhm_constructive))
        .collect();
    outcome(
        ok && decreasing && last < 2.5,
        format!("k''d:FWHM(THz) {}", trend.join(" ")),
    )
}

fn mode_collapse(cfg: &InterferometerConfig, rows: &[GvdSweepRow]) -> Outcome {
    let single = run_single_crystal(&cfg.clone().with_gain(1e-3).unwrap()).unwrap();
    let best = rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.k_constructive)
        .fold(f64::INFINITY, f64::min);
    outcome(
        single.schmidt_number >= 20.0 && best < 2.0 && cfg.gain() == 7.0,
        format!(
            "single-crystal Schmidt number {:.2}, best interferometer K at G = 7: {best:.4}",
            single.schmidt_number
        ),
    )
}

fn two_colour(cfg: &InterferometerConfig) -> Outcome {
    let scan = run_delay_scan(cfg, &[1.4, 2.4]).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut pairs = Vec::new();
    for row in &scan.rows {
        let n = row.peaks.len();
        let offset = row.pair_sum_offset_steps.unwrap_or(f64::INFINITY);
        let fringed = row.peaks.iter().filter(|p| p.contrast_raw > 0.1).count();
        let washed = row.peaks.iter().all(|p| p.contrast_convolved < 0.1);
        pass &= n == 2 && offset < 2.0 && fringed == 1 && washed;
        notes.push(format!(
            "{:.2} mm: {n} peaks [{}], pair offset {offset:.2} steps, fringed regions {fringed}, max convolved contrast {:.3}",
            row.delta_l_p_mm,
            row.peaks.iter().map(|p| format!("{:.2} THz", p.frequency_thz)).collect::<Vec<_>>().join(", "),
            row.peaks.iter().map(|p| p.contrast_convolved).fold(0.0, f64::max)
        ));
        if n >= 2 {
            let (a, b) = (&row.peaks[0], &row.peaks[1]);
            pairs.push(((a.frequency_thz - b.frequency_thz).abs(), 0.5 * (a.height + b.height)));
        }
    }
    if pairs.len() == 2 {
        let grows = pairs[1].0 > pairs[0].0;
        let falls = pairs[1].1 < pairs[0].1;
        pass &= grows && falls;
        notes.push(format!(
            "separation {:.2} -> {:.2} THz, height {:.3e} -> {:.3e}",
            pairs[0].0, pairs[1].0, pairs[0].1, pairs[1].1
        ));
    } else {
        pass = false;
    }
    outcome(pass, notes.join("; "))
}

fn property_suites() -> Outcome {
    let t = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut run = |name: &str, f: &mut dyn FnMut()| {
        checks += 1;
        if catch_unwind(AssertUnwindSafe(f)).is_err() {
            failures.push(name.to_string());
        }
    };
    use rand::Rng;
    for _ in 0..10 {
        let (rod, drift): (f64, f64) = (rng.random_range(0.0..25.0), rng.random_range(0.0..6.3));
        run("JSA normalization and exchange symmetry", &mut || {
            let jsa = build_jsa(&common::config(128, rod, drift, 0.0, 1.0)).unwrap();
            common::check_normalization(&jsa);
            common::check_exchange_symmetry(&jsa);
        });
    }
    for _ in 0..5 {
        let (rod, drift): (f64, f64) = (rng.random_range(0.0..25.0), rng.random_range(0.0..6.3));
        run("Schmidt orthonormality and reconstruction", &mut || {
            let cfg = common::config(128, rod, drift, 0.0, 1.0);
            common::check_schmidt(&build_jsa(&cfg).unwrap(), cfg.rank_tolerance());
        });
        let (res, factor): (f64, f64) = (rng.random_range(0.05..2.0), 10f64.powf(rng.random_range(-6.0..6.0)));
        run("convolution mass, FWHM scale invariance, K and g2 bounds", &mut || {
            let r = evaluate(&common::config(128, rod, drift, 0.0, 7.0), Source::Interferometer, Coupling::Calibrated).unwrap();
            common::check_convolution(&r.spectrum, res);
            common::check_fwhm_scale(&r.spectrum, factor);
            assert!(r.coherence.k >= 1.0 && r.coherence.g2 > 1.0 && r.coherence.g2 <= 3.0);
        });
    }
    for _ in 0..20 {
        let len = rng.random_range(1..40);
        let lambda = common::random_weights(&mut rng, len);
        run("reweighting", &mut || common::check_reweighting(&lambda, &[0.1, 1.0, 3.0, 7.0, 10.0]));
    }
    let el = t.elapsed();
    failures.dedup();
    outcome(
        failures.is_empty() && within(el, 120.0),
        format!(
            "{checks} checks, failures: [{}], {:.1} s",
            failures.join(", "),
            el.as_secs_f64()
        ),
    )
}

fn csv_bytes(cfg: &InterferometerConfig) -> Vec<u8> {
    let mut out = Vec::new();
    write_sweep_csv(&run_gvd_sweep(cfg, cfg.rod_sets()).unwrap(), &mut out).unwrap();
    write_gain_csv(&run_gain_study(cfg, &[1e-3, 7.0, 10.0]).unwrap(), &mut out).unwrap();
    write_delay_csv(&run_delay_scan(cfg, &[0.0, 1.4, 2.4]).unwrap(), &mut out).unwrap();
    let r = run_pipeline(cfg).unwrap();
    r.spectrum.write_csv(&RunMetadata::new("spectrum", cfg).header(), &mut out).unwrap();
    out
}

fn determinism(cfg: &InterferometerConfig) -> Outcome {
    let mut spec = cfg.spec().clone();
    spec.run.n_points = 128;
    spec.run.phases = 3;
    if let Some(ds) = spec.delay_scan.as_mut() {
        ds.n_points = Some(256);
    }
    let small = InterferometerConfig::from_spec(spec, &MaterialRegistry::builtin()).unwrap();
    let a = csv_bytes(&small.clone().with_jobs(1));
    let b = csv_bytes(&small.with_jobs(0));
    outcome(a == b && !a.is_empty(), format!("{} bytes of sweep, gain, delay and spectrum CSV compared", a.len()))
}

fn main() {
    let cfg = common::default_config();
    let sweep_started = Instant::now();
    let rows = run_gvd_sweep(&cfg, cfg.rod_sets()).unwrap();
    let sweep_time = sweep_started.elapsed();

    let criteria: Vec<Criterion> = vec![
        (1, "zero-gap identity", Box::new(zero_gap_identity)),
        (2, "high-gain reweighting oracle", Box::new(reweighting_oracle)),
        (3, "gain study K(7), K(10)", Box::new(|| gain_study(&cfg))),
        (4, "spectral narrowing over the rod ladder", Box::new(|| narrowing(&rows))),
        (5, "mode-count collapse", Box::new(|| mode_collapse(&cfg, &rows))),
        (6, "two-colour energy conservation", Box::new(|| two_colour(&cfg))),
        (7, "property suites", Box::new(property_suites)),
        (8, "determinism", Box::new(|| determinism(&cfg))),
    ];
    println!("rod ladder sweep: {:.1} s", sweep_time.as_secs_f64());
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (result.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id} {tag}: {name}: {}", result.detail);
        if result.pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
