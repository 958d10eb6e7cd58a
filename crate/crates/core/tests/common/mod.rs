//! Configurations and invariant checks shared by the property and acceptance
//! suites. Every check panics with a description on failure.
#![allow(dead_code)]

use std::path::Path;

use su11_core::config::InterferometerConfig;
use su11_core::dispersion::MaterialRegistry;
use su11_core::jsa::JointSpectralAmplitude;
use su11_core::modes::{reweight_high_gain, schmidt_decompose, SchmidtDecomposition};
use su11_core::observables::{convolve_spectrometer, fwhm, CoherenceReport, Spectrum};

pub fn default_config() -> InterferometerConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    su11_core::config::load_config_with(&path, &MaterialRegistry::builtin()).unwrap()
}

/// Baseline geometry with an SF6 rod of `rod_cm` (none when 0).
pub fn config(n_points: usize, rod_cm: f64, drift: f64, offset_mm: f64, gain: f64) -> InterferometerConfig {
    let rods = if rod_cm > 0.0 {
        format!("[{{ material = \"SF6\", length_cm = {rod_cm} }}]")
    } else {
        "[]".to_string()
    };
    let text = format!(
        r#"
[pump]
wavelength_nm = 400.0
pulse_duration_ps = 0.9
path_offset_mm = {offset_mm}
drift_phase_rad = {drift}

[crystal]
material = "BBO"
length_mm = 3.0

[gap]
passes = 2
rods = {rods}

[run]
gain = {gain}
n_points = {n_points}
"#
    );
    InterferometerConfig::parse(&text, &MaterialRegistry::builtin()).unwrap()
}

pub fn check_normalization(jsa: &JointSpectralAmplitude) {
    let s: f64 = jsa.values().iter().map(|v| v.norm_sqr()).sum();
    assert!((s - 1.0).abs() < 1e-12, "sum |F|^2 = {s}");
}

pub fn check_exchange_symmetry(jsa: &JointSpectralAmplitude) {
    let n = jsa.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((jsa.get(i, j) - jsa.get(j, i)).norm());
        }
    }
    assert!(worst < 1e-10, "max |F_ij - F_ji| = {worst:e}");
}

/// Parseval and orthonormality at `tol`. The truncated reconstruction must
/// leave exactly the discarded mass behind, and the full-rank reconstruction
/// must reproduce the JSA.
pub fn check_schmidt(jsa: &JointSpectralAmplitude, tol: f64) {
    let d = schmidt_decompose(jsa, tol).unwrap();
    let total: f64 = d.weights().iter().sum::<f64>() + d.discarded_mass();
    assert!((total - 1.0).abs() < 1e-9, "Parseval: {total}");
    assert!(d.weights().windows(2).all(|w| w[0] >= w[1]), "weights not descending");
    assert!(d.weights().iter().all(|&l| l >= 0.0));
    let dw = jsa.grid().step();
    for modes in [d.signal_modes(), d.idler_modes()] {
        for j in 0..modes.len() {
            for k in 0..=j {
                let ip: faer::c64 = modes[j].iter().zip(&modes[k]).map(|(a, b)| a.conj() * b).sum::<faer::c64>() * dw;
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((ip - faer::c64::new(target, 0.0)).norm() < 1e-8, "<u_{j}, u_{k}> = {ip:?}");
            }
        }
    }
    let residual = |d: &SchmidtDecomposition| -> f64 {
        d.reconstruct()
            .iter()
            .zip(jsa.values())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
    };
    let r2 = residual(&d);
    assert!((r2 - d.discarded_mass()).abs().sqrt() < 1e-6, "residual {r2:e} vs discarded {:e}", d.discarded_mass());
    let full = schmidt_decompose(jsa, 0.0).unwrap();
    let err = residual(&full).sqrt();
    assert!(err < 1e-6, "full-rank reconstruction error {err:e}");
}

pub fn check_decomposition_repeatable(jsa: &JointSpectralAmplitude, tol: f64) {
    let a = schmidt_decompose(jsa, tol).unwrap();
    let b = schmidt_decompose(jsa, tol).unwrap();
    assert_eq!(a.weights(), b.weights());
    assert_eq!(a.signal_modes(), b.signal_modes());
}

/// Eq.-4 invariants on one weight vector over a ladder of gains.
pub fn check_reweighting(lambda: &[f64], gains: &[f64]) {
    let mut prev_top = 0.0;
    for &g in gains {
        let hg = reweight_high_gain(lambda, g).unwrap();
        let s: f64 = hg.lambda_tilde.iter().sum();
        assert!((s - 1.0).abs() < 1e-12, "sum lambda~ = {s} at G = {g}");
        for (a, b) in lambda.windows(2).zip(hg.lambda_tilde.windows(2)) {
            if a[0] > a[1] {
                assert!(b[0] >= b[1], "ordering broken at G = {g}");
            }
        }
        let top = hg.lambda_tilde[0];
        assert!(top >= prev_top * (1.0 - 1e-12), "lambda~_1 fell from {prev_top} to {top} at G = {g}");
        prev_top = top;
        let c = CoherenceReport::from_weights(&hg.lambda_tilde).unwrap();
        assert!(c.k >= 1.0, "K = {}", c.k);
        assert!(c.g2 > 1.0 && c.g2 <= 3.0, "g2 = {}", c.g2);
        assert_eq!(c.g2, 1.0 + 2.0 / c.k);
    }
}

pub fn check_convolution(spectrum: &Spectrum, resolution_nm: f64) {
    let c = convolve_spectrometer(spectrum, resolution_nm).unwrap();
    assert!(c.values().iter().all(|&v| v >= 0.0), "negative convolved density");
    let (a, b) = (spectrum.integral(), c.integral());
    assert!((a - b).abs() <= 1e-12 * a.abs(), "integral {a} -> {b}");
}

pub fn check_fwhm_scale(spectrum: &Spectrum, factor: f64) {
    let a = fwhm(spectrum).unwrap().width;
    let b = fwhm(&spectrum.scaled(factor).unwrap()).unwrap().width;
    assert!((a - b).abs() <= 1e-12 * a.abs(), "FWHM {a} -> {b} under x{factor}");
}

/// Normalized random weight vector in descending order.
pub fn random_weights(rng: &mut impl rand::Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>().powi(3) + 1e-6).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}
