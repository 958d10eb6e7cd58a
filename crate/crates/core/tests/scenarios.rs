mod common;

use common::config;
use su11_core::config::InterferometerConfig;
use su11_core::dispersion::{Material, MaterialRegistry};
use su11_core::scenarios::*;

const LADDER: &str = r#"
[pump]
wavelength_nm = 400.0
pulse_duration_ps = 0.9

[crystal]
material = "BBO"
length_mm = 3.0

[gap]
passes = 2
rods = []

[run]
gain = 7.0
n_points = 64
phases = 3

[sweep]
rod_sets = [
    { label = "SF6 18.3 cm", rods = [{ material = "SF6", length_cm = 18.3 }] },
    { label = "air", rods = [] },
    { label = "IR only", rods = [{ material = "IRGLASS", length_cm = 5.0 }] },
    { label = "BK7 10 cm", rods = [{ material = "BK7", length_cm = 10.0 }] },
]
"#;

const IR_GLASS: &str = r#"
name = "IRGLASS"
version = "test"
source = "synthetic glass valid only in the infrared"

[index]
form = "sellmeier-3"
coefficients = [1.0, 0.2, 0.5, 0.01, 0.05, 100.0]
valid_range_um = [1.2, 2.5]
"#;

fn registry() -> MaterialRegistry {
    let mut reg = MaterialRegistry::builtin();
    reg.insert(Material::parse(IR_GLASS, "IRGLASS").unwrap());
    reg
}

fn ladder() -> InterferometerConfig {
    InterferometerConfig::parse(LADDER, &registry()).unwrap()
}

fn sweep_csv(cfg: &InterferometerConfig) -> Vec<u8> {
    let rows = run_gvd_sweep(cfg, cfg.rod_sets()).unwrap();
    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out).unwrap();
    out
}

#[test]
fn sweep_sorts_rows_and_marks_failures() {
    let cfg = ladder();
    let rows = run_gvd_sweep(&cfg, cfg.rod_sets()).unwrap();
    assert_eq!(rows.len(), 4);
    let failed: Vec<_> = rows.iter().filter(|r| r.error.is_some()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].label, "IR only");
    assert!(failed[0].error.as_ref().unwrap().contains("outside valid range"));
    assert!(failed[0].fwhm_constructive.is_nan());
    let ok: Vec<_> = rows.iter().filter(|r| r.error.is_none()).collect();
    assert_eq!(ok[0].label, "air");
    assert!(ok.windows(2).all(|w| w[0].k_double_prime_d <= w[1].k_double_prime_d));
    for r in ok {
        assert!(r.fwhm_std >= 0.0 && r.g2_std >= 0.0);
        assert!(r.g2_constructive > 1.0 && r.g2_constructive <= 3.0);
        assert_eq!(r.config_hash.len(), 64);
    }
}

#[test]
fn sweep_row_recomputes_from_recorded_config() {
    let cfg = ladder();
    let rows = run_gvd_sweep(&cfg, cfg.rod_sets()).unwrap();
    let row = rows.iter().find(|r| r.label == "SF6 18.3 cm").unwrap();
    let recorded = row.config.as_ref().unwrap();
    let reparsed = InterferometerConfig::parse(&recorded.serialize(), &registry()).unwrap();
    assert_eq!(reparsed.hash(), row.config_hash);
    let again = run_pipeline(&reparsed).unwrap();
    assert_eq!(again.fwhm.width.to_bits(), row.fwhm_constructive.to_bits());
    assert_eq!(again.coherence.g2.to_bits(), row.g2_constructive.to_bits());
    let rerun = run_gvd_row(&reparsed.with_drift_phase(0.0), &row.label).unwrap();
    assert_eq!(rerun.fwhm_mean.to_bits(), row.fwhm_mean.to_bits());
    assert_eq!(rerun.g2_std.to_bits(), row.g2_std.to_bits());
}

#[test]
fn sweep_output_independent_of_worker_count() {
    let cfg = ladder();
    let one = sweep_csv(&cfg.clone().with_jobs(1));
    let three = sweep_csv(&cfg.with_jobs(3));
    assert_eq!(one, three);
}

#[test]
fn constructive_phase_maximizes_degenerate_density() {
    let cfg = config(96, 18.3, 0.0, 0.0, 7.0);
    let cons = find_constructive_phase(&cfg).unwrap();
    let base = run_pipeline(&cfg).unwrap();
    let c = Coupling::Fixed(base.pump_coupling());
    let at = |p: f64| evaluate(&cfg.clone().with_drift_phase(p), Source::Interferometer, c).unwrap().degenerate_density();
    let best = at(cons.phase);
    for j in 0..32 {
        let p = std::f64::consts::TAU * j as f64 / 32.0;
        assert!(at(p) <= best * (1.0 + 1e-9), "phase {p} beats the constructive phase");
    }
    assert!(cons.phase > -std::f64::consts::PI && cons.phase <= std::f64::consts::PI);
}

#[test]
fn gain_study_mode_number_falls_with_gain() {
    let cfg = config(96, 18.3, 0.0, 0.0, 7.0);
    let rows = run_gain_study(&cfg, &[1e-3, 1.0, 3.0, 7.0, 10.0]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].k <= w[0].k * (1.0 + 1e-9), "K rose from {} to {}", w[0].k, w[1].k);
    }
    let low = &rows[0];
    assert!((low.k / low.schmidt_number - 1.0).abs() < 1e-3);
}

#[test]
fn gain_study_rejects_bad_gain() {
    let cfg = config(64, 18.3, 0.0, 0.0, 7.0);
    assert!(run_gain_study(&cfg, &[7.0, 0.0]).is_err());
}

#[test]
fn phase_average_reports_offending_phase() {
    let cfg = config(64, 18.3, 0.0, 0.0, 7.0);
    let err = run_phase_average(&cfg, &[0.0, 1.0], Coupling::Fixed(-1.0)).unwrap_err();
    assert!(err.to_string().contains("drift phase 0.000000"), "{err}");
    assert!(run_phase_average(&cfg, &[], Coupling::Calibrated).is_err());
}

#[test]
fn delay_scan_rows_follow_input_order() {
    let cfg = config(128, 18.3, 0.0, 0.0, 7.0);
    let scan = run_delay_scan(&cfg, &[1.4, 0.0]).unwrap();
    assert_eq!(scan.rows.len(), 2);
    assert_eq!(scan.rows[0].delta_l_p_mm, 1.4);
    for row in &scan.rows {
        assert!(row.peaks.windows(2).all(|w| w[0].height >= w[1].height));
        let (a, b) = (row.spectrum.integral(), row.convolved.integral());
        assert!((a - b).abs() <= 1e-12 * a);
    }
    let mut out = Vec::new();
    write_delay_csv(&scan, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("delta_L_p_mm,peak_rank,frequency_thz"));
}

#[test]
fn metadata_records_hash_grid_and_materials() {
    let cfg = config(64, 18.3, 0.0, 0.0, 7.0);
    let meta = RunMetadata::new("sweep-gvd", &cfg);
    let mut out = Vec::new();
    write_metadata(&meta, &cfg, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains(&format!("config_hash = \"{}\"", cfg.hash())));
    assert!(text.contains("n_points = 64"));
    assert!(text.contains("name = \"SF6\""));
    assert!(text.contains(&format!("tool_version = \"{}\"", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn single_phase_sweep_plot_has_no_band() {
    let cfg = config(64, 18.3, 0.0, 0.0, 7.0);
    let row = run_gvd_row(&cfg.clone().with_phase_count(1).unwrap(), "SF6").unwrap();
    assert_eq!(row.fwhm_std, 0.0);
    let rows = vec![row];
    assert!(!sweep_svg(&rows, 1).contains("<polygon"));
    assert!(sweep_svg(&rows, 8).contains("<polygon"));
}
