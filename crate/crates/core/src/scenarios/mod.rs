//! Batch computations: single crystal against interferometer, the GVD sweep
//! with phase averaging, the pump-delay scan and the gain study.
//!
//! Independent rows run on a bounded worker pool and are gathered in input
//! order. Every numerical kernel is sequential, so results do not depend on
//! scheduling.

mod output;
mod plot;

pub use output::{
    write_delay_csv, write_gain_csv, write_metadata, write_sweep_csv, RunMetadata,
};
pub use plot::{delay_waterfall_svg, spectra_overlay_svg, sweep_svg, LinePlot, Series};

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::config::{InterferometerConfig, RodSet};
use crate::error::{Error, Result};
use crate::jsa::{build_jsa, build_single_crystal_jsa, JointSpectralAmplitude};
use crate::modes::{
    calibrate_coupling, reweight_amplitudes, schmidt_decompose, synthesize_spectrum, Arm,
    HighGainWeights, SchmidtDecomposition,
};
use crate::observables::{
    convolve_spectrometer, find_peaks, fringe_contrast, fwhm, half_max_region, omega_to_thz,
    peak_width, CoherenceReport, Fwhm, Spectrum,
};

/// Peaks with prominence below this fraction of the spectrum maximum are not
/// counted as dominant.
pub const DOMINANT_PEAK_FRACTION: f64 = 0.1;

/// Number of phases in the coarse constructive-phase scan.
const COARSE_PHASES: usize = 16;

/// Golden-section stopping width, rad.
const PHASE_TOLERANCE: f64 = 1e-3;

/// How the Eq.-4 coupling is chosen for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// Calibrate so that the state carries `sinh²(G)` photons per effective mode.
    Calibrated,
    /// Fixed pump coupling: mode `k` is squeezed by `c·s_k` with `s_k` the
    /// singular values of the unnormalized JSA.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Interferometer,
    SingleCrystal,
}

/// Everything one pass of JSA → modes → observables produces.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub drift_phase: f64,
    pub path_offset_mm: f64,
    /// `λ_k` retained.
    pub weights: Vec<f64>,
    pub schmidt_number: f64,
    pub discarded_mass: f64,
    /// Effective `G` applied to `√λ_k`.
    pub coupling: f64,
    pub jsa_norm: f64,
    pub high_gain: HighGainWeights,
    pub coherence: CoherenceReport,
    pub spectrum: Spectrum,
    pub fwhm: Fwhm,
}

impl PipelineResult {
    /// Coupling per unit singular value of the unnormalized JSA.
    pub fn pump_coupling(&self) -> f64 {
        self.coupling / self.jsa_norm
    }

    /// Mean of the two samples straddling the degenerate frequency.
    pub fn degenerate_density(&self) -> f64 {
        degenerate_density(&self.spectrum)
    }
}

fn degenerate_density(s: &Spectrum) -> f64 {
    let n = s.len();
    0.5 * (s.values()[n / 2 - 1] + s.values()[n / 2])
}

fn amplitudes(decomposition: &SchmidtDecomposition, gain: f64, coupling: Coupling) -> Result<(f64, Vec<f64>)> {
    let g = match coupling {
        Coupling::Calibrated => calibrate_coupling(decomposition.weights(), gain)?,
        Coupling::Fixed(c) => c * decomposition.jsa_norm(),
    };
    Ok((g, decomposition.weights().iter().map(|l| g * l.sqrt()).collect()))
}

fn finish(config: &InterferometerConfig, jsa: &JointSpectralAmplitude, coupling: Coupling) -> Result<PipelineResult> {
    let d = schmidt_decompose(jsa, config.rank_tolerance())?;
    let (g, x) = amplitudes(&d, config.gain(), coupling)?;
    let high_gain = reweight_amplitudes(&x)?;
    let coherence = CoherenceReport::from_weights(&high_gain.lambda_tilde)?;
    let spectrum = synthesize_spectrum(&d, &high_gain, Arm::Signal)?;
    let width = fwhm(&spectrum)?;
    Ok(PipelineResult {
        drift_phase: config.drift_phase(),
        path_offset_mm: config.spec().pump.path_offset_mm,
        schmidt_number: d.schmidt_number(),
        discarded_mass: d.discarded_mass(),
        weights: d.weights().to_vec(),
        coupling: g,
        jsa_norm: d.jsa_norm(),
        high_gain,
        coherence,
        spectrum,
        fwhm: width,
    })
}

/// One full pass on the configuration's grid.
pub fn evaluate(config: &InterferometerConfig, source: Source, coupling: Coupling) -> Result<PipelineResult> {
    let jsa = match source {
        Source::Interferometer => build_jsa(config)?,
        Source::SingleCrystal => build_single_crystal_jsa(config)?,
    };
    finish(config, &jsa, coupling)
}

/// Interferometer pipeline at the configured phase, gain calibrated.
pub fn run_pipeline(config: &InterferometerConfig) -> Result<PipelineResult> {
    evaluate(config, Source::Interferometer, Coupling::Calibrated)
}

/// Single-crystal pipeline, gain calibrated.
pub fn run_single_crystal(config: &InterferometerConfig) -> Result<PipelineResult> {
    evaluate(config, Source::SingleCrystal, Coupling::Calibrated)
}

fn at_phase(phase: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtPhase {
        phase,
        source: Box::new(e),
    }
}

/// Wrap a phase into `(−π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Result of the constructive-phase search.
#[derive(Debug, Clone)]
pub struct Constructive {
    pub phase: f64,
    /// Calibrated pipeline at `phase`.
    pub result: PipelineResult,
}

/// Drift phase maximizing the spectral density at degeneracy at fixed pump
/// coupling (the coupling calibrated at zero drift phase): a coarse scan over
/// 16 phases, then golden-section refinement around the best one.
pub fn find_constructive_phase(config: &InterferometerConfig) -> Result<Constructive> {
    let base = run_pipeline(&config.clone().with_drift_phase(0.0)).map_err(at_phase(0.0))?;
    let coupling = Coupling::Fixed(base.pump_coupling());
    let objective = |phase: f64| -> Result<f64> {
        let cfg = config.clone().with_drift_phase(phase);
        Ok(evaluate(&cfg, Source::Interferometer, coupling)
            .map_err(at_phase(phase))?
            .degenerate_density())
    };
    let coarse: Vec<f64> = (0..COARSE_PHASES).map(|j| TAU * j as f64 / COARSE_PHASES as f64).collect();
    let mut best = (0.0, f64::NEG_INFINITY);
    for &phase in &coarse {
        let v = objective(phase)?;
        if v > best.1 {
            best = (phase, v);
        }
    }
    let step = TAU / COARSE_PHASES as f64;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    while b - a > PHASE_TOLERANCE {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let (phase, value) = if fc > fd { (c, fc) } else { (d, fd) };
    // keep the coarse optimum if refinement did not improve on it
    let phase = wrap_phase(if value >= best.1 { phase } else { best.0 });
    let result = run_pipeline(&config.clone().with_drift_phase(phase)).map_err(at_phase(phase))?;
    Ok(Constructive { phase, result })
}

/// Sample mean and standard deviation of FWHM and `g²` over a set of phases.
#[derive(Debug, Clone)]
pub struct PhaseAverage {
    pub phases: Vec<f64>,
    pub fwhm_thz: Vec<f64>,
    pub g2: Vec<f64>,
    pub fwhm_mean: f64,
    pub fwhm_std: f64,
    pub g2_mean: f64,
    pub g2_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Run the pipeline at each drift phase and aggregate FWHM and `g²`.
pub fn run_phase_average(config: &InterferometerConfig, phases: &[f64], coupling: Coupling) -> Result<PhaseAverage> {
    if phases.is_empty() {
        return Err(Error::field("run.phases", "must be at least 1"));
    }
    let results = phases
        .par_iter()
        .map(|&phase| {
            evaluate(&config.clone().with_drift_phase(phase), Source::Interferometer, coupling).map_err(at_phase(phase))
        })
        .collect::<Result<Vec<_>>>()?;
    let fwhm_thz: Vec<f64> = results.iter().map(|r| r.fwhm.width).collect();
    let g2: Vec<f64> = results.iter().map(|r| r.coherence.g2).collect();
    let (fwhm_mean, fwhm_std) = mean_std(&fwhm_thz);
    let (g2_mean, g2_std) = mean_std(&g2);
    Ok(PhaseAverage {
        phases: phases.to_vec(),
        fwhm_thz,
        g2,
        fwhm_mean,
        fwhm_std,
        g2_mean,
        g2_std,
    })
}

/// `count` phases equally spaced over one period starting at `start`.
pub fn phase_offsets(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| start + TAU * j as f64 / count as f64).collect()
}

#[derive(Debug, Clone)]
pub struct GvdSweepRow {
    pub label: String,
    pub config_hash: String,
    /// Round-trip `Σ k''·passes·d`, ps².
    pub k_double_prime_d: f64,
    pub constructive_phase: f64,
    pub fwhm_constructive: f64,
    pub g2_constructive: f64,
    pub k_constructive: f64,
    pub fwhm_mean: f64,
    pub fwhm_std: f64,
    pub g2_mean: f64,
    pub g2_std: f64,
    pub error: Option<String>,
    /// Configuration of the constructive point; rerunning the pipeline on it
    /// reproduces the constructive columns.
    pub config: Option<InterferometerConfig>,
    /// Signal spectrum at the constructive phase.
    pub spectrum: Option<Spectrum>,
}

impl GvdSweepRow {
    fn failed(label: &str, kd: f64, e: &Error) -> Self {
        Self {
            label: label.to_string(),
            config_hash: String::new(),
            k_double_prime_d: kd,
            constructive_phase: f64::NAN,
            fwhm_constructive: f64::NAN,
            g2_constructive: f64::NAN,
            k_constructive: f64::NAN,
            fwhm_mean: f64::NAN,
            fwhm_std: f64::NAN,
            g2_mean: f64::NAN,
            g2_std: f64::NAN,
            error: Some(e.to_string()),
            config: None,
            spectrum: None,
        }
    }
}

/// One sweep row: constructive phase, then the phase set `φ* + 2πj/P` at the
/// pump coupling of the constructive point.
pub fn run_gvd_row(config: &InterferometerConfig, label: &str) -> Result<GvdSweepRow> {
    let kd = config.gap_gvd()? * 1e24;
    let cons = find_constructive_phase(config)?;
    let row_config = config.clone().with_drift_phase(cons.phase);
    let phases = phase_offsets(cons.phase, config.phase_count());
    let avg = run_phase_average(&row_config, &phases, Coupling::Fixed(cons.result.pump_coupling()))?;
    Ok(GvdSweepRow {
        label: label.to_string(),
        config_hash: row_config.hash(),
        k_double_prime_d: kd,
        constructive_phase: cons.phase,
        fwhm_constructive: avg.fwhm_thz[0],
        g2_constructive: avg.g2[0],
        k_constructive: 2.0 / (avg.g2[0] - 1.0),
        fwhm_mean: avg.fwhm_mean,
        fwhm_std: avg.fwhm_std,
        g2_mean: avg.g2_mean,
        g2_std: avg.g2_std,
        error: None,
        config: Some(row_config),
        spectrum: Some(cons.result.spectrum),
    })
}

/// Run `f` on a pool of `jobs` workers (all cores when 0).
pub fn with_workers<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// One row per rod set, sorted by round-trip `k''d`. Failed rows are kept
/// and marked.
pub fn run_gvd_sweep(base: &InterferometerConfig, rod_sets: &[RodSet]) -> Result<Vec<GvdSweepRow>> {
    with_workers(base.jobs(), || {
        let mut rows: Vec<GvdSweepRow> = rod_sets
            .par_iter()
            .map(|set| {
                let cfg = base.clone().with_rods(set.rods.clone()).with_drift_phase(0.0);
                run_gvd_row(&cfg, &set.label).unwrap_or_else(|e| {
                    let kd = cfg.gap_gvd().map(|v| v * 1e24).unwrap_or(f64::NAN);
                    GvdSweepRow::failed(&set.label, kd, &e)
                })
            })
            .collect();
        rows.sort_by(|a, b| a.k_double_prime_d.total_cmp(&b.k_double_prime_d));
        rows
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakRow {
    pub frequency_thz: f64,
    /// Offset from the degenerate frequency.
    pub detuning_thz: f64,
    pub height: f64,
    pub fwhm_thz: f64,
    /// Fringe contrast inside the peak before the spectrometer response.
    pub contrast_raw: f64,
    /// The same after it.
    pub contrast_convolved: f64,
}

#[derive(Debug, Clone)]
pub struct DelayScanRow {
    pub delta_l_p_mm: f64,
    /// Dominant peaks of the convolved spectrum, tallest first.
    pub peaks: Vec<PeakRow>,
    /// `|ω₁ + ω₂ − ω̄_p|` of the two tallest peaks in grid steps.
    pub pair_sum_offset_steps: Option<f64>,
    pub k: f64,
    pub g2: f64,
    pub spectrum: Spectrum,
    pub convolved: Spectrum,
}

#[derive(Debug, Clone)]
pub struct DelayScan {
    pub constructive_phase: f64,
    pub pump_coupling: f64,
    pub n_points: usize,
    pub half_span_thz: f64,
    pub rows: Vec<DelayScanRow>,
}

fn delay_row(config: &InterferometerConfig, coupling: f64) -> Result<DelayScanRow> {
    let r = evaluate(config, Source::Interferometer, Coupling::Fixed(coupling))?;
    let convolved = convolve_spectrometer(&r.spectrum, config.resolution_nm())?;
    let top = convolved.values().iter().copied().fold(0.0, f64::max);
    let found = find_peaks(&convolved, DOMINANT_PEAK_FRACTION * top);
    let center_thz = omega_to_thz(config.grid().center());
    let peaks: Vec<PeakRow> = found
        .iter()
        .map(|p| {
            let (lo, hi) = half_max_region(&convolved, p);
            PeakRow {
                frequency_thz: p.frequency_thz,
                detuning_thz: p.frequency_thz - center_thz,
                height: p.height,
                fwhm_thz: peak_width(&convolved, p),
                contrast_raw: fringe_contrast(&r.spectrum, lo, hi),
                contrast_convolved: fringe_contrast(&convolved, lo, hi),
            }
        })
        .collect();
    let pair_sum_offset_steps = (found.len() >= 2)
        .then(|| (found[0].omega + found[1].omega - config.pump_omega()).abs() / config.grid().step());
    Ok(DelayScanRow {
        delta_l_p_mm: config.spec().pump.path_offset_mm,
        peaks,
        pair_sum_offset_steps,
        k: r.coherence.k,
        g2: r.coherence.g2,
        spectrum: r.spectrum,
        convolved,
    })
}

/// Pump-delay scan. The drift phase is the constructive phase at zero delay
/// and the pump coupling is calibrated there; both are then held fixed while
/// the pump path changes. The scan uses its own (finer) grid when the
/// configuration has a `[delay_scan]` grid.
pub fn run_delay_scan(base: &InterferometerConfig, delays_mm: &[f64]) -> Result<DelayScan> {
    let zero = base.clone().with_path_offset_mm(0.0);
    let cons = find_constructive_phase(&zero)?;
    let mut fine = zero.with_drift_phase(cons.phase);
    if let Some(ds) = &base.spec().delay_scan {
        let n = ds.n_points.unwrap_or(base.grid().n_points());
        let hs = ds
            .half_span_thz
            .unwrap_or(omega_to_thz(base.grid().half_span()));
        fine = fine.with_grid(n, hs)?;
    }
    let coupling = run_pipeline(&fine)?.pump_coupling();
    let rows = with_workers(base.jobs(), || {
        delays_mm
            .par_iter()
            .map(|&d| delay_row(&fine.clone().with_path_offset_mm(d), coupling))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(DelayScan {
        constructive_phase: cons.phase,
        pump_coupling: coupling,
        n_points: fine.grid().n_points(),
        half_span_thz: omega_to_thz(fine.grid().half_span()),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub gain: f64,
    pub k: f64,
    pub g2: f64,
    pub coupling: f64,
    pub constructive_phase: f64,
    pub schmidt_number: f64,
}

/// Constructive-phase `K` and `g²` for each gain.
pub fn run_gain_study(base: &InterferometerConfig, gains: &[f64]) -> Result<Vec<GainRow>> {
    with_workers(base.jobs(), || {
        gains
            .par_iter()
            .map(|&g| {
                let cfg = base.clone().with_gain(g)?;
                let cons = find_constructive_phase(&cfg)?;
                Ok(GainRow {
                    gain: g,
                    k: cons.result.coherence.k,
                    g2: cons.result.coherence.g2,
                    coupling: cons.result.coupling,
                    constructive_phase: cons.phase,
                    schmidt_number: cons.result.schmidt_number,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Single crystal and interferometer (at its constructive phase) on one grid.
#[derive(Debug, Clone)]
pub struct SpectrumComparison {
    pub single_crystal: Option<PipelineResult>,
    pub interferometer: Option<PipelineResult>,
}

/// `drift_phase = None` selects the constructive phase.
pub fn run_spectrum_comparison(
    config: &InterferometerConfig,
    single_crystal: bool,
    interferometer: bool,
    drift_phase: Option<f64>,
) -> Result<SpectrumComparison> {
    let single_crystal = if single_crystal { Some(run_single_crystal(config)?) } else { None };
    let interferometer = if interferometer {
        Some(match drift_phase {
            Some(phase) => run_pipeline(&config.clone().with_drift_phase(phase))?,
            None => find_constructive_phase(config)?.result,
        })
    } else {
        None
    };
    Ok(SpectrumComparison {
        single_crystal,
        interferometer,
    })
}
