//! Interferometer description: file format, validation and derived quantities.
//!
//! A configuration file has the sections `[pump]`, `[crystal]`, `[gap]` and
//! `[run]`, plus optional `[sweep]`, `[delay_scan]` and `[gain_study]`
//! sections used by the batch scenarios. Unknown keys are rejected.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersion::{
    angular_frequency, solve_phase_matching_angle, IndexCurve, MaterialRegistry, SellmeierModel,
    UniaxialCrystal,
};
use crate::error::{field, Error, Result};

/// `δ/2` at which `sinc²(δ/2)` falls to one half.
const SINC_SQ_HALF_MAX: f64 = 1.391_557_377_3;

/// Spectral amplitude width `Δω_p` (rad/s) of a transform-limited Gaussian
/// pulse with intensity FWHM `duration_s`.
///
/// With `|E(t)|² ∝ exp(-4 ln2 t²/T²)` the spectral amplitude is
/// `exp(-(ω-ω̄)²/(4Δω²))` with `Δω = √(2 ln2)/T`.
pub fn pump_spectral_width(duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(field("pump.pulse_duration_ps", "must be positive"));
    }
    Ok((2.0 * LN_2).sqrt() / duration_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    pub wavelength_nm: f64,
    /// Intensity FWHM.
    pub pulse_duration_ps: f64,
    /// Extra one-way pump path, signed.
    #[serde(default)]
    pub path_offset_mm: f64,
    #[serde(default)]
    pub drift_phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSpec {
    pub material: String,
    pub length_mm: f64,
    /// Solved for degenerate type-I phase matching when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RodSpec {
    pub material: String,
    pub length_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSpec {
    #[serde(default = "default_passes")]
    pub passes: u32,
    #[serde(default)]
    pub pdc_air_path_m: f64,
    #[serde(default)]
    pub rods: Vec<RodSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub gain: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    /// Half-span of the frequency axis in THz (ν, not ω). Derived from the
    /// crystal bandwidth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_span_thz: Option<f64>,
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
    #[serde(default = "default_resolution")]
    pub spectrometer_resolution_nm: f64,
    /// Number of equally spaced drift phases for phase averaging.
    #[serde(default = "default_phases")]
    pub phases: usize,
    /// Worker threads; 0 uses all cores. Results do not depend on it, so it is
    /// left out of the canonical form and the hash.
    #[serde(default, skip_serializing)]
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RodSetSpec {
    pub label: String,
    #[serde(default)]
    pub rods: Vec<RodSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub rod_sets: Vec<RodSetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayScanSpec {
    pub delays_mm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_span_thz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainStudySpec {
    pub gains: Vec<f64>,
}

/// The file contents, exactly as written to and read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    pub pump: PumpSpec,
    pub crystal: CrystalSpec,
    pub gap: GapSpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_scan: Option<DelayScanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_study: Option<GainStudySpec>,
}

fn default_passes() -> u32 {
    2
}
fn default_n_points() -> usize {
    512
}
fn default_rank_tolerance() -> f64 {
    1e-8
}
fn default_resolution() -> f64 {
    0.3
}
fn default_phases() -> usize {
    8
}

/// Uniform frequency axis shared by signal and idler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    n_points: usize,
    center: f64,
    half_span: f64,
}

impl FrequencyGrid {
    /// `n_points` samples spaced `2·half_span/n_points` apart, placed
    /// symmetrically about `center` (which itself falls between the two middle
    /// samples).
    pub fn new(n_points: usize, center: f64, half_span: f64) -> Result<Self> {
        if n_points < 64 || n_points & 1 != 0 {
            return Err(field("run.n_points", "must be even and at least 64"));
        }
        if !(center > 0.0 && center.is_finite()) {
            return Err(field("grid.center", "must be positive"));
        }
        if !(half_span > 0.0 && half_span < center) {
            return Err(field("run.half_span_thz", "must be positive and below the centre frequency"));
        }
        Ok(Self {
            n_points,
            center,
            half_span,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_span(&self) -> f64 {
        self.half_span
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_span / self.n_points as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.center + (i as f64 - 0.5 * (self.n_points as f64 - 1.0)) * self.step()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.omega(i)).collect()
    }
}

/// A glass rod in the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Rod {
    pub spec: RodSpec,
    pub model: SellmeierModel,
}

impl Rod {
    pub fn length_m(&self) -> f64 {
        self.spec.length_cm * 1e-2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodSet {
    pub label: String,
    pub rods: Vec<Rod>,
}

/// Validated configuration with all derived quantities resolved.
#[derive(Debug, Clone)]
pub struct InterferometerConfig {
    spec: ConfigSpec,
    crystal: UniaxialCrystal,
    rods: Vec<Rod>,
    rod_sets: Vec<RodSet>,
    pump_omega: f64,
    pump_width: f64,
    grid: FrequencyGrid,
    material_versions: Vec<(String, String)>,
}

impl PartialEq for InterferometerConfig {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

fn resolve_rods(registry: &MaterialRegistry, specs: &[RodSpec], key: &str) -> Result<Vec<Rod>> {
    specs
        .iter()
        .map(|s| {
            if !(s.length_cm >= 0.0 && s.length_cm.is_finite()) {
                return Err(field(format!("{key}.length_cm"), "must be non-negative"));
            }
            Ok(Rod {
                spec: s.clone(),
                model: registry.isotropic(&s.material)?.clone(),
            })
        })
        .collect()
}

/// Default half-span: 1.5× the analytic half-width at half-maximum of the
/// single-crystal `sinc²` along the pump-energy ridge, `δ ≈ k''_o Ω² L`.
pub fn default_half_span(crystal: &UniaxialCrystal, center: f64) -> Result<f64> {
    let kpp = crystal.ordinary().wavenumber_derivatives(center)?.k_double_prime;
    Ok(1.5 * (2.0 * SINC_SQ_HALF_MAX / (kpp.abs() * crystal.length_m())).sqrt())
}

fn thz_to_rad(thz: f64) -> f64 {
    2.0 * PI * thz * 1e12
}

impl InterferometerConfig {
    pub fn from_spec(spec: ConfigSpec, registry: &MaterialRegistry) -> Result<Self> {
        let p = &spec.pump;
        if !(p.wavelength_nm > 0.0 && p.wavelength_nm.is_finite()) {
            return Err(field("pump.wavelength_nm", "must be positive"));
        }
        let pump_width = pump_spectral_width(p.pulse_duration_ps * 1e-12)?;
        if !p.path_offset_mm.is_finite() {
            return Err(field("pump.path_offset_mm", "must be finite"));
        }
        if !p.drift_phase_rad.is_finite() {
            return Err(field("pump.drift_phase_rad", "must be finite"));
        }
        let pump_um = p.wavelength_nm * 1e-3;
        let c = &spec.crystal;
        if !(c.length_mm > 0.0 && c.length_mm.is_finite()) {
            return Err(field("crystal.length_mm", "must be positive"));
        }
        let mut crystal = registry.uniaxial(&c.material, c.length_mm * 1e-3, 0.0)?;
        let theta = match c.cut_angle_deg {
            Some(deg) => {
                if !(0.0..=90.0).contains(&deg) {
                    return Err(field("crystal.cut_angle_deg", "must lie in [0, 90]"));
                }
                deg.to_radians()
            }
            None => solve_phase_matching_angle(&crystal, pump_um)?,
        };
        crystal = crystal.with_cut_angle(theta)?;
        // pump transparency
        crystal
            .pump_wave()
            .squared_index(pump_um)
            .map_err(|e| field("pump.wavelength_nm", e.to_string()))?;

        let g = &spec.gap;
        if !(1..=2).contains(&g.passes) {
            return Err(field("gap.passes", "must be 1 or 2"));
        }
        if !(g.pdc_air_path_m >= 0.0 && g.pdc_air_path_m.is_finite()) {
            return Err(field("gap.pdc_air_path_m", "must be non-negative"));
        }
        let rods = resolve_rods(registry, &g.rods, "gap.rods")?;
        let rod_sets = match &spec.sweep {
            Some(sweep) => sweep
                .rod_sets
                .iter()
                .map(|set| {
                    Ok(RodSet {
                        label: set.label.clone(),
                        rods: resolve_rods(registry, &set.rods, "sweep.rod_sets.rods")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };

        let r = &spec.run;
        if !(r.gain > 0.0 && r.gain.is_finite()) {
            return Err(field("run.gain", "must be positive"));
        }
        if !(r.rank_tolerance > 0.0 && r.rank_tolerance < 1.0) {
            return Err(field("run.rank_tolerance", "must lie in (0, 1)"));
        }
        if !(r.spectrometer_resolution_nm > 0.0 && r.spectrometer_resolution_nm.is_finite()) {
            return Err(field("run.spectrometer_resolution_nm", "must be positive"));
        }
        if r.phases == 0 {
            return Err(field("run.phases", "must be at least 1"));
        }
        let pump_omega = angular_frequency(pump_um);
        let center = 0.5 * pump_omega;
        let half_span = match r.half_span_thz {
            Some(thz) => thz_to_rad(thz),
            None => default_half_span(&crystal, center)?,
        };
        let grid = FrequencyGrid::new(r.n_points, center, half_span)?;
        // the whole grid must be inside the material ranges
        for w in [grid.omega(0), grid.omega(grid.n_points() - 1)] {
            crystal
                .ordinary()
                .squared_index(crate::dispersion::wavelength_um(w))
                .map_err(|e| field("run.half_span_thz", e.to_string()))?;
        }

        if let Some(ds) = &spec.delay_scan {
            if ds.delays_mm.iter().any(|d| !d.is_finite()) {
                return Err(field("delay_scan.delays_mm", "must be finite"));
            }
            if let Some(n) = ds.n_points {
                FrequencyGrid::new(n, center, half_span).map_err(|_| field("delay_scan.n_points", "must be even and at least 64"))?;
            }
            if let Some(thz) = ds.half_span_thz {
                FrequencyGrid::new(64, center, thz_to_rad(thz)).map_err(|_| field("delay_scan.half_span_thz", "must be positive and below the centre frequency"))?;
            }
        }
        if let Some(gs) = &spec.gain_study {
            if gs.gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
                return Err(field("gain_study.gains", "must be positive"));
            }
        }

        Ok(Self {
            material_versions: registry.versions(),
            spec,
            crystal,
            rods,
            rod_sets,
            pump_omega,
            pump_width,
            grid,
        })
    }

    pub fn parse(text: &str, registry: &MaterialRegistry) -> Result<Self> {
        let spec: ConfigSpec = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        Self::from_spec(spec, registry)
    }

    pub fn spec(&self) -> &ConfigSpec {
        &self.spec
    }

    pub fn crystal(&self) -> &UniaxialCrystal {
        &self.crystal
    }

    pub fn rods(&self) -> &[Rod] {
        &self.rods
    }

    pub fn rod_sets(&self) -> &[RodSet] {
        &self.rod_sets
    }

    pub fn passes(&self) -> u32 {
        self.spec.gap.passes
    }

    pub fn pdc_air_path_m(&self) -> f64 {
        self.spec.gap.pdc_air_path_m
    }

    /// Central pump angular frequency `ω̄_p`.
    pub fn pump_omega(&self) -> f64 {
        self.pump_omega
    }

    /// `Δω_p`.
    pub fn pump_width(&self) -> f64 {
        self.pump_width
    }

    pub fn path_offset_m(&self) -> f64 {
        self.spec.pump.path_offset_mm * 1e-3
    }

    pub fn drift_phase(&self) -> f64 {
        self.spec.pump.drift_phase_rad
    }

    pub fn gain(&self) -> f64 {
        self.spec.run.gain
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.spec.run.rank_tolerance
    }

    pub fn resolution_nm(&self) -> f64 {
        self.spec.run.spectrometer_resolution_nm
    }

    pub fn phase_count(&self) -> usize {
        self.spec.run.phases
    }

    pub fn jobs(&self) -> usize {
        self.spec.run.jobs
    }

    pub fn material_versions(&self) -> &[(String, String)] {
        &self.material_versions
    }

    /// Round-trip GVD of the gap, `Σ k''·passes·d` at the degenerate frequency, in s².
    pub fn gap_gvd(&self) -> Result<f64> {
        let w0 = self.grid.center();
        let mut total = 0.0;
        for rod in &self.rods {
            total += rod.model.wavenumber_derivatives(w0)?.k_double_prime * rod.length_m() * self.passes() as f64;
        }
        Ok(total)
    }

    pub fn with_drift_phase(mut self, phase: f64) -> Self {
        self.spec.pump.drift_phase_rad = phase;
        self
    }

    pub fn with_path_offset_mm(mut self, offset_mm: f64) -> Self {
        self.spec.pump.path_offset_mm = offset_mm;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(field("run.gain", "must be positive"));
        }
        self.spec.run.gain = gain;
        Ok(self)
    }

    pub fn with_phase_count(mut self, phases: usize) -> Result<Self> {
        if phases == 0 {
            return Err(field("run.phases", "must be at least 1"));
        }
        self.spec.run.phases = phases;
        Ok(self)
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.spec.run.jobs = jobs;
        self
    }

    pub fn with_rods(mut self, rods: Vec<Rod>) -> Self {
        self.spec.gap.rods = rods.iter().map(|r| r.spec.clone()).collect();
        self.rods = rods;
        self
    }

    pub fn with_grid(mut self, n_points: usize, half_span_thz: f64) -> Result<Self> {
        self.grid = FrequencyGrid::new(n_points, self.grid.center(), thz_to_rad(half_span_thz))?;
        self.spec.run.n_points = n_points;
        self.spec.run.half_span_thz = Some(half_span_thz);
        Ok(self)
    }

    /// Replace the crystal length (used for the single-crystal 2L comparison).
    pub fn with_crystal_length_mm(mut self, length_mm: f64) -> Result<Self> {
        self.crystal = self.crystal.with_length(length_mm * 1e-3)?;
        self.spec.crystal.length_mm = length_mm;
        Ok(self)
    }

    /// Canonical text form; [`InterferometerConfig::parse`] inverts it.
    pub fn serialize(&self) -> String {
        toml::to_string(&self.spec).expect("config spec serializes")
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }
}

/// Read, parse and validate a configuration file. Materials come from the
/// built-in set plus the directory named by the materials environment variable.
pub fn load_config(path: &Path) -> Result<InterferometerConfig> {
    let registry = MaterialRegistry::from_env()?;
    load_config_with(path, &registry)
}

pub fn load_config_with(path: &Path, registry: &MaterialRegistry) -> Result<InterferometerConfig> {
    if !path.is_file() {
        return Err(Error::ConfigNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    InterferometerConfig::parse(&text, registry)
}
