//! Joint spectral amplitude of the two-crystal interferometer and of a single
//! crystal, sampled on a square frequency grid.
//!
//! Matrices are stored row-major with the row index running over the signal
//! frequency and the column index over the idler frequency.

use std::io::Write;

use faer::c64;
use rayon::prelude::*;

use crate::config::{FrequencyGrid, InterferometerConfig};
use crate::dispersion::{IndexCurve, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Phase mismatch in the crystal (`delta`) and in the gap (`delta_prime`), rad.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchField {
    pub n: usize,
    pub delta: Vec<f64>,
    pub delta_prime: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    grid: FrequencyGrid,
    values: Vec<c64>,
    norm: f64,
}

impl JointSpectralAmplitude {
    /// Wrap a row-major matrix and normalize it to unit Frobenius norm.
    pub fn from_values(grid: FrequencyGrid, mut values: Vec<c64>) -> Result<Self> {
        let n = grid.n_points();
        if values.len() != n * n {
            return Err(Error::Numerical(format!(
                "JSA has {} entries, expected {n}x{n}",
                values.len()
            )));
        }
        let norm = frobenius_norm(&values, n);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Numerical(format!("JSA norm is {norm}")));
        }
        let inv = 1.0 / norm;
        values.par_iter_mut().for_each(|v| *v *= inv);
        Ok(Self { grid, values, norm })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n_points()
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    /// Frobenius norm before normalization.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn get(&self, signal: usize, idler: usize) -> c64 {
        self.values[signal * self.n() + idler]
    }

    /// Text dump: `#` header with the grid, then one line per sample
    /// `i,j,omega_s,omega_i,re,im`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let g = &self.grid;
        writeln!(out, "# joint spectral amplitude, row-major, unit Frobenius norm")?;
        writeln!(out, "# n_points = {}", g.n_points())?;
        writeln!(out, "# center_rad_per_s = {:e}", g.center())?;
        writeln!(out, "# half_span_rad_per_s = {:e}", g.half_span())?;
        writeln!(out, "# step_rad_per_s = {:e}", g.step())?;
        writeln!(out, "# norm_before_normalization = {:e}", self.norm)?;
        writeln!(out, "i,j,omega_s,omega_i,re,im")?;
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                let v = self.values[i * n + j];
                writeln!(out, "{i},{j},{:e},{:e},{:e},{:e}", g.omega(i), g.omega(j), v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Sum of `|F|²` with rows reduced in parallel and combined in row order.
fn frobenius_norm(values: &[c64], n: usize) -> f64 {
    let rows: Vec<f64> = values
        .par_chunks(n)
        .map(|row| row.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    rows.iter().sum::<f64>().sqrt()
}

/// `sin(x)/x`, with the series `1 - x²/6` near the removable singularity.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Pump frequency for the pair of grid indices summing to `s`, evaluated from
/// the index sum so that it is exactly symmetric in signal and idler.
fn pump_frequency(grid: &FrequencyGrid, s: usize) -> f64 {
    let n = grid.n_points() as f64;
    2.0 * grid.center() + (s as f64 - (n - 1.0)) * grid.step()
}

fn at_sum(s: usize, n: usize, e: Error) -> Error {
    let row = s.min(n - 1);
    Error::AtGridPoint {
        row,
        col: s - row,
        source: Box::new(e),
    }
}

fn at_diag(i: usize, e: Error) -> Error {
    Error::AtGridPoint {
        row: i,
        col: i,
        source: Box::new(e),
    }
}

/// `δ(ω_s, ω_i) = [k_p(ω_s+ω_i) − k_o(ω_s) − k_o(ω_i)]·L` with the pump
/// extraordinary at the cut angle.
pub fn crystal_mismatch(config: &InterferometerConfig, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    let crystal = config.crystal();
    let n = grid.n_points();
    let pump = crystal.pump_wave();
    let kp = (0..2 * n - 1)
        .map(|s| pump.wavenumber(pump_frequency(grid, s)).map_err(|e| at_sum(s, n, e)))
        .collect::<Result<Vec<_>>>()?;
    let ko = (0..n)
        .map(|i| crystal.ordinary().wavenumber(grid.omega(i)).map_err(|e| at_diag(i, e)))
        .collect::<Result<Vec<_>>>()?;
    let length = crystal.length_m();
    let mut delta = vec![0.0; n * n];
    delta.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, d) in row.iter_mut().enumerate() {
            *d = (kp[i + j] - (ko[i] + ko[j])) * length;
        }
    });
    Ok(delta)
}

/// Crystal mismatch at one frequency pair, for checks off the grid.
pub fn crystal_mismatch_at(config: &InterferometerConfig, omega_s: f64, omega_i: f64) -> Result<f64> {
    let c = config.crystal();
    let kp = c.pump_wave().wavenumber(omega_s + omega_i)?;
    let ks = c.ordinary().wavenumber(omega_s)?;
    let ki = c.ordinary().wavenumber(omega_i)?;
    Ok((kp - ks - ki) * c.length_m())
}

/// Dispersive phase of the rods for one down-converted photon, relative to
/// the degenerate frequency `ω₀ = ω̄_p/2`:
/// `Σ [k(ω) − k(ω₀) − k'(ω₀)(ω − ω₀)]·passes·d`.
///
/// The constant and group-delay terms are common to every pair of a given
/// pump frequency and are carried by the drift phase and the pump path
/// offset respectively.
pub fn rod_phase(config: &InterferometerConfig, omega: f64) -> Result<f64> {
    let w0 = 0.5 * config.pump_omega();
    let passes = config.passes() as f64;
    let mut phase = 0.0;
    for rod in config.rods() {
        let d = rod.length_m() * passes;
        let at0 = rod.model.wavenumber_derivatives(w0)?;
        let k = rod.model.wavenumber(omega)?;
        phase += (k - at0.k - at0.k_prime * (omega - w0)) * d;
    }
    Ok(phase)
}

/// `δ'(ω_s, ω_i) = φ_p(ω_s+ω_i) − φ_s(ω_s) − φ_i(ω_i)`.
///
/// The pump term is `(ω_s+ω_i − ω̄_p)·ΔL_p/c + φ₀`. Air paths shared by the
/// pump and the down-converted light cancel identically and are not summed.
pub fn gap_mismatch(config: &InterferometerConfig, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    let n = grid.n_points();
    let phi = (0..n)
        .map(|i| rod_phase(config, grid.omega(i)).map_err(|e| at_diag(i, e)))
        .collect::<Result<Vec<_>>>()?;
    let delay = config.path_offset_m() / SPEED_OF_LIGHT;
    let wp = config.pump_omega();
    let phi0 = config.drift_phase();
    let pump: Vec<f64> = (0..2 * n - 1)
        .map(|s| (pump_frequency(grid, s) - wp) * delay + phi0)
        .collect();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, d) in row.iter_mut().enumerate() {
            *d = pump[i + j] - (phi[i] + phi[j]);
        }
    });
    Ok(out)
}

pub fn mismatch_field(config: &InterferometerConfig, grid: &FrequencyGrid) -> Result<MismatchField> {
    Ok(MismatchField {
        n: grid.n_points(),
        delta: crystal_mismatch(config, grid)?,
        delta_prime: gap_mismatch(config, grid)?,
    })
}

fn pump_envelope(config: &InterferometerConfig, grid: &FrequencyGrid) -> Vec<f64> {
    let n = grid.n_points();
    let wp = config.pump_omega();
    let w = config.pump_width();
    (0..2 * n - 1)
        .map(|s| {
            let d = pump_frequency(grid, s) - wp;
            (-d * d / (4.0 * w * w)).exp()
        })
        .collect()
}

/// Unnormalized two-crystal amplitude
/// `sinc(δ/2)·exp[−(Σω−ω̄_p)²/4Δω_p²]·exp[−i(δ+δ'/2)]·cos[(δ+δ')/2]`.
fn two_crystal_values(config: &InterferometerConfig, grid: &FrequencyGrid) -> Result<Vec<c64>> {
    let n = grid.n_points();
    let field = mismatch_field(config, grid)?;
    let env = pump_envelope(config, grid);
    let mut values = vec![c64::new(0.0, 0.0); n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let d = field.delta[i * n + j];
            let dp = field.delta_prime[i * n + j];
            let amp = sinc(0.5 * d) * env[i + j] * (0.5 * (d + dp)).cos();
            let (s, c) = (d + 0.5 * dp).sin_cos();
            *v = c64::new(amp * c, -amp * s);
        }
    });
    Ok(values)
}

/// Two-crystal JSA on the configuration's own grid, normalized.
pub fn build_jsa(config: &InterferometerConfig) -> Result<JointSpectralAmplitude> {
    build_jsa_on(config, config.grid())
}

pub fn build_jsa_on(config: &InterferometerConfig, grid: &FrequencyGrid) -> Result<JointSpectralAmplitude> {
    JointSpectralAmplitude::from_values(*grid, two_crystal_values(config, grid)?)
}

/// Which phase the single-crystal amplitude carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SingleCrystalPhase {
    /// Real amplitude `sinc(δ/2)·envelope`.
    #[default]
    Omitted,
    /// Include the propagation phase `exp(−iδ/2)` of the crystal.
    Propagation,
}

/// Single-crystal JSA `sinc(δ/2)·exp[−(Σω−ω̄_p)²/4Δω_p²]`, normalized.
pub fn build_single_crystal_jsa(config: &InterferometerConfig) -> Result<JointSpectralAmplitude> {
    build_single_crystal_jsa_with(config, config.grid(), SingleCrystalPhase::Omitted)
}

pub fn build_single_crystal_jsa_with(
    config: &InterferometerConfig,
    grid: &FrequencyGrid,
    phase: SingleCrystalPhase,
) -> Result<JointSpectralAmplitude> {
    let n = grid.n_points();
    let delta = crystal_mismatch(config, grid)?;
    let env = pump_envelope(config, grid);
    let mut values = vec![c64::new(0.0, 0.0); n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            let d = delta[i * n + j];
            let amp = sinc(0.5 * d) * env[i + j];
            *v = match phase {
                SingleCrystalPhase::Omitted => c64::new(amp, 0.0),
                SingleCrystalPhase::Propagation => {
                    let (s, c) = (0.5 * d).sin_cos();
                    c64::new(amp * c, -amp * s)
                }
            };
        }
    });
    JointSpectralAmplitude::from_values(*grid, values)
}
