use std::io::Write;

use serde::Serialize;

use super::{DelayScan, GainRow, GvdSweepRow};
use crate::config::InterferometerConfig;
use crate::error::Result;
use crate::observables::omega_to_thz;

/// Provenance written next to every scenario table.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub n_points: usize,
    pub center_thz: f64,
    pub half_span_thz: f64,
    pub gain: f64,
    pub phases: usize,
    pub material_versions: Vec<MaterialVersion>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaterialVersion {
    pub name: String,
    pub version: String,
}

impl RunMetadata {
    pub fn new(command: &str, config: &InterferometerConfig) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            n_points: config.grid().n_points(),
            center_thz: omega_to_thz(config.grid().center()),
            half_span_thz: omega_to_thz(config.grid().half_span()),
            gain: config.gain(),
            phases: config.phase_count(),
            material_versions: config
                .material_versions()
                .iter()
                .map(|(name, version)| MaterialVersion {
                    name: name.clone(),
                    version: version.clone(),
                })
                .collect(),
        }
    }

    /// Header lines for per-spectrum CSV files.
    pub fn header(&self) -> Vec<(String, String)> {
        vec![
            ("command".into(), self.command.clone()),
            ("tool_version".into(), self.tool_version.clone()),
            ("config_hash".into(), self.config_hash.clone()),
        ]
    }
}

pub fn write_metadata<W: Write>(metadata: &RunMetadata, config: &InterferometerConfig, mut out: W) -> Result<()> {
    let text = toml::to_string(metadata).map_err(|e| crate::Error::Numerical(format!("metadata: {e}")))?;
    writeln!(out, "{text}")?;
    writeln!(out, "# configuration")?;
    for line in config.serialize().lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn text_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[GvdSweepRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "label,k_double_prime_d_ps2,constructive_phase_rad,fwhm_constructive_thz,g2_constructive,k_constructive,\
         fwhm_mean_thz,fwhm_std_thz,g2_mean,g2_std,config_hash,error"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
            text_field(&r.label),
            r.k_double_prime_d,
            r.constructive_phase,
            r.fwhm_constructive,
            r.g2_constructive,
            r.k_constructive,
            r.fwhm_mean,
            r.fwhm_std,
            r.g2_mean,
            r.g2_std,
            r.config_hash,
            text_field(r.error.as_deref().unwrap_or(""))
        )?;
    }
    Ok(())
}

/// One line per dominant peak, tallest first within each delay.
pub fn write_delay_csv<W: Write>(scan: &DelayScan, mut out: W) -> Result<()> {
    writeln!(
        out,
        "delta_L_p_mm,peak_rank,frequency_thz,detuning_thz,height,fwhm_thz,contrast_raw,contrast_convolved,\
         pair_sum_offset_steps,K,g2"
    )?;
    for row in &scan.rows {
        let offset = row.pair_sum_offset_steps.unwrap_or(f64::NAN);
        for (rank, p) in row.peaks.iter().enumerate() {
            writeln!(
                out,
                "{:.6},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                row.delta_l_p_mm,
                rank,
                p.frequency_thz,
                p.detuning_thz,
                p.height,
                p.fwhm_thz,
                p.contrast_raw,
                p.contrast_convolved,
                offset,
                row.k,
                row.g2
            )?;
        }
    }
    Ok(())
}

pub fn write_gain_csv<W: Write>(rows: &[GainRow], mut out: W) -> Result<()> {
    writeln!(out, "gain,K,g2,coupling,constructive_phase_rad,schmidt_number")?;
    for r in rows {
        writeln!(
            out,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.gain, r.k, r.g2, r.coupling, r.constructive_phase, r.schmidt_number
        )?;
    }
    Ok(())
}
