//! Spectra and the scalar observables derived from them.

use std::f64::consts::PI;
use std::io::Write;

use crate::dispersion::SPEED_OF_LIGHT;
use crate::error::{Error, Result};

/// Photon-number density sampled against angular frequency (photons per rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    omega: Vec<f64>,
    values: Vec<f64>,
}

pub fn omega_to_thz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e-12
}

pub fn omega_to_nm(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e9
}

impl Spectrum {
    pub fn new(omega: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.len() != values.len() {
            return Err(Error::Numerical("spectrum axis and values must be non-empty and equal in length".into()));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Numerical("spectrum axis must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numerical("spectrum values must be finite and non-negative".into()));
        }
        Ok(Self { omega, values })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn frequencies_thz(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| omega_to_thz(w)).collect()
    }

    pub fn wavelengths_nm(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| omega_to_nm(w)).collect()
    }

    /// Density per THz of ordinary frequency.
    pub fn density_per_thz(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * 2.0 * PI * 1e12).collect()
    }

    /// Density per nm of wavelength, `S_ω·|dω/dλ|`.
    pub fn density_per_nm(&self) -> Vec<f64> {
        self.omega
            .iter()
            .zip(&self.values)
            .map(|(&w, v)| v * w * w / (2.0 * PI * SPEED_OF_LIGHT) * 1e-9)
            .collect()
    }

    /// Sample cell widths in rad/s: half the distance between neighbours,
    /// full spacing at the ends.
    pub fn cell_widths(&self) -> Vec<f64> {
        let n = self.omega.len();
        if n == 1 {
            return vec![1.0];
        }
        (0..n)
            .map(|i| match i {
                0 => self.omega[1] - self.omega[0],
                _ if i == n - 1 => self.omega[n - 1] - self.omega[n - 2],
                _ => 0.5 * (self.omega[i + 1] - self.omega[i - 1]),
            })
            .collect()
    }

    /// Total photon number `Σ S(ω) Δω`.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.cell_widths()).map(|(v, w)| v * w).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.omega.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// CSV with `# key = value` header lines and columns
    /// `frequency_THz,wavelength_nm,photon_number_density` (photons per THz).
    pub fn write_csv<W: Write>(&self, metadata: &[(String, String)], mut out: W) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k} = {v}")?;
        }
        writeln!(out, "# density_unit = photons per THz")?;
        writeln!(out, "frequency_THz,wavelength_nm,photon_number_density")?;
        for ((f, l), d) in self
            .frequencies_thz()
            .iter()
            .zip(self.wavelengths_nm())
            .zip(self.density_per_thz())
        {
            writeln!(out, "{f:.9},{l:.9},{d:.12e}")?;
        }
        Ok(())
    }
}

/// `K` and `g²(0)` of one reweighted state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport {
    pub k: f64,
    pub g2: f64,
}

impl CoherenceReport {
    pub fn from_weights(lambda_tilde: &[f64]) -> Result<Self> {
        let k = effective_mode_number(lambda_tilde)?;
        Ok(Self { k, g2: g2_from_k(k)? })
    }
}

/// Participation ratio `K = 1/Σ λ̃_k²`.
pub fn effective_mode_number(lambda_tilde: &[f64]) -> Result<f64> {
    if lambda_tilde.is_empty() {
        return Err(Error::Numerical("no mode weights".into()));
    }
    let s: f64 = lambda_tilde.iter().map(|l| l * l).sum();
    if !(s > 0.0) {
        return Err(Error::Numerical("mode weights are all zero".into()));
    }
    // K ≥ 1 holds exactly for normalized weights; absorb rounding
    Ok((1.0 / s).max(1.0))
}

/// `g²(0) = 1 + (g²₁ − 1)/K` with `g²₁ = 3` for degenerate collinear PDC.
pub fn g2_from_k(k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::Numerical(format!("mode number {k} below 1")));
    }
    Ok(1.0 + 2.0 / k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fwhm {
    /// Width between the outermost half-maximum crossings, in axis units.
    pub width: f64,
    /// Number of half-maximum crossings.
    pub crossings: usize,
    /// More than two crossings: the width spans several peaks.
    pub multi_peak: bool,
    /// Width of two samples or less.
    pub resolution_limited: bool,
}

/// FWHM against an increasing axis, crossings located by linear interpolation.
pub fn fwhm_on_axis(x: &[f64], v: &[f64]) -> Result<Fwhm> {
    let n = v.len();
    if n < 2 || x.len() != n {
        return Err(Error::Numerical("FWHM needs at least two samples".into()));
    }
    let (imax, vmax) = v
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &y)| if y > acc.1 { (i, y) } else { acc });
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(vmax > 0.0) || !(vmax > vmin) || !vmax.is_finite() {
        return Err(Error::Numerical("spectrum is flat or empty".into()));
    }
    let half = 0.5 * vmax;
    let crossings = v.windows(2).filter(|w| (w[0] >= half) != (w[1] >= half)).count();
    let first = v.iter().position(|&y| y >= half).unwrap_or(imax);
    let last = v.iter().rposition(|&y| y >= half).unwrap_or(imax);
    let cross = |a: usize, b: usize| x[a] + (half - v[a]) / (v[b] - v[a]) * (x[b] - x[a]);
    let left = if first == 0 { x[0] } else { cross(first - 1, first) };
    let right = if last == n - 1 { x[n - 1] } else { cross(last, last + 1) };
    let width = right - left;
    let step = (x[n - 1] - x[0]) / (n - 1) as f64;
    Ok(Fwhm {
        width,
        crossings,
        multi_peak: crossings > 2,
        resolution_limited: width <= 2.0 * step,
    })
}

/// FWHM in THz.
pub fn fwhm(spectrum: &Spectrum) -> Result<Fwhm> {
    fwhm_on_axis(&spectrum.frequencies_thz(), spectrum.values())
}

/// FWHM of the sampled values against the wavelength axis, in nm.
pub fn fwhm_wavelength(spectrum: &Spectrum) -> Result<Fwhm> {
    let mut x = spectrum.wavelengths_nm();
    let mut v = spectrum.values().to_vec();
    x.reverse();
    v.reverse();
    fwhm_on_axis(&x, &v)
}

/// Spectrometer response: the photon counts of every sample are spread over
/// the output samples with a Gaussian of FWHM `resolution_nm` in wavelength.
/// The kernel is renormalized over the samples it reaches, so total counts
/// are conserved.
pub fn convolve_spectrometer(spectrum: &Spectrum, resolution_nm: f64) -> Result<Spectrum> {
    if !(resolution_nm > 0.0 && resolution_nm.is_finite()) {
        return Err(Error::field("run.spectrometer_resolution_nm", "must be positive"));
    }
    let sigma = resolution_nm / (8.0 * std::f64::consts::LN_2).sqrt();
    let reach = 8.0 * sigma;
    let lam = spectrum.wavelengths_nm();
    let cells = spectrum.cell_widths();
    let n = lam.len();
    let mut counts = vec![0.0; n];
    let mut kernel = Vec::with_capacity(n);
    for i in 0..n {
        let c = spectrum.values()[i] * cells[i];
        if c == 0.0 {
            continue;
        }
        kernel.clear();
        // wavelength decreases with index
        let lo = lam.partition_point(|&l| l > lam[i] + reach);
        let hi = lam.partition_point(|&l| l >= lam[i] - reach);
        let mut norm = 0.0;
        for l in &lam[lo..hi] {
            let d = (l - lam[i]) / sigma;
            let k = (-0.5 * d * d).exp();
            kernel.push(k);
            norm += k;
        }
        for (j, k) in (lo..hi).zip(&kernel) {
            counts[j] += c * k / norm;
        }
    }
    let values = counts.iter().zip(&cells).map(|(c, w)| c / w).collect();
    Spectrum::new(spectrum.omega.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Sample index of the local maximum.
    pub index: usize,
    /// Interpolated position, rad/s.
    pub omega: f64,
    pub frequency_thz: f64,
    /// Interpolated height.
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima with prominence at least `min_prominence`, tallest first.
///
/// Prominence is measured against the higher of the two minima found by
/// walking outward from the peak until a taller sample or the spectrum edge.
/// Positions and heights are refined by a parabola through three samples.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let v = spectrum.values();
    let w = spectrum.omega();
    let n = v.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            // extend across a plateau
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                let top = v[i];
                let mut left_min = top;
                let mut k = i;
                while k > 0 {
                    k -= 1;
                    if v[k] > top {
                        break;
                    }
                    left_min = left_min.min(v[k]);
                }
                let mut right_min = top;
                let mut k = j;
                while k + 1 < n {
                    k += 1;
                    if v[k] > top {
                        break;
                    }
                    right_min = right_min.min(v[k]);
                }
                let prominence = top - left_min.max(right_min);
                if prominence >= min_prominence && prominence > 0.0 {
                    let (omega, height) = if i == j {
                        let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
                        let den = a - 2.0 * b + c;
                        let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
                        (w[i] + off * (w[i + 1] - w[i - 1]) * 0.5, b - 0.25 * (a - c) * off)
                    } else {
                        (0.5 * (w[i] + w[j]), top)
                    };
                    peaks.push(Peak {
                        index: i,
                        omega,
                        frequency_thz: omega_to_thz(omega),
                        height,
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
    peaks
}

/// Level halfway down a peak's prominence. Equals half the height for a peak
/// on a zero background.
fn half_prominence_level(spectrum: &Spectrum, peak: &Peak) -> f64 {
    spectrum.values()[peak.index] - 0.5 * peak.prominence.min(spectrum.values()[peak.index])
}

fn level_span(v: &[f64], index: usize, level: f64) -> (usize, usize) {
    let mut lo = index;
    while lo > 0 && v[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = index;
    while hi + 1 < v.len() && v[hi + 1] >= level {
        hi += 1;
    }
    (lo, hi)
}

/// Frequency interval (rad/s) around `peak` where the spectrum stays at or
/// above half its prominence.
pub fn half_max_region(spectrum: &Spectrum, peak: &Peak) -> (f64, f64) {
    let (lo, hi) = level_span(spectrum.values(), peak.index, half_prominence_level(spectrum, peak));
    (spectrum.omega()[lo], spectrum.omega()[hi])
}

/// Full width in THz at half prominence of one peak, crossings interpolated
/// linearly on either side of the peak sample.
pub fn peak_width(spectrum: &Spectrum, peak: &Peak) -> f64 {
    let v = spectrum.values();
    let x = spectrum.frequencies_thz();
    let n = v.len();
    let level = half_prominence_level(spectrum, peak);
    let (lo, hi) = level_span(v, peak.index, level);
    let cross = |a: usize, b: usize| x[a] + (level - v[a]) / (v[b] - v[a]) * (x[b] - x[a]);
    let left = if lo == 0 { x[0] } else { cross(lo - 1, lo) };
    let right = if hi == n - 1 { x[n - 1] } else { cross(hi, hi + 1) };
    right - left
}

/// Largest `(max − min)/(max + min)` over neighbouring local extrema with
/// `lo ≤ ω ≤ hi`; zero when the interval holds no fringe.
pub fn fringe_contrast(spectrum: &Spectrum, lo: f64, hi: f64) -> f64 {
    let v = spectrum.values();
    let w = spectrum.omega();
    let n = v.len();
    let mut extrema = Vec::new();
    for k in 1..n.saturating_sub(1) {
        if w[k] < lo || w[k] > hi {
            continue;
        }
        let is_max = v[k] > v[k - 1] && v[k] >= v[k + 1];
        let is_min = v[k] < v[k - 1] && v[k] <= v[k + 1];
        if is_max || is_min {
            extrema.push(v[k]);
        }
    }
    extrema
        .windows(2)
        .map(|p| {
            let (a, b) = (p[0].max(p[1]), p[0].min(p[1]));
            if a + b > 0.0 {
                (a - b) / (a + b)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}
