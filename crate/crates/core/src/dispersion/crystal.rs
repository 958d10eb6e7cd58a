use std::f64::consts::FRAC_PI_2;

use super::{angular_frequency, IndexCurve, SellmeierModel, SquaredIndex, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Uniaxial nonlinear crystal cut at `cut_angle` to the optic axis.
#[derive(Debug, Clone, PartialEq)]
pub struct UniaxialCrystal {
    name: String,
    ordinary: SellmeierModel,
    extraordinary: SellmeierModel,
    length_m: f64,
    cut_angle: f64,
}

impl UniaxialCrystal {
    pub fn new(
        name: impl Into<String>,
        ordinary: SellmeierModel,
        extraordinary: SellmeierModel,
        length_m: f64,
        cut_angle: f64,
    ) -> Result<Self> {
        if !(length_m > 0.0 && length_m.is_finite()) {
            return Err(Error::field("crystal.length_mm", "must be positive"));
        }
        if !(0.0..=FRAC_PI_2).contains(&cut_angle) {
            return Err(Error::field("crystal.cut_angle_deg", "must lie in [0, 90] degrees"));
        }
        Ok(Self {
            name: name.into(),
            ordinary,
            extraordinary,
            length_m,
            cut_angle,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ordinary(&self) -> &SellmeierModel {
        &self.ordinary
    }

    pub fn principal_extraordinary(&self) -> &SellmeierModel {
        &self.extraordinary
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn cut_angle(&self) -> f64 {
        self.cut_angle
    }

    pub fn with_cut_angle(mut self, cut_angle: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&cut_angle) {
            return Err(Error::field("crystal.cut_angle_deg", "must lie in [0, 90] degrees"));
        }
        self.cut_angle = cut_angle;
        Ok(self)
    }

    pub fn with_length(mut self, length_m: f64) -> Result<Self> {
        if !(length_m > 0.0 && length_m.is_finite()) {
            return Err(Error::field("crystal.length_mm", "must be positive"));
        }
        self.length_m = length_m;
        Ok(self)
    }

    /// Extraordinary wave propagating at `theta` to the optic axis.
    pub fn extraordinary_wave(&self, theta: f64) -> ExtraordinaryWave<'_> {
        ExtraordinaryWave { crystal: self, theta }
    }

    /// Extraordinary wave at the crystal's own cut angle.
    pub fn pump_wave(&self) -> ExtraordinaryWave<'_> {
        self.extraordinary_wave(self.cut_angle)
    }

    /// `n_e(θ, λ) = [cos²θ/n_o² + sin²θ/n_e²]^(-1/2)`.
    pub fn extraordinary_index(&self, theta: f64, wavelength_um: f64) -> Result<f64> {
        self.extraordinary_wave(theta).refractive_index(wavelength_um)
    }
}

/// Angle-dependent extraordinary index curve of a uniaxial crystal.
#[derive(Debug, Clone, Copy)]
pub struct ExtraordinaryWave<'a> {
    crystal: &'a UniaxialCrystal,
    theta: f64,
}

impl IndexCurve for ExtraordinaryWave<'_> {
    fn label(&self) -> &str {
        &self.crystal.name
    }

    fn squared_index(&self, wavelength_um: f64) -> Result<SquaredIndex> {
        let o = self.crystal.ordinary.squared_index(wavelength_um)?;
        let e = self.crystal.extraordinary.squared_index(wavelength_um)?;
        // exact along and across the optic axis
        if self.theta == 0.0 {
            return Ok(o);
        }
        if self.theta == FRAC_PI_2 {
            return Ok(e);
        }
        let (s, c) = self.theta.sin_cos();
        let (c2, s2) = (c * c, s * s);
        // M = 1/N = cos²/N_o + sin²/N_e
        let m = c2 / o.value + s2 / e.value;
        let m1 = -c2 * o.d1 / o.value.powi(2) - s2 * e.d1 / e.value.powi(2);
        let m2 = c2 * (2.0 * o.d1 * o.d1 / o.value.powi(3) - o.d2 / o.value.powi(2))
            + s2 * (2.0 * e.d1 * e.d1 / e.value.powi(3) - e.d2 / e.value.powi(2));
        Ok(SquaredIndex {
            value: 1.0 / m,
            d1: -m1 / (m * m),
            d2: 2.0 * m1 * m1 / m.powi(3) - m2 / (m * m),
        })
    }
}

/// Cut angle for degenerate collinear type-I (e → o + o) phase matching:
/// `n_e(θ, λ_p) = n_o(2λ_p)`.
///
/// Bisection on `[0, π/2]`, stopped once the degenerate mismatch over the
/// crystal length is below 1e-6 rad.
pub fn solve_phase_matching_angle(crystal: &UniaxialCrystal, pump_wavelength_um: f64) -> Result<f64> {
    let no_solution = || Error::NoPhaseMatching {
        crystal: crystal.name.clone(),
        pump_nm: pump_wavelength_um * 1e3,
    };
    let signal_index = crystal
        .ordinary
        .refractive_index(2.0 * pump_wavelength_um)
        .map_err(|_| no_solution())?;
    let pump_omega = angular_frequency(pump_wavelength_um);
    let scale = pump_omega / SPEED_OF_LIGHT * crystal.length_m;
    let mismatch = |theta: f64| -> Result<f64> {
        Ok(scale * (crystal.extraordinary_index(theta, pump_wavelength_um)? - signal_index))
    };

    let (mut lo, mut hi) = (0.0, FRAC_PI_2);
    let f_lo = mismatch(lo).map_err(|_| no_solution())?;
    let f_hi = mismatch(hi).map_err(|_| no_solution())?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(no_solution());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = mismatch(mid)?;
        if f_mid.abs() < 1e-9 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if mismatch(mid)?.abs() < 1e-6 {
        Ok(mid)
    } else {
        Err(Error::Numerical("phase-matching bisection failed to converge".into()))
    }
}
