//! Material dispersion: refractive indices and wavenumber derivatives for the
//! nonlinear crystal and the glass rods in the gap.
//!
//! Wavelengths are in micrometres, angular frequencies in rad/s and lengths in
//! metres. Every index model works on the squared index `N(λ) = n²(λ)` and its
//! first two wavelength derivatives, from which `k`, `k'` and `k''` follow
//! analytically.

mod crystal;
mod registry;

pub use crystal::{solve_phase_matching_angle, ExtraordinaryWave, UniaxialCrystal};
pub use registry::{Material, MaterialKind, MaterialRegistry, MATERIALS_DIR_ENV};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum wavelength in micrometres for an angular frequency in rad/s.
pub fn wavelength_um(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e6
}

/// Angular frequency in rad/s for a vacuum wavelength in micrometres.
pub fn angular_frequency(wavelength_um: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (wavelength_um * 1e-6)
}

/// Functional form of a dispersion formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SellmeierForm {
    /// `n² = 1 + Σ Bᵢλ²/(λ² − Cᵢ)`, coefficients `[B1, B2, B3, C1, C2, C3]`.
    ThreeTerm,
    /// `n² = A + B/(λ² − C) − Dλ²`, coefficients `[A, B, C, D]`.
    TwoTermQuadratic,
    /// `n = 1` everywhere.
    Vacuum,
}

impl SellmeierForm {
    pub fn tag(self) -> &'static str {
        match self {
            SellmeierForm::ThreeTerm => "sellmeier-3",
            SellmeierForm::TwoTermQuadratic => "two-term-quadratic",
            SellmeierForm::Vacuum => "vacuum",
        }
    }

    fn coefficient_count(self) -> usize {
        match self {
            SellmeierForm::ThreeTerm => 6,
            SellmeierForm::TwoTermQuadratic => 4,
            SellmeierForm::Vacuum => 0,
        }
    }
}

impl FromStr for SellmeierForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sellmeier-3" => Ok(SellmeierForm::ThreeTerm),
            "two-term-quadratic" => Ok(SellmeierForm::TwoTermQuadratic),
            "vacuum" => Ok(SellmeierForm::Vacuum),
            other => Err(format!("unknown dispersion form tag `{other}`")),
        }
    }
}

impl fmt::Display for SellmeierForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Squared index and its first two wavelength derivatives (per µm, per µm²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredIndex {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Wavenumber and its first two angular-frequency derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    /// rad/m
    pub k: f64,
    /// Inverse group velocity, s/m.
    pub k_prime: f64,
    /// Group velocity dispersion, s²/m.
    pub k_double_prime: f64,
}

/// Anything with a refractive index that depends on wavelength only.
pub trait IndexCurve {
    fn label(&self) -> &str;

    /// `n²` and its wavelength derivatives, with range checking.
    fn squared_index(&self, wavelength_um: f64) -> Result<SquaredIndex>;

    fn refractive_index(&self, wavelength_um: f64) -> Result<f64> {
        Ok(self.squared_index(wavelength_um)?.value.sqrt())
    }

    /// Wavenumber in rad/m at angular frequency `omega`.
    fn wavenumber(&self, omega: f64) -> Result<f64> {
        Ok(self.refractive_index(wavelength_um(omega))? * omega / SPEED_OF_LIGHT)
    }

    /// `k`, `k'` and `k''` at `omega`, by analytic differentiation of the index model.
    fn wavenumber_derivatives(&self, omega: f64) -> Result<DispersionSample> {
        let lambda = wavelength_um(omega);
        let sq = self.squared_index(lambda)?;
        let n = sq.value.sqrt();
        let n_l = sq.d1 / (2.0 * n);
        let n_ll = (sq.d2 - 2.0 * n_l * n_l) / (2.0 * n);
        // λ = 2πc/ω  =>  dλ/dω = -λ/ω,  d²λ/dω² = 2λ/ω²
        let n_w = -n_l * lambda / omega;
        let n_ww = n_ll * (lambda / omega).powi(2) + n_l * 2.0 * lambda / (omega * omega);
        Ok(DispersionSample {
            k: n * omega / SPEED_OF_LIGHT,
            k_prime: (n + omega * n_w) / SPEED_OF_LIGHT,
            k_double_prime: (2.0 * n_w + omega * n_ww) / SPEED_OF_LIGHT,
        })
    }
}

/// One dispersion formula with its coefficients and range of validity.
#[derive(Debug, Clone, PartialEq)]
pub struct SellmeierModel {
    name: String,
    form: SellmeierForm,
    coefficients: Vec<f64>,
    valid_range_um: (f64, f64),
}

impl SellmeierModel {
    pub fn new(
        name: impl Into<String>,
        form: SellmeierForm,
        coefficients: Vec<f64>,
        valid_range_um: (f64, f64),
    ) -> Result<Self> {
        let name = name.into();
        let fail = |reason: String| Error::MaterialData {
            name: name.clone(),
            reason,
        };
        if coefficients.len() != form.coefficient_count() {
            return Err(fail(format!(
                "form `{form}` takes {} coefficients, got {}",
                form.coefficient_count(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(fail("non-finite coefficient".into()));
        }
        let (lo, hi) = valid_range_um;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(fail(format!("bad valid range [{lo}, {hi}]")));
        }
        Ok(Self {
            name,
            form,
            coefficients,
            valid_range_um,
        })
    }

    /// Non-dispersive `n = 1` medium.
    pub fn vacuum() -> Self {
        Self {
            name: "vacuum".into(),
            form: SellmeierForm::Vacuum,
            coefficients: Vec::new(),
            valid_range_um: (0.0, 1.0e9),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn form(&self) -> SellmeierForm {
        self.form
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn valid_range_um(&self) -> (f64, f64) {
        self.valid_range_um
    }

    pub fn check_range(&self, wavelength_um: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_um;
        if wavelength_um.is_finite() && wavelength_um > 0.0 && wavelength_um >= lo && wavelength_um <= hi {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                material: self.name.clone(),
                wavelength_um,
                min_um: lo,
                max_um: hi,
            })
        }
    }

    fn evaluate(&self, l: f64) -> SquaredIndex {
        let c = &self.coefficients;
        let l2 = l * l;
        match self.form {
            SellmeierForm::Vacuum => SquaredIndex {
                value: 1.0,
                d1: 0.0,
                d2: 0.0,
            },
            SellmeierForm::ThreeTerm => {
                let mut sq = SquaredIndex {
                    value: 1.0,
                    d1: 0.0,
                    d2: 0.0,
                };
                for (b, cc) in c[..3].iter().zip(&c[3..]) {
                    let den = l2 - cc;
                    sq.value += b * l2 / den;
                    sq.d1 += -2.0 * b * cc * l / (den * den);
                    sq.d2 += -2.0 * b * cc / (den * den) + 8.0 * b * cc * l2 / (den * den * den);
                }
                sq
            }
            SellmeierForm::TwoTermQuadratic => {
                let (a, b, cc, d) = (c[0], c[1], c[2], c[3]);
                let den = l2 - cc;
                SquaredIndex {
                    value: a + b / den - d * l2,
                    d1: -2.0 * b * l / (den * den) - 2.0 * d * l,
                    d2: -2.0 * b / (den * den) + 8.0 * b * l2 / (den * den * den) - 2.0 * d,
                }
            }
        }
    }
}

impl IndexCurve for SellmeierModel {
    fn label(&self) -> &str {
        &self.name
    }

    fn squared_index(&self, wavelength_um: f64) -> Result<SquaredIndex> {
        self.check_range(wavelength_um)?;
        Ok(self.evaluate(wavelength_um))
    }
}

/// Refractive index of `material` at `wavelength_um`.
pub fn refractive_index(material: &SellmeierModel, wavelength_um: f64) -> Result<f64> {
    material.refractive_index(wavelength_um)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bk7() -> SellmeierModel {
        SellmeierModel::new(
            "BK7",
            SellmeierForm::ThreeTerm,
            vec![1.03961212, 0.231792344, 1.01046945, 0.00600069867, 0.0200179144, 103.560653],
            (0.3, 2.5),
        )
        .unwrap()
    }

    #[test]
    fn bk7_at_sodium_d_line() {
        let n = refractive_index(&bk7(), 0.5876).unwrap();
        assert!((n - 1.5168).abs() < 2e-4, "n = {n}");
    }

    #[test]
    fn out_of_range_names_material() {
        let err = bk7().refractive_index(0.1).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }));
        assert!(err.to_string().contains("BK7"));
    }

    #[test]
    fn vacuum_is_dispersionless() {
        let s = SellmeierModel::vacuum()
            .wavenumber_derivatives(angular_frequency(0.8))
            .unwrap();
        assert_eq!(s.k_double_prime, 0.0);
        assert_eq!(s.k_prime, 1.0 / SPEED_OF_LIGHT);
    }

    #[test]
    fn wrong_coefficient_count_rejected() {
        let r = SellmeierModel::new("x", SellmeierForm::ThreeTerm, vec![1.0; 4], (0.3, 2.0));
        assert!(r.is_err());
    }

    #[test]
    fn form_tags_round_trip() {
        for form in [
            SellmeierForm::ThreeTerm,
            SellmeierForm::TwoTermQuadratic,
            SellmeierForm::Vacuum,
        ] {
            assert_eq!(form.tag().parse::<SellmeierForm>().unwrap(), form);
        }
        assert!("cauchy".parse::<SellmeierForm>().is_err());
    }

    #[test]
    fn wavelength_frequency_inverse() {
        let w = angular_frequency(0.4);
        assert!((wavelength_um(w) - 0.4).abs() < 1e-15);
    }
}
