use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{SellmeierForm, SellmeierModel, UniaxialCrystal};
use crate::error::{Error, Result};

/// Environment variable naming a directory of material files that
/// supplement (and override by name) the built-in set.
pub const MATERIALS_DIR_ENV: &str = "SU11_MATERIALS_DIR";

const BUILTIN: &[(&str, &str)] = &[
    ("AIR.toml", include_str!("../../materials/AIR.toml")),
    ("BBO.toml", include_str!("../../materials/BBO.toml")),
    ("BK7.toml", include_str!("../../materials/BK7.toml")),
    ("LLF1.toml", include_str!("../../materials/LLF1.toml")),
    ("SF57.toml", include_str!("../../materials/SF57.toml")),
    ("SF6.toml", include_str!("../../materials/SF6.toml")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormulaFile {
    form: String,
    coefficients: Vec<f64>,
    valid_range_um: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    name: String,
    version: String,
    source: String,
    index: Option<FormulaFile>,
    ordinary: Option<FormulaFile>,
    extraordinary: Option<FormulaFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialKind {
    Isotropic(SellmeierModel),
    Uniaxial {
        ordinary: SellmeierModel,
        extraordinary: SellmeierModel,
    },
}

/// A named entry of the registry with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub version: String,
    pub source: String,
    pub kind: MaterialKind,
}

impl Material {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: MaterialFile = toml::from_str(text).map_err(|e| Error::MaterialData {
            name: origin.to_string(),
            reason: e.message().to_string(),
        })?;
        let model = |label: String, f: FormulaFile| -> Result<SellmeierModel> {
            let form: SellmeierForm = f.form.parse().map_err(|reason| Error::MaterialData {
                name: label.clone(),
                reason,
            })?;
            SellmeierModel::new(label, form, f.coefficients, (f.valid_range_um[0], f.valid_range_um[1]))
        };
        let name = file.name;
        let kind = match (file.index, file.ordinary, file.extraordinary) {
            (Some(index), None, None) => MaterialKind::Isotropic(model(name.clone(), index)?),
            (None, Some(o), Some(e)) => MaterialKind::Uniaxial {
                ordinary: model(format!("{name} (o)"), o)?,
                extraordinary: model(format!("{name} (e)"), e)?,
            },
            _ => {
                return Err(Error::MaterialData {
                    name,
                    reason: "expected either [index] or both [ordinary] and [extraordinary]".into(),
                })
            }
        };
        Ok(Self {
            name,
            version: file.version,
            source: file.source,
            kind,
        })
    }
}

/// Lookup table of dispersion models keyed by material name.
#[derive(Debug, Clone, Default)]
pub struct MaterialRegistry {
    materials: BTreeMap<String, Material>,
}

impl MaterialRegistry {
    /// The materials compiled into the library.
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        for (file, text) in BUILTIN {
            let m = Material::parse(text, file).expect("built-in material data is valid");
            reg.insert(m);
        }
        reg
    }

    /// Built-in materials, overridden by `*.toml` files in `dir`.
    pub fn with_dir(dir: &Path) -> Result<Self> {
        let mut reg = Self::builtin();
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path)?;
            reg.insert(Material::parse(&text, &path.display().to_string())?);
        }
        Ok(reg)
    }

    /// Built-in set, plus the directory named by [`MATERIALS_DIR_ENV`] if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(MATERIALS_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(Path::new(&dir)),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn insert(&mut self, material: Material) {
        self.materials.insert(material.name.clone(), material);
    }

    pub fn get(&self, name: &str) -> Result<&Material> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    /// Isotropic index model, e.g. a glass rod.
    pub fn isotropic(&self, name: &str) -> Result<&SellmeierModel> {
        match &self.get(name)?.kind {
            MaterialKind::Isotropic(m) => Ok(m),
            MaterialKind::Uniaxial { .. } => Err(Error::MaterialData {
                name: name.to_string(),
                reason: "uniaxial material used where an isotropic one is required".into(),
            }),
        }
    }

    pub fn uniaxial(&self, name: &str, length_m: f64, cut_angle: f64) -> Result<UniaxialCrystal> {
        match &self.get(name)?.kind {
            MaterialKind::Uniaxial {
                ordinary,
                extraordinary,
            } => UniaxialCrystal::new(name, ordinary.clone(), extraordinary.clone(), length_m, cut_angle),
            MaterialKind::Isotropic(_) => Err(Error::MaterialData {
                name: name.to_string(),
                reason: "isotropic material cannot serve as the nonlinear crystal".into(),
            }),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }

    /// `(name, version)` pairs for output metadata.
    pub fn versions(&self) -> Vec<(String, String)> {
        self.materials
            .values()
            .map(|m| (m.name.clone(), m.version.clone()))
            .collect()
    }
}
