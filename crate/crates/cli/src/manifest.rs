use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use su11_core::config::InterferometerConfig;
use su11_core::scenarios::{write_metadata, RunMetadata};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct MaterialEntry {
    pub name: String,
    pub version: String,
}

/// Record of one invocation, written as `manifest.json` in the output
/// directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config_hash: String,
    pub output_dir: String,
    pub timestamp: String,
    pub tool_version: String,
    pub material_versions: Vec<MaterialEntry>,
    /// Paths relative to `output_dir`, each once, in write order.
    pub files: Vec<String>,
}

/// Output directory that remembers every file written into it.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Create `name` (subdirectories allowed) and pass a buffered writer to `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> su11_core::Result<()>,
    {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        f(&mut out)?;
        out.flush().map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |out| Ok(out.write_all(text.as_bytes())?))
    }

    pub fn write_metadata(&mut self, command: &str, config: &InterferometerConfig) -> Result<(), CliError> {
        let meta = RunMetadata::new(command, config);
        self.write("metadata.toml", |out| write_metadata(&meta, config, out))
    }

    pub fn finish(self, command: &str, config_path: Option<&Path>, config: &InterferometerConfig) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            config_hash: config.hash(),
            output_dir: self.root.display().to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            material_versions: config
                .material_versions()
                .iter()
                .map(|(name, version)| MaterialEntry {
                    name: name.clone(),
                    version: version.clone(),
                })
                .collect(),
            files: self.files,
        };
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
