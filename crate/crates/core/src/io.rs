//! File outputs: field dumps with JSON sidecars, 1D slices and the
//! per-file manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::GridField;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sidecar of a raw field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub eps: f64,
    pub description: String,
}

/// Little-endian `f64`, row-major (rows along `x2`).
pub fn field_bytes(field: &GridField) -> Vec<u8> {
    field.values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn field_from_bytes(bytes: &[u8], sidecar: &FieldSidecar) -> Result<GridField> {
    let n = sidecar.n;
    if bytes.len() != 8 * n * n {
        return Err(Error::Geometry(format!(
            "field dump has {} bytes, expected {} for n = {n}",
            bytes.len(),
            8 * n * n
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(GridField {
        n,
        l: sidecar.l,
        values,
    })
}

pub fn read_field(bin: &Path) -> Result<(GridField, FieldSidecar)> {
    let sidecar: FieldSidecar = serde_json::from_str(&fs::read_to_string(bin.with_extension("json"))?)?;
    let field = field_from_bytes(&fs::read(bin)?, &sidecar)?;
    Ok((field, sidecar))
}

/// SHA-256 of the canonical configuration JSON.
pub fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.canonical_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub spikelab: String,
    pub field_format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub file: String,
    pub command: String,
    pub config_hash: String,
    pub sha256: String,
    pub versions: Versions,
}

/// Writes files into one directory, each followed by `<name>.manifest.json`.
#[derive(Debug, Clone)]
pub struct OutputWriter {
    pub dir: PathBuf,
    pub command: String,
    pub config_hash: String,
    written: Vec<PathBuf>,
}

impl OutputWriter {
    pub fn new(dir: impl Into<PathBuf>, command: &str, config: &RunConfig) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.into(),
            config_hash: config_hash(config),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        let manifest = Manifest {
            file: name.into(),
            command: self.command.clone(),
            config_hash: self.config_hash.clone(),
            sha256: Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect(),
            versions: Versions {
                spikelab: VERSION.into(),
                field_format: 1,
            },
        };
        let mpath = self.dir.join(format!("{name}.manifest.json"));
        fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
        self.written.push(path.clone());
        self.written.push(mpath);
        Ok(path)
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// `<stem>.bin` plus the `<stem>.json` sidecar.
    pub fn write_field(&mut self, stem: &str, field: &GridField, eps: f64, description: &str) -> Result<PathBuf> {
        let sidecar = FieldSidecar {
            n: field.n,
            l: field.l,
            eps,
            description: description.into(),
        };
        let bin = self.write(&format!("{stem}.bin"), &field_bytes(field))?;
        self.write_json(&format!("{stem}.json"), &sidecar)?;
        Ok(bin)
    }
}
