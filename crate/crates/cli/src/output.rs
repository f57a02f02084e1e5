//! Output directory bookkeeping: CSV and JSON writers that record a hash of
//! every file for the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use hydrolimit::diagnostics::CertificationReference;
use hydrolimit::GridMetadata;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const CODE_VERSION: &str = concat!("hydrolimit ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.json";

/// Embedded in every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub velocity_grid: GridMetadata,
    pub certification: Option<CertificationReference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Provenance,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical JSON of a resolved configuration.
pub fn config_hash(config: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(p)
    }

    fn record(&mut self, rel: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes) });
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.path(rel)?, bytes)?;
        self.record(rel, bytes);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    /// Writes a header and numeric rows; floats use the shortest round-trip form.
    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write_bytes(rel, &bytes)
    }

    /// Registers a file written by other code (e.g. binary snapshots).
    pub fn register(&mut self, rel: &str) -> Result<(), CliError> {
        let bytes = fs::read(self.root.join(rel))?;
        self.record(rel, &bytes);
        Ok(())
    }

    pub fn into_entries(self) -> Vec<FileEntry> {
        self.files
    }

    /// Adds entries recorded by another writer, with paths relative to this root.
    pub fn extend(&mut self, entries: impl IntoIterator<Item = FileEntry>) {
        for e in entries {
            self.files.retain(|f| f.path != e.path);
            self.files.push(e);
        }
    }

    pub fn finish(mut self, provenance: Provenance) -> Result<Manifest, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { provenance, files: self.files };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.root.join(MANIFEST), bytes)?;
        Ok(manifest)
    }
}

/// File-name fragment for a time or parameter value, e.g. `0.25` → `0.25`,
/// `1` → `1`.
pub fn tag(v: f64) -> String {
    v.to_string()
}
