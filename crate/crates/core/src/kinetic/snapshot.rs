//! Flat binary snapshots: an 8-byte little-endian header length, a UTF-8 JSON
//! header, then the distribution values as little-endian `f64`, row-major in
//! `(cell, velocity node)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::{DistributionField, GridMetadata};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub t: f64,
    pub epsilon: f64,
    pub nx: usize,
    pub nv: usize,
    pub x: Vec<f64>,
    pub dx: f64,
    pub velocity: GridMetadata,
    /// Free-form provenance, e.g. a config hash.
    pub provenance: serde_json::Value,
}

pub const SNAPSHOT_FORMAT: &str = "hydrolimit-snapshot-v1";

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, f: &DistributionField) -> Result<()> {
    if header.nx * header.nv != f.values.len() {
        return Err(Error::ShapeMismatch { expected: header.nx * header.nv, found: f.values.len() });
    }
    let json = serde_json::to_vec(header).map_err(io)?;
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    for v in &f.values {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, DistributionField)> {
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 30 {
        return Err(Error::Io(format!("implausible header length {len}")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let header: SnapshotHeader = serde_json::from_slice(&json).map_err(io)?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(Error::Io(format!("unknown snapshot format `{}`", header.format)));
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io)?;
    let n = header.nx * header.nv;
    if payload.len() != 8 * n {
        return Err(Error::ShapeMismatch { expected: 8 * n, found: payload.len() });
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let mut f = DistributionField::zeros(header.x.clone(), header.dx, header.nv, crate::velocity::Frame::Eulerian);
    f.values = values;
    f.validate()?;
    Ok((header, f))
}
