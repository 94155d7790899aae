//! Field persistence: CSV tables and a raw little-endian snapshot format.
//!
//! Snapshot layout: 32-byte header (`b"CNSD"`, `u32` version, `u64` Nr,
//! `u64` Ntheta, `u64` component count), then one `f64` per node and
//! component, components interleaved, nodes in `(i, j)` row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimates::fmt;
use crate::grid::{PolarGrid, ScalarField, VectorField};

pub const MAGIC: &[u8; 4] = b"CNSD";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 32;

/// Decoded snapshot: shape and per-component values.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nr: usize,
    pub ntheta: usize,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn scalar(f: &ScalarField) -> Self {
        let (nr, ntheta) = f.shape();
        Self { nr, ntheta, components: vec![f.values().to_vec()] }
    }

    pub fn vector(v: &VectorField) -> Self {
        let (nr, ntheta) = v.shape();
        Self { nr, ntheta, components: vec![v.x.values().to_vec(), v.y.values().to_vec()] }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.nr * self.ntheta;
        let mut out = Vec::with_capacity(HEADER_BYTES + 8 * n * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.nr as u64).to_le_bytes());
        out.extend_from_slice(&(self.ntheta as u64).to_le_bytes());
        out.extend_from_slice(&(self.components.len() as u64).to_le_bytes());
        for k in 0..n {
            for c in &self.components {
                out.extend_from_slice(&c[k].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Format(format!("snapshot of {} bytes has no header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad snapshot magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes")) as usize;
        let (nr, ntheta, ncomp) = (word(8), word(16), word(24));
        let n = nr
            .checked_mul(ntheta)
            .and_then(|n| n.checked_mul(ncomp))
            .ok_or_else(|| Error::Format("snapshot shape overflows".into()))?;
        if bytes.len() != HEADER_BYTES + 8 * n {
            return Err(Error::Format(format!(
                "snapshot body has {} bytes, expected {}",
                bytes.len() - HEADER_BYTES,
                8 * n
            )));
        }
        let mut components = vec![Vec::with_capacity(nr * ntheta); ncomp];
        for (k, chunk) in bytes[HEADER_BYTES..].chunks_exact(8).enumerate() {
            components[k % ncomp].push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        Ok(Self { nr, ntheta, components })
    }

    pub fn into_scalar(self, grid: &PolarGrid) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::Format(format!("expected 1 component, found {}", self.components.len())));
        }
        let mut c = self.components;
        ScalarField::from_values(grid, c.remove(0))
    }

    pub fn into_vector(self, grid: &PolarGrid) -> Result<VectorField> {
        if self.components.len() != 2 {
            return Err(Error::Format(format!("expected 2 components, found {}", self.components.len())));
        }
        let mut c = self.components;
        let y = c.remove(1);
        let x = c.remove(0);
        VectorField::new(ScalarField::from_values(grid, x)?, ScalarField::from_values(grid, y)?)
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    write_bytes(path, &snap.to_bytes())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Snapshot::from_bytes(&bytes)
}

/// `i,j,r,theta,value` per node.
pub fn scalar_csv(grid: &PolarGrid, f: &ScalarField) -> Result<String> {
    grid.check(f.shape())?;
    let mut out = String::from("i,j,r,theta,value\n");
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        out.push_str(&format!("{i},{j},{},{},{}\n", fmt(grid.r(i)), fmt(grid.theta(j)), fmt(f.values()[k])));
    }
    Ok(out)
}

/// `i,j,r,theta,value_x,value_y` per node.
pub fn vector_csv(grid: &PolarGrid, v: &VectorField) -> Result<String> {
    grid.check(v.shape())?;
    let mut out = String::from("i,j,r,theta,value_x,value_y\n");
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        out.push_str(&format!(
            "{i},{j},{},{},{},{}\n",
            fmt(grid.r(i)),
            fmt(grid.theta(j)),
            fmt(v.x.values()[k]),
            fmt(v.y.values()[k])
        ));
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io { path: path.to_path_buf(), source: e };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}
