//! Frame-major feature matrices and the `VOXF1` binary layout.
//!
//! `VOXF1` layout: the five ASCII bytes `VOXF1`, then `dim_k` and `count_L`
//! as `u32` little endian, then `count_L * dim_k` `f32` little-endian values,
//! one frame after another.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const VOXF1_MAGIC: &[u8; 5] = b"VOXF1";
const VOXF1_HEADER_LEN: usize = 5 + 4 + 4;

/// A sequence of `count` feature vectors of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data. Zero frames is allowed here;
    /// training and scoring reject it with [`Error::EmptyFeatureMatrix`].
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("feature dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() % dim });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("feature values must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            Error::check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn ensure_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyFeatureMatrix)
        } else {
            Ok(())
        }
    }

    /// Stacks matrices frame-wise in the given order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a FeatureMatrix>) -> Result<Self> {
        let mut parts = parts.into_iter().peekable();
        let dim = parts.peek().map(|p| p.dim).ok_or(Error::EmptyFeatureMatrix)?;
        let mut data = Vec::new();
        for p in parts {
            Error::check_dim(dim, p.dim)?;
            data.extend_from_slice(&p.data);
        }
        Ok(Self { dim, data })
    }

    pub fn to_voxf1(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(VOXF1_HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(VOXF1_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_voxf1(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < VOXF1_HEADER_LEN || &bytes[..5] != VOXF1_MAGIC {
            return Err(Error::CorruptArtifact("missing VOXF1 header".into()));
        }
        let dim = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        let body = &bytes[VOXF1_HEADER_LEN..];
        let expected = dim
            .checked_mul(count)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::CorruptArtifact("VOXF1 size overflow".into()))?;
        if body.len() != expected {
            return Err(Error::CorruptArtifact(format!(
                "VOXF1 body has {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let data = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
        Self::from_flat(dim, data).map_err(|e| Error::CorruptArtifact(e.to_string()))
    }

    pub fn read_voxf1(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_voxf1(&bytes)
    }
}
