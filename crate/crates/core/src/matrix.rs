//! Row-major feature matrices.
//!
//! Values are held as `f64` in memory regardless of the on-disk precision so
//! that statistics accumulate in double precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `rows × dim` matrix of feature vectors, one sample per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// An empty matrix with a fixed row width.
    pub fn empty(dim: usize) -> Self {
        Self {
            rows: 0,
            dim,
            data: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            rows: 0,
            dim,
            data: Vec::with_capacity(rows * dim),
        }
    }

    /// Builds a matrix from a flat row-major buffer, rejecting non-finite entries.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            rows: data.len() / dim,
            dim,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyClass)?;
        let mut m = Self::with_capacity(dim, rows.len());
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Copies the listed rows, in the listed order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
        }
        out.rows = indices.len();
        out
    }

    /// The first `n` rows (or all rows when fewer exist).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.rows);
        Self {
            rows: n,
            dim: self.dim,
            data: self.data[..n * self.dim].to_vec(),
        }
    }

    /// Adds `offset` to every row in place.
    pub fn shift_rows(&mut self, offset: &[f64]) {
        debug_assert_eq!(offset.len(), self.dim);
        for row in self.data.chunks_exact_mut(self.dim) {
            for (v, o) in row.iter_mut().zip(offset) {
                *v += o;
            }
        }
    }

    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }
}
