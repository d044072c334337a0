//! Embedding sets: the dense matrix of face embeddings for one dataset plus
//! the manifest that binds each row to an image.

mod format;
mod registry;
mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use format::{import_csv, manifest_path_for, read_embedding_set, write_embedding_set, HEADER_LEN, MAGIC};
pub use registry::{DatasetKind, DatasetRegistryEntry, Registry};
pub use toy::toy_extract;

/// Tolerance on the row norm for a set flagged as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;
/// Rows with a norm below this are treated as degenerate.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub row_index: usize,
    pub image_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

impl ManifestRecord {
    pub fn new(row_index: usize, image_path: impl Into<String>) -> Self {
        Self {
            row_index,
            image_path: image_path.into(),
            subject_label: None,
            notes: None,
        }
    }
}

/// Row-major `count x dim` embedding matrix with its manifest.
///
/// Immutable once built: every transformation returns a new set.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<T> {
    dataset_id: String,
    dim: usize,
    vectors: Vec<T>,
    normalized: bool,
    manifest: Vec<ManifestRecord>,
}

impl<T: Scalar> Embeddings<T> {
    /// Builds an unnormalized set, checking shape and manifest invariants.
    pub fn new(
        dataset_id: impl Into<String>,
        dim: usize,
        vectors: Vec<T>,
        manifest: Vec<ManifestRecord>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionZero);
        }
        if !vectors.len().is_multiple_of(dim) {
            return Err(Error::InvariantViolation(format!(
                "{} values do not form rows of dimension {dim}",
                vectors.len()
            )));
        }
        let rows = vectors.len() / dim;
        validate_manifest(&manifest, rows)?;
        Ok(Self {
            dataset_id: dataset_id.into(),
            dim,
            vectors,
            normalized: false,
            manifest,
        })
    }

    /// Builds a set whose manifest uses the row number as the image path.
    pub fn from_rows(dataset_id: impl Into<String>, dim: usize, vectors: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionZero);
        }
        let rows = vectors.len() / dim;
        let manifest = (0..rows)
            .map(|i| ManifestRecord::new(i, format!("{i}")))
            .collect();
        Self::new(dataset_id, dim, vectors, manifest)
    }

    /// Marks the set as normalized after verifying every row norm.
    pub fn assume_normalized(mut self) -> Result<Self> {
        self.check_unit_rows()?;
        self.normalized = true;
        Ok(self)
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn with_dataset_id(mut self, id: impl Into<String>) -> Self {
        self.dataset_id = id.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn as_slice(&self) -> &[T] {
        &self.vectors
    }

    pub fn manifest(&self) -> &[ManifestRecord] {
        &self.manifest
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.vectors.chunks_exact(self.dim)
    }

    /// Largest Euclidean row norm, or 0 for an empty set.
    pub fn max_row_norm(&self) -> f64 {
        self.rows().map(row_norm).fold(0.0, f64::max)
    }

    fn check_unit_rows(&self) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            let n = row_norm(row);
            if n.is_nan() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::InvariantViolation(format!(
                    "row {i} has norm {n}, not within {UNIT_NORM_TOLERANCE} of 1"
                )));
            }
        }
        Ok(())
    }

    /// Scales every row to unit Euclidean norm.
    ///
    /// A zero row is an error rather than being dropped, since dropping it
    /// would shift every later manifest index.
    pub fn normalize(&self) -> Result<Self> {
        let mut vectors = Vec::with_capacity(self.vectors.len());
        for (i, row) in self.rows().enumerate() {
            let n = row_norm(row);
            if !n.is_finite() {
                return Err(Error::InvariantViolation(format!("row {i} is not finite")));
            }
            if n < ZERO_NORM {
                return Err(Error::ZeroVector(i));
            }
            vectors.extend(
                row.iter()
                    .map(|&x| T::from_f64(x.to_f64_lossless() / n).expect("finite")),
            );
        }
        Ok(Self {
            dataset_id: self.dataset_id.clone(),
            dim: self.dim,
            vectors,
            normalized: true,
            manifest: self.manifest.clone(),
        })
    }

    /// Bitwise equality of every field, including `-0.0` vs `0.0` and NaN payloads.
    pub fn bit_eq(&self, other: &Self) -> bool {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &x in &self.vectors {
            x.write_le(&mut a);
        }
        for &x in &other.vectors {
            x.write_le(&mut b);
        }
        self.dataset_id == other.dataset_id
            && self.dim == other.dim
            && self.normalized == other.normalized
            && self.manifest == other.manifest
            && a == b
    }
}

pub fn row_norm<T: Scalar>(row: &[T]) -> f64 {
    row.iter()
        .map(|&x| {
            let v = x.to_f64_lossless();
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

fn validate_manifest(manifest: &[ManifestRecord], rows: usize) -> Result<()> {
    if manifest.len() != rows {
        return Err(Error::ManifestMismatch {
            rows,
            records: manifest.len(),
        });
    }
    let mut seen = vec![false; rows];
    for rec in manifest {
        match seen.get_mut(rec.row_index) {
            Some(s) if !*s => *s = true,
            Some(_) => {
                return Err(Error::InvariantViolation(format!(
                    "row index {} appears twice in manifest",
                    rec.row_index
                )))
            }
            None => {
                return Err(Error::InvariantViolation(format!(
                    "row index {} out of range for {rows} rows",
                    rec.row_index
                )))
            }
        }
    }
    Ok(())
}
