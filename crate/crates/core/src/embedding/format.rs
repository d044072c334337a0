//! Binary `EMBS` container and JSON-lines manifest.
//!
//! Layout (little-endian):
//!
//! ```text
//! "EMBS" | version u32 = 1 | dim u32 | count u64 | dtype u8 | reserved [u8; 7] | payload
//! ```
//!
//! The payload is `count * dim` scalars, row-major. Bit 0 of the first
//! reserved byte records whether the rows are unit-normalized. The manifest
//! lives next to the data file as `<name>.manifest.jsonl`.

use std::path::{Path, PathBuf};

use super::{Embeddings, ManifestRecord};
use crate::error::{Error, Result};
use crate::fsio;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"EMBS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
const FLAG_NORMALIZED: u8 = 1;

/// `<dir>/<name>.embs` -> `<dir>/<name>.manifest.jsonl`.
pub fn manifest_path_for(path: &Path) -> PathBuf {
    path.with_extension("manifest.jsonl")
}

fn dataset_id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn encode<T: Scalar>(set: &Embeddings<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + set.vectors.len() * T::BYTES);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(set.dim as u32).to_le_bytes());
    out.extend_from_slice(&(set.count() as u64).to_le_bytes());
    out.push(T::DTYPE);
    let mut reserved = [0u8; 7];
    if set.normalized {
        reserved[0] |= FLAG_NORMALIZED;
    }
    out.extend_from_slice(&reserved);
    for &x in &set.vectors {
        x.write_le(&mut out);
    }
    out
}

/// Writes the data file and its sibling manifest.
///
/// The dataset id is not stored; on read it is taken from the file stem.
pub fn write_embedding_set<T: Scalar>(set: &Embeddings<T>, path: &Path) -> Result<()> {
    if set.vectors.len() != set.count() * set.dim {
        return Err(Error::ManifestMismatch {
            rows: set.vectors.len() / set.dim,
            records: set.count(),
        });
    }
    if u32::try_from(set.dim).is_err() {
        return Err(Error::InvariantViolation(format!("dim {} exceeds u32", set.dim)));
    }
    fsio::atomic_write(&manifest_path_for(path), &fsio::to_jsonl(&set.manifest))?;
    fsio::atomic_write(path, &encode(set))
}

pub fn read_embedding_set<T: Scalar>(path: &Path) -> Result<Embeddings<T>> {
    let bytes = fsio::read(path)?;
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(bad_magic(&bytes));
        }
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(bad_magic(&bytes));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let dtype = bytes[20];
    let flags = bytes[21];
    if dim == 0 {
        return Err(Error::DimensionZero);
    }
    if dtype != T::DTYPE {
        return Err(Error::UnsupportedDtype {
            expected: T::DTYPE,
            found: dtype,
        });
    }
    let expected = count
        .checked_mul(dim as u64)
        .and_then(|n| n.checked_mul(T::BYTES as u64))
        .ok_or_else(|| Error::InvariantViolation("payload size overflows u64".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if (payload.len() as u64) < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len() as u64,
        });
    }
    if payload.len() as u64 > expected {
        return Err(Error::InvariantViolation(format!(
            "{} trailing bytes after payload",
            payload.len() as u64 - expected
        )));
    }
    let vectors: Vec<T> = payload.chunks_exact(T::BYTES).map(T::read_le).collect();

    let manifest_path = manifest_path_for(path);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut manifest: Vec<ManifestRecord> = fsio::from_jsonl(&text)?;
    manifest.sort_by_key(|r| r.row_index);

    let set = Embeddings::new(dataset_id_for(path), dim, vectors, manifest)?;
    if flags & FLAG_NORMALIZED != 0 {
        set.assume_normalized()
    } else {
        Ok(set)
    }
}

fn bad_magic(bytes: &[u8]) -> Error {
    let mut found = [0u8; 4];
    let n = bytes.len().min(4);
    found[..n].copy_from_slice(&bytes[..n]);
    Error::BadMagic {
        expected: MAGIC,
        found,
    }
}

/// Reads headerless CSV rows of floats plus a JSON-lines manifest.
///
/// The result is not normalized.
pub fn import_csv<T: Scalar>(path: &Path, manifest_path: &Path) -> Result<Embeddings<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut dim = None;
    let mut vectors = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let expected = *dim.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRows {
                row,
                expected,
                found: rec.len(),
            });
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: {field:?} is not a number")))?;
            vectors.push(T::from_f64(v).ok_or_else(|| Error::Parse(format!("row {row}: {v}")))?);
        }
    }
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let mut manifest: Vec<ManifestRecord> = fsio::from_jsonl(&text)?;
    let rows = dim.map_or(0, |d| vectors.len() / d.max(1));
    if manifest.len() != rows {
        return Err(Error::ManifestMismatch {
            rows,
            records: manifest.len(),
        });
    }
    manifest.sort_by_key(|r| r.row_index);
    let dim = dim.ok_or(Error::EmptyInput)?;
    Embeddings::new(dataset_id_for(path), dim, vectors, manifest)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(e.to_string())
    }
}
