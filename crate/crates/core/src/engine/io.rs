//! Result files: JSON lines (one pair per line) and the binary `TOPK` cache.
//!
//! Cache layout (little-endian), mirroring the `EMBS` header:
//!
//! ```text
//! "TOPK" | version u32 = 1 | k u32 | count u64 | kind u8 | reserved [u8; 7]
//! then count records of: synth_index u64 | real_index u64 | score f64
//! ```
//!
//! `kind` is 1 for all-pairs top-k, 2 for unique-real top-k and 3 for
//! nearest matches (`k` = 0, `synth_index` = row).

use std::path::Path;

use super::{DedupMode, NearestMatches, PassStats, ScoredPair, TopKResult};
use crate::error::{Error, Result};
use crate::fsio;

pub const TOPK_MAGIC: [u8; 4] = *b"TOPK";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;
const RECORD_LEN: usize = 24;

const KIND_ALL: u8 = 1;
const KIND_UNIQUE: u8 = 2;
const KIND_NEAREST: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CacheContents {
    TopK(TopKResult),
    Nearest(NearestMatches),
}

pub fn write_topk_jsonl(result: &TopKResult, path: &Path) -> Result<()> {
    fsio::atomic_write(path, &fsio::to_jsonl(&result.pairs))
}

pub fn read_topk_jsonl(path: &Path) -> Result<Vec<ScoredPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    fsio::from_jsonl(&text)
}

pub fn write_nearest_jsonl(matches: &NearestMatches, path: &Path) -> Result<()> {
    let pairs = matches
        .matches
        .iter()
        .enumerate()
        .map(|(i, &(j, s))| ScoredPair::new(i, j, s));
    fsio::atomic_write(path, &fsio::to_jsonl(pairs))
}

fn encode(k: u32, kind: u8, records: &[ScoredPair]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + records.len() * RECORD_LEN);
    out.extend_from_slice(&TOPK_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&[0u8; 7]);
    for p in records {
        out.extend_from_slice(&(p.synth_index as u64).to_le_bytes());
        out.extend_from_slice(&(p.real_index as u64).to_le_bytes());
        out.extend_from_slice(&p.score.to_le_bytes());
    }
    out
}

/// Serialized cache bytes, as written by [`write_topk_cache`].
pub fn encode_topk_cache(contents: &CacheContents) -> Result<Vec<u8>> {
    Ok(match contents {
        CacheContents::TopK(r) => {
            let k = u32::try_from(r.k)
                .map_err(|_| Error::InvalidArgument(format!("k = {} exceeds u32", r.k)))?;
            let kind = match r.mode {
                DedupMode::AllPairs => KIND_ALL,
                DedupMode::UniqueReal => KIND_UNIQUE,
            };
            encode(k, kind, &r.pairs)
        }
        CacheContents::Nearest(m) => {
            let recs: Vec<_> = m
                .matches
                .iter()
                .enumerate()
                .map(|(i, &(j, s))| ScoredPair::new(i, j, s))
                .collect();
            encode(0, KIND_NEAREST, &recs)
        }
    })
}

pub fn write_topk_cache(contents: &CacheContents, path: &Path) -> Result<()> {
    fsio::atomic_write(path, &encode_topk_cache(contents)?)
}

/// Reads a cache file. Pass statistics are not stored and come back zeroed.
pub fn read_topk_cache(path: &Path) -> Result<CacheContents> {
    let bytes = fsio::read(path)?;
    if bytes.len() >= 4 && bytes[..4] != TOPK_MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(Error::BadMagic {
            expected: TOPK_MAGIC,
            found,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let k = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let kind = bytes[20];
    let expected = count
        .checked_mul(RECORD_LEN as u64)
        .ok_or_else(|| Error::InvariantViolation("record count overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if (payload.len() as u64) != expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len() as u64,
        });
    }
    let u64_at = |r: &[u8], o: usize| u64::from_le_bytes(r[o..o + 8].try_into().unwrap());
    let records: Vec<ScoredPair> = payload
        .chunks_exact(RECORD_LEN)
        .map(|r| ScoredPair {
            synth_index: u64_at(r, 0) as usize,
            real_index: u64_at(r, 8) as usize,
            score: f64::from_bits(u64_at(r, 16)),
        })
        .collect();
    let stats = PassStats::default();
    match kind {
        KIND_ALL | KIND_UNIQUE => Ok(CacheContents::TopK(TopKResult {
            k,
            mode: if kind == KIND_ALL {
                DedupMode::AllPairs
            } else {
                DedupMode::UniqueReal
            },
            pairs: records,
            stats,
        })),
        KIND_NEAREST => Ok(CacheContents::Nearest(NearestMatches {
            matches: records.iter().map(|p| (p.real_index, p.score)).collect(),
            stats,
        })),
        other => Err(Error::InvariantViolation(format!("unknown cache kind {other}"))),
    }
}
