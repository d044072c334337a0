//! Exhaustive membership-inference auditing for synthetic face datasets.
//!
//! The crate compares every synthetic embedding against every embedding of
//! the generator's training set, keeps the globally most similar pairs, and
//! calibrates a matching threshold at a target false accept rate so that the
//! retrieved pairs can be handed to human reviewers.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the storage type used by the on-disk format.

pub mod audit;
pub mod calibration;
pub mod embedding;
pub mod engine;
pub mod error;
pub mod fsio;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Embedding set stored as 32-bit floats, the default on-disk dtype.
pub type EmbeddingSet = embedding::Embeddings<f32>;
/// Embedding set held in 64-bit floats.
pub type EmbeddingSet64 = embedding::Embeddings<f64>;
/// Benchmark scores in 64-bit floats.
pub type BenchmarkScores = calibration::BenchmarkScores<f64>;
/// Threshold derived from 64-bit impostor scores.
pub type FarThreshold = calibration::FarThreshold<f64>;
pub use calibration::Histogram;
pub use embedding::{DatasetKind, DatasetRegistryEntry, ManifestRecord, Registry};
pub use audit::{AuditConfig, AuditReport, Label, QueueEntry, ReviewRecord};
pub use engine::{DedupMode, Engine, EngineConfig, NearestMatches, ScoredPair, TopKResult};

