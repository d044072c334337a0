//! End-to-end audit: exhaustive search, calibration, review queue, report.

mod review;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    above_threshold_fraction, build_histogram, far_threshold, Histogram, HistogramSidecar,
    DEFAULT_HIST_BINS, DEFAULT_HIST_HI, DEFAULT_HIST_LO,
};
use crate::embedding::{DatasetKind, Registry};
use crate::engine::{DedupMode, Engine, ScoredPair};
use crate::error::{Error, Result};
use crate::{fsio, BenchmarkScores, EmbeddingSet, FarThreshold};

pub use review::{finalize_report, read_label_log, Label, LeakedPair, ReviewRecord, ReviewSummary, ReviewStatus};

pub const DEFAULT_K: usize = 1500;
pub const DEFAULT_TARGET_FAR: f64 = 1e-4;

fn default_k() -> usize {
    DEFAULT_K
}
fn default_far() -> f64 {
    DEFAULT_TARGET_FAR
}
fn default_lo() -> f64 {
    DEFAULT_HIST_LO
}
fn default_hi() -> f64 {
    DEFAULT_HIST_HI
}
fn default_bins() -> usize {
    DEFAULT_HIST_BINS
}
fn default_reviewers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub synthetic_id: String,
    pub real_id: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_far")]
    pub target_far: f64,
    #[serde(default)]
    pub dedup_mode: DedupMode,
    #[serde(default = "default_lo")]
    pub hist_lo: f64,
    #[serde(default = "default_hi")]
    pub hist_hi: f64,
    #[serde(default = "default_bins")]
    pub hist_bins: usize,
    #[serde(default = "default_reviewers")]
    pub required_reviewers: usize,
}

impl AuditConfig {
    pub fn new(synthetic_id: impl Into<String>, real_id: impl Into<String>) -> Self {
        Self {
            synthetic_id: synthetic_id.into(),
            real_id: real_id.into(),
            k: DEFAULT_K,
            target_far: DEFAULT_TARGET_FAR,
            dedup_mode: DedupMode::AllPairs,
            hist_lo: DEFAULT_HIST_LO,
            hist_hi: DEFAULT_HIST_HI,
            hist_bins: DEFAULT_HIST_BINS,
            required_reviewers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(self.target_far > 0.0 && self.target_far < 1.0) {
            return Err(Error::TargetFarOutOfRange(self.target_far));
        }
        if self.required_reviewers == 0 {
            return Err(Error::InvalidArgument("required_reviewers must be at least 1".into()));
        }
        if self.hist_lo.partial_cmp(&self.hist_hi) != Some(std::cmp::Ordering::Less) || self.hist_bins == 0 {
            return Err(Error::InvalidRange {
                lo: self.hist_lo,
                hi: self.hist_hi,
                bins: self.hist_bins,
            });
        }
        Ok(())
    }
}

/// One line of the review queue file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub pair_id: String,
    pub rank: usize,
    pub synth_index: usize,
    pub real_index: usize,
    pub score: f64,
    pub synth_path: String,
    pub real_path: String,
    pub above_threshold: bool,
}

pub fn pair_id(p: &ScoredPair) -> String {
    format!("s{}-r{}", p.synth_index, p.real_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ScoreStats {
    fn of(scores: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for s in scores {
            min = min.min(s);
            max = max.max(s);
            sum += s;
            n += 1;
        }
        (n > 0).then(|| Self {
            min,
            max,
            mean: sum / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub underflow: u64,
    pub overflow: u64,
    /// CSV file holding the bin counts, when exported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Digest of the configuration and input digests.
    pub report_id: String,
    pub created_at: DateTime<Utc>,
    pub tool_version: String,
    pub config: AuditConfig,
    pub input_digests: BTreeMap<String, String>,
    pub synthetic_count: usize,
    pub real_count: usize,
    pub dim: usize,
    pub pairs_examined: u64,
    pub far_threshold: FarThreshold,
    pub benchmark_source: String,
    /// Share of synthetic rows whose nearest real row scores above the threshold.
    pub above_threshold_fraction: f64,
    pub nearest_scores: ScoreStats,
    pub histogram: HistogramSummary,
    pub queue_len: usize,
    pub queue_above_threshold: usize,
    pub review: ReviewSummary,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with `created_at` blanked, for determinism comparisons.
    pub fn to_json_without_timestamp(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("created_at");
        serde_json::to_string_pretty(&v).unwrap()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsio::atomic_write(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("report: {e}")))
    }
}

pub fn write_queue(queue: &[QueueEntry], path: &Path) -> Result<()> {
    fsio::atomic_write(path, &fsio::to_jsonl(queue))
}

pub fn read_queue(path: &Path) -> Result<Vec<QueueEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    fsio::from_jsonl(&text)
}

/// Everything `run_audit` consumes besides the configuration.
pub struct AuditInputs<'a> {
    pub registry: &'a Registry,
    pub synthetic: &'a EmbeddingSet,
    pub real: &'a EmbeddingSet,
    pub benchmark: Option<&'a BenchmarkScores>,
    /// Content digests of the files the inputs were loaded from, by role.
    pub input_digests: BTreeMap<String, String>,
}

pub struct AuditOutcome {
    pub report: AuditReport,
    pub queue: Vec<QueueEntry>,
    pub histogram: Histogram,
    pub sidecar: HistogramSidecar,
}

fn report_id(config: &AuditConfig, digests: &BTreeMap<String, String>) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        config: &'a AuditConfig,
        inputs: &'a BTreeMap<String, String>,
    }
    let key = serde_json::to_vec(&Key {
        config,
        inputs: digests,
    })
    .expect("key serializes");
    fsio::sha256_hex(&key)
}

/// Runs the exhaustive search and calibration; review fields stay pending.
pub fn run_audit(config: &AuditConfig, inputs: &AuditInputs<'_>, engine: &Engine) -> Result<AuditOutcome> {
    config.validate()?;
    let syn_entry = inputs.registry.require(&config.synthetic_id)?;
    let real_entry = inputs.registry.require(&config.real_id)?;
    if syn_entry.kind != DatasetKind::Synthetic {
        return Err(Error::InvariantViolation(format!(
            "{:?} is registered as {:?}, not synthetic",
            config.synthetic_id, syn_entry.kind
        )));
    }
    if real_entry.kind != DatasetKind::Real {
        return Err(Error::InvariantViolation(format!(
            "{:?} is registered as {:?}, not real",
            config.real_id, real_entry.kind
        )));
    }
    let benchmark = inputs.benchmark.ok_or(Error::MissingBenchmark)?;
    let (synthetic, real) = (inputs.synthetic, inputs.real);

    let top = engine.select(config.dedup_mode, synthetic, real, config.k)?;
    let nearest = engine.nearest_matches(synthetic, real)?;
    let far = far_threshold(benchmark, config.target_far)?;
    let fraction = above_threshold_fraction(&nearest, far.threshold)?;
    let histogram = build_histogram(
        &nearest.scores().collect::<Vec<_>>(),
        config.hist_lo,
        config.hist_hi,
        config.hist_bins,
    )?;

    let queue: Vec<QueueEntry> = top
        .pairs
        .iter()
        .enumerate()
        .map(|(n, p)| QueueEntry {
            pair_id: pair_id(p),
            rank: n + 1,
            synth_index: p.synth_index,
            real_index: p.real_index,
            score: p.score,
            synth_path: synthetic.manifest()[p.synth_index].image_path.clone(),
            real_path: real.manifest()[p.real_index].image_path.clone(),
            above_threshold: p.score > far.threshold,
        })
        .collect();

    let sidecar = HistogramSidecar::new(&histogram, Some(far), queue.iter().map(|q| q.score).collect());
    let report = AuditReport {
        report_id: report_id(config, &inputs.input_digests),
        created_at: Utc::now(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config: config.clone(),
        input_digests: inputs.input_digests.clone(),
        synthetic_count: synthetic.count(),
        real_count: real.count(),
        dim: synthetic.dim(),
        pairs_examined: nearest.stats.examined,
        far_threshold: far,
        benchmark_source: benchmark.source_id.clone(),
        above_threshold_fraction: fraction,
        nearest_scores: ScoreStats::of(nearest.scores()).ok_or(Error::EmptyMatches)?,
        histogram: HistogramSummary {
            lo: histogram.lo,
            hi: histogram.hi,
            bins: histogram.bins,
            underflow: histogram.underflow,
            overflow: histogram.overflow,
            file: None,
        },
        queue_len: queue.len(),
        queue_above_threshold: queue.iter().filter(|q| q.above_threshold).count(),
        review: ReviewSummary::pending(config.required_reviewers),
    };
    Ok(AuditOutcome {
        report,
        queue,
        histogram,
        sidecar,
    })
}
