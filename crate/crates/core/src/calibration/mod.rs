//! Threshold calibration on benchmark score sets and score histograms.
//!
//! A pair matches iff its score is strictly greater than the threshold.

mod scores;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::NearestMatches;
use crate::error::{Error, Result};
use crate::fsio;
use crate::scalar::Scalar;

pub use scores::{load_benchmark_scores, write_benchmark_scores, BenchmarkScores, ScoreLabel};

/// Default histogram range and resolution for cosine scores.
pub const DEFAULT_HIST_LO: f64 = -1.0;
pub const DEFAULT_HIST_HI: f64 = 1.0;
pub const DEFAULT_HIST_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarThreshold<T> {
    pub target_far: f64,
    pub threshold: T,
    pub achieved_far: f64,
    pub impostor_count: usize,
    /// Impostor scores strictly above `threshold`.
    pub false_accepts: usize,
}

/// `floor(far * n)` evaluated exactly.
///
/// The fused multiply-add rounds `far * n - m` once, so its sign is exact and
/// corrects any rounding in the plain product.
fn max_false_accepts(far: f64, n: usize) -> usize {
    let nf = n as f64;
    let mut m = ((far * nf).floor() as usize).min(n);
    while m > 0 && far.mul_add(nf, -(m as f64)) < 0.0 {
        m -= 1;
    }
    while m < n && far.mul_add(nf, -((m + 1) as f64)) >= 0.0 {
        m += 1;
    }
    m
}

/// Threshold at which at most `target_far` of the impostor scores match.
///
/// With impostor scores sorted descending `d_1 >= ... >= d_N` and
/// `m = floor(target_far * N)`, the threshold is `d_{m+1}`. At most `m`
/// scores can be strictly above it, ties included.
pub fn far_threshold<T: Scalar>(scores: &BenchmarkScores<T>, target_far: f64) -> Result<FarThreshold<T>> {
    if !(target_far > 0.0 && target_far < 1.0) {
        return Err(Error::TargetFarOutOfRange(target_far));
    }
    let imp = &scores.impostor;
    if imp.is_empty() {
        return Err(Error::EmptyImpostorSet);
    }
    if imp.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore);
    }
    let n = imp.len();
    let m = max_false_accepts(target_far, n);
    let mut sorted = imp.clone();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let threshold = sorted[m.min(n - 1)];
    let false_accepts = sorted.iter().take_while(|&&s| s > threshold).count();
    Ok(FarThreshold {
        target_far,
        threshold,
        achieved_far: false_accepts as f64 / n as f64,
        impostor_count: n,
        false_accepts,
    })
}

/// Fraction of `impostor` strictly above `threshold`.
pub fn achieved_far<T: Scalar>(impostor: &[T], threshold: T) -> f64 {
    impostor.iter().filter(|&&s| s > threshold).count() as f64 / impostor.len() as f64
}

/// Fraction of per-query best scores strictly above `threshold`.
pub fn above_threshold_fraction(matches: &NearestMatches, threshold: f64) -> Result<f64> {
    if matches.is_empty() {
        return Err(Error::EmptyMatches);
    }
    let above = matches.scores().filter(|&s| s > threshold).count();
    Ok(above as f64 / matches.len() as f64)
}

/// Uniform-width histogram. Bin `i` covers `[lo + i*w, lo + (i+1)*w)`; the
/// last bin also includes `hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        if i == self.bins {
            self.hi
        } else {
            self.lo + i as f64 * self.width()
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x > self.hi {
            return None;
        }
        let mut i = (((x - self.lo) / self.width()).floor() as usize).min(self.bins - 1);
        while i + 1 < self.bins && x >= self.edge(i + 1) {
            i += 1;
        }
        while i > 0 && x < self.edge(i) {
            i -= 1;
        }
        Some(i)
    }

    /// `bin_left,bin_right,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edge(i), self.edge(i + 1), c));
        }
        out
    }
}

pub fn build_histogram<T: Scalar>(scores: &[T], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || bins == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange { lo, hi, bins });
    }
    let mut h = Histogram {
        lo,
        hi,
        bins,
        counts: vec![0; bins],
        underflow: 0,
        overflow: 0,
    };
    for &s in scores {
        let x = s.to_f64_lossless();
        if x.is_nan() {
            return Err(Error::NonFiniteScore);
        }
        match h.bin_of(x) {
            Some(i) => h.counts[i] += 1,
            None if x < lo => h.underflow += 1,
            None => h.overflow += 1,
        }
    }
    Ok(h)
}

/// JSON sidecar written next to a histogram CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSidecar {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub underflow: u64,
    pub overflow: u64,
    pub total: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_threshold: Option<FarThreshold<f64>>,
    /// Additional score markers (e.g. the top-k scores) for plotting.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<f64>,
}

impl HistogramSidecar {
    pub fn new(h: &Histogram, far_threshold: Option<FarThreshold<f64>>, markers: Vec<f64>) -> Self {
        Self {
            lo: h.lo,
            hi: h.hi,
            bins: h.bins,
            underflow: h.underflow,
            overflow: h.overflow,
            total: h.total(),
            far_threshold,
            markers,
        }
    }
}

/// Writes `<csv_path>` and its sidecar `<csv_path minus extension>.json`.
pub fn export_histogram(csv_path: &Path, h: &Histogram, sidecar: &HistogramSidecar) -> Result<()> {
    fsio::atomic_write(csv_path, h.to_csv().as_bytes())?;
    let json = serde_json::to_vec_pretty(sidecar).expect("sidecar serializes");
    fsio::atomic_write(&sidecar_path(csv_path), &json)
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}
