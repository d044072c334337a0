//! Exact cross-dataset similarity search.
//!
//! Every synthetic row is compared with every real row. Scores are first
//! computed in the storage precision by a packed, register-blocked kernel;
//! any pair that could still belong to the answer under a rigorous rounding
//! bound is then rescored with a sequential 64-bit dot product, and the final
//! selection uses only those 64-bit scores. Results are therefore identical
//! to a naive double loop in 64-bit arithmetic, independent of tiling,
//! worker count or instruction set.
//!
//! Ties are broken by the total order (score descending, synthetic index
//! ascending, real index ascending).

mod io;
pub mod kernel;
pub mod naive;
mod search;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embedding::Embeddings;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use io::{
    encode_topk_cache, read_topk_cache, read_topk_jsonl, write_nearest_jsonl, write_topk_cache, write_topk_jsonl,
    CacheContents, TOPK_MAGIC,
};
pub use kernel::{dot_f64, Kernel, MatrixView, Packed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub synth_index: usize,
    pub real_index: usize,
    pub score: f64,
}

impl ScoredPair {
    pub fn new(synth_index: usize, real_index: usize, score: f64) -> Self {
        Self {
            synth_index,
            real_index,
            score,
        }
    }

    /// Rank order: `Less` means `self` comes first.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.synth_index.cmp(&other.synth_index))
            .then(self.real_index.cmp(&other.real_index))
    }
}

/// Whether a real image may appear in more than one selected pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupMode {
    #[default]
    AllPairs,
    UniqueReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PassStats {
    /// Pairs whose score was computed by the kernel.
    pub examined: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKResult {
    pub k: usize,
    pub mode: DedupMode,
    pub pairs: Vec<ScoredPair>,
    pub stats: PassStats,
}

/// Closest real row for each synthetic row.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestMatches {
    /// `(real_index, score)` per synthetic row.
    pub matches: Vec<(usize, f64)>,
    pub stats: PassStats,
}

impl NearestMatches {
    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.matches.iter().map(|m| m.1)
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }
}

/// Instruction set used by the tile kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelChoice {
    #[default]
    Auto,
    Portable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Query rows per tile (rounded up to whole kernel panels).
    pub query_tile: usize,
    /// Gallery rows per tile (rounded up to whole kernel panels).
    pub gallery_tile: usize,
    /// Gallery partitions processed concurrently.
    pub workers: usize,
    pub kernel: KernelChoice,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            query_tile: 256,
            gallery_tile: 4096,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            kernel: KernelChoice::Auto,
        }
    }
}

impl EngineConfig {
    pub fn with_tiles(mut self, query_tile: usize, gallery_tile: usize) -> Self {
        self.query_tile = query_tile;
        self.gallery_tile = gallery_tile;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.query_tile == 0 || self.gallery_tile == 0 || self.workers == 0 {
            return Err(Error::InvalidArgument(
                "tile sizes and worker count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn kernel<T: Scalar>(&self) -> Kernel<T> {
        match self.kernel {
            KernelChoice::Auto => Kernel::detect(),
            KernelChoice::Portable => Kernel::portable(),
        }
    }
}

/// Similarity engine with a fixed configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Engine {
    pub config: EngineConfig,
}

fn check_pair<T: Scalar>(a: &Embeddings<T>, b: &Embeddings<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    for s in [a, b] {
        if !s.is_normalized() {
            return Err(Error::UnnormalizedInput(s.dataset_id().to_owned()));
        }
        if s.count() > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "set {:?} has more than 2^32 rows",
                s.dataset_id()
            )));
        }
    }
    Ok(())
}

fn check_nonempty<T: Scalar>(s: &Embeddings<T>) -> Result<()> {
    if s.is_empty() {
        return Err(Error::EmptySet(s.dataset_id().to_owned()));
    }
    Ok(())
}

impl Engine {
    pub fn new(config: EngineConfig) -> Self {
        Self { config }
    }

    /// The `k` best pairs over the full cross product.
    ///
    /// `k` larger than the number of pairs returns every pair, sorted.
    pub fn top_k_pairs<T: Scalar>(
        &self,
        synthetic: &Embeddings<T>,
        real: &Embeddings<T>,
        k: usize,
    ) -> Result<TopKResult> {
        self.config.validate()?;
        check_pair(synthetic, real)?;
        check_nonempty(synthetic)?;
        check_nonempty(real)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let (pairs, stats) = search::top_k(&self.config, synthetic, real, k);
        Ok(TopKResult {
            k,
            mode: DedupMode::AllPairs,
            pairs,
            stats,
        })
    }

    /// Best real match per synthetic row, ties to the smallest real index.
    pub fn nearest_matches<T: Scalar>(
        &self,
        synthetic: &Embeddings<T>,
        real: &Embeddings<T>,
    ) -> Result<NearestMatches> {
        self.config.validate()?;
        check_pair(synthetic, real)?;
        check_nonempty(real)?;
        let (matches, stats) = search::nearest(&self.config, synthetic, real);
        Ok(NearestMatches { matches, stats })
    }

    /// Greedy walk of the global pair order keeping at most one pair per
    /// real row.
    ///
    /// The first pair of real row `j` in that order is its best synthetic
    /// match (smallest synthetic index on ties), so this equals the `k` best
    /// of the per-real-row maxima.
    pub fn unique_real_top_k<T: Scalar>(
        &self,
        synthetic: &Embeddings<T>,
        real: &Embeddings<T>,
        k: usize,
    ) -> Result<TopKResult> {
        self.config.validate()?;
        check_pair(synthetic, real)?;
        check_nonempty(synthetic)?;
        check_nonempty(real)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let (per_real, stats) = search::nearest(&self.config, real, synthetic);
        let mut pairs: Vec<ScoredPair> = per_real
            .into_iter()
            .enumerate()
            .map(|(j, (i, s))| ScoredPair::new(i, j, s))
            .collect();
        pairs.sort_unstable_by(ScoredPair::rank_cmp);
        pairs.truncate(k);
        Ok(TopKResult {
            k,
            mode: DedupMode::UniqueReal,
            pairs,
            stats,
        })
    }

    pub fn select<T: Scalar>(
        &self,
        mode: DedupMode,
        synthetic: &Embeddings<T>,
        real: &Embeddings<T>,
        k: usize,
    ) -> Result<TopKResult> {
        match mode {
            DedupMode::AllPairs => self.top_k_pairs(synthetic, real, k),
            DedupMode::UniqueReal => self.unique_real_top_k(synthetic, real, k),
        }
    }
}

pub fn top_k_pairs<T: Scalar>(
    synthetic: &Embeddings<T>,
    real: &Embeddings<T>,
    k: usize,
) -> Result<TopKResult> {
    Engine::default().top_k_pairs(synthetic, real, k)
}

pub fn nearest_matches<T: Scalar>(
    synthetic: &Embeddings<T>,
    real: &Embeddings<T>,
) -> Result<NearestMatches> {
    Engine::default().nearest_matches(synthetic, real)
}

pub fn unique_real_top_k<T: Scalar>(
    synthetic: &Embeddings<T>,
    real: &Embeddings<T>,
    k: usize,
) -> Result<TopKResult> {
    Engine::default().unique_real_top_k(synthetic, real, k)
}

/// Dot products of every query row against every gallery row, in the
/// storage precision, row-major `query.rows x gallery.rows`.
pub fn tile_pass<T: Scalar>(query: MatrixView<'_, T>, gallery: MatrixView<'_, T>) -> Result<Vec<T>> {
    if query.dim != gallery.dim {
        return Err(Error::DimMismatch {
            left: query.dim,
            right: gallery.dim,
        });
    }
    let kernel = Kernel::<T>::detect();
    let q = Packed::pack(query, kernel.mr);
    let g = Packed::pack(gallery, kernel.nr);
    let stride = g.panels() * kernel.nr;
    let mut buf = vec![T::zero(); q.panels() * kernel.mr * stride];
    kernel.run(&q, 0..q.panels(), &g, 0..g.panels(), &mut buf);
    let mut out = Vec::with_capacity(query.rows * gallery.rows);
    for r in 0..query.rows {
        out.extend_from_slice(&buf[r * stride..r * stride + gallery.rows]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::EmbeddingSet;

    fn set(id: &str, dim: usize, rows: &[&[f32]]) -> EmbeddingSet {
        let v: Vec<f32> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        EmbeddingSet::from_rows(id, dim, v).unwrap().normalize().unwrap()
    }

    const E1: &[f32] = &[1.0, 0.0, 0.0];
    const E2: &[f32] = &[0.0, 1.0, 0.0];
    const DIAG: &[f32] = &[1.0, 1.0, 0.0];

    fn triples(r: &TopKResult) -> Vec<(usize, usize, f64)> {
        r.pairs
            .iter()
            .map(|p| (p.synth_index, p.real_index, p.score))
            .collect()
    }

    #[test]
    fn top_k_orthonormal() {
        let r = top_k_pairs(&set("s", 3, &[E1]), &set("r", 3, &[E1, E2]), 2).unwrap();
        assert_eq!(triples(&r), vec![(0, 0, 1.0), (0, 1, 0.0)]);
        assert_eq!(r.stats.examined, 2);
    }

    #[test]
    fn top_k_tie_goes_to_lower_real_index() {
        let r = top_k_pairs(&set("s", 3, &[DIAG]), &set("r", 3, &[E1, E2]), 1).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!((r.pairs[0].synth_index, r.pairs[0].real_index), (0, 0));
        assert!((r.pairs[0].score - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn k_larger_than_pair_count_returns_everything() {
        let r = top_k_pairs(&set("s", 3, &[E1, E2]), &set("r", 3, &[E1, E2]), 10).unwrap();
        assert_eq!(r.pairs.len(), 4);
        assert_eq!(r.k, 10);
    }

    #[test]
    fn nearest_examples() {
        let real = set("r", 3, &[E1, E2]);
        let m = nearest_matches(&set("s", 3, &[E2]), &real).unwrap();
        assert_eq!(m.matches, vec![(1, 1.0)]);
        let m = nearest_matches(&set("s", 3, &[DIAG]), &real).unwrap();
        assert_eq!(m.matches[0].0, 0);
        assert!((m.matches[0].1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn unique_real_skips_repeated_real_rows() {
        let r = unique_real_top_k(&set("s", 3, &[E1, E1]), &set("r", 3, &[E1, E2]), 2).unwrap();
        // (1, 0) repeats real row 0; among the two 0.0 pairs for real row 1
        // the lower synthetic index wins.
        assert_eq!(triples(&r), vec![(0, 0, 1.0), (0, 1, 0.0)]);
        assert_eq!(r.mode, DedupMode::UniqueReal);
    }

    #[test]
    fn unique_real_k1_matches_top_k_head() {
        let s = set("s", 3, &[DIAG, E2, E1]);
        let r = set("r", 3, &[E2, DIAG, E1]);
        let a = unique_real_top_k(&s, &r, 1).unwrap();
        let b = top_k_pairs(&s, &r, 1).unwrap();
        assert_eq!(a.pairs, b.pairs);
    }

    #[test]
    fn input_errors() {
        let s = set("s", 3, &[E1]);
        let r2 = EmbeddingSet::from_rows("r2", 2, vec![1.0, 0.0]).unwrap().normalize().unwrap();
        assert!(matches!(top_k_pairs(&s, &r2, 1), Err(Error::DimMismatch { left: 3, right: 2 })));
        let raw = EmbeddingSet::from_rows("raw", 3, vec![2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(top_k_pairs(&s, &raw, 1), Err(Error::UnnormalizedInput(_))));
        let empty = EmbeddingSet::from_rows("e", 3, vec![]).unwrap().normalize().unwrap();
        assert!(matches!(top_k_pairs(&s, &empty, 1), Err(Error::EmptySet(_))));
        assert!(matches!(top_k_pairs(&empty, &s, 1), Err(Error::EmptySet(_))));
        assert!(matches!(nearest_matches(&s, &empty), Err(Error::EmptySet(_))));
        assert!(nearest_matches(&empty, &s).unwrap().is_empty());
        assert!(matches!(top_k_pairs(&s, &s, 0), Err(Error::InvalidArgument(_))));
        let bad = Engine::new(EngineConfig::default().with_workers(0));
        assert!(bad.top_k_pairs(&s, &s, 1).is_err());
    }

    #[test]
    fn tile_pass_unit_rows() {
        let a = [0.6f32, 0.8];
        let neg = [-0.6f32, -0.8];
        let same = tile_pass(MatrixView::new(&a, 2), MatrixView::new(&a, 2)).unwrap();
        assert!((same[0] - 1.0).abs() < 1e-5);
        let opp = tile_pass(MatrixView::new(&a, 2), MatrixView::new(&neg, 2)).unwrap();
        assert!((opp[0] + 1.0).abs() < 1e-5);
        assert!(matches!(
            tile_pass(MatrixView::new(&a, 2), MatrixView::new(&[1.0f32, 0.0, 0.0], 3)),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn portable_kernel_agrees() {
        let s = set("s", 3, &[DIAG, E2, E1]);
        let r = set("r", 3, &[E2, DIAG, E1]);
        let mut cfg = EngineConfig::default().with_tiles(1, 1);
        cfg.kernel = KernelChoice::Portable;
        let a = Engine::new(cfg).top_k_pairs(&s, &r, 9).unwrap();
        let b = top_k_pairs(&s, &r, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_order() {
        let a = ScoredPair::new(3, 1, 0.5);
        let b = ScoredPair::new(1, 2, 0.5);
        let c = ScoredPair::new(0, 0, 0.4);
        let mut v = vec![c, a, b];
        v.sort_by(ScoredPair::rank_cmp);
        assert_eq!(v, vec![b, a, c]);
    }
}
