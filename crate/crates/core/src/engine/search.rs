//! Tiled, partitioned driver and the candidate collectors fed by it.

use std::ops::Range;

use super::kernel::{dot_f64, Kernel, MatrixView, Packed};
use super::{EngineConfig, PassStats, ScoredPair};
use crate::embedding::Embeddings;
use crate::scalar::{dot_error_bound, Scalar};

/// One computed tile: `rows x cols` valid scores with row stride `stride`.
struct Block<'a, T> {
    data: &'a [T],
    stride: usize,
    q0: usize,
    g0: usize,
    rows: usize,
    cols: usize,
}

impl<T> Block<'_, T> {
    #[inline]
    fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.stride..r * self.stride + self.cols]
    }
}

trait Sink<T> {
    type Output;
    fn consume(&mut self, block: &Block<'_, T>);
    fn finish(self) -> Self::Output;
}

/// Bound on |fast score - 64-bit reference score| for any pair of rows of
/// the two sets. Doubled for slack.
fn score_slack<T: Scalar>(a: &Embeddings<T>, b: &Embeddings<T>) -> f64 {
    2.0 * dot_error_bound::<T>(a.dim(), a.max_row_norm() * b.max_row_norm())
}

fn partitions(rows: usize, workers: usize) -> Vec<Range<usize>> {
    let chunk = rows.div_ceil(workers.max(1)).max(1);
    (0..rows)
        .step_by(chunk)
        .map(|lo| lo..(lo + chunk).min(rows))
        .collect()
}

/// Runs the kernel over `queries x gallery[range]`, feeding every tile to
/// `sink`. Returns the sink output and the number of pairs examined.
fn scan_partition<T: Scalar, S: Sink<T>>(
    cfg: &EngineConfig,
    kernel: &Kernel<T>,
    qpack: &Packed<T>,
    gallery: &Embeddings<T>,
    range: Range<usize>,
    mut sink: S,
) -> (S::Output, u64) {
    let dim = gallery.dim();
    let view = MatrixView::new(&gallery.as_slice()[range.start * dim..range.end * dim], dim);
    let gpack = Packed::pack(view, kernel.nr);
    let q_step = cfg.query_tile.div_ceil(kernel.mr);
    let g_step = cfg.gallery_tile.div_ceil(kernel.nr);
    let q_panels = qpack.panels();
    let g_panels = gpack.panels();
    let mut buf = vec![T::zero(); q_step.min(q_panels) * kernel.mr * g_step.min(g_panels) * kernel.nr];
    let mut examined = 0u64;
    for qt in (0..q_panels).step_by(q_step) {
        let qp = qt..(qt + q_step).min(q_panels);
        for gt in (0..g_panels).step_by(g_step) {
            let gp = gt..(gt + g_step).min(g_panels);
            kernel.run(qpack, qp.clone(), &gpack, gp.clone(), &mut buf);
            let q0 = qt * kernel.mr;
            let g0 = gt * kernel.nr;
            let block = Block {
                data: &buf,
                stride: gp.len() * kernel.nr,
                q0,
                g0: range.start + g0,
                rows: (qp.len() * kernel.mr).min(qpack.rows - q0),
                cols: (gp.len() * kernel.nr).min(view.rows - g0),
            };
            examined += (block.rows * block.cols) as u64;
            sink.consume(&block);
        }
    }
    (sink.finish(), examined)
}

/// Partitions the gallery across workers and runs one sink per partition.
fn run_partitioned<T, S, F>(
    cfg: &EngineConfig,
    queries: &Embeddings<T>,
    gallery: &Embeddings<T>,
    make_sink: F,
) -> (Vec<S::Output>, PassStats)
where
    T: Scalar,
    S: Sink<T>,
    S::Output: Send,
    F: Fn() -> S + Sync,
{
    let kernel = cfg.kernel::<T>();
    let qpack = Packed::pack(MatrixView::new(queries.as_slice(), queries.dim()), kernel.mr);
    let parts = partitions(gallery.count(), cfg.workers);
    let results: Vec<(S::Output, u64)> = if parts.len() <= 1 {
        parts
            .into_iter()
            .map(|r| scan_partition(cfg, &kernel, &qpack, gallery, r, make_sink()))
            .collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = parts
                .into_iter()
                .map(|r| {
                    let (kernel, qpack, make_sink) = (&kernel, &qpack, &make_sink);
                    scope.spawn(move || scan_partition(cfg, kernel, qpack, gallery, r, make_sink()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("search worker panicked"))
                .collect()
        })
    };
    let examined = results.iter().map(|r| r.1).sum();
    (results.into_iter().map(|r| r.0).collect(), PassStats { examined })
}

#[derive(Clone, Copy)]
struct Candidate<T> {
    score: T,
    q: u32,
    g: u32,
}

/// Keeps every pair whose fast score is within `2 * slack` of the running
/// k-th best fast score; nothing it drops can be in the exact top k.
struct TopKSink<'a, T> {
    k: usize,
    slack: f64,
    queries: &'a Embeddings<T>,
    gallery: &'a Embeddings<T>,
    floor: f64,
    cap: usize,
    base_cap: usize,
    cands: Vec<Candidate<T>>,
}

impl<'a, T: Scalar> TopKSink<'a, T> {
    fn new(k: usize, slack: f64, queries: &'a Embeddings<T>, gallery: &'a Embeddings<T>) -> Self {
        let base_cap = k.saturating_mul(2).max(k + 4096);
        Self {
            k,
            slack,
            queries,
            gallery,
            floor: f64::NEG_INFINITY,
            cap: base_cap,
            base_cap,
            cands: Vec::new(),
        }
    }

    fn compact(&mut self) {
        if self.cands.len() > self.k {
            let by_score_desc =
                |a: &Candidate<T>, b: &Candidate<T>| b.score.partial_cmp(&a.score).unwrap();
            self.cands.select_nth_unstable_by(self.k - 1, by_score_desc);
            let kth = self.cands[self.k - 1].score.to_f64_lossless();
            let floor = kth - 2.0 * self.slack;
            if floor > self.floor {
                self.floor = floor;
            }
            let floor = self.floor;
            self.cands.retain(|c| c.score.to_f64_lossless() >= floor);
        }
        self.cap = self.base_cap.max(self.cands.len().saturating_mul(2));
    }
}

impl<T: Scalar> Sink<T> for TopKSink<'_, T> {
    type Output = Vec<ScoredPair>;

    fn consume(&mut self, block: &Block<'_, T>) {
        for r in 0..block.rows {
            let floor = self.floor;
            let q = (block.q0 + r) as u32;
            for (c, &v) in block.row(r).iter().enumerate() {
                if v.to_f64_lossless() >= floor {
                    self.cands.push(Candidate {
                        score: v,
                        q,
                        g: (block.g0 + c) as u32,
                    });
                }
            }
            if self.cands.len() >= self.cap {
                self.compact();
            }
        }
    }

    fn finish(mut self) -> Vec<ScoredPair> {
        self.compact();
        let mut pairs: Vec<ScoredPair> = self
            .cands
            .iter()
            .map(|c| {
                let (i, j) = (c.q as usize, c.g as usize);
                ScoredPair::new(i, j, dot_f64(self.queries.row(i), self.gallery.row(j)))
            })
            .collect();
        pairs.sort_unstable_by(ScoredPair::rank_cmp);
        pairs.truncate(self.k);
        pairs
    }
}

/// Per query row: the best fast score seen and every gallery column within
/// `2 * slack` of it.
struct NearestSink<'a, T> {
    slack: f64,
    queries: &'a Embeddings<T>,
    gallery: &'a Embeddings<T>,
    best: Vec<f64>,
    cands: Vec<Vec<(u32, T)>>,
}

impl<T: Scalar> Sink<T> for NearestSink<'_, T> {
    type Output = Vec<(usize, f64)>;

    fn consume(&mut self, block: &Block<'_, T>) {
        let window = 2.0 * self.slack;
        for r in 0..block.rows {
            let i = block.q0 + r;
            let row = block.row(r);
            let m = row
                .iter()
                .fold(T::neg_infinity(), |a, &b| if b > a { b } else { a })
                .to_f64_lossless();
            if m > self.best[i] {
                self.best[i] = m;
                let lo = m - window;
                self.cands[i].retain(|c| c.1.to_f64_lossless() >= lo);
            }
            let lo = self.best[i] - window;
            if m < lo {
                continue;
            }
            for (c, &v) in row.iter().enumerate() {
                if v.to_f64_lossless() >= lo {
                    self.cands[i].push(((block.g0 + c) as u32, v));
                }
            }
        }
    }

    fn finish(self) -> Vec<(usize, f64)> {
        self.cands
            .iter()
            .enumerate()
            .map(|(i, cs)| {
                let q = self.queries.row(i);
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for &(j, _) in cs {
                    let j = j as usize;
                    let s = dot_f64(q, self.gallery.row(j));
                    if s > best.1 || (s == best.1 && j < best.0) {
                        best = (j, s);
                    }
                }
                best
            })
            .collect()
    }
}

pub(super) fn top_k<T: Scalar>(
    cfg: &EngineConfig,
    queries: &Embeddings<T>,
    gallery: &Embeddings<T>,
    k: usize,
) -> (Vec<ScoredPair>, PassStats) {
    let slack = score_slack(queries, gallery);
    let (parts, stats) = run_partitioned(cfg, queries, gallery, || {
        TopKSink::new(k, slack, queries, gallery)
    });
    let mut pairs: Vec<ScoredPair> = parts.into_iter().flatten().collect();
    pairs.sort_unstable_by(ScoredPair::rank_cmp);
    pairs.truncate(k);
    (pairs, stats)
}

pub(super) fn nearest<T: Scalar>(
    cfg: &EngineConfig,
    queries: &Embeddings<T>,
    gallery: &Embeddings<T>,
) -> (Vec<(usize, f64)>, PassStats) {
    let slack = score_slack(queries, gallery);
    let n = queries.count();
    let (parts, stats) = run_partitioned(cfg, queries, gallery, || NearestSink {
        slack,
        queries,
        gallery,
        best: vec![f64::NEG_INFINITY; n],
        cands: vec![Vec::new(); n],
    });
    let mut merged = vec![(usize::MAX, f64::NEG_INFINITY); n];
    for part in parts {
        for (m, p) in merged.iter_mut().zip(part) {
            if p.1 > m.1 || (p.1 == m.1 && p.0 < m.0) {
                *m = p;
            }
        }
    }
    (merged, stats)
}
