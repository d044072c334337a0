//! Straightforward double-loop search in 64-bit arithmetic.
//!
//! This is the baseline the blocked engine is benchmarked and verified
//! against: every pair is scored with [`dot_f64`] and kept in a bounded
//! heap ordered by the rank order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::kernel::dot_f64;
use super::ScoredPair;
use crate::embedding::Embeddings;
use crate::scalar::Scalar;

struct Ranked(ScoredPair);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // Max-heap top is the worst-ranked kept pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

pub fn top_k_pairs<T: Scalar>(synthetic: &Embeddings<T>, real: &Embeddings<T>, k: usize) -> Vec<ScoredPair> {
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (i, a) in synthetic.rows().enumerate() {
        for (j, b) in real.rows().enumerate() {
            let p = ScoredPair::new(i, j, dot_f64(a, b));
            if heap.len() < k {
                heap.push(Ranked(p));
            } else if let Some(worst) = heap.peek() {
                if p.rank_cmp(&worst.0) == Ordering::Less {
                    heap.pop();
                    heap.push(Ranked(p));
                }
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
}

pub fn nearest_matches<T: Scalar>(synthetic: &Embeddings<T>, real: &Embeddings<T>) -> Vec<(usize, f64)> {
    synthetic
        .rows()
        .map(|a| {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for (j, b) in real.rows().enumerate() {
                let s = dot_f64(a, b);
                if s > best.1 {
                    best = (j, s);
                }
            }
            best
        })
        .collect()
}
