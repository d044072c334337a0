//! Independent reference implementations and seeded fixtures.
//!
//! Nothing here calls into the engine: the oracles score every pair with
//! their own 64-bit loop and sort the full pair list.

use std::path::{Path, PathBuf};

use leakcheck_core::calibration::write_benchmark_scores;
use leakcheck_core::embedding::write_embedding_set;
use leakcheck_core::audit::{run_audit, AuditInputs, AuditOutcome};
use leakcheck_core::embedding::{DatasetKind, DatasetRegistryEntry, Registry};
use leakcheck_core::{AuditConfig, BenchmarkScores, EmbeddingSet, Engine, ScoredPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` Gaussian rows of dimension `dim`, normalized.
pub fn random_unit_set(id: &str, n: usize, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = rng(seed);
    let v: Vec<f32> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    EmbeddingSet::from_rows(id, dim, v)
        .unwrap()
        .normalize()
        .unwrap()
}

/// Rows drawn from a tiny alphabet with repeats, so that exact score ties
/// are common.
pub fn tie_heavy_set(id: &str, n: usize, dim: usize, seed: u64) -> EmbeddingSet {
    let mut rng = rng(seed);
    let distinct = (n / 3).max(1);
    let proto: Vec<Vec<f32>> = (0..distinct)
        .map(|_| {
            let mut row: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1i32..=1) as f32).collect();
            if row.iter().all(|&x| x == 0.0) {
                row[0] = 1.0;
            }
            row
        })
        .collect();
    let v: Vec<f32> = (0..n)
        .flat_map(|_| proto[rng.gen_range(0..distinct)].clone())
        .collect();
    EmbeddingSet::from_rows(id, dim, v)
        .unwrap()
        .normalize()
        .unwrap()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        acc += f64::from(a[i]) * f64::from(b[i]);
    }
    acc
}

fn rank(a: &ScoredPair, b: &ScoredPair) -> std::cmp::Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap()
        .then(a.synth_index.cmp(&b.synth_index))
        .then(a.real_index.cmp(&b.real_index))
}

/// Every pair, sorted by (score desc, synth asc, real asc).
pub fn all_pairs_sorted(synthetic: &EmbeddingSet, real: &EmbeddingSet) -> Vec<ScoredPair> {
    let mut out = Vec::with_capacity(synthetic.count() * real.count());
    for i in 0..synthetic.count() {
        for j in 0..real.count() {
            out.push(ScoredPair {
                synth_index: i,
                real_index: j,
                score: dot(synthetic.row(i), real.row(j)),
            });
        }
    }
    out.sort_by(rank);
    out
}

pub fn oracle_top_k(sorted: &[ScoredPair], k: usize) -> Vec<ScoredPair> {
    sorted[..k.min(sorted.len())].to_vec()
}

/// Greedy filter over the sorted list: first occurrence of each real row.
pub fn oracle_unique_real(sorted: &[ScoredPair], k: usize) -> Vec<ScoredPair> {
    let mut seen = std::collections::HashSet::new();
    sorted
        .iter()
        .filter(|p| seen.insert(p.real_index))
        .take(k)
        .copied()
        .collect()
}

pub fn oracle_nearest(synthetic: &EmbeddingSet, real: &EmbeddingSet) -> Vec<(usize, f64)> {
    (0..synthetic.count())
        .map(|i| {
            let mut best_j = 0;
            let mut best = dot(synthetic.row(i), real.row(0));
            for j in 1..real.count() {
                let s = dot(synthetic.row(i), real.row(j));
                if s > best {
                    best = s;
                    best_j = j;
                }
            }
            (best_j, best)
        })
        .collect()
}

/// Cosine scores of independent random unit-vector pairs.
pub fn random_impostor_scores(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let mut a = vec![0f64; dim];
    let mut b = vec![0f64; dim];
    (0..n)
        .map(|_| {
            for x in a.iter_mut().chain(b.iter_mut()) {
                *x = StandardNormal.sample(&mut rng);
            }
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
        })
        .collect()
}

/// Gallery plus a synthetic set whose last `planted` rows are noisy copies
/// of gallery rows.
pub struct PlantedLeak {
    pub gallery: EmbeddingSet,
    pub synthetic: EmbeddingSet,
    /// `(synthetic row, gallery row)` of each planted copy.
    pub planted: Vec<(usize, usize)>,
}

pub fn planted_leak(
    gallery_n: usize,
    background_n: usize,
    planted: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> PlantedLeak {
    let gallery = random_unit_set("real", gallery_n, dim, seed);
    let background = random_unit_set("synthetic", background_n, dim, seed + 1);
    let mut rng = rng(seed + 2);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut v = background.as_slice().to_vec();
    let mut pairs = Vec::with_capacity(planted);
    for p in 0..planted {
        let g = rng.gen_range(0..gallery_n);
        v.extend(
            gallery
                .row(g)
                .iter()
                .map(|&x| (f64::from(x) + noise.sample(&mut rng)) as f32),
        );
        pairs.push((background_n + p, g));
    }
    let synthetic = EmbeddingSet::from_rows("synthetic", dim, v)
        .unwrap()
        .normalize()
        .unwrap();
    PlantedLeak {
        gallery: gallery.with_dataset_id("real"),
        synthetic,
        planted: pairs,
    }
}

/// Registry with a `real` set and a `synthetic` set trained on it.
pub fn leak_registry() -> Registry {
    Registry::new(vec![
        DatasetRegistryEntry {
            dataset_id: "real".into(),
            kind: DatasetKind::Real,
            generator_name: None,
            training_dataset_id: None,
            image_root: None,
        },
        DatasetRegistryEntry {
            dataset_id: "synthetic".into(),
            kind: DatasetKind::Synthetic,
            generator_name: Some("fixture".into()),
            training_dataset_id: Some("real".into()),
            image_root: None,
        },
    ])
    .expect("fixture registry is valid")
}

/// Small audit over a planted-leak fixture with a fixed creation time, so
/// serialized reports are reproducible.
pub fn fixture_audit(k: usize) -> AuditOutcome {
    let leak = planted_leak(300, 60, 4, 16, 0.05, 11);
    let bench = BenchmarkScores::from_impostor("impostors", random_impostor_scores(2000, 16, 12));
    let registry = leak_registry();
    let inputs = AuditInputs {
        registry: &registry,
        synthetic: &leak.synthetic,
        real: &leak.gallery,
        benchmark: Some(&bench),
        input_digests: Default::default(),
    };
    let mut config = AuditConfig::new("synthetic", "real");
    config.k = k;
    let mut out = run_audit(&config, &inputs, &Engine::default()).expect("fixture audit runs");
    out.report.created_at = chrono::DateTime::from_timestamp(1_700_000_000, 0).expect("valid instant");
    out
}

/// On-disk inputs of an audit run.
pub struct AuditFiles {
    pub registry: PathBuf,
    pub synthetic: PathBuf,
    pub real: PathBuf,
    pub benchmark: PathBuf,
}

/// Writes `synthetic.embs`, `real.embs`, `registry.json` and
/// `benchmark.csv` into `dir`.
pub fn write_audit_files(dir: &Path, leak: &PlantedLeak, impostors: Vec<f64>) -> AuditFiles {
    let files = AuditFiles {
        registry: dir.join("registry.json"),
        synthetic: dir.join("synthetic.embs"),
        real: dir.join("real.embs"),
        benchmark: dir.join("benchmark.csv"),
    };
    write_embedding_set(&leak.synthetic, &files.synthetic).expect("write synthetic");
    write_embedding_set(&leak.gallery, &files.real).expect("write real");
    std::fs::write(&files.registry, serde_json::to_vec_pretty(&leak_registry()).expect("registry json"))
        .expect("write registry");
    write_benchmark_scores(&BenchmarkScores::from_impostor("benchmark", impostors), &files.benchmark)
        .expect("write benchmark");
    files
}
