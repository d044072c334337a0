use std::io::Write;
use std::time::Instant;

use leakcheck_core::engine::{encode_topk_cache, naive, CacheContents};
use leakcheck_core::{fsio, EmbeddingSet, Engine, ScoredPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{engine, io_out};
use crate::args::{BenchArgs, BenchOp};
use crate::config::FileConfig;
use crate::exit::{CliError, CliResult};

/// Largest embedding set the bench allocates, in bytes.
const MAX_SET_BYTES: usize = 1 << 34;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub pairs: u64,
    pub blocked_secs: f64,
    pub naive_secs: Option<f64>,
    pub digest: String,
}

impl BenchOutcome {
    pub fn blocked_rate(&self) -> f64 {
        self.pairs as f64 / self.blocked_secs
    }

    pub fn naive_rate(&self) -> Option<f64> {
        self.naive_secs.map(|t| self.pairs as f64 / t)
    }

    pub fn speedup(&self) -> Option<f64> {
        self.naive_secs.map(|t| t / self.blocked_secs)
    }
}

fn seeded_set(id: &str, n: usize, dim: usize, seed: u64) -> CliResult<EmbeddingSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f32> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(EmbeddingSet::from_rows(id, dim, v)?.normalize()?)
}

fn set_bytes(n: usize, dim: usize) -> Option<usize> {
    n.checked_mul(dim)?.checked_mul(4).filter(|&b| b <= MAX_SET_BYTES)
}

/// Runs the blocked engine and, unless skipped, the naive reference on the
/// same seeded instance. Fails before reporting timings if they disagree.
pub fn run_bench(args: &BenchArgs, file: &FileConfig, engine_override: Option<Engine>) -> CliResult<BenchOutcome> {
    if args.synthetic_count == 0 || args.real_count == 0 || args.dim == 0 {
        return Err(CliError::Argument("counts and dim must be positive".into()));
    }
    if set_bytes(args.synthetic_count, args.dim).is_none() || set_bytes(args.real_count, args.dim).is_none() {
        return Err(CliError::Argument(format!(
            "instance too large: each set is limited to {MAX_SET_BYTES} bytes"
        )));
    }
    let pairs = (args.synthetic_count as u64)
        .checked_mul(args.real_count as u64)
        .ok_or_else(|| CliError::Argument("pair count overflows u64".into()))?;
    if args.op == BenchOp::TopK && args.k == 0 {
        return Err(CliError::Argument("--k must be positive".into()));
    }
    let engine = match engine_override {
        Some(e) => e,
        None => engine(&args.engine, file)?,
    };
    let synthetic = seeded_set("synthetic", args.synthetic_count, args.dim, args.seed)?;
    let real = seeded_set("real", args.real_count, args.dim, args.seed.wrapping_add(1))?;

    let start = Instant::now();
    let contents = match args.op {
        BenchOp::TopK => CacheContents::TopK(engine.top_k_pairs(&synthetic, &real, args.k)?),
        BenchOp::Nearest => CacheContents::Nearest(engine.nearest_matches(&synthetic, &real)?),
    };
    let blocked_secs = start.elapsed().as_secs_f64();

    let naive_secs = if args.skip_naive {
        None
    } else {
        let start = Instant::now();
        let equal = match &contents {
            CacheContents::TopK(r) => same_pairs(&r.pairs, &naive::top_k_pairs(&synthetic, &real, args.k)),
            CacheContents::Nearest(m) => {
                let reference = naive::nearest_matches(&synthetic, &real);
                m.matches.len() == reference.len()
                    && m.matches.iter().zip(&reference).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
            }
        };
        let t = start.elapsed().as_secs_f64();
        if !equal {
            return Err(CliError::Verification("blocked and naive results differ".into()));
        }
        Some(t)
    };
    Ok(BenchOutcome {
        pairs,
        blocked_secs,
        naive_secs,
        digest: fsio::sha256_hex(&encode_topk_cache(&contents)?),
    })
}

fn same_pairs(a: &[ScoredPair], b: &[ScoredPair]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.synth_index == y.synth_index && x.real_index == y.real_index && x.score.to_bits() == y.score.to_bits()
        })
}

pub fn cmd_bench(args: &BenchArgs, file: &FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let r = run_bench(args, file, None)?;
    (|| -> std::io::Result<()> {
        writeln!(
            out,
            "instance: {} x {} dim {} op {:?} k {} seed {}",
            args.synthetic_count, args.real_count, args.dim, args.op, args.k, args.seed
        )?;
        writeln!(out, "blocked: {:.3} s, {:.4e} pairs/s", r.blocked_secs, r.blocked_rate())?;
        if let (Some(t), Some(rate), Some(x)) = (r.naive_secs, r.naive_rate(), r.speedup()) {
            writeln!(out, "naive: {t:.3} s, {rate:.4e} pairs/s")?;
            writeln!(out, "results equal: yes")?;
            writeln!(out, "speedup: {x:.2}x")?;
        }
        writeln!(out, "digest: {}", r.digest)
    })()
    .map_err(io_out)
}
