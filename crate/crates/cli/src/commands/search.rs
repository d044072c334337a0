use std::io::Write;

use leakcheck_core::audit::DEFAULT_K;
use leakcheck_core::embedding::read_embedding_set;
use leakcheck_core::engine::{encode_topk_cache, CacheContents};
use leakcheck_core::{fsio, EmbeddingSet, ScoredPair};

use super::{engine, fmt_scores, io_out, Staged};
use crate::args::{SearchArgs, SearchMode};
use crate::config::{pick, FileConfig};
use crate::exit::CliResult;

pub fn cmd_search(args: &SearchArgs, file: &FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let synthetic: EmbeddingSet = read_embedding_set(&args.synthetic)?;
    let real: EmbeddingSet = read_embedding_set(&args.real)?;
    let engine = engine(&args.engine, file)?;
    let k = pick(args.k, file.k, DEFAULT_K);

    let (pairs, cache, examined) = match args.mode {
        SearchMode::Nearest => {
            let m = engine.nearest_matches(&synthetic, &real)?;
            let pairs: Vec<ScoredPair> =
                m.matches.iter().enumerate().map(|(i, &(j, s))| ScoredPair::new(i, j, s)).collect();
            let examined = m.stats.examined;
            (pairs, CacheContents::Nearest(m), examined)
        }
        SearchMode::All | SearchMode::Unique => {
            let mode = if args.mode == SearchMode::All {
                leakcheck_core::DedupMode::AllPairs
            } else {
                leakcheck_core::DedupMode::UniqueReal
            };
            let r = engine.select(mode, &synthetic, &real, k)?;
            let examined = r.stats.examined;
            (r.pairs.clone(), CacheContents::TopK(r), examined)
        }
    };

    let mut staged = Staged::new();
    staged.add(&args.out, &fsio::to_jsonl(&pairs))?;
    if let Some(path) = &args.cache {
        staged.add(path, &encode_topk_cache(&cache)?)?;
    }
    staged.commit()?;
    writeln!(out, "pairs examined: {examined}").map_err(io_out)?;
    writeln!(out, "wrote {} results to {}", pairs.len(), args.out.display()).map_err(io_out)?;
    writeln!(out, "top scores: {}", fmt_scores(pairs.iter().take(5).map(|p| p.score))).map_err(io_out)
}
