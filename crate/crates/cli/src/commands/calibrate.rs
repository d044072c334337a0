use std::io::Write;

use leakcheck_core::audit::DEFAULT_TARGET_FAR;
use leakcheck_core::calibration::{
    build_histogram, far_threshold, load_benchmark_scores, sidecar_path, HistogramSidecar,
};
use leakcheck_core::engine::read_topk_jsonl;
use leakcheck_core::{fsio, FarThreshold};

use super::{io_out, Staged};
use crate::args::{CalibrateArgs, HistArgs, ScoreSelection};
use crate::config::{pick, FileConfig};
use crate::exit::{CliError, CliResult};

pub const DEFAULT_HIST_LO: f64 = -1.0;
pub const DEFAULT_HIST_HI: f64 = 1.0;
pub const DEFAULT_HIST_BINS: usize = 100;

pub fn cmd_calibrate(args: &CalibrateArgs, file: &FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let scores = load_benchmark_scores(&args.scores)?;
    let far = pick(args.far, file.target_far, DEFAULT_TARGET_FAR);
    let t = far_threshold(&scores, far)?;
    if let Some(path) = &args.out {
        fsio::atomic_write(path, &serde_json::to_vec_pretty(&t).expect("threshold serializes"))?;
    }
    print_threshold(&t, out).map_err(io_out)
}

fn print_threshold(t: &FarThreshold, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "target FAR: {}", t.target_far)?;
    writeln!(out, "threshold: {}", t.threshold)?;
    writeln!(out, "achieved FAR: {} ({} of {} impostors above)", t.achieved_far, t.false_accepts, t.impostor_count)
}

pub fn cmd_hist(args: &HistArgs, file: &FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let ext = args.input.extension().and_then(|e| e.to_str()).unwrap_or("");
    let scores: Vec<f64> = match ext {
        "jsonl" => read_topk_jsonl(&args.input)?.into_iter().map(|p| p.score).collect(),
        "csv" => {
            let b = load_benchmark_scores(&args.input)?;
            match args.select {
                ScoreSelection::All => b.genuine.into_iter().chain(b.impostor).collect(),
                ScoreSelection::Genuine => b.genuine,
                ScoreSelection::Impostor => b.impostor,
            }
        }
        _ => {
            return Err(CliError::Argument(format!(
                "--input must be a .jsonl search result or a .csv score file, got {}",
                args.input.display()
            )))
        }
    };
    let lo = pick(args.lo, file.hist_lo, DEFAULT_HIST_LO);
    let hi = pick(args.hi, file.hist_hi, DEFAULT_HIST_HI);
    let bins = pick(args.bins, file.hist_bins, DEFAULT_HIST_BINS);
    let h = build_histogram(&scores, lo, hi, bins)?;
    let threshold = match &args.benchmark {
        Some(p) => Some(far_threshold(
            &load_benchmark_scores(p)?,
            pick(args.far, file.target_far, DEFAULT_TARGET_FAR),
        )?),
        None => None,
    };
    let sidecar = HistogramSidecar::new(&h, threshold, Vec::new());
    let mut staged = Staged::new();
    staged.add(&args.out, h.to_csv().as_bytes())?;
    staged.add(&sidecar_path(&args.out), &serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes"))?;
    staged.commit()?;
    writeln!(
        out,
        "{} scores in {} bins over [{lo}, {hi}] ({} below, {} above) -> {}",
        h.total(),
        bins,
        h.underflow,
        h.overflow,
        args.out.display()
    )
    .map_err(io_out)
}
