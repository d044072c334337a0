use std::collections::BTreeMap;
use std::io::Write;

use leakcheck_core::audit::{
    finalize_report, read_label_log, read_queue, run_audit, AuditInputs, DEFAULT_K, DEFAULT_TARGET_FAR,
};
use leakcheck_core::calibration::load_benchmark_scores;
use leakcheck_core::embedding::{manifest_path_for, read_embedding_set};
use leakcheck_core::{fsio, AuditConfig, AuditReport, EmbeddingSet, Error as CoreError, Registry};

use super::calibrate::{DEFAULT_HIST_BINS, DEFAULT_HIST_HI, DEFAULT_HIST_LO};
use super::{engine, file_digest, fmt_scores, io_out, Staged};
use crate::args::{AuditArgs, ReportArgs};
use crate::config::{pick, FileConfig};
use crate::exit::CliResult;

/// Files written by `audit` into its output directory.
pub const AUDIT_FILES: [&str; 4] = ["report.json", "queue.jsonl", "histogram.csv", "histogram.json"];

pub fn cmd_audit(args: &AuditArgs, file: &FileConfig, out: &mut dyn Write) -> CliResult<()> {
    // every input is loaded before anything is written
    let registry = Registry::load(&args.registry)?;
    let synthetic: EmbeddingSet = read_embedding_set(&args.synthetic)?;
    let real: EmbeddingSet = read_embedding_set(&args.real)?;
    let benchmark = load_benchmark_scores(&args.benchmark)?;
    let synthetic_id = args.synthetic_id.clone().unwrap_or_else(|| synthetic.dataset_id().to_owned());
    let real_id = args.real_id.clone().unwrap_or_else(|| real.dataset_id().to_owned());
    let synthetic = synthetic.with_dataset_id(synthetic_id.clone());
    let real = real.with_dataset_id(real_id.clone());

    let mut digests = BTreeMap::new();
    digests.insert("registry".to_owned(), file_digest(&args.registry)?);
    digests.insert("synthetic".to_owned(), file_digest(&args.synthetic)?);
    digests.insert("synthetic_manifest".to_owned(), file_digest(&manifest_path_for(&args.synthetic))?);
    digests.insert("real".to_owned(), file_digest(&args.real)?);
    digests.insert("real_manifest".to_owned(), file_digest(&manifest_path_for(&args.real))?);
    digests.insert("benchmark".to_owned(), file_digest(&args.benchmark)?);

    let mut config = AuditConfig::new(synthetic_id, real_id);
    config.k = pick(args.k, file.k, DEFAULT_K);
    config.target_far = pick(args.far, file.target_far, DEFAULT_TARGET_FAR);
    config.dedup_mode = pick(args.dedup.map(Into::into), file.dedup_mode, config.dedup_mode);
    config.hist_lo = pick(args.hist_lo, file.hist_lo, DEFAULT_HIST_LO);
    config.hist_hi = pick(args.hist_hi, file.hist_hi, DEFAULT_HIST_HI);
    config.hist_bins = pick(args.hist_bins, file.hist_bins, DEFAULT_HIST_BINS);
    config.required_reviewers = pick(args.required_reviewers, file.required_reviewers, config.required_reviewers);

    let inputs = AuditInputs {
        registry: &registry,
        synthetic: &synthetic,
        real: &real,
        benchmark: Some(&benchmark),
        input_digests: digests,
    };
    let mut outcome = run_audit(&config, &inputs, &engine(&args.engine, file)?)?;
    outcome.report.histogram.file = Some(AUDIT_FILES[2].to_owned());

    std::fs::create_dir_all(&args.out_dir).map_err(|e| CoreError::io(&args.out_dir, e))?;
    let path = |n: usize| args.out_dir.join(AUDIT_FILES[n]);
    let mut staged = Staged::new();
    staged.add(&path(0), outcome.report.to_json().as_bytes())?;
    staged.add(&path(1), &fsio::to_jsonl(&outcome.queue))?;
    staged.add(&path(2), outcome.histogram.to_csv().as_bytes())?;
    staged.add(&path(3), &serde_json::to_vec_pretty(&outcome.sidecar).expect("sidecar serializes"))?;
    staged.commit()?;

    let r = &outcome.report;
    let top5 = outcome.queue.iter().take(5).map(|q| q.score);
    (|| -> std::io::Result<()> {
        writeln!(out, "synthetic: {} rows ({})", r.synthetic_count, r.config.synthetic_id)?;
        writeln!(out, "real: {} rows ({})", r.real_count, r.config.real_id)?;
        writeln!(out, "dim: {}", r.dim)?;
        writeln!(out, "pairs examined: {}", r.pairs_examined)?;
        writeln!(
            out,
            "threshold: {} at target FAR {} (achieved {}, {} impostors)",
            r.far_threshold.threshold, r.far_threshold.target_far, r.far_threshold.achieved_far, r.far_threshold.impostor_count
        )?;
        writeln!(out, "above-threshold fraction: {}", r.above_threshold_fraction)?;
        writeln!(out, "queue: {} pairs, {} above threshold", r.queue_len, r.queue_above_threshold)?;
        writeln!(out, "top-5 scores: {}", fmt_scores(top5))?;
        writeln!(out, "report: {}", path(0).display())
    })()
    .map_err(io_out)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut report = AuditReport::read(&args.report)?;
    let queue = read_queue(&args.queue)?;
    let labels = read_label_log(&args.labels)?;
    if let Some(n) = args.required_reviewers {
        report.config.required_reviewers = n;
        report.config.validate()?;
    }
    let final_report = finalize_report(&report, &queue, &labels)?;
    final_report.write(&args.out)?;
    let rv = &final_report.review;
    (|| -> std::io::Result<()> {
        writeln!(out, "records: {} ({} superseded)", rv.records, rv.superseded_records.len())?;
        let tallies: Vec<String> = rv.tallies.iter().map(|(l, n)| format!("{l}={n}")).collect();
        writeln!(out, "tallies: {}", tallies.join(" "))?;
        writeln!(out, "reviewed pairs: {} of {}", rv.reviewed_pairs, queue.len())?;
        writeln!(
            out,
            "consensus leaked: {} (required reviewers {})",
            rv.consensus_leaked_count, rv.required_reviewers
        )?;
        writeln!(out, "report: {}", args.out.display())
    })()
    .map_err(io_out)
}
