//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leakcheck_core::DedupMode;

#[derive(Debug, Parser)]
#[command(name = "leakcheck", version, about = "Audit synthetic face datasets for leaked training identities")]
pub struct Cli {
    /// TOML file supplying defaults for flags; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert CSV embeddings plus a manifest into the binary format
    Ingest(IngestArgs),
    /// Compute embeddings for a list of images with an external command or the toy extractor
    Extract(ExtractArgs),
    /// Exhaustive similarity search between a synthetic and a real set
    Search(SearchArgs),
    /// Derive a similarity threshold at a target false accept rate
    Calibrate(CalibrateArgs),
    /// Export a plot-ready score histogram
    Hist(HistArgs),
    /// Run the full audit and write report, review queue and histogram
    Audit(AuditArgs),
    /// Serve the review queue over HTTP
    Serve(ServeArgs),
    /// Fold a label log into a finalized report
    Report(ReportArgs),
    /// Time the blocked engine against the naive reference
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct EngineArgs {
    /// Worker threads [default: machine parallelism]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Query rows per tile
    #[arg(long)]
    pub query_tile: Option<usize>,
    /// Gallery rows per tile
    #[arg(long)]
    pub gallery_tile: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Headerless CSV, one embedding per row
    #[arg(long)]
    pub csv: PathBuf,
    /// JSON-lines manifest with one record per row
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output embedding file (.embs); its stem becomes the dataset id
    #[arg(long)]
    pub out: PathBuf,
    /// Store rows as given instead of unit-normalizing them
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Text file listing one image path per line
    #[arg(long)]
    pub images: PathBuf,
    /// Output embedding file (.embs)
    #[arg(long)]
    pub out: PathBuf,
    /// Extractor invoked as `<command> <image-list> <output.embs>`
    #[arg(long, conflicts_with = "toy", required_unless_present = "toy")]
    pub command: Option<String>,
    /// Use the deterministic byte-histogram projection instead of a model
    #[arg(long)]
    pub toy: bool,
    /// Toy extractor dimension
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    /// Toy extractor projection seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMode {
    /// k best pairs over all synthetic x real pairs
    All,
    /// k best pairs with each real row used at most once
    Unique,
    /// best real match for every synthetic row
    Nearest,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long)]
    pub real: PathBuf,
    /// Pairs to keep [default: 1500]
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = SearchMode::All)]
    pub mode: SearchMode,
    /// JSON-lines output, one pair per line
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the binary result cache
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Benchmark score CSV with `label,score` rows
    #[arg(long)]
    pub scores: PathBuf,
    /// Target false accept rate [default: 0.0001]
    #[arg(long)]
    pub far: Option<f64>,
    /// Write the threshold as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreSelection {
    All,
    Genuine,
    Impostor,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Scores: search output (.jsonl) or benchmark CSV (.csv)
    #[arg(long)]
    pub input: PathBuf,
    /// Which benchmark rows to use when the input is CSV
    #[arg(long, value_enum, default_value_t = ScoreSelection::All)]
    pub select: ScoreSelection,
    /// Lower edge [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Upper edge [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    /// Bin count [default: 100]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Benchmark CSV used to add a threshold marker to the sidecar
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Target FAR of that marker [default: 0.0001]
    #[arg(long)]
    pub far: Option<f64>,
    /// CSV output; the JSON sidecar goes next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DedupArg {
    AllPairs,
    UniqueReal,
}

impl From<DedupArg> for DedupMode {
    fn from(d: DedupArg) -> Self {
        match d {
            DedupArg::AllPairs => DedupMode::AllPairs,
            DedupArg::UniqueReal => DedupMode::UniqueReal,
        }
    }
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Dataset registry JSON
    #[arg(long)]
    pub registry: PathBuf,
    /// Synthetic embedding file
    #[arg(long)]
    pub synthetic: PathBuf,
    /// Real (training) embedding file
    #[arg(long)]
    pub real: PathBuf,
    /// Benchmark score CSV used for the FAR threshold
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Registry id of the synthetic set [default: file stem]
    #[arg(long)]
    pub synthetic_id: Option<String>,
    /// Registry id of the real set [default: file stem]
    #[arg(long)]
    pub real_id: Option<String>,
    /// Directory receiving report.json, queue.jsonl, histogram.csv and histogram.json
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Review queue length [default: 1500]
    #[arg(long)]
    pub k: Option<usize>,
    /// Target false accept rate [default: 0.0001]
    #[arg(long)]
    pub far: Option<f64>,
    /// Pair selection [default: all-pairs]
    #[arg(long, value_enum)]
    pub dedup: Option<DedupArg>,
    /// Histogram lower edge [default: -1]
    #[arg(long, allow_hyphen_values = true)]
    pub hist_lo: Option<f64>,
    /// Histogram upper edge [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    pub hist_hi: Option<f64>,
    /// Histogram bins [default: 100]
    #[arg(long)]
    pub hist_bins: Option<usize>,
    /// Reviewers needed for a consensus verdict [default: 1]
    #[arg(long)]
    pub required_reviewers: Option<usize>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub queue: PathBuf,
    /// Label log, created if absent
    #[arg(long)]
    pub labels: PathBuf,
    /// Dataset registry JSON declaring image roots
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Image data root [default: $LEAKCHECK_DATA_ROOT]
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// Static UI bundle served at /
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    /// Listen address [default: 127.0.0.1:8080]
    #[arg(long)]
    pub listen: Option<String>,
    /// Server worker threads [default: machine parallelism]
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub queue: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Override the reviewer count recorded in the report
    #[arg(long)]
    pub required_reviewers: Option<usize>,
    /// Finalized report output
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchOp {
    TopK,
    Nearest,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    pub synthetic_count: usize,
    #[arg(long, default_value_t = 10_000)]
    pub real_count: usize,
    #[arg(long, default_value_t = 512)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = BenchOp::TopK)]
    pub op: BenchOp,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Time only the blocked engine
    #[arg(long)]
    pub skip_naive: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}
