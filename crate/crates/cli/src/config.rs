//! Optional TOML config file. Command-line flags override its values, which
//! override built-in defaults.

use std::path::{Path, PathBuf};

use leakcheck_core::DedupMode;
use serde::Deserialize;

use crate::exit::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<usize>,
    pub target_far: Option<f64>,
    pub dedup_mode: Option<DedupMode>,
    pub hist_lo: Option<f64>,
    pub hist_hi: Option<f64>,
    pub hist_bins: Option<usize>,
    pub required_reviewers: Option<usize>,
    pub threads: Option<usize>,
    pub query_tile: Option<usize>,
    pub gallery_tile: Option<usize>,
    pub listen: Option<String>,
    pub data_root: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let err = |message: String| CliError::Config { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Core(leakcheck_core::Error::io(path, e)),
            _ => err(e.to_string()),
        })?;
        toml::from_str(&text).map_err(|e| err(e.message().to_owned()))
    }

    pub fn load_opt(path: Option<&Path>) -> CliResult<Self> {
        path.map_or(Ok(Self::default()), Self::load)
    }
}

/// Flag value if given, else config file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
