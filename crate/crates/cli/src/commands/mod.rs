//! Subcommand implementations. Each writes its human-readable summary to
//! `out` and returns an error class on failure.

mod audit;
mod bench;
mod calibrate;
mod data;
mod search;
mod serve;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use leakcheck_core::{fsio, Engine, EngineConfig, Error as CoreError};

pub use audit::{cmd_audit, cmd_report, AUDIT_FILES};
pub use bench::{cmd_bench, run_bench, BenchOutcome};
pub use calibrate::{cmd_calibrate, cmd_hist};
pub use data::{cmd_extract, cmd_ingest};
pub use search::cmd_search;
pub use serve::cmd_serve;

use crate::args::EngineArgs;
use crate::config::{pick, FileConfig};
use crate::exit::{CliError, CliResult};

pub fn engine(args: &EngineArgs, file: &FileConfig) -> CliResult<Engine> {
    let defaults = EngineConfig::default();
    let workers = pick(args.threads, file.threads, defaults.workers);
    let query_tile = pick(args.query_tile, file.query_tile, defaults.query_tile);
    let gallery_tile = pick(args.gallery_tile, file.gallery_tile, defaults.gallery_tile);
    for (name, v) in [("threads", workers), ("query-tile", query_tile), ("gallery-tile", gallery_tile)] {
        if v == 0 {
            return Err(CliError::Argument(format!("--{name} must be positive")));
        }
    }
    Ok(Engine::new(defaults.with_workers(workers).with_tiles(query_tile, gallery_tile)))
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    Ok(fsio::sha256_hex(&fsio::read(path)?))
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// A group of output files that appear together or not at all: everything
/// is written to temporary siblings first and renamed only on `commit`.
#[derive(Default)]
pub struct Staged {
    pending: Vec<(PathBuf, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        let tmp = fsio::temp_sibling(path);
        let res = fs::File::create(&tmp).and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        });
        self.pending.push((tmp, path.to_owned()));
        res.map_err(|e| CoreError::io(path, e).into())
    }

    pub fn commit(mut self) -> CliResult<()> {
        let pending = std::mem::take(&mut self.pending);
        let mut done: Vec<&Path> = Vec::new();
        for (n, (tmp, path)) in pending.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, path) {
                for p in done {
                    let _ = fs::remove_file(p);
                }
                for (t, _) in &pending[n..] {
                    let _ = fs::remove_file(t);
                }
                return Err(CoreError::io(path, e).into());
            }
            done.push(path);
        }
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        for (tmp, _) in &self.pending {
            let _ = fs::remove_file(tmp);
        }
    }
}

pub(crate) fn fmt_scores(scores: impl Iterator<Item = f64>) -> String {
    scores.map(|s| format!("{s:.6}")).collect::<Vec<_>>().join(" ")
}

pub(crate) fn io_out(e: std::io::Error) -> CliError {
    CoreError::io("<stdout>", e).into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_outputs_appear_together() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let mut s = Staged::new();
        s.add(&a, b"1").unwrap();
        s.add(&b, b"2").unwrap();
        assert!(!a.exists() && !b.exists());
        s.commit().unwrap();
        assert_eq!(fs::read(&a).unwrap(), b"1");
        assert_eq!(fs::read(&b).unwrap(), b"2");

        let c = dir.path().join("c");
        let mut s = Staged::new();
        s.add(&c, b"3").unwrap();
        drop(s);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
