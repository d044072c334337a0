//! Append-only JSON-lines label log.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use leakcheck_core::audit::{read_label_log, ReviewRecord};
use leakcheck_core::{Error, Result};

/// Label log backed by a file. Every append is synced before it returns.
#[derive(Debug)]
pub struct LabelLog {
    path: PathBuf,
    file: File,
    records: Vec<ReviewRecord>,
}

impl LabelLog {
    /// Opens or creates the log. A trailing line without a newline was never
    /// acknowledged and is cut off.
    pub fn open(path: &Path) -> Result<Self> {
        drop_torn_tail(path)?;
        let records = read_label_log(path)?;
        for (n, r) in records.iter().enumerate() {
            if r.record_id != n as u64 {
                return Err(Error::InvariantViolation(format!(
                    "label log record {n} has record_id {}",
                    r.record_id
                )));
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self { path: path.to_owned(), file, records })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.records.len() as u64
    }

    /// Writes and syncs one record. `record.record_id` must equal `next_id()`.
    pub fn append(&mut self, record: ReviewRecord) -> Result<&ReviewRecord> {
        if record.record_id != self.next_id() {
            return Err(Error::InvariantViolation(format!(
                "append of record_id {} at position {}",
                record.record_id,
                self.next_id()
            )));
        }
        let mut line = serde_json::to_vec(&record).map_err(|e| Error::Parse(e.to_string()))?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }
}

fn drop_torn_tail(path: &Path) -> Result<()> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(path, e)),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
    f.set_len(keep as u64)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(path, e))
}
