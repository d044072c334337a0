//! Queue cursor, label submission and report folding.

use std::collections::{HashMap, HashSet};

use chrono::{DateTime, Utc};
use leakcheck_core::audit::{finalize_report, ReviewRecord};
use leakcheck_core::{AuditReport, Label, QueueEntry};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::log::LabelLog;

/// Body of `POST /api/labels`. The server stamps `timestamp` when absent; a
/// client that retries should resend the timestamp it first used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub pair_id: String,
    pub reviewer_id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    pub record_id: u64,
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextPair {
    Entry(QueueEntry),
    Done { done: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDetail {
    #[serde(flatten)]
    pub entry: QueueEntry,
    pub synth_image: String,
    pub real_image: String,
    pub labels: Vec<ReviewRecord>,
}

/// Everything the service mutates. Callers serialize access.
#[derive(Debug)]
pub struct ReviewState {
    report: AuditReport,
    queue: Vec<QueueEntry>,
    by_pair: HashMap<String, usize>,
    log: LabelLog,
    /// Reviewer -> pairs they labeled.
    labeled: HashMap<String, HashSet<String>>,
    /// (reviewer, pair) -> latest record id.
    latest: HashMap<(String, String), u64>,
}

impl ReviewState {
    pub fn new(report: AuditReport, mut queue: Vec<QueueEntry>, log: LabelLog) -> Result<Self, ServiceError> {
        queue.sort_by_key(|q| q.rank);
        let mut by_pair = HashMap::with_capacity(queue.len());
        for (n, q) in queue.iter().enumerate() {
            if by_pair.insert(q.pair_id.clone(), n).is_some() {
                return Err(ServiceError::Storage(leakcheck_core::Error::InvariantViolation(format!(
                    "duplicate pair {} in queue",
                    q.pair_id
                ))));
            }
        }
        let mut state = Self {
            report,
            queue,
            by_pair,
            log,
            labeled: HashMap::new(),
            latest: HashMap::new(),
        };
        // validates the existing log against the queue
        finalize_report(&state.report, &state.queue, state.log.records())?;
        for r in state.log.records().to_vec() {
            state.index(&r);
        }
        Ok(state)
    }

    fn index(&mut self, r: &ReviewRecord) {
        self.labeled
            .entry(r.reviewer_id.clone())
            .or_default()
            .insert(r.pair_id.clone());
        self.latest
            .insert((r.reviewer_id.clone(), r.pair_id.clone()), r.record_id);
    }

    pub fn queue(&self) -> &[QueueEntry] {
        &self.queue
    }

    pub fn log(&self) -> &LabelLog {
        &self.log
    }

    pub fn base_report(&self) -> &AuditReport {
        &self.report
    }

    /// Lowest-rank pair this reviewer has not labeled.
    pub fn next_pair(&self, reviewer_id: &str) -> NextPair {
        let seen = self.labeled.get(reviewer_id);
        self.queue
            .iter()
            .find(|q| seen.is_none_or(|s| !s.contains(&q.pair_id)))
            .cloned()
            .map_or(NextPair::Done { done: true }, NextPair::Entry)
    }

    pub fn pair(&self, pair_id: &str) -> Result<PairDetail, ServiceError> {
        let &n = self
            .by_pair
            .get(pair_id)
            .ok_or_else(|| ServiceError::UnknownPair(pair_id.to_owned()))?;
        let entry = self.queue[n].clone();
        Ok(PairDetail {
            synth_image: image_url(&self.report.config.synthetic_id, &entry.synth_path),
            real_image: image_url(&self.report.config.real_id, &entry.real_path),
            labels: self
                .log
                .records()
                .iter()
                .filter(|r| r.pair_id == pair_id)
                .cloned()
                .collect(),
            entry,
        })
    }

    /// Validates, deduplicates and durably appends one label.
    ///
    /// An exact repeat of (pair, reviewer, label, timestamp) is acknowledged
    /// without writing. A repeat without a timestamp whose label equals the
    /// reviewer's current label for the pair is treated the same way. A
    /// changed label supersedes the reviewer's previous record for the pair.
    pub fn submit(&mut self, sub: LabelSubmission) -> Result<Ack, ServiceError> {
        if !self.by_pair.contains_key(&sub.pair_id) {
            return Err(ServiceError::UnknownPair(sub.pair_id));
        }
        if sub.reviewer_id.trim().is_empty() {
            return Err(ServiceError::MissingReviewer);
        }
        let label: Label = sub
            .label
            .parse()
            .map_err(|_| ServiceError::InvalidLabel(sub.label.clone()))?;
        let key = (sub.reviewer_id.clone(), sub.pair_id.clone());
        let previous = self.latest.get(&key).map(|&id| &self.log.records()[id as usize]);

        if let Some(ts) = sub.timestamp {
            let dup = self.log.records().iter().find(|r| {
                r.pair_id == sub.pair_id && r.reviewer_id == sub.reviewer_id && r.label == label && r.timestamp == ts
            });
            if let Some(r) = dup {
                return Ok(Ack { ok: true, record_id: r.record_id, duplicate: true });
            }
        } else if let Some(p) = previous.filter(|p| p.label == label && sub.supersedes.is_none()) {
            return Ok(Ack { ok: true, record_id: p.record_id, duplicate: true });
        }

        let supersedes = match sub.supersedes {
            Some(id) => {
                let target = self
                    .log
                    .records()
                    .get(id as usize)
                    .ok_or(ServiceError::InvalidSupersedes(id))?;
                if target.reviewer_id != sub.reviewer_id || target.pair_id != sub.pair_id {
                    return Err(ServiceError::InvalidSupersedes(id));
                }
                Some(id)
            }
            None => previous.map(|p| p.record_id),
        };
        let record = ReviewRecord {
            record_id: self.log.next_id(),
            pair_id: sub.pair_id,
            reviewer_id: sub.reviewer_id,
            label,
            timestamp: sub.timestamp.unwrap_or_else(Utc::now),
            supersedes,
        };
        let record = self.log.append(record)?.clone();
        self.index(&record);
        Ok(Ack { ok: true, record_id: record.record_id, duplicate: false })
    }

    /// Report folded from every durable label.
    pub fn report(&self) -> Result<AuditReport, ServiceError> {
        Ok(finalize_report(&self.report, &self.queue, self.log.records())?)
    }
}

/// URL of an image under `/images`, with each path segment percent-encoded.
pub fn image_url(dataset_id: &str, path: &str) -> String {
    use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
    let enc = |s: &str| utf8_percent_encode(s, NON_ALPHANUMERIC).to_string();
    let segments: Vec<String> = path.split('/').filter(|s| !s.is_empty()).map(enc).collect();
    format!("/images/{}/{}", enc(dataset_id), segments.join("/"))
}
