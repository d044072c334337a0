//! Human review labels and the consensus rule.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AuditReport, QueueEntry};
use crate::error::{Error, Result};
use crate::fsio;

/// Reviewer verdict for one candidate pair. Only `Leaked` can contribute to
/// a leak finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Leaked,
    Child,
    NoFace,
    NotSameIdentity,
    Uncertain,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Leaked,
        Label::Child,
        Label::NoFace,
        Label::NotSameIdentity,
        Label::Uncertain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Leaked => "leaked",
            Label::Child => "child",
            Label::NoFace => "no_face",
            Label::NotSameIdentity => "not_same_identity",
            Label::Uncertain => "uncertain",
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_owned()))
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One append-only line of the label log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    /// Position of the record in the log.
    pub record_id: u64,
    pub pair_id: String,
    pub reviewer_id: String,
    pub label: Label,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
}

pub fn read_label_log(path: &Path) -> Result<Vec<ReviewRecord>> {
    match std::fs::read_to_string(path) {
        Ok(text) => fsio::from_jsonl(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(Error::io(path, e)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakedPair {
    pub pair_id: String,
    pub rank: usize,
    pub synth_index: usize,
    pub real_index: usize,
    pub score: f64,
    pub synth_path: String,
    pub real_path: String,
    pub reviewers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSummary {
    pub status: ReviewStatus,
    pub required_reviewers: usize,
    /// Records in the log, superseded ones included.
    pub records: usize,
    pub superseded_records: Vec<u64>,
    /// Effective labels per taxonomy value.
    pub tallies: BTreeMap<Label, u64>,
    pub reviewed_pairs: usize,
    pub consensus_leaked_count: usize,
    pub leaked_pairs: Vec<LeakedPair>,
}

impl ReviewSummary {
    pub fn pending(required_reviewers: usize) -> Self {
        Self {
            status: ReviewStatus::Pending,
            required_reviewers,
            records: 0,
            superseded_records: Vec::new(),
            tallies: Label::ALL.into_iter().map(|l| (l, 0)).collect(),
            reviewed_pairs: 0,
            consensus_leaked_count: 0,
            leaked_pairs: Vec::new(),
        }
    }
}

/// Folds the label log into the report.
///
/// For each (reviewer, pair) only the latest record counts; a record is also
/// retired when a later record of the same reviewer names it in
/// `supersedes`. A pair is a consensus leak iff at least
/// `required_reviewers` distinct reviewers labeled it and every one of their
/// labels is `leaked`.
pub fn finalize_report(
    report: &AuditReport,
    queue: &[QueueEntry],
    labels: &[ReviewRecord],
) -> Result<AuditReport> {
    let by_id: HashMap<&str, &QueueEntry> = queue.iter().map(|q| (q.pair_id.as_str(), q)).collect();
    let mut by_record: HashMap<u64, &ReviewRecord> = HashMap::new();
    let mut retired: BTreeSet<u64> = BTreeSet::new();
    let mut latest: HashMap<(&str, &str), &ReviewRecord> = HashMap::new();

    for rec in labels {
        if !by_id.contains_key(rec.pair_id.as_str()) {
            return Err(Error::UnknownPair(rec.pair_id.clone()));
        }
        if by_record.insert(rec.record_id, rec).is_some() {
            return Err(Error::InvariantViolation(format!(
                "record id {} appears twice",
                rec.record_id
            )));
        }
        if let Some(old) = rec.supersedes {
            match by_record.get(&old) {
                Some(prev) if prev.reviewer_id == rec.reviewer_id && old != rec.record_id => {
                    retired.insert(old);
                }
                _ => {
                    return Err(Error::InvariantViolation(format!(
                        "record {} supersedes {old}, which is not an earlier record of {:?}",
                        rec.record_id, rec.reviewer_id
                    )))
                }
            }
        }
        if let Some(prev) = latest.insert((rec.reviewer_id.as_str(), rec.pair_id.as_str()), rec) {
            retired.insert(prev.record_id);
        }
    }

    let mut summary = ReviewSummary::pending(report.config.required_reviewers);
    summary.status = ReviewStatus::Finalized;
    summary.records = labels.len();

    // pair_id -> reviewer -> label, effective records only
    let mut per_pair: BTreeMap<&str, BTreeMap<&str, Label>> = BTreeMap::new();
    for rec in labels.iter().filter(|r| !retired.contains(&r.record_id)) {
        *summary.tallies.entry(rec.label).or_default() += 1;
        per_pair
            .entry(rec.pair_id.as_str())
            .or_default()
            .insert(rec.reviewer_id.as_str(), rec.label);
    }
    summary.superseded_records = retired.into_iter().collect();
    summary.reviewed_pairs = per_pair.len();

    let required = report.config.required_reviewers;
    let mut leaked: Vec<LeakedPair> = per_pair
        .iter()
        .filter(|(_, votes)| votes.len() >= required && votes.values().all(|&l| l == Label::Leaked))
        .map(|(id, votes)| {
            let q = by_id[id];
            LeakedPair {
                pair_id: q.pair_id.clone(),
                rank: q.rank,
                synth_index: q.synth_index,
                real_index: q.real_index,
                score: q.score,
                synth_path: q.synth_path.clone(),
                real_path: q.real_path.clone(),
                reviewers: votes.keys().map(|r| r.to_string()).collect(),
            }
        })
        .collect();
    leaked.sort_by_key(|p| p.rank);
    summary.consensus_leaked_count = leaked.len();
    summary.leaked_pairs = leaked;

    let mut out = report.clone();
    out.review = summary;
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::audit::{run_audit, AuditConfig, AuditInputs};
    use crate::embedding::{DatasetKind, DatasetRegistryEntry, Registry};
    use crate::engine::Engine;
    use crate::{BenchmarkScores, EmbeddingSet};

    pub(crate) fn tiny_audit(required_reviewers: usize) -> (AuditReport, Vec<QueueEntry>) {
        let reg = Registry::new(vec![
            DatasetRegistryEntry {
                dataset_id: "real".into(),
                kind: DatasetKind::Real,
                generator_name: None,
                training_dataset_id: None,
                image_root: None,
            },
            DatasetRegistryEntry {
                dataset_id: "syn".into(),
                kind: DatasetKind::Synthetic,
                generator_name: Some("gen".into()),
                training_dataset_id: Some("real".into()),
                image_root: None,
            },
        ])
        .unwrap();
        let s = EmbeddingSet::from_rows("syn", 2, vec![1.0, 0.0, 0.6, 0.8]).unwrap().normalize().unwrap();
        let r = EmbeddingSet::from_rows("real", 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap().normalize().unwrap();
        let bench = BenchmarkScores::from_impostor("b", vec![0.1, 0.2, 0.3]);
        let mut cfg = AuditConfig::new("syn", "real");
        cfg.k = 3;
        cfg.required_reviewers = required_reviewers;
        let out = run_audit(
            &cfg,
            &AuditInputs {
                registry: &reg,
                synthetic: &s,
                real: &r,
                benchmark: Some(&bench),
                input_digests: Default::default(),
            },
            &Engine::default(),
        )
        .unwrap();
        (out.report, out.queue)
    }

    pub(crate) fn rec(id: u64, pair: &str, who: &str, label: Label) -> ReviewRecord {
        ReviewRecord {
            record_id: id,
            pair_id: pair.into(),
            reviewer_id: who.into(),
            label,
            timestamp: DateTime::from_timestamp(1_700_000_000 + id as i64, 0).unwrap(),
            supersedes: None,
        }
    }

    #[test]
    fn unanimous_leaked_pair_counts() {
        let (report, queue) = tiny_audit(2);
        let p = &queue[0].pair_id;
        let out = finalize_report(
            &report,
            &queue,
            &[rec(0, p, "a", Label::Leaked), rec(1, p, "b", Label::Leaked)],
        )
        .unwrap();
        assert_eq!(out.review.consensus_leaked_count, 1);
        assert_eq!(out.review.leaked_pairs[0].synth_path, queue[0].synth_path);
        assert_eq!(out.review.status, ReviewStatus::Finalized);
    }

    #[test]
    fn mixed_labels_are_not_leaks() {
        let (report, queue) = tiny_audit(1);
        let p = &queue[0].pair_id;
        let out = finalize_report(
            &report,
            &queue,
            &[rec(0, p, "a", Label::Leaked), rec(1, p, "b", Label::Child)],
        )
        .unwrap();
        assert_eq!(out.review.consensus_leaked_count, 0);
        assert_eq!(out.review.tallies[&Label::Child], 1);
        assert_eq!(out.review.tallies[&Label::Leaked], 1);
    }

    #[test]
    fn too_few_reviewers() {
        let (report, queue) = tiny_audit(2);
        let p = &queue[0].pair_id;
        let out = finalize_report(&report, &queue, &[rec(0, p, "a", Label::Leaked)]).unwrap();
        assert_eq!(out.review.consensus_leaked_count, 0);
        assert_eq!(out.review.reviewed_pairs, 1);
    }

    #[test]
    fn relabel_latest_wins() {
        let (report, queue) = tiny_audit(1);
        let p = &queue[0].pair_id;
        let out = finalize_report(
            &report,
            &queue,
            &[rec(0, p, "a", Label::Uncertain), rec(1, p, "a", Label::Leaked)],
        )
        .unwrap();
        assert_eq!(out.review.consensus_leaked_count, 1);
        assert_eq!(out.review.superseded_records, vec![0]);
        assert_eq!(out.review.tallies.values().sum::<u64>(), 1);
    }

    #[test]
    fn unknown_pair_and_bad_supersession() {
        let (report, queue) = tiny_audit(1);
        assert!(matches!(
            finalize_report(&report, &queue, &[rec(0, "s9-r9", "a", Label::Leaked)]),
            Err(Error::UnknownPair(_))
        ));
        let p = &queue[0].pair_id;
        let mut bad = rec(1, p, "b", Label::Leaked);
        bad.supersedes = Some(0);
        assert!(finalize_report(&report, &queue, &[rec(0, p, "a", Label::Leaked), bad]).is_err());
    }

    #[test]
    fn empty_log_gives_zero_tallies() {
        let (report, queue) = tiny_audit(1);
        let out = finalize_report(&report, &queue, &[]).unwrap();
        assert_eq!(out.review.tallies.len(), 5);
        assert!(out.review.tallies.values().all(|&v| v == 0));
    }

    #[test]
    fn label_strings() {
        for l in Label::ALL {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
            assert_eq!(serde_json::to_string(&l).unwrap(), format!("\"{l}\""));
        }
        assert!(matches!("maybe".parse::<Label>(), Err(Error::UnknownLabel(_))));
    }
}
