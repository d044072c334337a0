use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreLabel {
    Genuine,
    Impostor,
}

/// Same-identity and different-identity pair scores from a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScores<T> {
    pub genuine: Vec<T>,
    pub impostor: Vec<T>,
    pub source_id: String,
}

impl<T: Scalar> BenchmarkScores<T> {
    pub fn from_impostor(source_id: impl Into<String>, impostor: Vec<T>) -> Self {
        Self {
            genuine: Vec::new(),
            impostor,
            source_id: source_id.into(),
        }
    }
}

/// Reads a `label,score` CSV. A header row is optional.
pub fn load_benchmark_scores(path: &Path) -> Result<BenchmarkScores<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BenchmarkScores {
        genuine: Vec::new(),
        impostor: Vec::new(),
        source_id: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected 2 columns, found {}",
                n + 1,
                rec.len()
            )));
        }
        if n == 0 && &rec[0] == "label" && &rec[1] == "score" {
            continue;
        }
        let score: f64 = rec[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad score {:?}", n + 1, &rec[1])))?;
        if !score.is_finite() {
            return Err(Error::NonFiniteScore);
        }
        match &rec[0] {
            "genuine" => out.genuine.push(score),
            "impostor" => out.impostor.push(score),
            other => return Err(Error::UnknownLabel(other.to_owned())),
        }
    }
    Ok(out)
}

pub fn write_benchmark_scores(scores: &BenchmarkScores<f64>, path: &Path) -> Result<()> {
    let mut text = String::from("label,score\n");
    for s in &scores.genuine {
        text.push_str(&format!("genuine,{s}\n"));
    }
    for s in &scores.impostor {
        text.push_str(&format!("impostor,{s}\n"));
    }
    fsio::atomic_write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        std::fs::write(&p, "genuine,0.8\nimpostor,0.1\n").unwrap();
        let s = load_benchmark_scores(&p).unwrap();
        assert_eq!(s.genuine, vec![0.8]);
        assert_eq!(s.impostor, vec![0.1]);
        assert_eq!(s.source_id, "b");
    }

    #[test]
    fn unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        std::fs::write(&p, "label,score\npositive,0.8\n").unwrap();
        assert!(matches!(load_benchmark_scores(&p), Err(Error::UnknownLabel(l)) if l == "positive"));
        std::fs::write(&p, "genuine,abc\n").unwrap();
        assert!(matches!(load_benchmark_scores(&p), Err(Error::Parse(_))));
    }

    #[test]
    fn writer_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let s = BenchmarkScores {
            genuine: vec![0.9, 0.123456789012345],
            impostor: vec![-0.25, 0.1, 1e-17],
            source_id: "b".into(),
        };
        write_benchmark_scores(&s, &p).unwrap();
        assert_eq!(load_benchmark_scores(&p).unwrap(), s);
    }
}
