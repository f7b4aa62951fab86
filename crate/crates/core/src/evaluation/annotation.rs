//! Human explanation scores and the Expl@K aggregate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One annotated prediction: `k` of the `n` required arguments were present.
/// Neutral and contradiction pairs are annotated with `n = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub predicted_label_correct: bool,
    pub k: u32,
    pub n: u32,
}

impl AnnotationRecord {
    pub fn score(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.n == 0 || self.k > self.n {
            return Err(format!("record `{}`: need 0 <= k <= n and n >= 1, got k={} n={}", self.id, self.k, self.n));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Mean partial score.
    #[default]
    Partial,
    /// Only fully correct explanations count.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplAtK {
    /// Percentage over the label-correct subset.
    pub score: f64,
    /// Number of annotated predictions.
    pub k: usize,
    pub label_correct: usize,
    pub mode: ScoreMode,
}

/// Columns `id, predicted_label_correct, k, n`; the flag accepts `true/false` or `1/0`.
pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        predicted_label_correct: String,
        k: u32,
        n: u32,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row?;
        let flag = match row.predicted_label_correct.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => {
                return Err(Error::Parse { path: path.into(), line, msg: format!("bad label-correct flag `{other}`") })
            }
        };
        let rec = AnnotationRecord { id: row.id, predicted_label_correct: flag, k: row.k, n: row.n };
        rec.check().map_err(|msg| Error::Parse { path: path.into(), line, msg })?;
        out.push(rec);
    }
    Ok(out)
}

/// Explanation correctness over the predictions whose label was right, as a percentage.
pub fn expl_at_k(records: &[AnnotationRecord], mode: ScoreMode) -> Result<ExplAtK> {
    for r in records {
        r.check().map_err(Error::Invalid)?;
    }
    let correct: Vec<&AnnotationRecord> = records.iter().filter(|r| r.predicted_label_correct).collect();
    if correct.is_empty() {
        return Err(Error::invalid("Expl@K is undefined: no prediction has a correct label"));
    }
    let total: f64 = match mode {
        ScoreMode::Partial => correct.iter().map(|r| r.score()).sum(),
        ScoreMode::Strict => correct.iter().filter(|r| r.k == r.n).count() as f64,
    };
    Ok(ExplAtK { score: 100.0 * total / correct.len() as f64, k: records.len(), label_correct: correct.len(), mode })
}
