//! CSV corpus ingestion.
//!
//! Expected shape (header row required): `gold_label`, `Sentence1`,
//! `Sentence2`, `Explanation_1`, and optionally `Explanation_2`,
//! `Explanation_3`, `pairID`, and highlight columns
//! `Sentence{1,2}_Highlighted_{1,2,3}` holding comma-separated token indices
//! (`{}` for none; an empty cell means the highlights are missing). [`ColumnMap`] renames columns for other corpora.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" => Ok(Label::Entailment),
            "neutral" => Ok(Label::Neutral),
            "contradiction" => Ok(Label::Contradiction),
            other => Err(Error::invalid(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Token-index highlights for one explanation; `None` when the corpus carries none.
pub type Highlights = Option<BTreeSet<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub split: Split,
    pub label: Label,
    pub premise_text: String,
    pub hypothesis_text: String,
    pub explanation_texts: Vec<String>,
    pub premise: Vec<String>,
    pub hypothesis: Vec<String>,
    pub explanations: Vec<Vec<String>>,
    /// Parallel to `explanations`.
    pub premise_highlights: Vec<Highlights>,
    pub hypothesis_highlights: Vec<Highlights>,
}

impl Example {
    /// Build from raw strings, tokenizing every sentence.
    pub fn new(
        id: impl Into<String>,
        split: Split,
        label: Label,
        premise: &str,
        hypothesis: &str,
        explanations: &[&str],
    ) -> Self {
        Example {
            id: id.into(),
            split,
            label,
            premise_text: premise.to_string(),
            hypothesis_text: hypothesis.to_string(),
            explanation_texts: explanations.iter().map(|s| s.to_string()).collect(),
            premise: tokenize(premise),
            hypothesis: tokenize(hypothesis),
            explanations: explanations.iter().map(|s| tokenize(s)).collect(),
            premise_highlights: vec![None; explanations.len()],
            hypothesis_highlights: vec![None; explanations.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub id: Option<String>,
    pub label: String,
    pub premise: String,
    pub hypothesis: String,
    pub explanations: Vec<String>,
    pub premise_highlights: Vec<String>,
    pub hypothesis_highlights: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: Some("pairID".into()),
            label: "gold_label".into(),
            premise: "Sentence1".into(),
            hypothesis: "Sentence2".into(),
            explanations: (1..=3).map(|i| format!("Explanation_{i}")).collect(),
            premise_highlights: (1..=3).map(|i| format!("Sentence1_Highlighted_{i}")).collect(),
            hypothesis_highlights: (1..=3).map(|i| format!("Sentence2_Highlighted_{i}")).collect(),
        }
    }
}

impl ColumnMap {
    /// Pair-only mapping (no explanations), e.g. for transfer corpora.
    pub fn pairs(label: &str, premise: &str, hypothesis: &str) -> Self {
        ColumnMap {
            id: None,
            label: label.into(),
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            explanations: vec![],
            premise_highlights: vec![],
            hypothesis_highlights: vec![],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusLoad {
    pub examples: Vec<Example>,
    pub skipped_bad_label: usize,
    pub skipped_empty: usize,
    pub warnings: Vec<String>,
}

/// Parse `"{}"`, `""`, `"3"`, `"1,4"` and `"{1, 4}"` into an index set.
pub fn parse_highlights(s: &str) -> std::result::Result<BTreeSet<usize>, String> {
    let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
    inner
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<usize>().map_err(|_| format!("bad highlight index `{p}`")))
        .collect()
}

/// Read a corpus CSV. Rows with labels outside the three-way set, or with an
/// empty premise/hypothesis, are skipped and counted.
pub fn read_corpus(path: &Path, columns: &ColumnMap, split: Split, require_explanations: bool) -> Result<CorpusLoad> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::Parse { path: path.into(), line: 1, msg: format!("missing column `{name}`") })
    };
    let label_col = required(&columns.label)?;
    let premise_col = required(&columns.premise)?;
    let hyp_col = required(&columns.hypothesis)?;
    let id_col = columns.id.as_deref().and_then(find);
    let expl_cols: Vec<usize> = columns.explanations.iter().filter_map(|c| find(c)).collect();
    if require_explanations && expl_cols.is_empty() {
        let name = columns.explanations.first().cloned().unwrap_or_else(|| "Explanation_1".into());
        return Err(Error::Parse { path: path.into(), line: 1, msg: format!("missing column `{name}`") });
    }
    let hl_cols = |names: &[String]| -> Vec<Option<usize>> { names.iter().map(|c| find(c)).collect() };
    let prem_hl = hl_cols(&columns.premise_highlights);
    let hyp_hl = hl_cols(&columns.hypothesis_highlights);

    let mut out = CorpusLoad::default();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let label = match field(label_col).parse::<Label>() {
            Ok(l) => l,
            Err(_) => {
                out.skipped_bad_label += 1;
                continue;
            }
        };
        let id = id_col.map(|c| field(c).to_string()).filter(|s| !s.is_empty()).unwrap_or_else(|| format!("row{line}"));
        let premise_text = field(premise_col).to_string();
        let hypothesis_text = field(hyp_col).to_string();
        let premise = tokenize(&premise_text);
        let hypothesis = tokenize(&hypothesis_text);
        if premise.is_empty() || hypothesis.is_empty() {
            out.skipped_empty += 1;
            out.warnings.push(format!("{}:{line}: empty premise or hypothesis, skipped", path.display()));
            continue;
        }
        let mut ex = Example {
            id,
            split,
            label,
            premise_text,
            hypothesis_text,
            explanation_texts: vec![],
            premise,
            hypothesis,
            explanations: vec![],
            premise_highlights: vec![],
            hypothesis_highlights: vec![],
        };
        for (k, &c) in expl_cols.iter().enumerate() {
            let text = field(c);
            if text.is_empty() {
                continue;
            }
            let parse_hl = |cols: &[Option<usize>], sentence_len: usize| -> Result<Highlights> {
                let Some(Some(col)) = cols.get(k) else { return Ok(None) };
                if field(*col).is_empty() {
                    return Ok(None);
                }
                let set = parse_highlights(field(*col)).map_err(|msg| Error::Parse { path: path.into(), line, msg })?;
                if let Some(bad) = set.iter().find(|&&i| i >= sentence_len) {
                    return Err(Error::Parse {
                        path: path.into(),
                        line,
                        msg: format!("highlight index {bad} out of range for a {sentence_len}-token sentence"),
                    });
                }
                Ok(Some(set))
            };
            let ph = parse_hl(&prem_hl, ex.premise.len())?;
            let hh = parse_hl(&hyp_hl, ex.hypothesis.len())?;
            ex.explanation_texts.push(text.to_string());
            ex.explanations.push(tokenize(text));
            ex.premise_highlights.push(ph);
            ex.hypothesis_highlights.push(hh);
        }
        if require_explanations {
            let have = ex.explanations.len();
            if have == 0 {
                return Err(Error::Parse { path: path.into(), line, msg: "example has no explanation".into() });
            }
            if split != Split::Train && have < 3 {
                out.warnings.push(format!("{}:{line}: {have} explanation(s), expected 3", path.display()));
            }
        }
        out.examples.push(ex);
    }
    Ok(out)
}

fn format_highlights(h: &Highlights) -> String {
    match h {
        Some(set) => format!("{{{}}}", set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")),
        None => String::new(),
    }
}

/// Write examples back out in the default column layout. Highlight columns are
/// emitted only when some example carries highlights.
pub fn write_corpus(path: &Path, examples: &[Example]) -> Result<()> {
    let cols = ColumnMap::default();
    let n_expl = examples.iter().map(|e| e.explanation_texts.len()).max().unwrap_or(0).clamp(1, 3);
    let with_hl =
        examples.iter().any(|e| e.premise_highlights.iter().chain(&e.hypothesis_highlights).any(Option::is_some));
    let mut header =
        vec![cols.id.clone().unwrap_or_default(), cols.label.clone(), cols.premise.clone(), cols.hypothesis.clone()];
    header.extend(cols.explanations[..n_expl].iter().cloned());
    if with_hl {
        header.extend(cols.premise_highlights[..n_expl].iter().cloned());
        header.extend(cols.hypothesis_highlights[..n_expl].iter().cloned());
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for e in examples {
        let mut row = vec![e.id.clone(), e.label.to_string(), e.premise_text.clone(), e.hypothesis_text.clone()];
        row.extend((0..n_expl).map(|k| e.explanation_texts.get(k).cloned().unwrap_or_default()));
        if with_hl {
            row.extend((0..n_expl).map(|k| e.premise_highlights.get(k).map(format_highlights).unwrap_or_default()));
            row.extend((0..n_expl).map(|k| e.hypothesis_highlights.get(k).map(format_highlights).unwrap_or_default()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
