//! Annotation-constraint checks replayed offline.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::text::{Example, Label};

/// Minimum number of word tokens in an explanation.
pub const MIN_TOKENS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    /// Fewer than three word tokens.
    TooShort,
    /// Explanation repeats the premise or the hypothesis.
    Copy,
    /// Entailment and contradiction need a premise highlight.
    PremiseHighlightRequired,
    /// Neutral and contradiction need a hypothesis highlight.
    HypothesisHighlightRequired,
    /// Neutral pairs may not highlight the premise.
    PremiseHighlightForbidden,
    /// Fewer than half of the highlighted words are used.
    HighlightUsage,
    /// Only highlighted words are used.
    NoNewWords,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::TooShort => "R1_TOO_SHORT",
            ViolationCode::Copy => "R2_COPY",
            ViolationCode::PremiseHighlightRequired => "R3_PREMISE_HIGHLIGHT_REQUIRED",
            ViolationCode::HypothesisHighlightRequired => "R3_HYPOTHESIS_HIGHLIGHT_REQUIRED",
            ViolationCode::PremiseHighlightForbidden => "R3_PREMISE_HIGHLIGHT_FORBIDDEN",
            ViolationCode::HighlightUsage => "R4_HIGHLIGHT_USAGE",
            ViolationCode::NoNewWords => "R5_NO_NEW_WORDS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        use ViolationCode::*;
        [
            TooShort,
            Copy,
            PremiseHighlightRequired,
            HypothesisHighlightRequired,
            PremiseHighlightForbidden,
            HighlightUsage,
            NoNewWords,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const UNVERIFIABLE: &str = "UNVERIFIABLE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Index of the offending explanation.
    pub explanation: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub id: String,
    pub violations: Vec<Violation>,
    /// Explanations whose highlight rules could not be checked (no highlight data).
    pub unverifiable: Vec<usize>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

fn is_word(t: &str) -> bool {
    t.chars().any(char::is_alphanumeric)
}

fn words(tokens: &[String]) -> Vec<&str> {
    tokens.iter().map(String::as_str).filter(|t| is_word(t)).collect()
}

fn picked<'a>(tokens: &'a [String], idx: &BTreeSet<usize>) -> Vec<&'a str> {
    idx.iter().filter_map(|&i| tokens.get(i)).map(String::as_str).filter(|t| is_word(t)).collect()
}

/// Check every explanation of `e` against the annotation rules.
pub fn validate_annotation(e: &Example) -> ValidationReport {
    let mut violations = Vec::new();
    let mut unverifiable = Vec::new();
    let premise_words = words(&e.premise);
    let hyp_words = words(&e.hypothesis);

    for (k, expl) in e.explanations.iter().enumerate() {
        let mut flag =
            |code: ViolationCode, message: String| violations.push(Violation { code, explanation: k, message });
        let ew = words(expl);
        if ew.len() < MIN_TOKENS {
            flag(ViolationCode::TooShort, format!("{} word token(s), need at least {MIN_TOKENS}", ew.len()));
        }
        if ew == premise_words || ew == hyp_words {
            let which = if ew == premise_words { "premise" } else { "hypothesis" };
            flag(ViolationCode::Copy, format!("explanation copies the {which}"));
        }

        let (Some(Some(ph)), Some(Some(hh))) = (e.premise_highlights.get(k), e.hypothesis_highlights.get(k)) else {
            unverifiable.push(k);
            continue;
        };
        let p_marked = picked(&e.premise, ph);
        let h_marked = picked(&e.hypothesis, hh);
        match e.label {
            Label::Entailment => {
                if p_marked.is_empty() {
                    flag(ViolationCode::PremiseHighlightRequired, "entailment needs a highlighted premise word".into());
                }
            }
            Label::Contradiction => {
                if p_marked.is_empty() {
                    flag(
                        ViolationCode::PremiseHighlightRequired,
                        "contradiction needs a highlighted premise word".into(),
                    );
                }
                if h_marked.is_empty() {
                    flag(
                        ViolationCode::HypothesisHighlightRequired,
                        "contradiction needs a highlighted hypothesis word".into(),
                    );
                }
            }
            Label::Neutral => {
                if h_marked.is_empty() {
                    flag(
                        ViolationCode::HypothesisHighlightRequired,
                        "neutral needs a highlighted hypothesis word".into(),
                    );
                }
                if !p_marked.is_empty() {
                    flag(ViolationCode::PremiseHighlightForbidden, "neutral may not highlight premise words".into());
                }
            }
        }

        let marked: Vec<&str> = p_marked.iter().chain(&h_marked).copied().collect();
        let expl_set: HashSet<&str> = ew.iter().copied().collect();
        if !marked.is_empty() {
            let used = marked.iter().filter(|w| expl_set.contains(*w)).count();
            if 2 * used < marked.len() {
                flag(ViolationCode::HighlightUsage, format!("{used} of {} highlighted words used", marked.len()));
            }
        }
        let marked_set: HashSet<&str> = marked.into_iter().collect();
        if !ew.iter().any(|w| !marked_set.contains(w)) {
            flag(ViolationCode::NoNewWords, "explanation uses only highlighted words".into());
        }
    }

    let pass = violations.is_empty();
    ValidationReport { id: e.id.clone(), violations, unverifiable, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Split;

    fn ex(label: Label, p: &str, h: &str, expl: &str, ph: &[usize], hh: &[usize]) -> Example {
        let mut e = Example::new("t", Split::Train, label, p, h, &[expl]);
        e.premise_highlights = vec![Some(ph.iter().copied().collect())];
        e.hypothesis_highlights = vec![Some(hh.iter().copied().collect())];
        e
    }

    #[test]
    fn short_explanation() {
        let r = validate_annotation(&ex(Label::Entailment, "a dog runs", "an animal runs", "dog animal", &[1], &[1]));
        assert!(r.codes().contains(&ViolationCode::TooShort));
        assert!(!r.pass);
    }

    #[test]
    fn neutral_premise_highlight() {
        let r = validate_annotation(&ex(
            Label::Neutral,
            "a dog runs",
            "the dog is happy",
            "not every dog is happy",
            &[1],
            &[3],
        ));
        assert_eq!(r.codes(), [ViolationCode::PremiseHighlightForbidden]);
    }

    #[test]
    fn quarter_usage() {
        let r = validate_annotation(&ex(
            Label::Contradiction,
            "w1 w2 x y",
            "w3 w4 z",
            "w1 is different from q",
            &[0, 1],
            &[0, 1],
        ));
        assert_eq!(r.codes(), [ViolationCode::HighlightUsage]);
    }

    #[test]
    fn missing_highlights_are_unverifiable_not_failures() {
        let e =
            Example::new("t", Split::Train, Label::Neutral, "a dog runs", "a dog is fast", &["the dog may be slow"]);
        let r = validate_annotation(&e);
        assert!(r.pass);
        assert_eq!(r.unverifiable, [0]);
    }

    #[test]
    fn clean_example_passes() {
        let r = validate_annotation(&ex(
            Label::Entailment,
            "a dog runs",
            "an animal runs",
            "a dog is an animal",
            &[1],
            &[1],
        ));
        assert!(r.pass, "{r:?}");
    }
}
