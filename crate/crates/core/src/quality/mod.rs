//! Corpus quality gate: template filter and annotation validators.

mod edit_distance;
mod templates;
mod validate;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use edit_distance::{edit_distance, edit_distance_below};
pub use templates::{
    expand_pattern, instantiate, instantiate_templates, is_uninformative, is_uninformative_at, nearest_template,
    normalize, templates_for, FilterVerdict, Template, TemplateClass, FILTER_THRESHOLD, HYPOTHESIS, PREMISE, TEMPLATES,
};
pub use validate::{validate_annotation, ValidationReport, Violation, ViolationCode, MIN_TOKENS, UNVERIFIABLE};

use crate::error::Result;
use crate::text::Example;

/// One line of the filter report: one explanation of one example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterRow {
    pub id: String,
    pub explanation: usize,
    pub filtered: bool,
    pub distance: usize,
    pub nearest_template: String,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub rows: Vec<FilterRow>,
    /// Examples with their uninformative explanations removed. Examples left
    /// without any explanation are dropped.
    pub survivors: Vec<Example>,
    pub filtered_explanations: usize,
    pub dropped_examples: usize,
}

fn filter_one(e: &Example, threshold: usize) -> (Vec<FilterRow>, Option<Example>) {
    let mut rows = Vec::with_capacity(e.explanation_texts.len());
    let mut keep = Vec::new();
    for (k, text) in e.explanation_texts.iter().enumerate() {
        let v = is_uninformative_at(text, &e.premise_text, &e.hypothesis_text, e.label, threshold);
        if !v.uninformative {
            keep.push(k);
        }
        rows.push(FilterRow {
            id: e.id.clone(),
            explanation: k,
            filtered: v.uninformative,
            distance: v.distance,
            nearest_template: v.nearest,
            text: text.clone(),
        });
    }
    if keep.is_empty() {
        return (rows, None);
    }
    let mut s = e.clone();
    s.explanation_texts = pick(&e.explanation_texts, &keep);
    s.explanations = pick(&e.explanations, &keep);
    s.premise_highlights = pick(&e.premise_highlights, &keep);
    s.hypothesis_highlights = pick(&e.hypothesis_highlights, &keep);
    (rows, Some(s))
}

fn pick<T: Clone>(v: &[T], keep: &[usize]) -> Vec<T> {
    keep.iter().filter_map(|&k| v.get(k).cloned()).collect()
}

/// Run the template filter over every explanation. Output order follows input order.
pub fn filter_corpus(examples: &[Example], threshold: usize) -> FilterOutcome {
    let per: Vec<_> = examples.par_iter().map(|e| filter_one(e, threshold)).collect();
    let mut out = FilterOutcome::default();
    for (rows, survivor) in per {
        out.filtered_explanations += rows.iter().filter(|r| r.filtered).count();
        out.rows.extend(rows);
        match survivor {
            Some(s) => out.survivors.push(s),
            None => out.dropped_examples += 1,
        }
    }
    out
}

pub fn write_filter_report(path: &Path, rows: &[FilterRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn validate_corpus(examples: &[Example]) -> Vec<ValidationReport> {
    examples.par_iter().map(validate_annotation).collect()
}

#[derive(Serialize)]
struct ValidationRow<'a> {
    id: &'a str,
    pass: bool,
    violations: String,
    unverifiable: String,
}

/// One row per example; `violations` is `;`-separated `CODE@explanation` pairs.
pub fn write_validation_report(path: &Path, reports: &[ValidationReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        let violations =
            r.violations.iter().map(|v| format!("{}@{}", v.code, v.explanation)).collect::<Vec<_>>().join(";");
        let unverifiable = r.unverifiable.iter().map(|k| format!("{UNVERIFIABLE}@{k}")).collect::<Vec<_>>().join(";");
        w.serialize(ValidationRow { id: &r.id, pass: r.pass, violations, unverifiable })?;
    }
    w.flush()?;
    Ok(())
}
