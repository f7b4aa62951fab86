//! Uninformative-explanation templates and the edit-distance filter.

use serde::{Deserialize, Serialize};

use super::edit_distance::edit_distance_below;
use crate::text::Label;

pub const PREMISE: &str = "<PREMISE>";
pub const HYPOTHESIS: &str = "<HYPOTHESIS>";

/// Explanations strictly closer than this (in characters) to a template are filtered.
pub const FILTER_THRESHOLD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateClass {
    General,
    Entailment,
    Neutral,
    Contradiction,
}

impl From<Label> for TemplateClass {
    fn from(l: Label) -> Self {
        match l {
            Label::Entailment => TemplateClass::Entailment,
            Label::Neutral => TemplateClass::Neutral,
            Label::Contradiction => TemplateClass::Contradiction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub class: TemplateClass,
    pub pattern: &'static str,
}

const fn t(class: TemplateClass, pattern: &'static str) -> Template {
    Template { class, pattern }
}

use TemplateClass::{Contradiction as C, Entailment as E, General as G, Neutral as N};

/// The shipped template list, verbatim (including its irregular spacing and punctuation).
pub const TEMPLATES: &[Template] = &[
    t(G, "<PREMISE>"),
    t(G, "<HYPOTHESIS>"),
    t(G, "<HYPOTHESIS> <PREMISE>"),
    t(G, "<PREMISE> <HYPOTHESIS>"),
    t(G, "Sentence 1 states <PREMISE>. Sentence 2 is stating <HYPOTHESIS>"),
    t(G, "Sentence 2 states <HYPOTHESIS>. Sentence 1 is stating <PREMISE>"),
    t(G, "There is <PREMISE>"),
    t(G, "There is <HYPOTHESIS>"),
    t(E, "<PREMISE> implies <HYPOTHESIS>"),
    t(E, "If <PREMISE> then <HYPOTHESIS>"),
    t(E, "<PREMISE> would imply <HYPOTHESIS>"),
    t(E, "<HYPOTHESIS> is a rephrasing of <PREMISE>"),
    t(E, "<PREMISE> is a rephrasing of <HYPOTHESIS>"),
    t(E, "In both sentences <HYPOTHESIS>"),
    t(E, "<PREMISE> would be <HYPOTHESIS>"),
    t(E, "<PREMISE> can also be said as <HYPOTHESIS>"),
    t(E, "<HYPOTHESIS> can also be said as <PREMISE>"),
    t(E, "<HYPOTHESIS> is a less specific rephrasing of <PREMISE>"),
    t(E, "This clarifies that <HYPOTHESIS>"),
    t(E, "If <PREMISE> it means <HYPOTHESIS>"),
    t(E, "<HYPOTHESIS> in both sentences"),
    t(E, "<HYPOTHESIS> in both"),
    t(E, "<HYPOTHESIS> is same as <PREMISE>"),
    t(E, "<PREMISE> is same as <HYPOTHESIS>"),
    t(E, "<PREMISE> is a synonym of <HYPOTHESIS>"),
    t(E, "<HYPOTHESIS> is a synonym of <PREMISE>."),
    t(N, "Just because <PREMISE> doesn't mean <HYPOTHESIS>"),
    t(N, "Cannot infer the <HYPOTHESIS>"),
    t(N, "One cannot assume <HYPOTHESIS>"),
    t(N, "One cannot infer that <HYPOTHESIS>"),
    t(N, "Cannot assume <HYPOTHESIS>"),
    t(N, "<PREMISE> does not mean <HYPOTHESIS>"),
    t(N, "We don't know that <HYPOTHESIS>"),
    t(N, "The fact that <PREMISE> doesn't mean <HYPOTHESIS>"),
    t(N, "The fact that <PREMISE> does not imply <HYPOTHESIS>"),
    t(N, "The fact that <PREMISE> does not always mean <HYPOTHESIS>"),
    t(N, "The fact that <PREMISE> doesn't always imply<HYPOTHESIS>."),
    t(C, "In sentence 1 <PREMISE> while in sentence 2 <HYPOTHESIS>"),
    t(C, "It can either be <PREMISE> or <HYPOTHESIS>"),
    t(C, "It cannot be <HYPOTHESIS> if <PREMISE>"),
    t(C, "Either <PREMISE> or <HYPOTHESIS>"),
    t(C, "Either <HYPOTHESIS> or <PREMISE>"),
    t(C, "<PREMISE> and other <HYPOTHESIS>"),
    t(C, "<HYPOTHESIS> and other <PREMISE>"),
    t(C, "<HYPOTHESIS> after <PREMISE>"),
    t(C, "<PREMISE> is not the same as <HYPOTHESIS>"),
    t(C, "<HYPOTHESIS> is not the same as <PREMISE>"),
    t(C, "<PREMISE> is contradictory to <HYPOTHESIS>"),
];

/// Templates that apply to an example of `label`: all general ones plus that label's.
pub fn templates_for(label: Label) -> impl Iterator<Item = &'static Template> {
    let class = TemplateClass::from(label);
    TEMPLATES.iter().filter(move |t| t.class == TemplateClass::General || t.class == class)
}

/// Expand `(optional)` subphrases into with/without variants and `a/b`
/// alternatives into one variant per alternative.
pub fn expand_pattern(pattern: &str) -> Vec<String> {
    let mut variants = vec![String::new()];
    for word in pattern.split(' ') {
        let options: Vec<&str> = if word.len() > 2 && word.starts_with('(') && word.ends_with(')') {
            vec![&word[1..word.len() - 1], ""]
        } else if word.contains('/') && !word.contains('<') {
            word.split('/').collect()
        } else {
            vec![word]
        };
        variants = variants
            .iter()
            .flat_map(|v| {
                options.iter().map(move |o| match (v.is_empty(), o.is_empty()) {
                    (_, true) => v.clone(),
                    (true, false) => o.to_string(),
                    (false, false) => format!("{v} {o}"),
                })
            })
            .collect();
    }
    variants.dedup();
    variants
}

pub fn instantiate(template: &Template, premise: &str, hypothesis: &str) -> Vec<String> {
    expand_pattern(template.pattern)
        .into_iter()
        .map(|v| v.replace(PREMISE, premise).replace(HYPOTHESIS, hypothesis))
        .collect()
}

/// Every general template and every template of `label`, with both sentences substituted verbatim.
pub fn instantiate_templates(premise: &str, hypothesis: &str, label: Label) -> Vec<String> {
    templates_for(label).flat_map(|t| instantiate(t, premise, hypothesis)).collect()
}

/// Lowercase, collapse whitespace runs, strip one trailing period.
pub fn normalize(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    match collapsed.strip_suffix('.') {
        Some(rest) => rest.trim_end().to_string(),
        None => collapsed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub uninformative: bool,
    /// Instantiated template closest to the explanation.
    pub nearest: String,
    /// Normalized edit distance to `nearest`.
    pub distance: usize,
}

/// Nearest instantiated template under normalization; exact minimum distance.
pub fn nearest_template(explanation: &str, premise: &str, hypothesis: &str, label: Label) -> (String, usize) {
    let target = normalize(explanation);
    let mut best: Option<(String, usize)> = None;
    for candidate in instantiate_templates(premise, hypothesis, label) {
        let limit = best.as_ref().map_or(usize::MAX, |(_, d)| *d);
        if let Some(d) = edit_distance_below(&target, &normalize(&candidate), limit) {
            best = Some((candidate, d));
            if d == 0 {
                break;
            }
        }
    }
    best.expect("at least one general template always applies")
}

pub fn is_uninformative(explanation: &str, premise: &str, hypothesis: &str, label: Label) -> FilterVerdict {
    is_uninformative_at(explanation, premise, hypothesis, label, FILTER_THRESHOLD)
}

pub fn is_uninformative_at(
    explanation: &str,
    premise: &str,
    hypothesis: &str,
    label: Label,
    threshold: usize,
) -> FilterVerdict {
    let (nearest, distance) = nearest_template(explanation, premise, hypothesis, label);
    FilterVerdict { uninformative: distance < threshold, nearest, distance }
}
