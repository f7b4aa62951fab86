use super::vocab::{Vocabulary, BOS, EOS, PAD};
use super::{Example, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub sentence: usize,
    pub explanation: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { sentence: 84, explanation: 40 }
    }
}

/// Id form of an [`Example`]. Explanations are wrapped as `<BOS> ... <EOS>`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub id: String,
    pub label: Label,
    pub premise: Vec<usize>,
    pub hypothesis: Vec<usize>,
    pub explanations: Vec<Vec<usize>>,
}

impl EncodedExample {
    /// Explanation ids without the `<BOS>`/`<EOS>` wrapper.
    pub fn explanation_body(&self, k: usize) -> &[usize] {
        let e = &self.explanations[k];
        &e[1..e.len() - 1]
    }
}

/// Truncate (keeping the head) and map tokens to ids. Returns `None`, with a
/// warning, when the premise or hypothesis is empty.
pub fn encode_example(e: &Example, vocab: &Vocabulary, limits: Limits) -> Option<EncodedExample> {
    if e.premise.is_empty() || e.hypothesis.is_empty() {
        log::warn!("example {}: empty premise or hypothesis, skipped", e.id);
        return None;
    }
    let head = |toks: &[String], n: usize| vocab.encode(&toks[..toks.len().min(n)]);
    Some(EncodedExample {
        id: e.id.clone(),
        label: e.label,
        premise: head(&e.premise, limits.sentence),
        hypothesis: head(&e.hypothesis, limits.sentence),
        explanations: e.explanations.iter().map(|x| wrap(head(x, limits.explanation))).collect(),
    })
}

pub fn wrap(mut body: Vec<usize>) -> Vec<usize> {
    body.insert(0, BOS);
    body.push(EOS);
    body
}

/// Right-padded id rows with their true lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Padded {
    pub ids: Vec<Vec<usize>>,
    pub lengths: Vec<usize>,
}

impl Padded {
    pub fn new(rows: &[&[usize]]) -> Self {
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        Padded {
            ids: rows
                .iter()
                .map(|r| {
                    let mut v = r.to_vec();
                    v.resize(width, PAD);
                    v
                })
                .collect(),
            lengths: rows.iter().map(|r| r.len()).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    /// Row `i` up to its true length.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i][..self.lengths[i]]
    }

    /// `true` on pad positions.
    pub fn pad_mask(&self, i: usize) -> Vec<bool> {
        (0..self.width()).map(|t| t >= self.lengths[i]).collect()
    }
}
