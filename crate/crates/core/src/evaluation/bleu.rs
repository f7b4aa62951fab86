//! Corpus-level BLEU-4 with multiple references.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics accumulated over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    /// Sum over segments of the reference length closest to the candidate's.
    pub reference_len: u64,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Closest reference length; ties go to the shorter reference.
fn closest_ref_len<T>(c: usize, refs: &[Vec<T>]) -> usize {
    refs.iter().map(Vec::len).min_by_key(|&r| (r.abs_diff(c), r)).unwrap_or(0)
}

impl BleuStats {
    pub fn add_segment<T: Eq + Hash>(&mut self, candidate: &[T], references: &[Vec<T>]) {
        self.candidate_len += candidate.len() as u64;
        self.reference_len += closest_ref_len(candidate.len(), references) as u64;
        for n in 1..=MAX_ORDER {
            let cand = ngram_counts(candidate, n);
            let mut max_ref: HashMap<&[T], u64> = HashMap::new();
            for r in references {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            let clipped: u64 = cand.iter().map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0))).sum();
            self.matches[n - 1] += clipped;
            self.totals[n - 1] += candidate.len().saturating_sub(n - 1) as u64;
        }
    }

    /// Geometric mean of the four precisions times the brevity penalty.
    ///
    /// Orders `n >= 2` with no matching n-gram use `1 / (total_n + 1)`; a
    /// unigram precision of zero gives a score of zero.
    pub fn score(&self) -> Result<f64> {
        if self.candidate_len == 0 {
            return Err(Error::EmptySequence("bleu: candidate corpus"));
        }
        if self.matches[0] == 0 {
            return Ok(0.0);
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            let p = if n > 0 && self.matches[n] == 0 {
                1.0 / (self.totals[n] as f64 + 1.0)
            } else {
                self.matches[n] as f64 / self.totals[n] as f64
            };
            log_sum += p.ln();
        }
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
        Ok(bp * (log_sum / MAX_ORDER as f64).exp())
    }
}

/// Corpus BLEU of `candidates[i]` against `references[i]`.
pub fn corpus_bleu<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::shape(
            "bleu",
            format!("{} candidates vs {} reference sets", candidates.len(), references.len()),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::EmptySequence("bleu: candidate corpus"));
    }
    let mut stats = BleuStats::default();
    for (c, refs) in candidates.iter().zip(references) {
        if !refs.iter().any(|r| !r.is_empty()) {
            return Err(Error::invalid("bleu: every candidate needs a non-empty reference"));
        }
        stats.add_segment(c, refs);
    }
    stats.score()
}

/// Single-segment BLEU.
pub fn bleu<T: Eq + Hash + Clone>(candidate: &[T], references: &[Vec<T>]) -> Result<f64> {
    corpus_bleu(&[candidate.to_vec()], &[references.to_vec()])
}
