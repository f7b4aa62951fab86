use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Model, TokenStats};
use crate::text::{EncodedExample, Label};

/// `100 * matches / total`.
pub fn label_accuracy(preds: &[Label], golds: &[Label]) -> Result<f64> {
    if preds.len() != golds.len() {
        return Err(Error::shape("label_accuracy", format!("{} predictions vs {} golds", preds.len(), golds.len())));
    }
    if preds.is_empty() {
        return Err(Error::EmptySequence("label_accuracy"));
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

/// `exp(total_nll / tokens)`.
pub fn perplexity_from(total_nll: f64, tokens: usize) -> Result<f64> {
    if tokens == 0 {
        return Err(Error::EmptySequence("perplexity"));
    }
    Ok((total_nll / tokens as f64).exp())
}

/// Teacher-forced token statistics summed over a split, accumulated in input order.
pub fn token_stats(model: &Model, split: &[EncodedExample]) -> Result<TokenStats> {
    let per: Vec<TokenStats> = split.par_iter().map(|e| model.teacher_forced_stats(e)).collect::<Result<_>>()?;
    Ok(per.into_iter().fold(TokenStats::default(), |a, s| TokenStats {
        nll: a.nll + s.nll,
        tokens: a.tokens + s.tokens,
        correct: a.correct + s.correct,
    }))
}

/// Per-token perplexity of the first gold explanation of every example.
pub fn perplexity(model: &Model, split: &[EncodedExample]) -> Result<f64> {
    let s = token_stats(model, split)?;
    perplexity_from(s.nll, s.tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(label_accuracy(&[Neutral, Entailment], &[Neutral, Entailment]).unwrap(), 100.0);
        assert_eq!(
            label_accuracy(&[Neutral, Neutral, Neutral, Entailment], &[Neutral, Entailment, Entailment, Neutral])
                .unwrap(),
            25.0
        );
        assert!(label_accuracy(&[], &[]).is_err());
        assert!(label_accuracy(&[Neutral], &[]).is_err());
    }

    #[test]
    fn perplexity_limits() {
        let v = 37usize;
        let uniform = 12.0 * (v as f64).ln();
        assert!((perplexity_from(uniform, 12).unwrap() - v as f64).abs() < 1e-9);
        assert_eq!(perplexity_from(0.0, 5).unwrap(), 1.0);
        assert!(perplexity_from(1.0, 0).is_err());
    }
}
