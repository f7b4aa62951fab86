//! Inference: classification, greedy generation and the explain-then-predict pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Role, Variant};
use super::decoder::{greedy, teacher_forced};
use super::forward::make_decoder;
use super::layers::{argmax, classify, encode_sentence, feature_vector};
use super::Model;
use crate::autodiff::{Graph, Mode, Real};
use crate::error::{Error, Result};
use crate::text::vocab::{BOS, EOS};
use crate::text::{wrap, EncodedExample, Label, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Option<Label>,
    pub label_probs: Option<[f32; 3]>,
    /// Generated explanation ids, without `<BOS>`/`<EOS>`.
    pub explanation: Option<Vec<usize>>,
}

/// Teacher-forced token statistics for one example.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TokenStats {
    pub nll: f64,
    pub tokens: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub explanation: Vec<usize>,
    pub label: Label,
    /// The generator produced nothing; the label came from `<BOS> <EOS>`.
    pub empty_explanation: bool,
}

fn probs3(v: &[f32]) -> [f32; 3] {
    [v[0], v[1], v[2]]
}

// Inference never samples; this rng is only a type witness for eval-mode dropout.
fn no_rng() -> rand_chacha::ChaCha8Rng {
    crate::seed::rng(0, &[])
}

impl Model {
    /// Max-pooled encoder output for `ids[..len]`.
    pub fn encode(&self, role: Role, ids: &[usize], len: usize) -> Result<Vec<f32>> {
        if !self.config.variant.encoders().contains(&role) {
            return Err(Error::invalid(format!("{} has no {role:?} encoder", self.config.variant)));
        }
        let mut g = Graph::new(&self.params);
        let e = encode_sentence(&mut g, role, ids, len)?;
        Ok(g.value(e.u).to_vec())
    }

    /// Predict from possibly padded premise and hypothesis rows.
    pub fn predict_padded(
        &self,
        premise: &[usize],
        p_len: usize,
        hypothesis: &[usize],
        h_len: usize,
    ) -> Result<Prediction> {
        let cfg = &self.config;
        let mut g = Graph::new(&self.params);
        let mut rng = no_rng();
        match cfg.variant {
            Variant::ExplToLbl => Err(Error::invalid("expl-to-lbl reads explanations; use expl_to_label")),
            Variant::Hyp2Lbl | Variant::Hyp2Expl => {
                let v = encode_sentence(&mut g, Role::Hypothesis, hypothesis, h_len)?.u;
                if cfg.variant == Variant::Hyp2Lbl {
                    let logits = classify(&mut g, v)?;
                    let p = probs3(&softmax(g.value(logits)));
                    return Ok(Prediction {
                        label: Label::from_index(argmax(&p)),
                        label_probs: Some(p),
                        explanation: None,
                    });
                }
                let mut dec = make_decoder(&mut g, cfg, v, None, Mode::Eval, &mut rng)?;
                let expl = greedy(&mut g, &mut dec, BOS, cfg.max_decode_len)?;
                Ok(Prediction { label: None, label_probs: None, explanation: Some(expl) })
            }
            _ => {
                let p = encode_sentence(&mut g, Role::Premise, premise, p_len)?;
                let h = encode_sentence(&mut g, Role::Hypothesis, hypothesis, h_len)?;
                let f = feature_vector(&mut g, p.u, h.u)?;
                let (label, probs) = if cfg.variant.has_classifier() {
                    let logits = classify(&mut g, f)?;
                    let pr = probs3(&softmax(g.value(logits)));
                    (Label::from_index(argmax(&pr)), Some(pr))
                } else {
                    (None, None)
                };
                let explanation = if cfg.variant.generates_explanations() {
                    // Classify first; the predicted label opens the explanation.
                    let start = match (cfg.variant.label_conditioned(), label) {
                        (true, Some(l)) => Vocabulary::label_id(l),
                        _ => BOS,
                    };
                    let mut dec = make_decoder(&mut g, cfg, f, Some((&p, &h)), Mode::Eval, &mut rng)?;
                    Some(greedy(&mut g, &mut dec, start, cfg.max_decode_len)?)
                } else {
                    None
                };
                Ok(Prediction { label, label_probs: probs, explanation })
            }
        }
    }

    pub fn predict(&self, ex: &EncodedExample) -> Result<Prediction> {
        if self.config.variant == Variant::ExplToLbl {
            let wrapped = ex.explanations.first().ok_or_else(|| Error::invalid("example has no explanation"))?;
            let (label, probs) = self.classify_wrapped(wrapped)?;
            return Ok(Prediction { label: Some(label), label_probs: Some(probs), explanation: None });
        }
        self.predict_padded(&ex.premise, ex.premise.len(), &ex.hypothesis, ex.hypothesis.len())
    }

    /// Label without decoding an explanation.
    pub fn predict_label(&self, ex: &EncodedExample) -> Result<Label> {
        let cfg = &self.config;
        if !cfg.variant.has_classifier() {
            return Err(Error::invalid(format!("{} has no classifier", cfg.variant)));
        }
        if cfg.variant == Variant::ExplToLbl {
            let wrapped = ex.explanations.first().ok_or_else(|| Error::invalid("example has no explanation"))?;
            return Ok(self.classify_wrapped(wrapped)?.0);
        }
        let mut g = Graph::new(&self.params);
        let x = if cfg.variant == Variant::Hyp2Lbl {
            encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len())?.u
        } else {
            let p = encode_sentence(&mut g, Role::Premise, &ex.premise, ex.premise.len())?.u;
            let h = encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len())?.u;
            feature_vector(&mut g, p, h)?
        };
        let logits = classify(&mut g, x)?;
        Ok(Label::from_index(argmax(g.value(logits))).expect("three logits"))
    }

    /// Predictions for many examples, in input order.
    pub fn predict_all(&self, examples: &[EncodedExample]) -> Result<Vec<Prediction>> {
        examples.par_iter().map(|e| self.predict(e)).collect()
    }

    fn classify_wrapped(&self, wrapped: &[usize]) -> Result<(Label, [f32; 3])> {
        if self.config.variant != Variant::ExplToLbl {
            return Err(Error::invalid(format!("{} does not classify explanations", self.config.variant)));
        }
        let mut g = Graph::new(&self.params);
        let u = encode_sentence(&mut g, Role::Explanation, wrapped, wrapped.len())?.u;
        let logits = classify(&mut g, u)?;
        let p = probs3(&softmax(g.value(logits)));
        Ok((Label::from_index(argmax(&p)).expect("three logits"), p))
    }

    /// Label from an explanation body alone.
    pub fn expl_to_label(&self, body: &[usize]) -> Result<Label> {
        if body.is_empty() {
            return Err(Error::EmptySequence("expl_to_label"));
        }
        Ok(self.classify_wrapped(&wrap(body.to_vec()))?.0)
    }

    /// Teacher-forced NLL over the first gold explanation (`<EOS>` counted, `<BOS>` not).
    pub fn teacher_forced_stats(&self, ex: &EncodedExample) -> Result<TokenStats> {
        let cfg = &self.config;
        if !cfg.variant.generates_explanations() {
            return Err(Error::invalid(format!("{} does not generate explanations", cfg.variant)));
        }
        let wrapped = ex.explanations.first().ok_or_else(|| Error::invalid("example has no explanation"))?;
        if wrapped.len() < 2 || wrapped[0] != BOS || wrapped.last() != Some(&EOS) {
            return Err(Error::invalid("explanation must be wrapped in <BOS> ... <EOS>"));
        }
        let mut g = Graph::new(&self.params);
        let mut rng = no_rng();
        let (init, pair) = if cfg.variant == Variant::Hyp2Expl {
            (encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len())?.u, None)
        } else {
            let p = encode_sentence(&mut g, Role::Premise, &ex.premise, ex.premise.len())?;
            let h = encode_sentence(&mut g, Role::Hypothesis, &ex.hypothesis, ex.hypothesis.len())?;
            (feature_vector(&mut g, p.u, h.u)?, Some((p, h)))
        };
        let mut dec = make_decoder(&mut g, cfg, init, pair.as_ref().map(|(p, h)| (p, h)), Mode::Eval, &mut rng)?;
        let start = if cfg.variant.label_conditioned() { Vocabulary::label_id(ex.label) } else { BOS };
        let tf = teacher_forced(&mut g, &mut dec, start, &wrapped[1..])?;
        Ok(TokenStats { nll: g.scalar(tf.loss).as_f64(), tokens: tf.steps, correct: tf.correct })
    }
}

fn softmax(logits: &[f32]) -> Vec<f32> {
    crate::autodiff::softmax_values(logits, None).expect("unmasked softmax cannot fail")
}

/// Generate an explanation with `generator`, then label it with `classifier`
/// using only the generated tokens.
pub fn explain_then_predict(
    generator: &Model,
    classifier: &Model,
    premise: &[usize],
    hypothesis: &[usize],
) -> Result<PipelineOutput> {
    if !matches!(generator.config.variant, Variant::ExplPredSeq2Seq | Variant::ExplPredAtt) {
        return Err(Error::invalid(format!("{} is not an explain-then-predict generator", generator.config.variant)));
    }
    let explanation = generator
        .predict_padded(premise, premise.len(), hypothesis, hypothesis.len())?
        .explanation
        .expect("generators always decode");
    let empty = explanation.is_empty();
    if empty {
        log::warn!("explain_then_predict: empty explanation, labelling <BOS> <EOS>");
    }
    let (label, _) = classifier.classify_wrapped(&wrap(explanation.clone()))?;
    Ok(PipelineOutput { explanation, label, empty_explanation: empty })
}
