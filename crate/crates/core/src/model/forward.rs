//! Training-time forward passes for every variant.

use rand::Rng;

use super::attention::{precompute_head, HYPOTHESIS_HEAD, PREMISE_HEAD};
use super::config::{ModelConfig, Role, Variant};
use super::decoder::{teacher_forced, Conditioning, Decoder};
use super::layers::{classify, encode_sentence, feature_vector, Encoded};
use crate::autodiff::{Graph, Mode, Real, Var};
use crate::error::{Error, Result};
use crate::text::vocab::{BOS, EOS};
use crate::text::{EncodedExample, Vocabulary};
use crate::training::joint_loss;

/// Loss and bookkeeping for one example.
pub struct LossParts {
    pub total: Var,
    pub label: Option<Var>,
    pub generation: Option<Var>,
    /// Label distribution, when the variant classifies.
    pub label_probs: Option<Var>,
    /// Teacher-forced steps whose argmax matched the gold token.
    pub correct_tokens: usize,
    pub target_tokens: usize,
}

pub(crate) fn encode_full<T: Real>(g: &mut Graph<'_, T>, role: Role, ids: &[usize]) -> Result<Encoded> {
    encode_sentence(g, role, ids, ids.len())
}

/// Build the decoder for a variant from its encodings.
pub(crate) fn make_decoder<T: Real, R: Rng + ?Sized>(
    g: &mut Graph<'_, T>,
    cfg: &ModelConfig,
    init: Var,
    pair: Option<(&Encoded, &Encoded)>,
    mode: Mode,
    rng: &mut R,
) -> Result<Decoder> {
    let cond = if cfg.variant.has_attention() {
        let (p, h) = pair.ok_or_else(|| Error::invalid("attention decoder needs both encodings"))?;
        let premise = precompute_head(g, PREMISE_HEAD, p.states, &vec![true; p.len])?;
        let hypothesis = precompute_head(g, HYPOTHESIS_HEAD, h.states, &vec![true; h.len])?;
        Conditioning::Attention { premise, hypothesis, width: cfg.attend_width }
    } else {
        Conditioning::Plain(init)
    };
    Decoder::start(g, init, cond, cfg.dropout, mode, rng)
}

fn label_loss<T: Real>(g: &mut Graph<'_, T>, x: Var, gold: usize) -> Result<(Var, Var)> {
    let logits = classify(g, x)?;
    let probs = g.softmax(logits, None)?;
    Ok((g.cross_entropy(probs, gold)?, probs))
}

fn targets(wrapped: &[usize]) -> Result<&[usize]> {
    match wrapped {
        [BOS, rest @ ..] if rest.last() == Some(&EOS) => Ok(rest),
        _ => Err(Error::invalid("explanation must be wrapped in <BOS> ... <EOS>")),
    }
}

/// Per-example loss. `alpha` weights the label loss for variants trained on
/// two objectives and is ignored otherwise.
pub fn example_loss<T: Real, R: Rng + ?Sized>(
    g: &mut Graph<'_, T>,
    cfg: &ModelConfig,
    ex: &EncodedExample,
    alpha: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<LossParts> {
    let gold = ex.label.index();
    let first_expl = || -> Result<&[usize]> {
        ex.explanations
            .first()
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("example {} has no explanation", ex.id)))
    };
    let only_label = |label: Var, probs: Var| LossParts {
        total: label,
        label: Some(label),
        generation: None,
        label_probs: Some(probs),
        correct_tokens: 0,
        target_tokens: 0,
    };
    match cfg.variant {
        Variant::BilstmMax => {
            let u = encode_full(g, Role::Premise, &ex.premise)?.u;
            let v = encode_full(g, Role::Hypothesis, &ex.hypothesis)?.u;
            let f = feature_vector(g, u, v)?;
            let (l, p) = label_loss(g, f, gold)?;
            Ok(only_label(l, p))
        }
        Variant::Hyp2Lbl => {
            let v = encode_full(g, Role::Hypothesis, &ex.hypothesis)?.u;
            let (l, p) = label_loss(g, v, gold)?;
            Ok(only_label(l, p))
        }
        Variant::ExplToLbl => {
            let u = encode_full(g, Role::Explanation, first_expl()?)?.u;
            let (l, p) = label_loss(g, u, gold)?;
            Ok(only_label(l, p))
        }
        Variant::Hyp2Expl | Variant::ExplPredSeq2Seq | Variant::ExplPredAtt | Variant::PredExpl => {
            let tgt = targets(first_expl()?)?;
            let (init, pair, label) = if cfg.variant == Variant::Hyp2Expl {
                (encode_full(g, Role::Hypothesis, &ex.hypothesis)?.u, None, None)
            } else {
                let p = encode_full(g, Role::Premise, &ex.premise)?;
                let h = encode_full(g, Role::Hypothesis, &ex.hypothesis)?;
                let f = feature_vector(g, p.u, h.u)?;
                let label = if cfg.variant == Variant::PredExpl { Some(label_loss(g, f, gold)?) } else { None };
                (f, Some((p, h)), label)
            };
            let mut dec = make_decoder(g, cfg, init, pair.as_ref().map(|(p, h)| (p, h)), mode, rng)?;
            let start = if cfg.variant.label_conditioned() { Vocabulary::label_id(ex.label) } else { BOS };
            let tf = teacher_forced(g, &mut dec, start, tgt)?;
            let total = match label {
                Some((l, _)) => joint_loss(g, l, tf.loss, alpha)?,
                None => tf.loss,
            };
            Ok(LossParts {
                total,
                label: label.map(|(l, _)| l),
                generation: Some(tf.loss),
                label_probs: label.map(|(_, p)| p),
                correct_tokens: tf.correct,
                target_tokens: tf.steps,
            })
        }
        Variant::AutoEnc => {
            let p = encode_full(g, Role::Premise, &ex.premise)?;
            let h = encode_full(g, Role::Hypothesis, &ex.hypothesis)?;
            let f = feature_vector(g, p.u, h.u)?;
            let (l, probs) = label_loss(g, f, gold)?;
            let mut recon = Vec::with_capacity(2);
            let (mut correct, mut steps) = (0, 0);
            for (enc, ids) in [(&p, &ex.premise), (&h, &ex.hypothesis)] {
                let mut tgt = ids.clone();
                tgt.push(EOS);
                let mut dec = make_decoder(g, cfg, enc.u, None, mode, rng)?;
                let tf = teacher_forced(g, &mut dec, BOS, &tgt)?;
                correct += tf.correct;
                steps += tf.steps;
                recon.push(tf.loss);
            }
            let gen = g.sum_all(&recon)?;
            Ok(LossParts {
                total: joint_loss(g, l, gen, alpha)?,
                label: Some(l),
                generation: Some(gen),
                label_probs: Some(probs),
                correct_tokens: correct,
                target_tokens: steps,
            })
        }
    }
}
