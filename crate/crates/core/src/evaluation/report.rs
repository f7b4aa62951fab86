//! Evaluation reports, generation dumps and the transfer harness.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bleu::corpus_bleu;
use super::metrics::{label_accuracy, perplexity};
use crate::error::{Error, Result};
use crate::model::{explain_then_predict, Model, Prediction, Variant};
use crate::text::{
    detokenize, encode_example, read_corpus, ColumnMap, EncodedExample, Example, Limits, Split, Vocabulary,
};

pub const REFERENCES_FIRST_TWO: &str = "explanations 1-2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    /// Which gold explanations BLEU was measured against.
    pub reference_policy: String,
    pub variant: String,
    pub examples: usize,
    pub skipped: usize,
    pub accuracy: Option<f64>,
    pub perplexity: Option<f64>,
    pub bleu: Option<f64>,
    pub expl_at_k: Option<f64>,
    pub checkpoint: Option<String>,
    pub param_fingerprint: String,
}

impl EvalReport {
    fn new(split: &str, variant: String, examples: usize, param_fingerprint: String) -> Self {
        EvalReport {
            split: split.to_string(),
            reference_policy: REFERENCES_FIRST_TWO.to_string(),
            variant,
            examples,
            skipped: 0,
            accuracy: None,
            perplexity: None,
            bleu: None,
            expl_at_k: None,
            checkpoint: None,
            param_fingerprint,
        }
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>, scale: f64| v.map_or("-".to_string(), |x| format!("{:.2}", x * scale));
        let mut s = String::new();
        let _ = writeln!(s, "variant      {}", self.variant);
        let _ = writeln!(s, "split        {} ({} examples, {} skipped)", self.split, self.examples, self.skipped);
        let _ = writeln!(s, "accuracy     {}", opt(self.accuracy, 1.0));
        let _ = writeln!(s, "perplexity   {}", opt(self.perplexity, 1.0));
        let _ = writeln!(s, "BLEU         {} (references: {})", opt(self.bleu, 100.0), self.reference_policy);
        let _ = writeln!(s, "Expl@K       {}", opt(self.expl_at_k, 1.0));
        if let Some(c) = &self.checkpoint {
            let _ = writeln!(s, "checkpoint   {c}");
        }
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Gold references for BLEU: the first two explanation bodies (fewer if absent).
pub fn references(ex: &EncodedExample) -> Vec<Vec<usize>> {
    (0..ex.explanations.len().min(2)).map(|k| ex.explanation_body(k).to_vec()).collect()
}

/// BLEU of generated explanations against the first two gold explanations.
pub fn generation_bleu(generated: &[Vec<usize>], split: &[EncodedExample]) -> Result<f64> {
    let refs: Vec<Vec<Vec<usize>>> = split.iter().map(references).collect();
    corpus_bleu(generated, &refs)
}

/// BLEU of the third explanation against the first two. Returns the score and
/// the number of examples excluded for lacking three explanations.
pub fn inter_annotator_bleu(examples: &[Example]) -> Result<(f64, usize)> {
    let usable: Vec<&Example> = examples.iter().filter(|e| e.explanations.len() >= 3).collect();
    if usable.is_empty() {
        return Err(Error::invalid("no example has three explanations"));
    }
    let cands: Vec<Vec<String>> = usable.iter().map(|e| e.explanations[2].clone()).collect();
    let refs: Vec<Vec<Vec<String>>> = usable.iter().map(|e| e.explanations[..2].to_vec()).collect();
    Ok((corpus_bleu(&cands, &refs)?, examples.len() - usable.len()))
}

/// Evaluate one model on an encoded split.
pub fn evaluate(model: &Model, split_name: &str, split: &[EncodedExample]) -> Result<(EvalReport, Vec<Prediction>)> {
    let v = model.config.variant;
    let preds = model.predict_all(split)?;
    let mut report = EvalReport::new(split_name, v.to_string(), split.len(), model.params.fingerprint());
    if v.has_classifier() {
        let labels =
            preds.iter().map(|p| p.label.ok_or_else(|| Error::invalid("missing label"))).collect::<Result<Vec<_>>>()?;
        let golds: Vec<_> = split.iter().map(|e| e.label).collect();
        report.accuracy = Some(label_accuracy(&labels, &golds)?);
    }
    if v.generates_explanations() {
        report.perplexity = Some(perplexity(model, split)?);
        let generated: Vec<Vec<usize>> = preds.iter().map(|p| p.explanation.clone().unwrap_or_default()).collect();
        report.bleu = Some(generation_bleu(&generated, split)?);
    }
    Ok((report, preds))
}

/// Evaluate the explain-then-predict pipeline: generator perplexity and BLEU,
/// and the accuracy of labels read off the generated explanations.
pub fn evaluate_pipeline(
    generator: &Model,
    classifier: &Model,
    split_name: &str,
    split: &[EncodedExample],
) -> Result<(EvalReport, Vec<Prediction>)> {
    if classifier.config.variant != Variant::ExplToLbl {
        return Err(Error::invalid("pipeline classifier must be expl-to-lbl"));
    }
    let outs = split
        .par_iter()
        .map(|e| explain_then_predict(generator, classifier, &e.premise, &e.hypothesis))
        .collect::<Result<Vec<_>>>()?;
    let name = format!("{}+{}", generator.config.variant, classifier.config.variant);
    let mut fp = generator.params.fingerprint();
    fp.push('+');
    fp.push_str(&classifier.params.fingerprint());
    let mut report = EvalReport::new(split_name, name, split.len(), fp);
    let labels: Vec<_> = outs.iter().map(|o| o.label).collect();
    let golds: Vec<_> = split.iter().map(|e| e.label).collect();
    report.accuracy = Some(label_accuracy(&labels, &golds)?);
    report.perplexity = Some(perplexity(generator, split)?);
    let generated: Vec<Vec<usize>> = outs.iter().map(|o| o.explanation.clone()).collect();
    report.bleu = Some(generation_bleu(&generated, split)?);
    let preds = outs
        .into_iter()
        .map(|o| Prediction { label: Some(o.label), label_probs: None, explanation: Some(o.explanation) })
        .collect();
    Ok((report, preds))
}

/// One line of the generation dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub predicted_label: String,
    pub explanation: String,
}

pub fn dump_rows(examples: &[Example], preds: &[Prediction], vocab: &Vocabulary) -> Vec<DumpRow> {
    examples
        .iter()
        .zip(preds)
        .map(|(e, p)| DumpRow {
            id: e.id.clone(),
            premise: e.premise_text.clone(),
            hypothesis: e.hypothesis_text.clone(),
            predicted_label: p.label.map(|l| l.to_string()).unwrap_or_default(),
            explanation: p.explanation.as_ref().map(|x| detokenize(&vocab.decode(x))).unwrap_or_default(),
        })
        .collect()
}

pub fn write_dump(path: &Path, rows: &[DumpRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Out-of-domain evaluation without any parameter update.
pub fn transfer_eval(
    model: &Model,
    vocab: &Vocabulary,
    path: &Path,
    columns: &ColumnMap,
) -> Result<(EvalReport, Vec<DumpRow>)> {
    if !model.config.variant.has_classifier() || model.config.variant == Variant::ExplToLbl {
        return Err(Error::invalid(format!("{} cannot label premise/hypothesis pairs", model.config.variant)));
    }
    let before = model.params.fingerprint();
    let load = read_corpus(path, columns, Split::Test, false)?;
    let (kept, encoded): (Vec<Example>, Vec<EncodedExample>) = load
        .examples
        .iter()
        .filter_map(|e| encode_example(e, vocab, Limits::default()).map(|x| (e.clone(), x)))
        .unzip();
    if encoded.is_empty() {
        return Err(Error::invalid(format!("{}: no usable rows", path.display())));
    }
    let preds = model.predict_all(&encoded)?;
    let labels =
        preds.iter().map(|p| p.label.ok_or_else(|| Error::invalid("missing label"))).collect::<Result<Vec<_>>>()?;
    let golds: Vec<_> = encoded.iter().map(|e| e.label).collect();
    let mut report =
        EvalReport::new(&path.display().to_string(), model.config.variant.to_string(), encoded.len(), before);
    report.reference_policy = "none".into();
    report.skipped = load.skipped_bad_label + load.skipped_empty + (load.examples.len() - encoded.len());
    report.accuracy = Some(label_accuracy(&labels, &golds)?);
    let dump = if model.config.variant.generates_explanations() { dump_rows(&kept, &preds, vocab) } else { Vec::new() };
    Ok((report, dump))
}
