//! Training loops, the weighted joint loss, model selection and checkpointing.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sgd_step, Gradients, Graph, Mode, Real, SgdConfig, SgdState, Var};
use crate::error::{Error, Result};
use crate::evaluation::{label_accuracy, perplexity};
use crate::model::{argmax, example_loss, Model, ModelConfig, Variant};
use crate::seed;
use crate::text::{epoch_order, BatchOrder, EmbeddingTable, EncodedExample, Vocabulary};

const DROPOUT_STREAM: u64 = 0x4452_4f50;
pub const RUN_FILE: &str = "run.json";

/// Decoder widths searched by the grid.
pub const DECODER_SIZES: [usize; 4] = [512, 1024, 2048, 4096];

/// `0.1, 0.2, ..., 0.9`.
pub fn alpha_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// `alpha * l_label + (1 - alpha) * l_expl` on the tape.
pub fn joint_loss<T: Real>(g: &mut Graph<'_, T>, l_label: Var, l_expl: Var, alpha: f64) -> Result<Var> {
    check_alpha(alpha)?;
    let a = g.scale(l_label, T::lit(alpha))?;
    let b = g.scale(l_expl, T::lit(1.0 - alpha))?;
    g.add(a, b)
}

/// Scalar form of [`joint_loss`].
pub fn joint_loss_value(l_label: f64, l_expl: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * l_label + (1.0 - alpha) * l_expl)
}

/// Validation quantity used to pick the best epoch and the best grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    ValAccuracy,
    ValPerplexity,
}

impl Criterion {
    pub fn for_variant(v: Variant) -> Criterion {
        if v.has_classifier() {
            Criterion::ValAccuracy
        } else {
            Criterion::ValPerplexity
        }
    }

    /// `Greater` when `a` is strictly better than `b`. NaN is never better.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        let ord = a.partial_cmp(&b).unwrap_or(Ordering::Equal);
        match self {
            Criterion::ValAccuracy => ord,
            Criterion::ValPerplexity => ord.reverse(),
        }
    }

    fn value(self, e: &EpochRecord) -> Option<f64> {
        match self {
            Criterion::ValAccuracy => e.val_accuracy,
            Criterion::ValPerplexity => e.val_perplexity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Label-loss weight; present exactly for variants trained on two objectives.
    pub alpha: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub sgd: SgdConfig,
    pub criterion: Criterion,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        let v = model.variant;
        TrainConfig {
            alpha: v.uses_alpha().then_some(0.6),
            epochs: 20,
            seed,
            batch_size: 64,
            sgd: SgdConfig::default(),
            criterion: Criterion::for_variant(v),
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let v = self.model.variant;
        match (v.uses_alpha(), self.alpha) {
            (true, Some(a)) => check_alpha(a)?,
            (true, None) => return Err(Error::invalid(format!("{v} needs alpha"))),
            (false, Some(_)) => return Err(Error::invalid(format!("{v} does not take alpha"))),
            (false, None) => {}
        }
        if self.criterion != Criterion::for_variant(v) {
            return Err(Error::invalid(format!("{v} is selected by {:?}", Criterion::for_variant(v))));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        SgdState::new(self.sgd)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// Mean per-example training loss.
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    /// Teacher-forced next-token accuracy during training, percent.
    pub train_token_accuracy: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub val_perplexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_value: f64,
    pub checkpoint: Option<PathBuf>,
    pub param_fingerprint: String,
}

impl RunRecord {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Encoded splits plus what is needed to build and save a model.
#[derive(Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a [EncodedExample],
    pub val: &'a [EncodedExample],
    pub vocab: &'a Vocabulary,
    pub embeddings: &'a EmbeddingTable,
}

struct ExampleStep {
    grads: Gradients<f32>,
    loss: f64,
    label_correct: Option<bool>,
    correct_tokens: usize,
    target_tokens: usize,
}

fn example_step(
    model: &Model,
    ex: &EncodedExample,
    alpha: f64,
    rng_seed: u64,
    epoch: usize,
    index: usize,
) -> Result<ExampleStep> {
    let mut rng = seed::rng(rng_seed, &[DROPOUT_STREAM, epoch as u64, index as u64]);
    let mut g = Graph::new(&model.params);
    let parts = example_loss(&mut g, &model.config, ex, alpha, Mode::Train, &mut rng)?;
    let loss = g.scalar(parts.total).as_f64();
    let label_correct = parts.label_probs.map(|p| argmax(g.value(p)) == ex.label.index());
    // A non-finite loss is reported to the caller as divergence, not as a tape error.
    let grads = if loss.is_finite() { g.backward(parts.total)? } else { Gradients::default() };
    Ok(ExampleStep {
        grads,
        loss,
        label_correct,
        correct_tokens: parts.correct_tokens,
        target_tokens: parts.target_tokens,
    })
}

/// Validation accuracy (classifier variants) and perplexity (generators).
pub fn validation_metrics(model: &Model, val: &[EncodedExample]) -> Result<(Option<f64>, Option<f64>)> {
    let v = model.config.variant;
    let acc = if v.has_classifier() {
        let preds = val.par_iter().map(|e| model.predict_label(e)).collect::<Result<Vec<_>>>()?;
        let golds: Vec<_> = val.iter().map(|e| e.label).collect();
        Some(label_accuracy(&preds, &golds)?)
    } else {
        None
    };
    let ppl = if v.generates_explanations() { Some(perplexity(model, val)?) } else { None };
    Ok((acc, ppl))
}

/// Train one configuration from a fresh initialization. The returned model
/// holds the parameters of the best epoch; when `checkpoint_dir` is given the
/// best model and the run record are written there.
pub fn train(config: &TrainConfig, data: TrainData<'_>, checkpoint_dir: Option<&Path>) -> Result<(Model, RunRecord)> {
    config.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::invalid("training and validation splits must be non-empty"));
    }
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let mut model = Model::new(config.model.clone(), data.embeddings, config.seed)?;
    let mut sgd = SgdState::new(config.sgd)?;
    let alpha = config.alpha.unwrap_or(1.0);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, crate::autodiff::ParamStore<f32>)> = None;
    let mut saved: Option<PathBuf> = None;

    for epoch in 0..config.epochs {
        let lr = sgd.lr();
        let order = epoch_order(data.train.len(), BatchOrder::Shuffled { seed: config.seed, epoch: epoch as u64 });
        let (mut loss_sum, mut label_hits, mut label_seen, mut tok_ok, mut tok_all) =
            (0.0f64, 0usize, 0usize, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let steps = chunk
                .par_iter()
                .map(|&i| example_step(&model, &data.train[i], alpha, config.seed, epoch, i))
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / chunk.len() as f32;
            let mut batch = Gradients::default();
            for s in &steps {
                if !s.loss.is_finite() {
                    return Err(Error::Diverged { epoch, last_good: saved });
                }
                batch.add_scaled(&s.grads, scale);
                loss_sum += s.loss;
                if let Some(ok) = s.label_correct {
                    label_seen += 1;
                    label_hits += ok as usize;
                }
                tok_ok += s.correct_tokens;
                tok_all += s.target_tokens;
            }
            model.params.accumulate(&batch);
            match sgd_step(&mut model.params, &sgd) {
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, last_good: saved }),
                r => r?,
            }
        }
        sgd.end_epoch();

        let (val_accuracy, val_perplexity) = validation_metrics(&model, data.val)?;
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / data.train.len() as f64,
            train_accuracy: (label_seen > 0).then(|| 100.0 * label_hits as f64 / label_seen as f64),
            train_token_accuracy: (tok_all > 0).then(|| 100.0 * tok_ok as f64 / tok_all as f64),
            val_accuracy,
            val_perplexity,
        };
        log::info!(
            "epoch {epoch}: lr {lr:.5} loss {:.4} val acc {:?} val ppl {:?}",
            rec.train_loss,
            rec.val_accuracy,
            rec.val_perplexity
        );
        let value = config.criterion.value(&rec).ok_or_else(|| Error::invalid("criterion not computable"))?;
        let improved = match &best {
            None => true,
            Some((_, b, _)) => config.criterion.compare(value, *b) == Ordering::Greater,
        };
        if improved {
            if let Some(dir) = checkpoint_dir {
                model.save(dir, data.vocab)?;
                saved = Some(dir.to_path_buf());
            }
            best = Some((epoch, value, model.params.clone()));
        }
        epochs.push(rec);
    }

    let (best_epoch, best_value, params) = best.expect("at least one epoch");
    model.params = params;
    let record = RunRecord {
        config: config.clone(),
        seed: config.seed,
        epochs,
        best_epoch,
        best_value,
        checkpoint: saved,
        param_fingerprint: model.params.fingerprint(),
    };
    if let Some(dir) = checkpoint_dir {
        record.write(&dir.join(RUN_FILE))?;
    }
    Ok((model, record))
}

/// Outcome of a grid search.
#[derive(Debug, Clone)]
pub struct GridResult {
    /// One record per config, in config order.
    pub runs: Vec<RunRecord>,
    pub best: usize,
    pub model: Model,
}

/// Rank two runs: criterion first, then smaller decoder, then lower alpha.
fn better_run(a: &RunRecord, b: &RunRecord) -> bool {
    let crit = a.config.criterion.compare(a.best_value, b.best_value);
    if crit != Ordering::Equal {
        return crit == Ordering::Greater;
    }
    let (da, db) = (a.config.model.dec_hidden, b.config.model.dec_hidden);
    if da != db {
        return da < db;
    }
    a.config.alpha.unwrap_or(0.0) < b.config.alpha.unwrap_or(0.0)
}

/// Train every config (in parallel, each with its own seed) and keep the best.
/// Run `i` checkpoints under `dir/run-<i>`.
pub fn grid_select(configs: &[TrainConfig], data: TrainData<'_>, dir: Option<&Path>) -> Result<GridResult> {
    if configs.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let criterion = configs[0].criterion;
    if configs.iter().any(|c| c.criterion != criterion) {
        return Err(Error::invalid("grid configs disagree on the selection criterion"));
    }
    let dirs: Vec<Option<PathBuf>> = (0..configs.len()).map(|i| dir.map(|d| d.join(format!("run-{i:02}")))).collect();
    let mut results = configs
        .par_iter()
        .zip(dirs.par_iter())
        .map(|(c, d)| train(c, data, d.as_deref()))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..results.len() {
        if better_run(&results[i].1, &results[best].1) {
            best = i;
        }
    }
    let runs: Vec<RunRecord> = results.iter().map(|(_, r)| r.clone()).collect();
    let model = results.swap_remove(best).0;
    Ok(GridResult { runs, best, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_loss_examples() {
        assert_eq!(joint_loss_value(2.0, 10.0, 1.0).unwrap(), 2.0);
        assert_eq!(joint_loss_value(2.0, 10.0, 0.0).unwrap(), 10.0);
        assert!((joint_loss_value(2.0, 10.0, 0.6).unwrap() - 5.2).abs() < 1e-12);
        assert!(joint_loss_value(1.0, 1.0, 1.1).is_err());
        assert!(joint_loss_value(1.0, 1.0, -0.1).is_err());
        assert!(joint_loss_value(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn joint_loss_on_tape() {
        let store = crate::autodiff::ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let a = g.vector(vec![2.0]).unwrap();
        let b = g.vector(vec![10.0]).unwrap();
        let l = joint_loss(&mut g, a, b, 0.6).unwrap();
        assert!((g.scalar(l) - 5.2).abs() < 1e-12);
        assert!(joint_loss(&mut g, a, b, 2.0).is_err());
    }

    #[test]
    fn grids() {
        let a = alpha_grid();
        assert_eq!(a.len(), 9);
        assert_eq!(a[0], 0.1);
        assert_eq!(a[5], 0.6);
        assert_eq!(a[8], 0.9);
    }

    #[test]
    fn criterion_direction() {
        assert_eq!(Criterion::ValAccuracy.compare(90.0, 80.0), Ordering::Greater);
        assert_eq!(Criterion::ValPerplexity.compare(9.0, 10.0), Ordering::Greater);
        assert_eq!(Criterion::ValPerplexity.compare(f64::NAN, 10.0), Ordering::Equal);
        assert_eq!(Criterion::for_variant(Variant::PredExpl), Criterion::ValAccuracy);
        assert_eq!(Criterion::for_variant(Variant::ExplPredAtt), Criterion::ValPerplexity);
    }

    #[test]
    fn config_invariants() {
        let mut c = TrainConfig::new(ModelConfig::toy(Variant::PredExpl, 20), 1);
        c.validate().unwrap();
        c.alpha = None;
        assert!(c.validate().is_err());
        let mut s = TrainConfig::new(ModelConfig::toy(Variant::ExplPredSeq2Seq, 20), 1);
        s.validate().unwrap();
        s.alpha = Some(0.5);
        assert!(s.validate().is_err());
        s.alpha = None;
        s.criterion = Criterion::ValAccuracy;
        assert!(s.validate().is_err());
    }
}
