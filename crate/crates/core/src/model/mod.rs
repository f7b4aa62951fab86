//! The model zoo: BiLSTM max-pool encoders, the feature MLP, LSTM decoders
//! (plain and attentive) and the eight trainable variants built from them.

mod attention;
mod config;
mod decoder;
mod forward;
mod infer;
mod layers;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use attention::{attend, attention_step, precompute_head, AttentionOut, HeadCache, HYPOTHESIS_HEAD, PREMISE_HEAD};
pub use config::{ModelConfig, Role, Variant};
pub use decoder::{greedy, teacher_forced, Conditioning, Decoder, TeacherForced};
pub use forward::{example_loss, LossParts};
pub use infer::{explain_then_predict, PipelineOutput, Prediction, TokenStats};
pub use layers::{argmax, classify, embed, encode_sentence, feature_vector, Encoded, LABEL_EMB, WORD_EMB};

use crate::autodiff::{init_uniform, load_checkpoint, save_checkpoint, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::seed;
use crate::text::vocab::LABEL_BASE;
use crate::text::{EmbeddingTable, Vocabulary};

const INIT_STREAM: u64 = 0x494e_4954;
pub const MODEL_FILE: &str = "model.json";
pub const VOCAB_FILE: &str = "vocab.txt";

/// A variant's configuration together with its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

/// Self-description written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub variant: Variant,
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub param_fingerprint: String,
    pub params: Vec<ManifestParam>,
}

fn lstm_shapes(prefix: &str, input: usize, hidden: usize) -> Vec<(String, Vec<usize>, usize)> {
    vec![
        (format!("{prefix}.w_ih"), vec![4 * hidden, input], input),
        (format!("{prefix}.w_hh"), vec![4 * hidden, hidden], hidden),
        (format!("{prefix}.b"), vec![4 * hidden], hidden),
    ]
}

fn affine_shapes(name: &str, input: usize, output: usize) -> Vec<(String, Vec<usize>, usize)> {
    vec![(format!("{name}.w"), vec![output, input], input), (format!("{name}.b"), vec![output], input)]
}

/// Every trainable array of a variant: `(name, shape, fan_in)`.
pub fn parameter_layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, usize)> {
    let mut out = Vec::new();
    let (e, h, d) = (cfg.emb_dim, cfg.enc_hidden, cfg.dec_hidden);
    for role in cfg.variant.encoders() {
        for dir in ["fwd", "bwd"] {
            out.extend(lstm_shapes(&format!("{}.{dir}", role.prefix()), e, h));
        }
    }
    if cfg.variant.has_classifier() {
        let w = cfg.mlp_width;
        out.extend(affine_shapes("mlp.0", cfg.classifier_input(), w));
        out.extend(affine_shapes("mlp.1", w, w));
        out.extend(affine_shapes("mlp.2", w, 3));
    }
    if cfg.variant.has_decoder() {
        let c = cfg.decoder_condition();
        out.extend(affine_shapes("dec.init_h", c, d));
        out.extend(affine_shapes("dec.init_c", c, d));
        let step_input = if cfg.variant.has_attention() {
            let (a, s) = (cfg.att_dim, cfg.sentence_dim());
            for head in [PREMISE_HEAD, HYPOTHESIS_HEAD] {
                for (k, input) in [("1", s), ("c", d), ("2", s)] {
                    out.push((format!("{head}.w{k}"), vec![a, input], input));
                    out.push((format!("{head}.b{k}"), vec![a], input));
                }
            }
            2 * a + e
        } else {
            out.extend(affine_shapes("dec.cond", c, d));
            e + d
        };
        out.extend(lstm_shapes("dec.lstm", step_input, d));
        out.extend(affine_shapes("dec.out", d, cfg.vocab_size));
    }
    out
}

impl Model {
    /// Fresh model. Word vectors come from `table` and stay frozen; the three
    /// label-token rows are copied into a trainable table.
    pub fn new(config: ModelConfig, table: &EmbeddingTable, seed: u64) -> Result<Self> {
        config.validate()?;
        if table.dim != config.emb_dim || table.rows() != config.vocab_size {
            return Err(Error::shape(
                "Model::new",
                format!(
                    "embedding table {}x{} vs config {}x{}",
                    table.rows(),
                    table.dim,
                    config.vocab_size,
                    config.emb_dim
                ),
            ));
        }
        let mut params = ParamStore::new();
        params.insert(WORD_EMB, Tensor::new(vec![config.vocab_size, config.emb_dim], table.data.clone())?, false)?;
        let labels: Vec<f32> = (0..3).flat_map(|k| table.row(LABEL_BASE + k).to_vec()).collect();
        params.insert(LABEL_EMB, Tensor::new(vec![3, config.emb_dim], labels)?, true)?;
        let mut rng = seed::rng(seed, &[INIT_STREAM]);
        for (name, shape, fan_in) in parameter_layout(&config) {
            params.insert(name, init_uniform(&mut rng, shape, fan_in), true)?;
        }
        Ok(Model { config, params })
    }

    pub fn manifest(&self, vocab: &Vocabulary) -> ModelManifest {
        ModelManifest {
            variant: self.config.variant,
            config: self.config.clone(),
            vocab_hash: vocab.hash(),
            param_fingerprint: self.params.fingerprint(),
            params: self
                .params
                .iter()
                .map(|p| ManifestParam { name: p.name.clone(), shape: p.tensor.shape.clone(), trainable: p.trainable })
                .collect(),
        }
    }

    /// Write parameters, manifest and vocabulary into `dir`.
    pub fn save(&self, dir: &Path, vocab: &Vocabulary) -> Result<ModelManifest> {
        save_checkpoint(dir, &self.params)?;
        let manifest = self.manifest(vocab);
        fs::write(dir.join(MODEL_FILE), serde_json::to_string_pretty(&manifest)?)?;
        vocab.save(&dir.join(VOCAB_FILE))?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<(Model, Vocabulary)> {
        let manifest: ModelManifest = serde_json::from_str(&fs::read_to_string(dir.join(MODEL_FILE))?)?;
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        if vocab.hash() != manifest.vocab_hash {
            return Err(Error::Checkpoint("vocabulary does not match the model manifest".into()));
        }
        let params = load_checkpoint(dir)?;
        let model = Model { config: manifest.config.clone(), params };
        let expected: Vec<(&str, &[usize])> =
            manifest.params.iter().map(|p| (p.name.as_str(), p.shape.as_slice())).collect();
        let got: Vec<(&str, &[usize])> =
            model.params.iter().map(|p| (p.name.as_str(), p.tensor.shape.as_slice())).collect();
        if expected != got {
            return Err(Error::Checkpoint("parameter arrays do not match the model manifest".into()));
        }
        Ok((model, vocab))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(v: usize, d: usize) -> EmbeddingTable {
        let vocab = Vocabulary::from_tokens((0..v - 7).map(|i| format!("w{i}"))).unwrap();
        EmbeddingTable::random(&vocab, d, 1)
    }

    #[test]
    fn structural_manifests() {
        let t = table(30, 8);
        let names = |v: Variant| -> Vec<String> {
            Model::new(ModelConfig::toy(v, 30), &t, 0).unwrap().params.names().into_iter().map(String::from).collect()
        };
        let has = |ns: &[String], p: &str| ns.iter().any(|n| n.starts_with(p));

        let hyp2lbl = names(Variant::Hyp2Lbl);
        assert!(!has(&hyp2lbl, "enc.premise") && has(&hyp2lbl, "enc.hypothesis") && has(&hyp2lbl, "mlp."));
        let hyp2expl = names(Variant::Hyp2Expl);
        assert!(!has(&hyp2expl, "enc.premise") && !has(&hyp2expl, "mlp.") && has(&hyp2expl, "dec."));
        let s2s = names(Variant::ExplPredSeq2Seq);
        assert!(!has(&s2s, "mlp.") && !has(&s2s, "att.") && has(&s2s, "dec.cond"));
        let att = names(Variant::ExplPredAtt);
        assert!(has(&att, "att.premise.w1") && has(&att, "att.hypothesis.w1") && !has(&att, "mlp."));
        let pe = names(Variant::PredExpl);
        assert!(has(&pe, "mlp.") && has(&pe, "dec.") && has(&pe, "enc.premise"));
        let e2l = names(Variant::ExplToLbl);
        assert!(has(&e2l, "enc.explanation") && !has(&e2l, "enc.premise") && !has(&e2l, "dec."));
        let ae = names(Variant::AutoEnc);
        assert_eq!(ae.iter().filter(|n| n.starts_with("dec.lstm")).count(), 3);
        let base = names(Variant::BilstmMax);
        assert!(!has(&base, "dec.") && has(&base, "mlp.2"));
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn full_size_dimensions() {
        let cfg = ModelConfig::new(Variant::PredExpl, 100);
        assert_eq!(cfg.sentence_dim(), 4096);
        assert_eq!(cfg.feature_dim(), 16384);
        let layout = parameter_layout(&cfg);
        let shape = |n: &str| layout.iter().find(|(name, _, _)| name == n).unwrap().1.clone();
        assert_eq!(shape("mlp.0.w"), [512, 16384]);
        assert_eq!(shape("mlp.2.w"), [3, 512]);
        assert_eq!(shape("dec.init_h.w"), [512, 16384]);
    }

    #[test]
    fn save_load_round_trip() {
        let vocab = Vocabulary::from_tokens((0..23).map(|i| format!("w{i}"))).unwrap();
        let t = EmbeddingTable::random(&vocab, 8, 3);
        let m = Model::new(ModelConfig::toy(Variant::ExplPredAtt, 30), &t, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = m.save(dir.path(), &vocab).unwrap();
        let (back, v2) = Model::load(dir.path()).unwrap();
        assert_eq!(v2, vocab);
        assert_eq!(back.config, m.config);
        assert_eq!(back.params.fingerprint(), manifest.param_fingerprint);
    }
}
