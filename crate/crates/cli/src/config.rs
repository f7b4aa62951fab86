//! Sectioned TOML configuration. Every section rejects unknown keys; command
//! line flags are applied on top of the loaded values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nli_explain::autodiff::SgdConfig;
use nli_explain::model::{ModelConfig, Variant};
use nli_explain::quality::FILTER_THRESHOLD;
use nli_explain::text::vocab::MIN_COUNT;
use nli_explain::text::{ColumnMap, Limits};
use nli_explain::training::{alpha_grid, Criterion, TrainConfig, DECODER_SIZES};
use serde::{Deserialize, Serialize};

/// Default data root when neither the config nor the flags name one.
pub const DATA_ROOT_ENV: &str = "NLI_EXPLAIN_DATA";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataSection,
    pub quality: QualitySection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub grid: GridSection,
    /// Written into run manifests; ignored when a manifest is loaded as a config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Base directory for the relative paths below.
    pub root: Option<PathBuf>,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    /// GloVe-format text file; seeded random vectors when absent.
    pub embeddings: Option<PathBuf>,
    pub min_count: usize,
    pub max_sentence: usize,
    pub max_explanation: usize,
    pub columns: ColumnMap,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            root: None,
            train: "train.csv".into(),
            dev: "dev.csv".into(),
            test: "test.csv".into(),
            embeddings: None,
            min_count: MIN_COUNT,
            max_sentence: 84,
            max_explanation: 40,
            columns: ColumnMap::default(),
        }
    }
}

impl DataSection {
    pub fn limits(&self) -> Limits {
        Limits { sentence: self.max_sentence, explanation: self.max_explanation }
    }

    /// Make every data path absolute: relative paths hang off `root`, which
    /// itself defaults to `$NLI_EXPLAIN_DATA` and then the working directory.
    pub fn resolve(&mut self) -> Result<()> {
        let cwd = std::env::current_dir()?;
        let root = match &self.root {
            Some(r) => cwd.join(r),
            None => std::env::var_os(DATA_ROOT_ENV).map(|r| cwd.join(r)).unwrap_or(cwd),
        };
        for p in [&mut self.train, &mut self.dev, &mut self.test] {
            *p = root.join(&*p);
        }
        if let Some(e) = &mut self.embeddings {
            *e = root.join(&*e);
        }
        self.root = Some(root);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualitySection {
    pub threshold: usize,
}

impl Default for QualitySection {
    fn default() -> Self {
        QualitySection { threshold: FILTER_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    pub emb_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub mlp_width: usize,
    pub att_dim: usize,
    pub dropout: f64,
    pub max_decode_len: usize,
    pub attend_width: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::new(Variant::PredExpl, 1);
        ModelSection {
            variant: m.variant,
            emb_dim: m.emb_dim,
            enc_hidden: m.enc_hidden,
            dec_hidden: m.dec_hidden,
            mlp_width: m.mlp_width,
            att_dim: m.att_dim,
            dropout: m.dropout,
            max_decode_len: m.max_decode_len,
            attend_width: m.attend_width,
        }
    }
}

impl ModelSection {
    pub fn to_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            vocab_size,
            emb_dim: self.emb_dim,
            enc_hidden: self.enc_hidden,
            dec_hidden: self.dec_hidden,
            mlp_width: self.mlp_width,
            att_dim: self.att_dim,
            dropout: self.dropout,
            max_decode_len: self.max_decode_len,
            attend_width: self.attend_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Only for variants with two objectives; defaults to 0.6 there.
    pub alpha: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub decay: f64,
    pub clip_norm: Option<f64>,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let s = SgdConfig::default();
        TrainingSection {
            alpha: None,
            epochs: 20,
            batch_size: 64,
            lr: s.lr,
            decay: s.decay,
            clip_norm: s.clip_norm,
            weight_decay: s.weight_decay,
            seed: 1234,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub alphas: Vec<f64>,
    pub decoder_sizes: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { alphas: alpha_grid(), decoder_sizes: DECODER_SIZES.to_vec() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Provenance {
    pub command: Vec<String>,
    pub started: String,
    pub version: String,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let mut cfg: Config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Config::default(),
        };
        cfg.provenance = None;
        Ok(cfg)
    }

    /// Training configuration for the current model and training sections.
    pub fn train_config(&self, vocab_size: usize) -> TrainConfig {
        let model = self.model.to_config(vocab_size);
        let t = &self.training;
        let alpha = if model.variant.uses_alpha() { Some(t.alpha.unwrap_or(0.6)) } else { t.alpha };
        TrainConfig {
            criterion: Criterion::for_variant(model.variant),
            model,
            alpha,
            epochs: t.epochs,
            seed: t.seed,
            batch_size: t.batch_size,
            sgd: SgdConfig { lr: t.lr, decay: t.decay, clip_norm: t.clip_norm, weight_decay: t.weight_decay },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        let back: Config = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[training]\nlearning_rate = 0.1\n").is_err());
        assert!(toml::from_str::<Config>("[nonsense]\n").is_err());
        let c: Config = toml::from_str("[model]\nvariant = \"expl-pred-att\"\n[training]\nepochs = 3\n").unwrap();
        assert_eq!(c.model.variant, Variant::ExplPredAtt);
        assert_eq!(c.training.epochs, 3);
        assert_eq!(c.training.batch_size, 64);
    }

    #[test]
    fn alpha_defaults_only_where_used() {
        let mut c = Config::default();
        assert_eq!(c.train_config(10).alpha, Some(0.6));
        c.model.variant = Variant::ExplPredSeq2Seq;
        assert_eq!(c.train_config(10).alpha, None);
        c.training.alpha = Some(0.3);
        assert!(c.train_config(10).validate().is_err());
    }
}
