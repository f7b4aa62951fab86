use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "bilstm-max")]
    BilstmMax,
    #[serde(rename = "hyp2lbl")]
    Hyp2Lbl,
    #[serde(rename = "hyp2expl")]
    Hyp2Expl,
    #[serde(rename = "pred-expl")]
    PredExpl,
    #[serde(rename = "expl-pred-seq2seq")]
    ExplPredSeq2Seq,
    #[serde(rename = "expl-pred-att")]
    ExplPredAtt,
    #[serde(rename = "expl-to-lbl")]
    ExplToLbl,
    #[serde(rename = "autoenc")]
    AutoEnc,
}

/// Which sentence an encoder reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Premise,
    Hypothesis,
    Explanation,
}

impl Role {
    pub fn prefix(self) -> &'static str {
        match self {
            Role::Premise => "enc.premise",
            Role::Hypothesis => "enc.hypothesis",
            Role::Explanation => "enc.explanation",
        }
    }
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::BilstmMax,
        Variant::Hyp2Lbl,
        Variant::Hyp2Expl,
        Variant::PredExpl,
        Variant::ExplPredSeq2Seq,
        Variant::ExplPredAtt,
        Variant::ExplToLbl,
        Variant::AutoEnc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::BilstmMax => "bilstm-max",
            Variant::Hyp2Lbl => "hyp2lbl",
            Variant::Hyp2Expl => "hyp2expl",
            Variant::PredExpl => "pred-expl",
            Variant::ExplPredSeq2Seq => "expl-pred-seq2seq",
            Variant::ExplPredAtt => "expl-pred-att",
            Variant::ExplToLbl => "expl-to-lbl",
            Variant::AutoEnc => "autoenc",
        }
    }

    pub fn encoders(self) -> &'static [Role] {
        match self {
            Variant::Hyp2Lbl | Variant::Hyp2Expl => &[Role::Hypothesis],
            Variant::ExplToLbl => &[Role::Explanation],
            _ => &[Role::Premise, Role::Hypothesis],
        }
    }

    pub fn has_classifier(self) -> bool {
        matches!(
            self,
            Variant::BilstmMax | Variant::Hyp2Lbl | Variant::PredExpl | Variant::ExplToLbl | Variant::AutoEnc
        )
    }

    pub fn has_decoder(self) -> bool {
        matches!(
            self,
            Variant::Hyp2Expl | Variant::PredExpl | Variant::ExplPredSeq2Seq | Variant::ExplPredAtt | Variant::AutoEnc
        )
    }

    /// The first decoder input is a label token rather than `<BOS>`.
    pub fn label_conditioned(self) -> bool {
        self == Variant::PredExpl
    }

    pub fn has_attention(self) -> bool {
        self == Variant::ExplPredAtt
    }

    /// Trained on a weighted sum of a label loss and a generation loss.
    pub fn uses_alpha(self) -> bool {
        matches!(self, Variant::PredExpl | Variant::AutoEnc)
    }

    /// Generates explanations (as opposed to reconstructing inputs).
    pub fn generates_explanations(self) -> bool {
        matches!(self, Variant::Hyp2Expl | Variant::PredExpl | Variant::ExplPredSeq2Seq | Variant::ExplPredAtt)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| Error::invalid(format!("unknown variant `{s}`")))
    }
}

/// Architecture hyper-parameters. Full-size defaults; tests use toy values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub emb_dim: usize,
    /// Per-direction encoder hidden size; sentence vectors have twice this.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub mlp_width: usize,
    /// Width of the attention projections.
    pub att_dim: usize,
    /// Recurrent dropout rate on the decoder.
    pub dropout: f64,
    pub max_decode_len: usize,
    /// Number of positions scored by each attention head.
    pub attend_width: usize,
}

impl ModelConfig {
    pub fn new(variant: Variant, vocab_size: usize) -> Self {
        ModelConfig {
            variant,
            vocab_size,
            emb_dim: 300,
            enc_hidden: 2048,
            dec_hidden: 512,
            mlp_width: 512,
            att_dim: 512,
            dropout: 0.5,
            max_decode_len: 40,
            attend_width: 84,
        }
    }

    /// Small dimensions for tests.
    pub fn toy(variant: Variant, vocab_size: usize) -> Self {
        ModelConfig {
            emb_dim: 8,
            enc_hidden: 8,
            dec_hidden: 8,
            mlp_width: 8,
            att_dim: 8,
            ..Self::new(variant, vocab_size)
        }
    }

    pub fn sentence_dim(&self) -> usize {
        2 * self.enc_hidden
    }

    pub fn feature_dim(&self) -> usize {
        4 * self.sentence_dim()
    }

    /// Input width of the classifier.
    pub fn classifier_input(&self) -> usize {
        match self.variant {
            Variant::Hyp2Lbl | Variant::ExplToLbl => self.sentence_dim(),
            _ => self.feature_dim(),
        }
    }

    /// Width of the vector the decoder is conditioned on.
    pub fn decoder_condition(&self) -> usize {
        match self.variant {
            Variant::Hyp2Expl | Variant::AutoEnc => self.sentence_dim(),
            _ => self.feature_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.vocab_size, self.emb_dim, self.enc_hidden, self.dec_hidden, self.mlp_width, self.att_dim];
        if dims.contains(&0) {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_decode_len == 0 || self.attend_width == 0 {
            return Err(Error::invalid("max_decode_len and attend_width must be positive"));
        }
        Ok(())
    }
}
