use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::VocabConfig;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nlm::{Variant, VariantKind};
use crate::ntm::LatentTransform;
use crate::topics::TermAveraging;

/// Storage precision of parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl Precision {
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::F32 => x as f32 as f64,
            Precision::F64 => x,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::Config(format!("unknown precision {other:?}"))),
        }
    }
}

/// Training configuration. The JSON form uses these field names verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    #[serde(rename = "topN")]
    pub top_n: usize,
    #[serde(rename = "K")]
    pub topics: usize,
    pub variant: Variant,
    pub lr: f64,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub ntm_pretrain_epochs: usize,
    pub nlm_pretrain_epochs: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub precision: Precision,
    pub ntm_hidden: usize,
    pub hidden: usize,
    pub layers: usize,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub dropout: f64,
    pub grad_clip: f64,
    pub latent_transform: LatentTransform,
    pub term_averaging: TermAveraging,
    pub sdt_once_per_sentence: bool,
    pub whole_document_ntm: bool,
    pub ntm_samples: usize,
    pub train_topic_embeddings: bool,
    pub skip_ntm_pretrain: bool,
    pub skip_nlm_pretrain: bool,
    pub valid_fraction: f64,
    pub vocab: VocabConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.01,
            top_n: 20,
            topics: 150,
            variant: Variant {
                kind: VariantKind::Leta,
                sdt: false,
            },
            lr: 1e-3,
            batch_size: 64,
            max_seq_len: 30,
            ntm_pretrain_epochs: 20,
            nlm_pretrain_epochs: 10,
            max_epochs: 100,
            early_stop_patience: 5,
            seed: 1,
            precision: Precision::F64,
            ntm_hidden: 256,
            hidden: 600,
            layers: 1,
            input_dim: 300,
            embed_dim: 300,
            dropout: 0.4,
            grad_clip: 5.0,
            latent_transform: LatentTransform::Identity,
            term_averaging: TermAveraging::ReturnedCount,
            sdt_once_per_sentence: false,
            whole_document_ntm: false,
            ntm_samples: 1,
            train_topic_embeddings: false,
            skip_ntm_pretrain: false,
            skip_nlm_pretrain: false,
            valid_fraction: 0.1,
            vocab: VocabConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            variant: self.variant,
            topics: self.topics,
            ntm_hidden: self.ntm_hidden,
            hidden: self.hidden,
            layers: self.layers,
            input_dim: self.input_dim,
            embed_dim: self.embed_dim,
            top_n: self.top_n,
            dropout: self.dropout,
            latent_transform: self.latent_transform,
            term_averaging: self.term_averaging,
            sdt_once_per_sentence: self.sdt_once_per_sentence,
            whole_document_ntm: self.whole_document_ntm,
            ntm_samples: self.ntm_samples,
            train_topic_embeddings: self.train_topic_embeddings,
        }
    }

    /// Range checks; returns every offending key.
    pub fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut flag = |ok: bool, key: &str, why: &str| {
            if !ok {
                bad.push(format!("{key}: {why}"));
            }
        };
        flag((0.0..=1.0).contains(&self.alpha), "alpha", "must lie in [0, 1]");
        flag(self.top_n > 0, "topN", "must be positive");
        flag(self.topics > 0, "K", "must be positive");
        flag(self.variant.validate().is_ok(), "variant", "lstm cannot use sdt");
        flag(self.lr > 0.0 && self.lr.is_finite(), "lr", "must be positive");
        flag(self.batch_size > 0, "batch_size", "must be positive");
        flag(self.max_seq_len > 0, "max_seq_len", "must be positive");
        flag(self.ntm_hidden > 0, "ntm_hidden", "must be positive");
        flag(self.hidden > 0, "hidden", "must be positive");
        flag((1..=2).contains(&self.layers), "layers", "must be 1 or 2");
        flag(self.input_dim > 0, "input_dim", "must be positive");
        flag(self.embed_dim > 0, "embed_dim", "must be positive");
        flag((0.0..1.0).contains(&self.dropout), "dropout", "must lie in [0, 1)");
        flag(self.grad_clip > 0.0, "grad_clip", "must be positive");
        flag(self.ntm_samples > 0, "ntm_samples", "must be positive");
        flag(
            self.valid_fraction > 0.0 && self.valid_fraction < 1.0,
            "valid_fraction",
            "must lie in (0, 1)",
        );
        flag((0.0..1.0).contains(&self.vocab.top_frac), "vocab", "top_frac must lie in [0, 1)");
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(bad))
        }
    }

    /// Parses and validates a JSON config. Missing keys take defaults;
    /// unknown or ill-typed keys are all reported together.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(given) = value else {
            return Err(Error::Schema(vec!["<root>: expected a JSON object".into()]));
        };
        let defaults = serde_json::to_value(TrainConfig::default())?;
        let Value::Object(known) = defaults.clone() else {
            unreachable!("config serializes to an object")
        };
        let mut bad = Vec::new();
        let mut usable = serde_json::Map::new();
        for (key, v) in given {
            if !known.contains_key(&key) {
                bad.push(format!("{key}: unknown key"));
                continue;
            }
            let mut probe = defaults.clone();
            probe[&key] = v.clone();
            match serde_json::from_value::<TrainConfig>(probe) {
                Ok(_) => {
                    usable.insert(key, v);
                }
                Err(e) => bad.push(format!("{key}: {e}")),
            }
        }
        let config: TrainConfig = serde_json::from_value(Value::Object(usable))?;
        if let Err(Error::Schema(range)) = config.check() {
            bad.extend(range);
        }
        if bad.is_empty() {
            Ok(config)
        } else {
            Err(Error::Schema(bad))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Canonical JSON (fixed key order, shortest round-trip floats).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
