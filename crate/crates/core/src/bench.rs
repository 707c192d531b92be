//! Per-sentence training cost as a function of sentence length.
//!
//! Without sentence-level topics the topic model runs once per sentence
//! (on `d - s`); with them it also runs once per distinct target word, so
//! the cost grows with sentence length `M`. The benchmark uses a large
//! topic vocabulary and a tiny language model so the topic-model passes
//! dominate, and distinct words in every sentence so caching cannot help.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{split_sequences, EncodedDoc, EncodedSentence};
use crate::error::{Error, Result};
use crate::model::{LossOptions, ModelConfig, NclmModel, RunMode, Trainable};
use crate::nlm::Variant;
use crate::ntm::LatentTransform;
use crate::numcore::{Graph, SeededRng};
use crate::topics::TermAveraging;

/// Untimed passes per size; they warm caches and the allocator.
const WARMUP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub variant: Variant,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub ntm_vocab: usize,
    pub nlm_vocab: usize,
    pub topics: usize,
    pub ntm_hidden: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub top_n: usize,
    pub sentences_per_doc: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            variant: Variant::LSTM,
            sizes: vec![8, 16, 32],
            repetitions: 5,
            ntm_vocab: 4000,
            nlm_vocab: 64,
            topics: 50,
            ntm_hidden: 256,
            hidden: 16,
            embed_dim: 16,
            top_n: 20,
            sentences_per_doc: 4,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: String,
    pub m: usize,
    /// Median wall time of one forward + backward pass over one sentence.
    pub seconds_per_sentence: f64,
}

fn synthetic_doc(cfg: &BenchConfig, m: usize, rng: &mut SeededRng) -> EncodedDoc {
    let mut next_word = 0usize;
    let sentences = (0..cfg.sentences_per_doc)
        .map(|_| {
            let mut tokens = Vec::with_capacity(m);
            let mut nlm = Vec::with_capacity(m);
            let mut ntm = Vec::with_capacity(m);
            for _ in 0..m {
                let id = next_word % cfg.ntm_vocab;
                next_word += 1;
                tokens.push(format!("w{id}"));
                nlm.push(3 + rng.below(cfg.nlm_vocab - 3));
                ntm.push(Some(id));
            }
            EncodedSentence { tokens, nlm, ntm }
        })
        .collect();
    EncodedDoc { sentences, label: None }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) {
        return Err(Error::Config("sizes must be positive".into()));
    }
    if cfg.nlm_vocab < 4 || cfg.repetitions == 0 {
        return Err(Error::Config("bench needs nlm_vocab >= 4 and at least one repetition".into()));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let config = ModelConfig {
        variant: cfg.variant,
        topics: cfg.topics,
        ntm_hidden: cfg.ntm_hidden,
        hidden: cfg.hidden,
        layers: 1,
        input_dim: cfg.hidden,
        embed_dim: cfg.embed_dim,
        top_n: cfg.top_n,
        dropout: 0.0,
        latent_transform: LatentTransform::Identity,
        term_averaging: TermAveraging::ReturnedCount,
        sdt_once_per_sentence: false,
        whole_document_ntm: false,
        ntm_samples: 1,
        train_topic_embeddings: false,
    };
    let e = rng.uniform_tensor(&[cfg.embed_dim, cfg.ntm_vocab], -0.1, 0.1);
    let model = NclmModel::init(config, cfg.nlm_vocab, cfg.ntm_vocab, e, &mut rng)?;
    let trainable = Trainable {
        ntm: cfg.variant.uses_topics(),
        nlm: true,
        topic_embeddings: false,
    };
    let opts = LossOptions {
        ntm_loss: cfg.variant.uses_topics(),
        sample_latent: true,
    };
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &m in &cfg.sizes {
        let doc = synthetic_doc(cfg, m, &mut rng);
        // One sequence per sentence regardless of length.
        let seqs = split_sequences(&doc.sentences[0], 1, 2, m + 1, 0, 0);
        let mut times = Vec::with_capacity(cfg.repetitions);
        for rep in 0..cfg.repetitions + WARMUP {
            let mut noise = rng.fork();
            let start = Instant::now();
            let mut g = Graph::with_checks(false);
            let vars = model.bind(&mut g, trainable);
            let loss = model.sentence_loss(&mut g, &vars, &doc, 0, &seqs, opts, &mut RunMode::Train(&mut noise))?;
            let root = match loss.ntm {
                Some(n) => g.add(n, loss.nlm)?,
                None => loss.nlm,
            };
            g.backward(root)?;
            if rep >= WARMUP {
                times.push(start.elapsed().as_secs_f64());
            }
        }
        times.sort_by(f64::total_cmp);
        let median = times[times.len() / 2];
        log::info!("bench variant={} m={m} seconds={median:.6}", cfg.variant.label());
        rows.push(BenchRow {
            variant: cfg.variant.label(),
            m,
            seconds_per_sentence: median,
        });
    }
    Ok(rows)
}
