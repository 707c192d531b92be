//! Joint training of the topic model and the language model.
//!
//! Three phases: topic-model pretraining on whole documents, language-model
//! pretraining with the topic model frozen (`h = μ`), then joint training on
//! `α·L_ntm + (1 - α)·L_nlm` with early stopping on validation perplexity.
//! The plain LSTM-LM skips the topic-model phase and trains on `L_nlm` only.

mod checkpoint;
mod config;

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointHeader, EpochRecord, Progress, VocabSnapshot, FORMAT_VERSION, MAGIC};
pub use config::{Precision, TrainConfig};

use crate::corpus::{
    build_vocabs, load_embeddings, random_embeddings, split_sequences, DualVocab, EncodedCorpus, RawCorpus, Sequence,
    TokenView,
};
use crate::error::{Error, Result};
use crate::evalkit::lm_perplexity;
use crate::model::{LossOptions, ModelVars, NclmModel, RunMode, Trainable};
use crate::nlm::{Variant, VariantKind};
use crate::ntm::{self, Noise};
use crate::numcore::{Graph, SeededRng, Tensor, Var};
use crate::parallel::pool;

/// `α·L_ntm + (1 - α)·L_nlm`.
pub fn joint_loss(ntm_loss: f64, nlm_loss: f64, alpha: f64) -> f64 {
    alpha * ntm_loss + (1.0 - alpha) * nlm_loss
}

pub fn joint_loss_var(g: &mut Graph, ntm_loss: Var, nlm_loss: Var, alpha: f64) -> Result<Var> {
    let a = g.scale(ntm_loss, alpha)?;
    let b = g.scale(nlm_loss, 1.0 - alpha)?;
    g.add(a, b)
}

/// One modeled sentence and its length-capped sequences.
#[derive(Debug, Clone)]
pub struct SentenceUnit {
    pub doc: usize,
    pub sentence: usize,
    pub sequences: Vec<Sequence>,
}

pub fn sentence_units(corpus: &EncodedCorpus, vocab: &DualVocab, max_len: usize) -> Vec<SentenceUnit> {
    let mut out = Vec::new();
    for (d, doc) in corpus.docs.iter().enumerate() {
        for (s, sent) in doc.sentences.iter().enumerate() {
            out.push(SentenceUnit {
                doc: d,
                sentence: s,
                sequences: split_sequences(sent, vocab.bos(), vocab.eos(), max_len, d, s),
            });
        }
    }
    out
}

/// Vocabularies, encoded splits and embedding matrices for one run.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub vocab: DualVocab,
    pub train: EncodedCorpus,
    pub valid: EncodedCorpus,
    /// `[input_dim, V]` initial input embeddings, when a file was given.
    pub input_embeddings: Option<Tensor>,
    /// `[embed_dim, Z]`.
    pub topic_embeddings: Tensor,
}

impl TrainData {
    /// Builds vocabularies from `train`. Without `valid`, the trailing
    /// `valid_fraction` of `train` is held out.
    pub fn prepare(
        config: &TrainConfig,
        train: RawCorpus,
        valid: Option<RawCorpus>,
        embeddings: Option<&Path>,
        stopwords: BTreeSet<String>,
    ) -> Result<Self> {
        let (train, valid) = match valid {
            Some(v) => (train, v),
            None => {
                if train.len() < 2 {
                    return Err(Error::Empty("need at least two documents to hold out validation".into()));
                }
                train.split_tail(config.valid_fraction)
            }
        };
        let vocab = build_vocabs(&train, &config.vocab, stopwords)?;
        Self::with_vocab(config, vocab, &train, &valid, embeddings)
    }

    pub fn with_vocab(
        config: &TrainConfig,
        vocab: DualVocab,
        train: &RawCorpus,
        valid: &RawCorpus,
        embeddings: Option<&Path>,
    ) -> Result<Self> {
        let seed = config.seed ^ 0x5eed_e3b0;
        let (input_embeddings, topic_embeddings) = match embeddings {
            Some(path) => {
                if config.input_dim != config.embed_dim {
                    return Err(Error::Config(format!(
                        "an embedding file sets both input_dim ({}) and embed_dim ({})",
                        config.input_dim, config.embed_dim
                    )));
                }
                (
                    Some(load_embeddings(path, config.input_dim, &vocab.nlm, seed)?),
                    load_embeddings(path, config.embed_dim, &vocab.ntm, seed.wrapping_add(1))?,
                )
            }
            None => (None, random_embeddings(config.embed_dim, vocab.ntm.len(), seed)),
        };
        Ok(TrainData {
            train: EncodedCorpus::encode(train, &vocab),
            valid: EncodedCorpus::encode(valid, &vocab),
            vocab,
            input_embeddings,
            topic_embeddings,
        })
    }

    pub fn init_model(&self, config: &TrainConfig, rng: &mut SeededRng) -> Result<NclmModel> {
        let mut model = NclmModel::init(
            config.model_config(),
            self.vocab.nlm.len(),
            self.vocab.ntm.len(),
            self.topic_embeddings.clone(),
            rng,
        )?;
        if let Some(e) = &self.input_embeddings {
            if e.shape() != model.nlm.input_embedding.shape() {
                return Err(Error::dim("init_model", "input embedding shape"));
            }
            model.nlm.input_embedding = e.clone();
        }
        round_params(&mut model, config.precision);
        Ok(model)
    }
}

fn round_params(model: &mut NclmModel, precision: Precision) {
    if precision == Precision::F32 {
        for t in model.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = precision.round(*x));
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, params: &[&Tensor]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|t| Tensor::zeros(t.shape())).collect(),
            v: params.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    /// Updates every parameter that has a gradient.
    pub fn update(&mut self, params: Vec<&mut Tensor>, grads: &[Option<Tensor>]) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, (x, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                *x -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_global_norm(grads: &mut [Option<Tensor>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(Tensor::norm_sq).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| g.scale_assign(s));
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Ntm,
    Nlm,
    Joint,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Ntm => "ntm",
            Phase::Nlm => "nlm",
            Phase::Joint => "joint",
        }
    }
}

fn trainable_for(phase: Phase, model: &NclmModel) -> Trainable {
    match phase {
        Phase::Ntm => Trainable {
            ntm: true,
            nlm: false,
            topic_embeddings: false,
        },
        Phase::Nlm => Trainable {
            ntm: false,
            nlm: true,
            topic_embeddings: false,
        },
        Phase::Joint => Trainable {
            ntm: model.variant().uses_topics(),
            nlm: true,
            topic_embeddings: model.variant().uses_etr() && model.config.train_topic_embeddings,
        },
    }
}

fn trainable_mask(model: &NclmModel, t: Trainable) -> Vec<bool> {
    let n_nlm = model.nlm.named().len();
    let mut mask = vec![t.ntm; 8];
    mask.extend(std::iter::repeat_n(t.nlm, n_nlm));
    mask.push(t.topic_embeddings);
    mask
}

/// Loss value and gradients of every trainable tensor for one unit.
pub fn unit_gradient(
    model: &NclmModel,
    trainable: Trainable,
    build: impl FnOnce(&mut Graph, &ModelVars) -> Result<Var>,
) -> Result<(f64, Vec<Option<Tensor>>)> {
    let mut g = Graph::with_checks(false);
    let vars = model.bind(&mut g, trainable);
    let loss = build(&mut g, &vars)?;
    let value = g.scalar(loss);
    if !value.is_finite() {
        return Ok((value, Vec::new()));
    }
    g.backward(loss)?;
    let mask = trainable_mask(model, trainable);
    let grads = vars
        .all()
        .into_iter()
        .zip(mask)
        .map(|(v, on)| on.then(|| g.take_grad(v)))
        .collect();
    Ok((value, grads))
}

/// Loss of one sentence under `phase`, as a graph node.
pub fn phase_loss(
    g: &mut Graph,
    vars: &ModelVars,
    model: &NclmModel,
    corpus: &EncodedCorpus,
    unit: &SentenceUnit,
    phase: Phase,
    alpha: f64,
    rng: &mut SeededRng,
) -> Result<Var> {
    let topics = model.variant().uses_topics();
    let joint = phase == Phase::Joint && topics;
    let opts = LossOptions {
        ntm_loss: joint,
        sample_latent: joint,
    };
    let doc = &corpus.docs[unit.doc];
    let l = model.sentence_loss(g, vars, doc, unit.sentence, &unit.sequences, opts, &mut RunMode::Train(rng))?;
    match l.ntm {
        Some(ntm) if joint => joint_loss_var(g, ntm, l.nlm, alpha),
        _ => Ok(l.nlm),
    }
}

fn sum_grads(acc: &mut Vec<Option<Tensor>>, grads: Vec<Option<Tensor>>) {
    if acc.is_empty() {
        *acc = grads;
        return;
    }
    for (a, g) in acc.iter_mut().zip(grads) {
        match (a.as_mut(), g) {
            (Some(a), Some(g)) => a.add_assign(&g),
            (None, Some(g)) => *a = Some(g),
            _ => {}
        }
    }
}

/// Applies one averaged, clipped Adam step from per-unit results.
fn apply_batch(
    model: &mut NclmModel,
    adam: &mut Adam,
    config: &TrainConfig,
    results: Vec<(f64, Vec<Option<Tensor>>)>,
    phase: Phase,
    epoch: usize,
) -> Result<f64> {
    let n = results.len() as f64;
    let mut total = 0.0;
    let mut acc = Vec::new();
    for (loss, grads) in results {
        if !loss.is_finite() {
            return Err(Error::Diverged {
                phase: phase.name(),
                epoch,
                loss,
            });
        }
        total += loss;
        sum_grads(&mut acc, grads);
    }
    acc.iter_mut().flatten().for_each(|g| g.scale_assign(1.0 / n));
    clip_global_norm(&mut acc, config.grad_clip);
    adam.update(model.tensors_mut(), &acc);
    round_params(model, config.precision);
    Ok(total)
}

fn ntm_valid_perplexity(model: &NclmModel, corpus: &EncodedCorpus) -> Result<f64> {
    let z = model.ntm.vocab_size();
    let bows: Vec<Tensor> = corpus
        .docs
        .iter()
        .map(|d| d.view().bow(z))
        .filter(|b| b.sum() > 0.0)
        .collect();
    ntm::ntm_perplexity(&model.ntm, &bows, model.config.latent_transform)
}

fn ntm_epoch(
    model: &mut NclmModel,
    adam: &mut Adam,
    config: &TrainConfig,
    data: &TrainData,
    rng: &mut SeededRng,
    epoch: usize,
) -> Result<f64> {
    let z = model.ntm.vocab_size();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    rng.shuffle(&mut order);
    let trainable = trainable_for(Phase::Ntm, model);
    let mut total = 0.0;
    for batch in order.chunks(config.batch_size) {
        let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
        let m: &NclmModel = model;
        let results = pool().install(|| {
            batch
                .par_iter()
                .zip(&seeds)
                .map(|(&d, &seed)| {
                    let bow = data.train.docs[d].view().bow(z);
                    let mut r = SeededRng::new(seed);
                    unit_gradient(m, trainable, |g, vars| {
                        let (loss, _) = ntm::elbo_loss_var(
                            g,
                            &vars.ntm,
                            &bow,
                            Noise::Sample(&mut r),
                            m.config.latent_transform,
                            m.config.ntm_samples,
                        )?;
                        Ok(loss)
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        total += apply_batch(model, adam, config, results, Phase::Ntm, epoch)?;
    }
    Ok(total / data.train.len().max(1) as f64)
}

fn sentence_epoch(
    model: &mut NclmModel,
    adam: &mut Adam,
    config: &TrainConfig,
    data: &TrainData,
    units: &[SentenceUnit],
    phase: Phase,
    rng: &mut SeededRng,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..units.len()).collect();
    rng.shuffle(&mut order);
    let trainable = trainable_for(phase, model);
    let mut total = 0.0;
    for batch in order.chunks(config.batch_size) {
        let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
        let m: &NclmModel = model;
        let results = pool().install(|| {
            batch
                .par_iter()
                .zip(&seeds)
                .map(|(&u, &seed)| {
                    let mut r = SeededRng::new(seed);
                    unit_gradient(m, trainable, |g, vars| {
                        phase_loss(g, vars, m, &data.train, &units[u], phase, config.alpha, &mut r)
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        total += apply_batch(model, adam, config, results, phase, epoch)?;
    }
    Ok(total / units.len().max(1) as f64)
}

fn record(progress: &mut Progress, phase: &str, epoch: usize, train_loss: Option<f64>, valid: f64) {
    log::info!(
        "phase={phase} epoch={epoch} train_loss={} valid_perplexity={valid:.6}",
        train_loss.map_or("-".to_owned(), |l| format!("{l:.6}"))
    );
    progress.history.push(EpochRecord {
        phase: phase.to_owned(),
        epoch,
        train_loss,
        valid_perplexity: valid,
    });
}

fn new_adam(model: &NclmModel, lr: f64) -> Adam {
    let named = model.named_tensors();
    let refs: Vec<&Tensor> = named.iter().map(|(_, t)| *t).collect();
    Adam::new(lr, &refs)
}

/// Runs all phases and returns the checkpoint of the best joint epoch.
pub fn train(config: &TrainConfig, data: &TrainData) -> Result<Checkpoint> {
    config.check()?;
    if data.train.is_empty() || data.valid.is_empty() {
        return Err(Error::Empty("training and validation corpora must be non-empty".into()));
    }
    let mut rng = SeededRng::new(config.seed);
    let mut model = data.init_model(config, &mut rng)?;
    let units = sentence_units(&data.train, &data.vocab, config.max_seq_len);
    let topics = model.variant().uses_topics();
    let mut progress = Progress::default();

    let ppl0 = lm_perplexity(&model, &data.valid, &data.vocab, config.max_seq_len)?;
    record(&mut progress, "init", 0, None, ppl0);

    if topics && !config.skip_ntm_pretrain {
        let ppl = ntm_valid_perplexity(&model, &data.valid)?;
        record(&mut progress, "ntm", 0, None, ppl);
        let mut adam = new_adam(&model, config.lr);
        for epoch in 1..=config.ntm_pretrain_epochs {
            let loss = ntm_epoch(&mut model, &mut adam, config, data, &mut rng, epoch)?;
            let ppl = ntm_valid_perplexity(&model, &data.valid)?;
            progress.ntm_epochs = epoch;
            record(&mut progress, "ntm", epoch, Some(loss), ppl);
        }
    }

    if !config.skip_nlm_pretrain {
        let mut adam = new_adam(&model, config.lr);
        for epoch in 1..=config.nlm_pretrain_epochs {
            let loss = sentence_epoch(&mut model, &mut adam, config, data, &units, Phase::Nlm, &mut rng, epoch)?;
            let ppl = lm_perplexity(&model, &data.valid, &data.vocab, config.max_seq_len)?;
            progress.nlm_epochs = epoch;
            record(&mut progress, "nlm", epoch, Some(loss), ppl);
        }
    }

    let start = lm_perplexity(&model, &data.valid, &data.vocab, config.max_seq_len)?;
    let mut best = (start, 0usize, model.clone());
    let mut stale = 0;
    let mut adam = new_adam(&model, config.lr);
    for epoch in 1..=config.max_epochs {
        let loss = sentence_epoch(&mut model, &mut adam, config, data, &units, Phase::Joint, &mut rng, epoch)?;
        let ppl = lm_perplexity(&model, &data.valid, &data.vocab, config.max_seq_len)?;
        progress.joint_epochs = epoch;
        record(&mut progress, "joint", epoch, Some(loss), ppl);
        if ppl < best.0 {
            best = (ppl, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                log::info!("early stop at epoch={epoch} best_epoch={}", best.1);
                break;
            }
        }
    }
    progress.best_epoch = best.1;
    progress.best_valid_perplexity = Some(best.0);

    Ok(Checkpoint {
        header: CheckpointHeader {
            config: config.clone(),
            model: best.2.config.clone(),
            vocab: VocabSnapshot::of(&data.vocab),
            rng: rng.state(),
            progress,
        },
        model: best.2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub leg: String,
    pub variant: String,
    pub alpha: f64,
    #[serde(rename = "topN")]
    pub top_n: usize,
    pub valid_perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub best_alpha: f64,
    #[serde(rename = "best_topN")]
    pub best_top_n: usize,
}

/// Picks the lowest perplexity; ties go to the smaller α, then smaller topN.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().min_by(|a, b| {
        a.valid_perplexity
            .total_cmp(&b.valid_perplexity)
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.top_n.cmp(&b.top_n))
    })
}

/// Two-stage ablation: α with LTA, then topN with ETA at the best α.
/// A single-value α grid needs no selection and skips the first leg.
pub fn sweep(base: &TrainConfig, data: &TrainData, alphas: &[f64], top_ns: &[usize]) -> Result<SweepReport> {
    if alphas.is_empty() || top_ns.is_empty() {
        return Err(Error::Config("sweep grid must be non-empty".into()));
    }
    let run = |variant: VariantKind, alpha: f64, top_n: usize, leg: &str| -> Result<SweepRow> {
        let mut c = base.clone();
        c.variant = Variant { kind: variant, sdt: false };
        c.alpha = alpha;
        c.top_n = top_n;
        let ckpt = train(&c, data)?;
        let ppl = ckpt.header.progress.best_valid_perplexity.unwrap_or(f64::INFINITY);
        log::info!("sweep leg={leg} alpha={alpha} topN={top_n} valid_perplexity={ppl:.6}");
        Ok(SweepRow {
            leg: leg.to_owned(),
            variant: c.variant.label(),
            alpha,
            top_n,
            valid_perplexity: ppl,
        })
    };
    let mut rows = Vec::new();
    let best_alpha = if alphas.len() == 1 {
        alphas[0]
    } else {
        let leg: Vec<SweepRow> = alphas
            .iter()
            .map(|&a| run(VariantKind::Lta, a, base.top_n, "alpha"))
            .collect::<Result<_>>()?;
        let a = best_row(&leg).expect("non-empty leg").alpha;
        rows.extend(leg);
        a
    };
    let leg: Vec<SweepRow> = top_ns
        .iter()
        .map(|&n| run(VariantKind::Eta, best_alpha, n, "topN"))
        .collect::<Result<_>>()?;
    let best_top_n = best_row(&leg).expect("non-empty leg").top_n;
    rows.extend(leg);
    Ok(SweepReport {
        rows,
        best_alpha,
        best_top_n,
    })
}
