//! The composite model: topic model, language model and topic embeddings
//! wired together per sentence.
//!
//! For sentence `s` of document `d` the topic context comes from `d - s`,
//! so the language model never sees its own sentence through the topic
//! model. With sentence-level topics each target `y` additionally gets a
//! context built from `s - y`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{doc_minus_sentence, DualVocab, sentence_minus_word, EncodedDoc, EncodedSentence, Sequence, TokenView};
use crate::error::{Error, Result};
use crate::nlm::{self, ContextVars, Dropout, LstmState, NlmParams, NlmVars, Variant};
use crate::ntm::{self, LatentTransform, Noise, NtmParams, NtmVars, NTM_PARAM_NAMES};
use crate::numcore::{argmax, Graph, SeededRng, Tensor, Var};
use crate::topics::{self, TermAveraging, TopicBundle};

/// Architecture and wiring options of a composite model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub topics: usize,
    pub ntm_hidden: usize,
    pub hidden: usize,
    pub layers: usize,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub top_n: usize,
    pub dropout: f64,
    pub latent_transform: LatentTransform,
    pub term_averaging: TermAveraging,
    /// Build the sentence-level context once from the whole sentence instead
    /// of once per target. Cheaper, but the target leaks into its context.
    pub sdt_once_per_sentence: bool,
    /// Train the topic model on `d` instead of `d - s`.
    pub whole_document_ntm: bool,
    pub ntm_samples: usize,
    pub train_topic_embeddings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NclmModel {
    pub config: ModelConfig,
    pub ntm: NtmParams,
    pub nlm: NlmParams,
    /// `E`, `[D_E, Z]`: embeddings of the topic-model vocabulary.
    pub topic_embeddings: Tensor,
}

/// Which parameter groups receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trainable {
    pub ntm: bool,
    pub nlm: bool,
    pub topic_embeddings: bool,
}

impl Trainable {
    pub const NONE: Trainable = Trainable {
        ntm: false,
        nlm: false,
        topic_embeddings: false,
    };
}

#[derive(Debug, Clone)]
pub struct ModelVars {
    pub ntm: NtmVars,
    pub nlm: NlmVars,
    pub topic_embeddings: Var,
}

impl ModelVars {
    /// Same order as [`NclmModel::named_tensors`].
    pub fn all(&self) -> Vec<Var> {
        let mut out = self.ntm.all().to_vec();
        out.extend(self.nlm.all());
        out.push(self.topic_embeddings);
        out
    }
}

/// Evaluation (`h = μ`, no dropout) or training with a noise stream.
pub enum RunMode<'a> {
    Eval,
    Train(&'a mut SeededRng),
}

impl RunMode<'_> {
    fn noise(&mut self, sample: bool) -> Noise<'_> {
        match self {
            RunMode::Train(rng) if sample => Noise::Sample(rng),
            _ => Noise::Mean,
        }
    }

    fn dropout(&mut self, p: f64) -> Dropout<'_> {
        match self {
            RunMode::Train(rng) => Dropout::train(p, rng),
            RunMode::Eval => Dropout::off(),
        }
    }
}

/// Per-sentence switches set by the training phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossOptions {
    /// Also return the topic-model loss.
    pub ntm_loss: bool,
    /// Sample the latent in train mode; otherwise `h = μ`.
    pub sample_latent: bool,
}

impl LossOptions {
    pub const EVAL: LossOptions = LossOptions {
        ntm_loss: false,
        sample_latent: false,
    };
}

#[derive(Debug, Clone, Copy)]
pub struct SentenceLoss {
    pub ntm: Option<Var>,
    pub nlm: Var,
    /// Number of predicted targets.
    pub tokens: usize,
}

impl NclmModel {
    pub fn init(
        config: ModelConfig,
        nlm_vocab: usize,
        ntm_vocab: usize,
        topic_embeddings: Tensor,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        config.variant.validate()?;
        if topic_embeddings.shape() != [config.embed_dim, ntm_vocab] {
            return Err(Error::dim(
                "model",
                format!(
                    "topic embeddings {:?}, expected [{}, {ntm_vocab}]",
                    topic_embeddings.shape(),
                    config.embed_dim
                ),
            ));
        }
        let ntm = NtmParams::init(ntm_vocab, config.topics, config.ntm_hidden, rng);
        let ctx = config.variant.context_dim(config.topics, config.embed_dim);
        let nlm = NlmParams::init(nlm_vocab, config.input_dim, config.hidden, config.layers, ctx, rng);
        Ok(NclmModel {
            config,
            ntm,
            nlm,
            topic_embeddings,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = NTM_PARAM_NAMES
            .iter()
            .zip(self.ntm.tensors())
            .map(|(n, t)| (format!("ntm.{n}"), t))
            .collect();
        out.extend(self.nlm.named().into_iter().map(|(n, t)| (format!("nlm.{n}"), t)));
        out.push(("topic_embeddings".into(), &self.topic_embeddings));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.ntm.tensors_mut().into_iter().collect();
        out.extend(self.nlm.tensors_mut());
        out.push(&mut self.topic_embeddings);
        out
    }

    pub fn bind(&self, g: &mut Graph, trainable: Trainable) -> ModelVars {
        ModelVars {
            ntm: self.ntm.bind(g, trainable.ntm),
            nlm: self.nlm.bind(g, trainable.nlm),
            topic_embeddings: g.leaf(self.topic_embeddings.clone(), trainable.topic_embeddings),
        }
    }

    /// Encodes one view and builds its latent and explainable vectors.
    fn view_context(
        &self,
        g: &mut Graph,
        vars: &ModelVars,
        bow: &Tensor,
        noise: Noise<'_>,
    ) -> Result<ContextVars> {
        let v = g.constant(bow.clone());
        let post = ntm::encode(g, &vars.ntm, v, noise, self.config.latent_transform)?;
        self.context_from_latent(g, vars, bow, post.h)
    }

    fn context_from_latent(&self, g: &mut Graph, vars: &ModelVars, bow: &Tensor, h: Var) -> Result<ContextVars> {
        let variant = self.config.variant;
        let etr = if variant.uses_etr() {
            let terms = topics::topic_extract(&self.ntm.topic_word, bow.data(), self.config.top_n);
            if terms.iter().all(Vec::is_empty) {
                log::debug!("empty topic context, explainable vector is zero");
            }
            Some(topics::etr_var(
                g,
                vars.topic_embeddings,
                &terms,
                h,
                self.config.top_n,
                self.config.term_averaging,
            )?)
        } else {
            None
        };
        Ok(ContextVars {
            ltr: variant.uses_ltr().then_some(h),
            etr,
        })
    }

    /// Sentence-level contexts for every position of `seq`, cached by the
    /// removed word's topic-vocabulary index.
    fn sentence_contexts(
        &self,
        g: &mut Graph,
        vars: &ModelVars,
        sentence: &EncodedSentence,
        seq: &Sequence,
        cache: &mut HashMap<Option<usize>, ContextVars>,
        mode: &mut RunMode<'_>,
        sample: bool,
    ) -> Result<Vec<ContextVars>> {
        let z = self.ntm.vocab_size();
        let mut out = Vec::with_capacity(seq.len());
        for m in 0..seq.len() {
            let (key, word) = match seq.target_positions[m] {
                Some(p) if !self.config.sdt_once_per_sentence => (sentence.ntm[p], Some(sentence.tokens[p].as_str())),
                _ => (None, None),
            };
            if let Some(ctx) = cache.get(&key) {
                out.push(*ctx);
                continue;
            }
            let bow = match (key, word) {
                (Some(id), Some(y)) => {
                    let bow = sentence_minus_word(sentence, y).bow(z);
                    debug_assert_eq!(bow.data()[id], 0.0);
                    bow
                }
                _ => sentence.view().bow(z),
            };
            let ctx = self.view_context(g, vars, &bow, mode.noise(sample))?;
            cache.insert(key, ctx);
            out.push(ctx);
        }
        Ok(out)
    }

    /// Losses of sentence `sentence` of `doc`, split into `sequences`.
    pub fn sentence_loss(
        &self,
        g: &mut Graph,
        vars: &ModelVars,
        doc: &EncodedDoc,
        sentence: usize,
        sequences: &[Sequence],
        opts: LossOptions,
        mode: &mut RunMode<'_>,
    ) -> Result<SentenceLoss> {
        let variant = self.config.variant;
        let z = self.ntm.vocab_size();
        let sample = opts.sample_latent;
        let d_minus_s = doc_minus_sentence(doc, sentence)?.bow(z);

        let mut ntm_loss = None;
        let mut doc_ctx = None;
        if opts.ntm_loss {
            let target = if self.config.whole_document_ntm {
                doc.view().bow(z)
            } else {
                d_minus_s.clone()
            };
            let (loss, post) = ntm::elbo_loss_var(
                g,
                &vars.ntm,
                &target,
                mode.noise(sample),
                self.config.latent_transform,
                self.config.ntm_samples,
            )?;
            ntm_loss = Some(loss);
            if variant.uses_topics() && !self.config.whole_document_ntm {
                doc_ctx = Some(self.context_from_latent(g, vars, &d_minus_s, post.h)?);
            }
        }
        if variant.uses_topics() && doc_ctx.is_none() {
            doc_ctx = Some(self.view_context(g, vars, &d_minus_s, mode.noise(sample))?);
        }

        let encoded = &doc.sentences[sentence];
        let mut cache = HashMap::new();
        let mut per_seq = Vec::with_capacity(sequences.len());
        for seq in sequences {
            let contexts = match doc_ctx {
                None => Vec::new(),
                Some(d) if variant.sdt => {
                    let sent = self.sentence_contexts(g, vars, encoded, seq, &mut cache, mode, sample)?;
                    sent.iter()
                        .map(|s| nlm::build_context(g, variant, &d, Some(s)).map(|c| c.expect("topic variant")))
                        .collect::<Result<Vec<_>>>()?
                }
                Some(d) => vec![nlm::build_context(g, variant, &d, None)?.expect("topic variant")],
            };
            per_seq.push(contexts);
        }

        let mut dropout = mode.dropout(self.config.dropout);
        let mut total: Option<Var> = None;
        let mut tokens = 0;
        for (seq, contexts) in sequences.iter().zip(&per_seq) {
            if seq.active_positions() == 0 {
                continue;
            }
            let loss = nlm::nlm_loss(g, &vars.nlm, seq, contexts, &mut dropout)?;
            tokens += seq.active_positions();
            total = Some(match total {
                Some(t) => g.add(t, loss)?,
                None => loss,
            });
        }
        let nlm = total.ok_or_else(|| Error::Empty("sentence has no predicted tokens".into()))?;
        Ok(SentenceLoss {
            ntm: ntm_loss,
            nlm,
            tokens,
        })
    }

    /// Eval-mode topic bundle of an arbitrary bag of words.
    pub fn topic_bundle(&self, bow: &Tensor) -> Result<TopicBundle> {
        let stats = ntm::sample_h(&self.ntm, bow, Noise::Mean, self.config.latent_transform)?;
        topics::bundle(
            &self.ntm.topic_word,
            bow.data(),
            self.config.top_n,
            &stats.h,
            &self.topic_embeddings,
            self.config.term_averaging,
        )
    }

    /// Document-level context `c_d` of a whole bag of words, eval mode.
    pub fn document_context(&self, bow: &Tensor) -> Result<Option<Tensor>> {
        let variant = self.config.variant;
        if !variant.uses_topics() {
            return Ok(None);
        }
        let b = self.topic_bundle(bow)?;
        let doc_only = Variant {
            kind: variant.kind,
            sdt: false,
        };
        nlm::context_from_bundles(doc_only, &b, None)
    }

    /// Runs the language model over `ids` carrying state, eval mode, and
    /// returns the final top-layer output.
    pub fn final_output(&self, ids: &[usize]) -> Result<Tensor> {
        if ids.is_empty() {
            return Err(Error::Empty("empty token stream".into()));
        }
        let mut g = Graph::new();
        let vars = self.nlm.bind(&mut g, false);
        let mut state = LstmState::zeros(&mut g, vars.layers.len(), self.nlm.hidden());
        let mut last = None;
        for &id in ids {
            let (o, next) = nlm::lstm_step(&mut g, &vars, &state, id, &mut Dropout::off())?;
            state = next;
            last = Some(o);
        }
        Ok(g.value(last.expect("non-empty stream")).clone())
    }

    /// Forced context for topic `k`: one-hot latent and the embedding of
    /// topic `k`'s key terms among the words of `mask`.
    pub fn forced_topic_context(&self, k: usize, mask: &[f64]) -> Result<ContextPair> {
        let kk = self.ntm.topics();
        if k >= kk {
            return Err(Error::Invalid(format!("topic {k} out of range for K={kk}")));
        }
        let terms = topics::topic_extract(&self.ntm.topic_word, mask, self.config.top_n);
        let z = topics::topic_embedding(&self.topic_embeddings, &terms[k], self.config.top_n, self.config.term_averaging);
        Ok(ContextPair {
            ltr: Tensor::one_hot(kk, k),
            etr: Tensor::vector(z),
        })
    }

    /// Greedy generation from `<bos>`, continuing after the forced `prefix`
    /// tokens (which are part of the output and count toward `max_len`).
    ///
    /// With `topic = Some(k)` the context is forced to topic `k`; otherwise
    /// it comes from `condition` (eval mode) or, when that is absent too,
    /// from a zero latent. Sentence-level slots reuse the document context.
    /// `<unk>` and `<bos>` are never emitted and `<eos>` is not allowed as
    /// the first token.
    pub fn generate(
        &self,
        bos: usize,
        eos: usize,
        unk: usize,
        topic: Option<usize>,
        condition: Option<&Tensor>,
        prefix: &[usize],
        max_len: usize,
    ) -> Result<Vec<usize>> {
        let variant = self.config.variant;
        if let Some(&bad) = prefix.iter().find(|&&t| t >= self.nlm.vocab_size()) {
            return Err(Error::Invalid(format!("prefix token {bad} outside the vocabulary")));
        }
        let z = self.ntm.vocab_size();
        let everything = vec![1.0; z];
        let pair = if !variant.uses_topics() {
            None
        } else {
            Some(match (topic, condition) {
                (Some(k), c) => self.forced_topic_context(k, c.map(|t| t.data()).unwrap_or(&everything))?,
                (None, Some(bow)) => {
                    let b = self.topic_bundle(bow)?;
                    ContextPair { ltr: b.ltr, etr: b.etr }
                }
                (None, None) => {
                    let h = Tensor::zeros(&[self.ntm.topics()]);
                    let (etr, _) = topics::etr(
                        &self.ntm.topic_word,
                        &everything,
                        self.config.top_n,
                        h.data(),
                        &self.topic_embeddings,
                        self.config.term_averaging,
                    )?;
                    ContextPair { ltr: h, etr }
                }
            })
        };

        let mut g = Graph::new();
        let vars = self.nlm.bind(&mut g, false);
        let context = match &pair {
            None => None,
            Some(p) => {
                let cv = ContextVars {
                    ltr: Some(g.constant(p.ltr.clone())),
                    etr: Some(g.constant(p.etr.clone())),
                };
                let sent = variant.sdt.then_some(cv);
                nlm::build_context(&mut g, variant, &cv, sent.as_ref())?
            }
        };
        let mut state = LstmState::zeros(&mut g, vars.layers.len(), self.nlm.hidden());
        let mut input = bos;
        let mut out = Vec::new();
        while out.len() < max_len {
            let (o, next) = nlm::lstm_step(&mut g, &vars, &state, input, &mut Dropout::off())?;
            state = next;
            if let Some(&forced) = prefix.get(out.len()) {
                out.push(forced);
                input = forced;
                continue;
            }
            let lp = nlm::step_log_probs(&mut g, &vars, o, context)?;
            let mut scores = g.value(lp).data().to_vec();
            scores[unk] = f64::NEG_INFINITY;
            scores[bos] = f64::NEG_INFINITY;
            if out.is_empty() {
                scores[eos] = f64::NEG_INFINITY;
            }
            let next_id = argmax(&scores);
            if next_id == eos {
                break;
            }
            out.push(next_id);
            input = next_id;
        }
        Ok(out)
    }
}

/// `count` greedy sentences, each opened by a seeded prompt word. Prompts
/// are drawn from the function words of the vocabulary when it has any,
/// otherwise from every regular token.
pub fn generate_sentences(
    model: &NclmModel,
    vocab: &DualVocab,
    topic: Option<usize>,
    condition: Option<&Tensor>,
    count: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>> {
    let regular: Vec<usize> = (3..vocab.nlm.len()).collect();
    let function: Vec<usize> = regular
        .iter()
        .copied()
        .filter(|&i| vocab.stopwords.contains(vocab.nlm.token(i)))
        .collect();
    let pool = if function.is_empty() { regular } else { function };
    let mut rng = SeededRng::new(seed);
    (0..count)
        .map(|_| {
            let prefix: Vec<usize> = if pool.is_empty() || max_len == 0 {
                Vec::new()
            } else {
                vec![pool[rng.below(pool.len())]]
            };
            let ids = model.generate(vocab.bos(), vocab.eos(), vocab.unk(), topic, condition, &prefix, max_len)?;
            Ok(ids.into_iter().map(|i| vocab.nlm.token(i).to_owned()).collect())
        })
        .collect()
}

/// Latent and explainable context vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextPair {
    pub ltr: Tensor,
    pub etr: Tensor,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_sequences, DualVocab};
    use crate::nlm::VariantKind;
    use std::collections::BTreeSet;

    pub(crate) fn small_config(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            topics: 2,
            ntm_hidden: 4,
            hidden: 5,
            layers: 1,
            input_dim: 3,
            embed_dim: 3,
            top_n: 2,
            dropout: 0.0,
            latent_transform: LatentTransform::Identity,
            term_averaging: TermAveraging::ReturnedCount,
            sdt_once_per_sentence: false,
            whole_document_ntm: false,
            ntm_samples: 1,
            train_topic_embeddings: false,
        }
    }

    fn fixture() -> (DualVocab, EncodedDoc) {
        let vocab = DualVocab::from_parts(
            ["<unk>", "<bos>", "<eos>", "apple", "pear", "plum", "war"].map(String::from).to_vec(),
            ["apple", "pear", "war"].map(String::from).to_vec(),
            BTreeSet::new(),
        )
        .unwrap();
        let sents = [vec!["apple", "pear", "apple"], vec!["war", "plum"], vec!["pear", "war"]];
        let doc = EncodedDoc {
            sentences: sents
                .iter()
                .map(|s| EncodedSentence::new(s.iter().map(|t| t.to_string()).collect(), &vocab))
                .collect(),
            label: None,
        };
        (vocab, doc)
    }

    fn model(variant: Variant, seed: u64) -> NclmModel {
        let mut rng = SeededRng::new(seed);
        let e = rng.uniform_tensor(&[3, 3], -1.0, 1.0);
        NclmModel::init(small_config(variant), 7, 3, e, &mut rng).unwrap()
    }

    fn eval_loss(m: &NclmModel, vocab: &DualVocab, doc: &EncodedDoc, s: usize) -> f64 {
        let seqs = split_sequences(&doc.sentences[s], vocab.bos(), vocab.eos(), 30, 0, s);
        let mut g = Graph::new();
        let vars = m.bind(&mut g, Trainable::NONE);
        let l = m
            .sentence_loss(&mut g, &vars, doc, s, &seqs, LossOptions::EVAL, &mut RunMode::Eval)
            .unwrap();
        g.scalar(l.nlm)
    }

    #[test]
    fn named_tensors_line_up_with_vars() {
        for v in Variant::all_composite().into_iter().chain([Variant::LSTM]) {
            let m = model(v, 1);
            let mut g = Graph::new();
            let vars = m.bind(&mut g, Trainable::NONE);
            let named = m.named_tensors();
            let all = vars.all();
            assert_eq!(named.len(), all.len());
            for ((_, t), v) in named.iter().zip(all) {
                assert_eq!(*t, g.value(v));
            }
        }
    }

    #[test]
    fn own_sentence_does_not_change_its_context() {
        // Changing topic-vocabulary words inside sentence 0 must not move the
        // document context used to model sentence 0.
        let (vocab, doc) = fixture();
        let m = model(Variant::new(VariantKind::Lta, false).unwrap(), 2);
        let z = m.ntm.vocab_size();
        let mut altered = doc.clone();
        altered.sentences[0] = EncodedSentence::new(vec!["war".into(), "war".into(), "war".into()], &vocab);
        let a = doc_minus_sentence(&doc, 0).unwrap().bow(z);
        let b = doc_minus_sentence(&altered, 0).unwrap().bow(z);
        assert_eq!(a, b);
        assert_eq!(m.document_context(&a).unwrap(), m.document_context(&b).unwrap());
    }

    #[test]
    fn zero_context_block_makes_variants_agree() {
        let (vocab, doc) = fixture();
        let base = model(Variant::LSTM, 3);
        let mut reference = None;
        for v in Variant::all_composite() {
            let mut m = model(v, 3);
            m.nlm.input_embedding = base.nlm.input_embedding.clone();
            m.nlm.layers = base.nlm.layers.clone();
            m.nlm.output_weight = base.nlm.output_weight.clone();
            let h = m.nlm.hidden();
            let c = m.nlm.context_dim().unwrap();
            let mut w = Tensor::zeros(&[h + c, h]);
            let shared = SeededRng::new(9).uniform_tensor(&[h, h], -0.5, 0.5);
            w.data_mut()[..h * h].copy_from_slice(shared.data());
            m.nlm.proj_weight = Some(w);
            let loss = eval_loss(&m, &vocab, &doc, 1);
            match reference {
                None => reference = Some(loss),
                Some(r) => assert!((r - loss).abs() < 1e-12, "{v:?}: {loss} vs {r}"),
            }
        }
    }

    #[test]
    fn lstm_variant_ignores_topic_model() {
        let (vocab, doc) = fixture();
        let m = model(Variant::LSTM, 4);
        let before = eval_loss(&m, &vocab, &doc, 0);
        let mut changed = m.clone();
        changed.ntm.topic_word = changed.ntm.topic_word.map(|x| x * 3.0 + 1.0);
        changed.topic_embeddings = changed.topic_embeddings.map(|x| -x);
        assert_eq!(before, eval_loss(&changed, &vocab, &doc, 0));
    }

    #[test]
    fn sdt_contexts_are_cached_per_word_type() {
        let (vocab, doc) = fixture();
        let m = model(Variant::new(VariantKind::Leta, true).unwrap(), 5);
        let seqs = split_sequences(&doc.sentences[0], vocab.bos(), vocab.eos(), 30, 0, 0);
        let mut g = Graph::new();
        let vars = m.bind(&mut g, Trainable::NONE);
        let mut cache = HashMap::new();
        let ctx = m
            .sentence_contexts(&mut g, &vars, &doc.sentences[0], &seqs[0], &mut cache, &mut RunMode::Eval, false)
            .unwrap();
        // targets: apple pear apple <eos>
        assert_eq!(ctx.len(), 4);
        assert_eq!(cache.len(), 3);
        assert_eq!(ctx[0].ltr, ctx[2].ltr);
        assert_ne!(ctx[0].ltr, ctx[1].ltr);
    }

    #[test]
    fn generation_is_greedy_and_bounded() {
        let (vocab, _) = fixture();
        let m = model(Variant::new(VariantKind::Eta, false).unwrap(), 6);
        let one = m.generate(vocab.bos(), vocab.eos(), vocab.unk(), Some(0), None, &[], 1).unwrap();
        assert_eq!(one.len(), 1);
        let a = m.generate(vocab.bos(), vocab.eos(), vocab.unk(), Some(1), None, &[], 8).unwrap();
        let b = m.generate(vocab.bos(), vocab.eos(), vocab.unk(), Some(1), None, &[], 8).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 8);
        assert!(m.generate(vocab.bos(), vocab.eos(), vocab.unk(), Some(2), None, &[], 8).is_err());

        let prompted = m.generate(vocab.bos(), vocab.eos(), vocab.unk(), Some(1), None, &[4, 5], 8).unwrap();
        assert_eq!(&prompted[..2], &[4, 5]);
        assert!(m.generate(vocab.bos(), vocab.eos(), vocab.unk(), None, None, &[999], 8).is_err());
    }
}
