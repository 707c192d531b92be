#![allow(dead_code)]

use nclm::corpus::{Document, RawCorpus, VocabConfig};
use nclm::evalkit::FeatureRow;
use nclm::nlm::{Variant, VariantKind};
use nclm::trainer::TrainConfig;

pub fn doc(text: &str) -> Document {
    Document {
        sentences: text
            .split(" . ")
            .map(|s| s.split_whitespace().map(str::to_owned).collect())
            .collect(),
        label: None,
    }
}

pub fn corpus(docs: &[&str]) -> RawCorpus {
    RawCorpus {
        documents: docs.iter().map(|d| doc(d)).collect(),
    }
}

pub fn micro_train() -> RawCorpus {
    corpus(&[
        "the cat sat on the mat . a cat ate fish . the fish was fresh",
        "stocks fell on the market . the market rallied late . traders sold stocks",
    ])
}

pub fn micro_valid() -> RawCorpus {
    corpus(&["the cat ate the fish . stocks rallied"])
}

/// A model small enough to train in milliseconds.
pub fn tiny_config(kind: VariantKind, sdt: bool) -> TrainConfig {
    TrainConfig {
        variant: Variant { kind, sdt },
        topics: 3,
        top_n: 4,
        ntm_hidden: 8,
        hidden: 6,
        input_dim: 5,
        embed_dim: 5,
        batch_size: 2,
        ntm_pretrain_epochs: 2,
        nlm_pretrain_epochs: 1,
        max_epochs: 2,
        early_stop_patience: 2,
        dropout: 0.1,
        lr: 1e-2,
        vocab: VocabConfig {
            nlm_min_count: 1,
            ntm_min_count: 1,
            top_frac: 0.0,
        },
        ..TrainConfig::default()
    }
}

/// Five documents whose co-occurrence counts are easy to tally by hand:
/// apple 3, banana 3, cherry 2, date 2, elder 1; apple+banana 2,
/// apple+cherry 2, banana+cherry 1, apple+date 1, banana+date 1,
/// cherry+date 1, elder with nothing.
pub fn npmi_fixture() -> RawCorpus {
    corpus(&[
        "apple banana cherry",
        "apple banana",
        "apple cherry date",
        "banana date",
        "elder",
    ])
}

/// NPMI from hand-counted document frequencies out of five documents.
pub fn hand_npmi(n_i: f64, n_j: f64, n_ij: f64) -> f64 {
    let (p_i, p_j, p_ij) = (n_i / 5.0, n_j / 5.0, n_ij / 5.0);
    (p_ij / (p_i * p_j)).ln() / -p_ij.ln()
}

pub fn labelled(rows: Vec<Vec<f64>>, labels: &[usize]) -> Vec<FeatureRow> {
    rows.into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (f, l))| FeatureRow {
            doc_id: i,
            label: Some(format!("c{l}")),
            features: f,
        })
        .collect()
}

fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Exhaustive oracle: for each query, count training documents that are
/// strictly more similar, or equally similar with a lower index.
pub fn brute_force_p_at_k(train: &[FeatureRow], test: &[FeatureRow], k: usize) -> f64 {
    let mut total = 0.0;
    for q in test {
        let sims: Vec<f64> = train.iter().map(|t| oracle_cosine(&t.features, &q.features)).collect();
        let mut hits = 0;
        for i in 0..train.len() {
            let ahead = (0..train.len())
                .filter(|&j| sims[j] > sims[i] || (sims[j] == sims[i] && j < i))
                .count();
            if ahead < k && train[i].label == q.label {
                hits += 1;
            }
        }
        total += hits as f64 / k as f64;
    }
    total / test.len() as f64
}

pub mod grad {
    use nclm::corpus::{split_sequences, DualVocab, EncodedCorpus, RawCorpus, Document};
    use nclm::model::{LossOptions, ModelConfig, ModelVars, NclmModel, RunMode, Trainable};
    use nclm::nlm::Variant;
    use nclm::ntm::{elbo_loss_var, LatentTransform, Noise};
    use nclm::numcore::{Graph, SeededRng, Tensor, Var};
    use nclm::topics::TermAveraging;
    use nclm::trainer::{joint_loss_var, unit_gradient};
    use nclm::Result;

    pub const STEP: f64 = 1e-4;
    pub const TOL: f64 = 1e-4;

    /// Denominator floor of the relative error. Central differences of a
    /// loss `L` carry rounding noise near `ε·|L| / STEP`; gradients whose
    /// size is within a factor `10 / TOL` of that noise are compared
    /// absolutely.
    pub fn floor(loss: f64) -> f64 {
        (10.0 * f64::EPSILON * loss.abs() / (STEP * TOL)).max(1e-6)
    }
    const FUNCTION_WORDS: usize = 3;

    const ALL: Trainable = Trainable {
        ntm: true,
        nlm: true,
        topic_embeddings: true,
    };

    #[derive(Debug, Clone, Copy)]
    pub enum LossKind {
        Ntm,
        Nlm,
        Joint(f64),
    }

    pub struct Micro {
        pub vocab: DualVocab,
        pub corpus: EncodedCorpus,
        pub model: NclmModel,
        pub eps: Vec<f64>,
        pub max_len: usize,
        pub seed: u64,
    }

    /// Two random documents over `Z ≤ 12` topic words plus three function
    /// words, with `K ≤ 4`, `H ≤ 8` and sentences of at most six tokens.
    pub fn micro_instance(seed: u64, variant: Variant, transform: LatentTransform) -> Micro {
        let mut rng = SeededRng::new(seed);
        let z = 4 + rng.below(9);
        let k = 2 + rng.below(3);
        let h = 2 + rng.below(7);
        let input_dim = 2 + rng.below(4);
        let embed_dim = 2 + rng.below(4);
        let words: Vec<String> = (0..z).map(|i| format!("w{i}")).collect();
        let fwords: Vec<String> = (0..FUNCTION_WORDS).map(|i| format!("f{i}")).collect();
        let mut nlm = vec!["<unk>".to_owned(), "<bos>".to_owned(), "<eos>".to_owned()];
        nlm.extend(fwords.iter().cloned());
        nlm.extend(words.iter().cloned());
        let vocab = DualVocab::from_parts(nlm, words.clone(), Default::default()).unwrap();

        let documents = (0..2)
            .map(|d| {
                let n_sent = 2 + rng.below(2);
                let sentences = (0..n_sent)
                    .map(|s| {
                        // The first sentence always spans six steps.
                        let len = if d == 0 && s == 0 { 6 } else { 2 + rng.below(5) };
                        (0..len)
                            .map(|_| {
                                if rng.bernoulli(0.3) {
                                    fwords[rng.below(FUNCTION_WORDS)].clone()
                                } else if rng.bernoulli(0.05) {
                                    "oov".to_owned()
                                } else {
                                    words[rng.below(z)].clone()
                                }
                            })
                            .collect()
                    })
                    .collect();
                Document { sentences, label: None }
            })
            .collect();
        let corpus = EncodedCorpus::encode(&RawCorpus { documents }, &vocab);

        let config = ModelConfig {
            variant,
            topics: k,
            ntm_hidden: 3 + rng.below(4),
            hidden: h,
            layers: 1 + rng.below(2),
            input_dim,
            embed_dim,
            top_n: 1 + rng.below(4),
            dropout: 0.25,
            latent_transform: transform,
            term_averaging: TermAveraging::ReturnedCount,
            sdt_once_per_sentence: false,
            whole_document_ntm: false,
            ntm_samples: 1,
            train_topic_embeddings: true,
        };
        let e = rng.uniform_tensor(&[embed_dim, z], -1.0, 1.0);
        let mut model = NclmModel::init(config, vocab.nlm.len(), z, e, &mut rng).unwrap();
        // Larger weights than the default init so every path carries signal.
        for t in model.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = rng.uniform(-0.8, 0.8));
        }
        let eps = (0..k).map(|_| rng.normal()).collect();
        Micro {
            vocab,
            corpus,
            model,
            eps,
            max_len: 3 + rng.below(4),
            seed,
        }
    }

    /// Loss over both documents. Randomness is re-seeded on every call so
    /// perturbed evaluations see the same noise and dropout masks.
    pub fn build(g: &mut Graph, vars: &ModelVars, m: &Micro, model: &NclmModel, kind: LossKind) -> Result<Var> {
        let z = model.ntm.vocab_size();
        let mut rng = SeededRng::new(m.seed ^ 0xabc);
        let mut total: Option<Var> = None;
        let mut add = |g: &mut Graph, v: Var| -> Result<()> {
            total = Some(match total {
                Some(t) => g.add(t, v)?,
                None => v,
            });
            Ok(())
        };
        match kind {
            LossKind::Ntm => {
                for doc in &m.corpus.docs {
                    use nclm::corpus::TokenView;
                    let bow = doc.view().bow(z);
                    let (l, _) = elbo_loss_var(
                        g,
                        &vars.ntm,
                        &bow,
                        Noise::Fixed(&m.eps),
                        model.config.latent_transform,
                        1,
                    )?;
                    add(g, l)?;
                }
            }
            LossKind::Nlm | LossKind::Joint(_) => {
                let joint = matches!(kind, LossKind::Joint(_));
                let opts = LossOptions {
                    ntm_loss: joint && model.variant().uses_topics(),
                    sample_latent: true,
                };
                for (d, doc) in m.corpus.docs.iter().enumerate() {
                    for (s, sent) in doc.sentences.iter().enumerate() {
                        let seqs = split_sequences(sent, m.vocab.bos(), m.vocab.eos(), m.max_len, d, s);
                        let mut r = rng.fork();
                        let l = model.sentence_loss(g, vars, doc, s, &seqs, opts, &mut RunMode::Train(&mut r))?;
                        let v = match (kind, l.ntm) {
                            (LossKind::Joint(alpha), Some(ntm)) => joint_loss_var(g, ntm, l.nlm, alpha)?,
                            _ => l.nlm,
                        };
                        add(g, v)?;
                    }
                }
            }
        }
        Ok(total.expect("non-empty micro corpus"))
    }

    fn value(m: &Micro, model: &NclmModel, kind: LossKind) -> f64 {
        let mut g = Graph::new();
        let vars = model.bind(&mut g, Trainable::NONE);
        let l = build(&mut g, &vars, m, model, kind).unwrap();
        g.scalar(l)
    }

    #[derive(Debug, Clone)]
    pub struct Worst {
        pub rel_error: f64,
        pub tensor: String,
        pub index: usize,
        pub analytic: f64,
        pub numeric: f64,
        pub checked: usize,
    }

    /// Largest relative error between backprop and central differences.
    /// Each tensor is probed at its largest-gradient entry plus up to
    /// `per_tensor` random entries.
    pub fn check(m: &Micro, kind: LossKind, per_tensor: usize) -> Worst {
        let (loss, grads) = unit_gradient(&m.model, ALL, |g, vars| build(g, vars, m, &m.model, kind)).unwrap();
        let floor = floor(loss);
        let names: Vec<String> = m.model.named_tensors().into_iter().map(|(n, _)| n).collect();
        let mut rng = SeededRng::new(m.seed.wrapping_mul(31));
        let mut worst = Worst {
            rel_error: 0.0,
            tensor: String::new(),
            index: 0,
            analytic: 0.0,
            numeric: 0.0,
            checked: 0,
        };
        for (ti, (name, grad)) in names.iter().zip(&grads).enumerate() {
            let grad = grad.clone().unwrap_or_else(|| Tensor::zeros(m.model.named_tensors()[ti].1.shape()));
            let n = grad.len();
            let mut probes: Vec<usize> = (0..per_tensor.min(n)).map(|_| rng.below(n)).collect();
            let top = (0..n).max_by(|&a, &b| grad.data()[a].abs().total_cmp(&grad.data()[b].abs()));
            probes.extend(top);
            for j in probes {
                let shifted = |delta: f64| {
                    let mut model = m.model.clone();
                    model.tensors_mut()[ti].data_mut()[j] += delta;
                    value(m, &model, kind)
                };
                let numeric = (shifted(STEP) - shifted(-STEP)) / (2.0 * STEP);
                let analytic = grad.data()[j];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
                worst.checked += 1;
                if rel > worst.rel_error {
                    worst = Worst {
                        rel_error: rel,
                        tensor: name.clone(),
                        index: j,
                        analytic,
                        numeric,
                        checked: worst.checked,
                    };
                }
            }
        }
        worst
    }
}
