//! Evaluation: language-model perplexity, NPMI topic coherence, document
//! features and precision@k retrieval.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DualVocab, EncodedCorpus, EncodedDoc, RawCorpus, TokenView};
use crate::error::{Error, Result};
use crate::model::{LossOptions, NclmModel, RunMode, Trainable};
use crate::numcore::Graph;
use crate::parallel::pool;
use crate::trainer::sentence_units;

/// Summed negative log-likelihood and number of predicted tokens, eval mode.
pub fn lm_log_likelihood(model: &NclmModel, corpus: &EncodedCorpus, vocab: &DualVocab, max_len: usize) -> Result<(f64, usize)> {
    let units = sentence_units(corpus, vocab, max_len);
    let parts = pool().install(|| {
        units
            .par_iter()
            .map(|u| {
                let mut g = Graph::with_checks(false);
                let vars = model.bind(&mut g, Trainable::NONE);
                let l = model.sentence_loss(
                    &mut g,
                    &vars,
                    &corpus.docs[u.doc],
                    u.sentence,
                    &u.sequences,
                    LossOptions::EVAL,
                    &mut RunMode::Eval,
                )?;
                Ok((g.scalar(l.nlm), l.tokens))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(parts
        .into_iter()
        .fold((0.0, 0), |(nll, n), (l, t)| (nll + l, n + t)))
}

/// `exp(-(1/T) Σ log p(y))` over every target token of `corpus`.
pub fn lm_perplexity(model: &NclmModel, corpus: &EncodedCorpus, vocab: &DualVocab, max_len: usize) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Empty("evaluation corpus has no documents".into()));
    }
    let (nll, tokens) = lm_log_likelihood(model, corpus, vocab, max_len)?;
    if tokens == 0 {
        return Err(Error::Empty("evaluation corpus has no tokens".into()));
    }
    Ok((nll / tokens as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceConfig {
    pub top_counts: Vec<usize>,
    pub epsilon: f64,
    /// Count co-occurrence in sliding windows of this many tokens instead of
    /// whole documents.
    pub window: Option<usize>,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            top_counts: vec![5, 10, 15, 20],
            epsilon: 1e-12,
            window: None,
        }
    }
}

impl CoherenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_counts.is_empty()
            || self.top_counts[0] == 0
            || self.top_counts.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config("top_counts must be positive and strictly ascending".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.window == Some(0) {
            return Err(Error::Config("window must be positive".into()));
        }
        Ok(())
    }
}

/// Word occurrence sets of a reference corpus.
#[derive(Debug, Clone)]
pub struct Reference {
    units: usize,
    postings: HashMap<String, Vec<usize>>,
}

impl Reference {
    /// One unit per document, or one per window position when `window` is set.
    pub fn build(corpus: &RawCorpus, window: Option<usize>) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("reference corpus has no documents".into()));
        }
        let mut sets: Vec<HashSet<&str>> = Vec::new();
        for doc in &corpus.documents {
            let tokens: Vec<&str> = doc.tokens().collect();
            match window {
                None => sets.push(tokens.into_iter().collect()),
                Some(w) => {
                    if tokens.len() <= w {
                        sets.push(tokens.into_iter().collect());
                    } else {
                        for win in tokens.windows(w) {
                            sets.push(win.iter().copied().collect());
                        }
                    }
                }
            }
        }
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, set) in sets.iter().enumerate() {
            for w in set {
                postings.entry((*w).to_owned()).or_default().push(i);
            }
        }
        Ok(Reference {
            units: sets.len(),
            postings,
        })
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn prob(&self, w: &str) -> Option<f64> {
        self.postings.get(w).map(|p| p.len() as f64 / self.units as f64)
    }

    pub fn joint_prob(&self, a: &str, b: &str) -> Option<f64> {
        let (pa, pb) = (self.postings.get(a)?, self.postings.get(b)?);
        let (mut i, mut j, mut n) = (0, 0, 0usize);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Some(n as f64 / self.units as f64)
    }
}

/// `log((p_ij + ε) / (p_i p_j)) / -log(p_ij + ε)`. A pair present in every
/// unit (`p_ij = 1`) scores 1.
pub fn npmi(p_i: f64, p_j: f64, p_ij: f64, eps: f64) -> f64 {
    if p_ij >= 1.0 {
        return 1.0;
    }
    let joint = p_ij + eps;
    (joint / (p_i * p_j)).ln() / -joint.ln()
}

pub fn npmi_pair(reference: &Reference, a: &str, b: &str, eps: f64) -> Option<f64> {
    let p_ij = reference.joint_prob(a, b)?;
    Some(npmi(reference.prob(a)?, reference.prob(b)?, p_ij, eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// Mean over `top_counts` for every topic.
    pub per_topic: Vec<f64>,
    pub average: f64,
}

/// Mean pairwise NPMI of the first `n` words of `words`. Pairs with a word
/// missing from the reference are skipped.
pub fn topic_npmi(words: &[String], n: usize, reference: &Reference, eps: f64) -> Option<f64> {
    let words = &words[..n.min(words.len())];
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            match npmi_pair(reference, &words[i], &words[j], eps) {
                Some(s) => {
                    sum += s;
                    count += 1;
                }
                None => log::warn!("pair ({}, {}) skipped: word absent from reference", words[i], words[j]),
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Average coherence over topics and top counts.
pub fn npmi_coherence(topics: &[Vec<String>], reference: &Reference, config: &CoherenceConfig) -> Result<CoherenceReport> {
    config.validate()?;
    let mut per_topic = Vec::with_capacity(topics.len());
    let mut all = Vec::new();
    for words in topics {
        let scores: Vec<f64> = config
            .top_counts
            .iter()
            .filter_map(|&n| topic_npmi(words, n, reference, config.epsilon))
            .collect();
        all.extend(&scores);
        per_topic.push(if scores.is_empty() {
            f64::NAN
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        });
    }
    if all.is_empty() {
        return Err(Error::Empty("no scorable word pairs".into()));
    }
    Ok(CoherenceReport {
        per_topic,
        average: all.iter().sum::<f64>() / all.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub doc_id: usize,
    pub label: Option<String>,
    pub features: Vec<f64>,
}

/// `<bos> s1 <eos> <bos> s2 <eos> ...` as language-model ids.
pub fn document_stream(doc: &EncodedDoc, vocab: &DualVocab) -> Vec<usize> {
    let mut ids = Vec::new();
    for s in &doc.sentences {
        ids.push(vocab.bos());
        ids.extend_from_slice(&s.nlm);
        ids.push(vocab.eos());
    }
    ids
}

/// Final language-model output over the whole document, concatenated with
/// the document topic context of the model's variant (eval mode).
pub fn document_features(model: &NclmModel, doc: &EncodedDoc, vocab: &DualVocab) -> Result<Vec<f64>> {
    if doc.token_count() == 0 {
        return Err(Error::Empty("document has no tokens".into()));
    }
    let o = model.final_output(&document_stream(doc, vocab))?;
    let mut out = o.into_data();
    if let Some(c) = model.document_context(&doc.view().bow(model.ntm.vocab_size()))? {
        out.extend_from_slice(c.data());
    }
    Ok(out)
}

pub fn export_features(model: &NclmModel, corpus: &EncodedCorpus, vocab: &DualVocab) -> Result<Vec<FeatureRow>> {
    pool().install(|| {
        corpus
            .docs
            .par_iter()
            .enumerate()
            .map(|(i, d)| {
                Ok(FeatureRow {
                    doc_id: i,
                    label: d.label.clone(),
                    features: document_features(model, d, vocab)?,
                })
            })
            .collect()
    })
}

pub fn features_to_csv(rows: &[FeatureRow]) -> String {
    let width = rows.first().map_or(0, |r| r.features.len());
    let mut out = String::from("doc_id,label");
    for i in 0..width {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.doc_id, r.label.as_deref().unwrap_or(""));
        for x in &r.features {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn features_to_jsonl(rows: &[FeatureRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("feature row serializes") + "\n")
        .collect()
}

pub fn parse_features_csv(text: &str, origin: &Path) -> Result<Vec<FeatureRow>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty feature file".into()))?;
    if !header.starts_with("doc_id,label") {
        return Err(err(1, "header must start with doc_id,label".into()));
    }
    let width = header.split(',').count() - 2;
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width + 2 {
            return Err(err(i + 1, format!("expected {} fields, found {}", width + 2, fields.len())));
        }
        let doc_id = fields[0].parse().map_err(|e| err(i + 1, format!("bad doc_id: {e}")))?;
        let label = (!fields[1].is_empty()).then(|| fields[1].to_owned());
        let features = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(i + 1, format!("bad value: {e}")))?;
        rows.push(FeatureRow { doc_id, label, features });
    }
    Ok(rows)
}

/// Reads CSV or JSONL (by `.jsonl`/`.json` extension) feature tables.
pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect(),
        _ => parse_features_csv(&text, path),
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        // `+ 0.0` folds -0 into +0 so ranking treats them as a tie.
        dot / (na * nb) + 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub ks: Vec<usize>,
    /// `per_query[q][i]` is the precision of query `q` at `ks[i]`.
    pub per_query: Vec<Vec<f64>>,
    pub p_at_k: BTreeMap<usize, f64>,
}

/// Training indices ordered by descending cosine similarity to `query`,
/// ties broken by index.
pub fn rank(train: &[FeatureRow], query: &[f64]) -> Vec<usize> {
    let sims: Vec<f64> = train.iter().map(|r| cosine(&r.features, query)).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    order
}

pub fn retrieval_eval(train: &[FeatureRow], test: &[FeatureRow], ks: &[usize]) -> Result<RetrievalResult> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("k values must be positive".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k > train.len()) {
        return Err(Error::Invalid(format!("k={k} exceeds the {} training documents", train.len())));
    }
    if test.is_empty() {
        return Err(Error::Empty("no query documents".into()));
    }
    if train.iter().chain(test).any(|r| r.label.is_none()) {
        return Err(Error::Invalid("retrieval needs a label on every document".into()));
    }
    let per_query: Vec<Vec<f64>> = pool().install(|| {
        test.par_iter()
            .map(|q| {
                let order = rank(train, &q.features);
                ks.iter()
                    .map(|&k| {
                        let hits = order[..k].iter().filter(|&&i| train[i].label == q.label).count();
                        hits as f64 / k as f64
                    })
                    .collect()
            })
            .collect()
    });
    let p_at_k = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, per_query.iter().map(|p| p[i]).sum::<f64>() / per_query.len() as f64))
        .collect();
    Ok(RetrievalResult {
        ks: ks.to_vec(),
        per_query,
        p_at_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSummary {
    pub p_at_k: BTreeMap<usize, f64>,
}

/// The JSON metrics report; absent sections are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherence: Option<CoherenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalSummary>,
}
