//! Python bindings: configuration, training, checkpoints, evaluation and a
//! handful of the numerical building blocks.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nclm::corpus::{self, default_stopwords, load_corpus_auto, load_stopwords, Document, EncodedCorpus, RawCorpus};
use nclm::evalkit::{self, FeatureRow};
use nclm::model::generate_sentences;
use nclm::numcore::Tensor;
use nclm::topics;
use nclm::trainer::{self, Checkpoint, TrainData};

fn err(e: nclm::Error) -> PyErr {
    match e {
        nclm::Error::Io(io) => PyIOError::new_err(io.to_string()),
        e @ (nclm::Error::Schema(_)
        | nclm::Error::Config(_)
        | nclm::Error::Parse { .. }
        | nclm::Error::Invalid(_)
        | nclm::Error::Empty(_)
        | nclm::Error::Dimension { .. }
        | nclm::Error::Domain { .. }
        | nclm::Error::Json(_)
        | nclm::Error::VocabMismatch { .. }) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Documents as lists of raw sentence strings, tokenized like corpus files.
fn raw_corpus(docs: Vec<Vec<String>>, labels: Option<Vec<String>>) -> PyResult<RawCorpus> {
    if let Some(l) = &labels {
        if l.len() != docs.len() {
            return Err(PyValueError::new_err("labels and documents differ in length"));
        }
    }
    let mut labels = labels.map(Vec::into_iter);
    let documents = docs
        .into_iter()
        .map(|sentences| Document {
            sentences: sentences
                .iter()
                .map(|s| corpus::tokenize(s))
                .filter(|t| !t.is_empty())
                .collect(),
            label: labels.as_mut().and_then(Iterator::next),
        })
        .collect();
    Ok(RawCorpus { documents })
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Tensor> {
    Tensor::from_rows(&rows).map_err(err)
}

/// Training configuration; the JSON form matches config files.
#[pyclass(name = "TrainConfig", module = "nclm_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: trainer::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    /// Defaults overridden by a JSON object string.
    #[new]
    #[pyo3(signature = (json = "{}"))]
    fn new(json: &str) -> PyResult<Self> {
        Ok(PyTrainConfig {
            inner: trainer::TrainConfig::from_json(json).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn topics(&self) -> usize {
        self.inner.topics
    }

    #[getter]
    fn top_n(&self) -> usize {
        self.inner.top_n
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.label()
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(variant={}, K={}, topN={}, alpha={})",
            self.inner.variant.label(),
            self.inner.topics,
            self.inner.top_n,
            self.inner.alpha
        )
    }
}

/// A trained model together with its vocabularies.
#[pyclass(name = "Model", module = "nclm_py")]
struct PyModel {
    ckpt: Checkpoint,
    vocab: corpus::DualVocab,
}

impl PyModel {
    fn from_checkpoint(ckpt: Checkpoint) -> PyResult<Self> {
        let vocab = ckpt.vocab().map_err(err)?;
        Ok(PyModel { ckpt, vocab })
    }

    fn encode(&self, docs: Vec<Vec<String>>) -> PyResult<EncodedCorpus> {
        Ok(EncodedCorpus::encode(&raw_corpus(docs, None)?, &self.vocab))
    }
}

#[pymethods]
impl PyModel {
    /// Trains on in-memory documents (lists of sentence strings). Without
    /// `valid`, the tail of `train` is held out.
    #[staticmethod]
    #[pyo3(signature = (config, train, valid = None, embeddings = None, stopwords = None))]
    fn train(
        py: Python<'_>,
        config: &PyTrainConfig,
        train: Vec<Vec<String>>,
        valid: Option<Vec<Vec<String>>>,
        embeddings: Option<PathBuf>,
        stopwords: Option<PathBuf>,
    ) -> PyResult<Self> {
        let train = raw_corpus(train, None)?;
        let valid = valid.map(|v| raw_corpus(v, None)).transpose()?;
        let stop = match stopwords {
            Some(p) => load_stopwords(p).map_err(err)?,
            None => default_stopwords(),
        };
        let config = config.inner.clone();
        let ckpt = py
            .detach(|| {
                let data = TrainData::prepare(&config, train, valid, embeddings.as_deref(), stop)?;
                trainer::train(&config, &data)
            })
            .map_err(err)?;
        Self::from_checkpoint(ckpt)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::from_checkpoint(Checkpoint::load(path).map_err(err)?)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.ckpt.save(path).map_err(err)
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        self.ckpt.to_bytes().map_err(err)
    }

    #[getter]
    fn variant(&self) -> String {
        self.ckpt.model.variant().label()
    }

    #[getter]
    fn config(&self) -> PyTrainConfig {
        PyTrainConfig {
            inner: self.ckpt.header.config.clone(),
        }
    }

    #[getter]
    fn best_valid_perplexity(&self) -> Option<f64> {
        self.ckpt.header.progress.best_valid_perplexity
    }

    /// `(language-model vocabulary size, topic-model vocabulary size)`.
    #[getter]
    fn vocab_sizes(&self) -> (usize, usize) {
        (self.vocab.nlm.len(), self.vocab.ntm.len())
    }

    fn perplexity(&self, py: Python<'_>, docs: Vec<Vec<String>>) -> PyResult<f64> {
        let enc = self.encode(docs)?;
        let max_len = self.ckpt.header.config.max_seq_len;
        py.detach(|| evalkit::lm_perplexity(&self.ckpt.model, &enc, &self.vocab, max_len))
            .map_err(err)
    }

    /// Top `top_n` words of every topic.
    #[pyo3(signature = (top_n = 10))]
    fn topics(&self, top_n: usize) -> Vec<Vec<String>> {
        topics::topic_report(&self.ckpt.model.ntm.topic_word, &self.vocab.ntm, top_n)
    }

    /// Per-topic and average NPMI coherence against reference documents.
    #[pyo3(signature = (reference, top_counts = vec![5, 10, 15, 20]))]
    fn coherence(&self, reference: Vec<Vec<String>>, top_counts: Vec<usize>) -> PyResult<(Vec<f64>, f64)> {
        let cfg = evalkit::CoherenceConfig {
            top_counts,
            ..Default::default()
        };
        cfg.validate().map_err(err)?;
        let n = *cfg.top_counts.last().expect("validated non-empty");
        let words = topics::topic_report(&self.ckpt.model.ntm.topic_word, &self.vocab.ntm, n);
        let r = evalkit::Reference::build(&raw_corpus(reference, None)?, None).map_err(err)?;
        let report = evalkit::npmi_coherence(&words, &r, &cfg).map_err(err)?;
        Ok((report.per_topic, report.average))
    }

    /// Greedy sentences, optionally conditioned on one topic.
    #[pyo3(signature = (topic = None, count = 5, max_len = 20, seed = 1))]
    fn generate(&self, topic: Option<usize>, count: usize, max_len: usize, seed: u64) -> PyResult<Vec<String>> {
        let out = generate_sentences(&self.ckpt.model, &self.vocab, topic, None, count, max_len, seed).map_err(err)?;
        Ok(out.into_iter().map(|s| s.join(" ")).collect())
    }

    /// One feature vector per document.
    fn features(&self, py: Python<'_>, docs: Vec<Vec<String>>) -> PyResult<Vec<Vec<f64>>> {
        let enc = self.encode(docs)?;
        let rows = py
            .detach(|| evalkit::export_features(&self.ckpt.model, &enc, &self.vocab))
            .map_err(err)?;
        Ok(rows.into_iter().map(|r| r.features).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({}, nlm_vocab={}, ntm_vocab={})",
            self.variant(),
            self.vocab.nlm.len(),
            self.vocab.ntm.len()
        )
    }
}

/// Loads a corpus file as lists of tokenized sentences joined by spaces,
/// plus the document labels.
#[pyfunction]
fn load_corpus(path: PathBuf) -> PyResult<(Vec<Vec<String>>, Vec<Option<String>>)> {
    let raw = load_corpus_auto(path).map_err(err)?;
    let labels = raw.documents.iter().map(|d| d.label.clone()).collect();
    let docs = raw
        .documents
        .into_iter()
        .map(|d| d.sentences.into_iter().map(|s| s.join(" ")).collect())
        .collect();
    Ok((docs, labels))
}

/// `KL(N(mu, sigma^2) || N(0, 1))` summed over dimensions.
#[pyfunction]
fn kl_divergence(mu: Vec<f64>, sigma: Vec<f64>) -> PyResult<f64> {
    nclm::ntm::kl_divergence(&mu, &sigma).map_err(err)
}

/// `alpha * ntm + (1 - alpha) * nlm`.
#[pyfunction]
fn joint_loss(ntm: f64, nlm: f64, alpha: f64) -> f64 {
    trainer::joint_loss(ntm, nlm, alpha)
}

/// Indices of the `top_n` strongest words of every topic among words with a
/// non-zero count in `bow`.
#[pyfunction]
fn topic_extract(topic_word: Vec<Vec<f64>>, bow: Vec<f64>, top_n: usize) -> PyResult<Vec<Vec<usize>>> {
    let w = matrix(topic_word)?;
    if w.cols() != bow.len() {
        return Err(PyValueError::new_err("bow length differs from the topic-word width"));
    }
    Ok(topics::topic_extract(&w, &bow, top_n))
}

#[pyfunction]
#[pyo3(signature = (p_i, p_j, p_ij, eps = 1e-12))]
fn npmi(p_i: f64, p_j: f64, p_ij: f64, eps: f64) -> f64 {
    evalkit::npmi(p_i, p_j, p_ij, eps)
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("vectors differ in length"));
    }
    Ok(evalkit::cosine(&a, &b))
}

fn rows(features: Vec<Vec<f64>>, labels: Vec<String>) -> PyResult<Vec<FeatureRow>> {
    if features.len() != labels.len() {
        return Err(PyValueError::new_err("features and labels differ in length"));
    }
    Ok(features
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(doc_id, (features, label))| FeatureRow {
            doc_id,
            label: Some(label),
            features,
        })
        .collect())
}

/// Mean precision@k of cosine retrieval, keyed by k.
#[pyfunction]
#[pyo3(signature = (train, train_labels, test, test_labels, ks = vec![5, 10]))]
fn retrieval(
    train: Vec<Vec<f64>>,
    train_labels: Vec<String>,
    test: Vec<Vec<f64>>,
    test_labels: Vec<String>,
    ks: Vec<usize>,
) -> PyResult<BTreeMap<usize, f64>> {
    let r = evalkit::retrieval_eval(&rows(train, train_labels)?, &rows(test, test_labels)?, &ks).map_err(err)?;
    Ok(r.p_at_k)
}

#[pymodule]
fn nclm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(joint_loss, m)?)?;
    m.add_function(wrap_pyfunction!(topic_extract, m)?)?;
    m.add_function(wrap_pyfunction!(npmi, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(retrieval, m)?)?;
    Ok(())
}
