//! Corpus ingestion, dual vocabularies, bag-of-words views and sequences.
//!
//! Text format: one sentence per line, documents separated by one or more
//! blank lines. JSONL format: one document per line,
//! `{"sentences": ["...", ...], "label": "optional"}`.
//!
//! Tokenization is fixed: lowercase, then every character that is neither
//! alphanumeric nor whitespace becomes a token of its own, then split on
//! whitespace. `"Hello, world!"` becomes `hello , world !`.

mod embeddings;
mod encoded;
mod vocab;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

pub use embeddings::{load_embeddings, parse_embeddings, random_embeddings, MISSING_RANGE};
pub use encoded::{
    doc_minus_sentence, sentence_minus_word, split_sequences, DocView, EncodedCorpus, EncodedDoc,
    EncodedSentence, Sequence, SentenceView, TokenView,
};
pub use vocab::{
    build_vocabs, default_stopwords, load_stopwords, DualVocab, VocabConfig, Vocabulary, BOS, EOS,
    UNK,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<Vec<String>>,
    pub label: Option<String>,
}

impl Document {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawCorpus {
    pub documents: Vec<Document>,
}

impl RawCorpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    /// Splits off the trailing `fraction` of documents (at least one when
    /// there are two or more documents).
    pub fn split_tail(mut self, fraction: f64) -> (RawCorpus, RawCorpus) {
        let n = self.documents.len();
        let mut tail = ((n as f64) * fraction).round() as usize;
        if n >= 2 {
            tail = tail.clamp(1, n - 1);
        } else {
            tail = 0;
        }
        let rest = self.documents.split_off(n - tail);
        (self, RawCorpus { documents: rest })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Text,
    Jsonl,
}

impl CorpusFormat {
    /// `.jsonl` / `.json` files are JSONL, everything else plain text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Text,
        }
    }
}

pub fn tokenize(line: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(line.len() + 8);
    for ch in line.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() || ch.is_whitespace() {
            spaced.push(ch);
        } else {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        }
    }
    spaced.split_whitespace().map(str::to_owned).collect()
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<RawCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    match format {
        CorpusFormat::Text => parse_text(&text, path),
        CorpusFormat::Jsonl => parse_jsonl(&text, path),
    }
}

/// Loads a corpus, inferring the format from the file extension.
pub fn load_corpus_auto(path: impl AsRef<Path>) -> Result<RawCorpus> {
    let path = path.as_ref();
    load_corpus(path, CorpusFormat::from_path(path))
}

pub fn parse_text(text: &str, origin: &Path) -> Result<RawCorpus> {
    let mut documents = Vec::new();
    let mut current: Vec<Vec<String>> = Vec::new();
    for line in text.lines() {
        let tokens = tokenize(line);
        if tokens.is_empty() {
            if !current.is_empty() {
                documents.push(Document {
                    sentences: std::mem::take(&mut current),
                    label: None,
                });
            }
        } else {
            current.push(tokens);
        }
    }
    if !current.is_empty() {
        documents.push(Document {
            sentences: current,
            label: None,
        });
    }
    if documents.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 1,
            msg: "corpus contains no documents".into(),
        });
    }
    Ok(RawCorpus { documents })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDoc {
    sentences: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

pub fn parse_jsonl(text: &str, origin: &Path) -> Result<RawCorpus> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        msg,
    };
    let mut documents = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: JsonDoc = serde_json::from_str(line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        let sentences: Vec<Vec<String>> = doc
            .sentences
            .iter()
            .map(|s| tokenize(s))
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return Err(parse_err(i + 1, "document has no tokens".into()));
        }
        documents.push(Document {
            sentences,
            label: doc.label,
        });
    }
    if documents.is_empty() {
        return Err(parse_err(1, "corpus contains no documents".into()));
    }
    Ok(RawCorpus { documents })
}
