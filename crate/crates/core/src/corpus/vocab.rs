use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RawCorpus;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";

const STOPWORDS_V1: &str = include_str!("../../data/stopwords_en_v1.txt");

/// Dense token <-> index map.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// SHA-256 over the newline-joined token list, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub nlm_min_count: usize,
    pub ntm_min_count: usize,
    pub top_frac: f64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            nlm_min_count: 10,
            ntm_min_count: 100,
            top_frac: 0.001,
        }
    }
}

/// Separate language-model and topic-model vocabularies.
///
/// The NLM vocabulary starts with the reserved `<unk>`, `<bos>`, `<eos>`
/// tokens. Both vocabularies list the remaining tokens by descending corpus
/// frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualVocab {
    pub nlm: Vocabulary,
    pub ntm: Vocabulary,
    pub stopwords: BTreeSet<String>,
}

impl DualVocab {
    pub fn from_parts(nlm: Vec<String>, ntm: Vec<String>, stopwords: BTreeSet<String>) -> Result<Self> {
        if nlm.get(..3) != Some(&[UNK.to_owned(), BOS.to_owned(), EOS.to_owned()][..]) {
            return Err(Error::Config("NLM vocabulary must start with <unk>, <bos>, <eos>".into()));
        }
        if let Some(t) = ntm.iter().find(|t| stopwords.contains(*t)) {
            return Err(Error::Config(format!("stopword {t:?} in NTM vocabulary")));
        }
        Ok(DualVocab {
            nlm: Vocabulary::from_tokens(nlm)?,
            ntm: Vocabulary::from_tokens(ntm)?,
            stopwords,
        })
    }

    pub fn unk(&self) -> usize {
        0
    }

    pub fn bos(&self) -> usize {
        1
    }

    pub fn eos(&self) -> usize {
        2
    }

    pub fn nlm_id(&self, token: &str) -> usize {
        self.nlm.get(token).unwrap_or(0)
    }

    pub fn ntm_id(&self, token: &str) -> Option<usize> {
        self.ntm.get(token)
    }

    /// Bag-of-words over the NTM vocabulary; other tokens contribute nothing.
    pub fn bow<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Tensor {
        let mut counts = Tensor::zeros(&[self.ntm.len()]);
        for t in tokens {
            if let Some(i) = self.ntm.get(t) {
                counts.data_mut()[i] += 1.0;
            }
        }
        counts
    }
}

pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(STOPWORDS_V1)
}

fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    Ok(parse_stopwords(&fs::read_to_string(path)?))
}

fn ranked(counts: &HashMap<&str, usize>, keep: impl Fn(&str, usize) -> bool) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts
        .iter()
        .filter(|(t, &c)| keep(t, c))
        .map(|(t, &c)| (t.to_string(), c))
        .collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

pub fn build_vocabs(corpus: &RawCorpus, config: &VocabConfig, stopwords: BTreeSet<String>) -> Result<DualVocab> {
    if !(0.0..1.0).contains(&config.top_frac) {
        return Err(Error::Config(format!("top_frac must be in [0, 1), got {}", config.top_frac)));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in corpus.documents.iter().flat_map(|d| d.tokens()) {
        *counts.entry(t).or_default() += 1;
    }
    let reserved = [UNK, BOS, EOS];

    let mut nlm: Vec<String> = reserved.iter().map(|s| s.to_string()).collect();
    nlm.extend(
        ranked(&counts, |t, c| c >= config.nlm_min_count && !reserved.contains(&t))
            .into_iter()
            .map(|(t, _)| t),
    );

    let candidates = ranked(&counts, |t, c| {
        c >= config.ntm_min_count && !stopwords.contains(t) && !reserved.contains(&t)
    });
    let strip = (config.top_frac * candidates.len() as f64).ceil() as usize;
    let ntm: Vec<String> = candidates.into_iter().skip(strip).map(|(t, _)| t).collect();
    if ntm.is_empty() {
        return Err(Error::Config(
            "NTM vocabulary is empty after pruning; lower ntm_min_count or top_frac".into(),
        ));
    }
    DualVocab::from_parts(nlm, ntm, stopwords)
}
