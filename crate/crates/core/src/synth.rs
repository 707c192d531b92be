//! Synthetic corpora with planted topics, for experiments and benchmarks.
//!
//! Topic `k` owns the words `t{k}w00 .. t{k}wNN`; background content words
//! are `bg00 ..`. Sentences alternate function words (`the`, `a`, `of`,
//! `and`, `to`, which are stopwords) with content words, so every document
//! has both syntax for the language model and content for the topic model.

use std::fmt::Write as _;

use crate::corpus::{Document, RawCorpus};
use crate::numcore::SeededRng;

const FUNCTION_WORDS: [&str; 5] = ["the", "a", "of", "and", "to"];

/// How documents choose their topics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mixing {
    /// Exactly one topic per document, uniformly.
    Single,
    /// Each topic present independently with this probability (at least one).
    Independent(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub docs: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub background_words: usize,
    /// Inclusive range of sentences per document.
    pub sentences: (usize, usize),
    /// Inclusive range of content words per sentence.
    pub content_words: (usize, usize),
    /// Probability that a content word comes from the document's topics.
    pub topic_prob: f64,
    pub mixing: Mixing,
    pub function_words: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 500,
            topics: 2,
            words_per_topic: 20,
            background_words: 20,
            sentences: (3, 6),
            content_words: (3, 6),
            topic_prob: 0.7,
            mixing: Mixing::Single,
            function_words: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub corpus: RawCorpus,
    /// Planted word list of every topic.
    pub topic_words: Vec<Vec<String>>,
    pub background: Vec<String>,
    /// Topics present in every document.
    pub doc_topics: Vec<Vec<usize>>,
}

pub fn topic_word(k: usize, i: usize) -> String {
    format!("t{k}w{i:02}")
}

pub fn generate(cfg: &SynthConfig, seed: u64) -> SynthCorpus {
    let mut rng = SeededRng::new(seed);
    let topic_words: Vec<Vec<String>> = (0..cfg.topics)
        .map(|k| (0..cfg.words_per_topic).map(|i| topic_word(k, i)).collect())
        .collect();
    let background: Vec<String> = (0..cfg.background_words).map(|i| format!("bg{i:02}")).collect();
    let between = |rng: &mut SeededRng, (lo, hi): (usize, usize)| lo + rng.below(hi - lo + 1);

    let mut documents = Vec::with_capacity(cfg.docs);
    let mut doc_topics = Vec::with_capacity(cfg.docs);
    for _ in 0..cfg.docs {
        let present: Vec<usize> = match cfg.mixing {
            Mixing::Single => vec![rng.below(cfg.topics)],
            Mixing::Independent(p) => {
                let mut t: Vec<usize> = (0..cfg.topics).filter(|_| rng.bernoulli(p)).collect();
                if t.is_empty() {
                    t.push(rng.below(cfg.topics));
                }
                t
            }
        };
        let n_sent = between(&mut rng, cfg.sentences);
        let mut sentences = Vec::with_capacity(n_sent);
        for _ in 0..n_sent {
            let n_content = between(&mut rng, cfg.content_words);
            let mut s = Vec::with_capacity(2 * n_content);
            for _ in 0..n_content {
                if cfg.function_words {
                    s.push(FUNCTION_WORDS[rng.below(FUNCTION_WORDS.len())].to_owned());
                }
                let word = if background.is_empty() || rng.bernoulli(cfg.topic_prob) {
                    let k = present[rng.below(present.len())];
                    topic_words[k][rng.below(cfg.words_per_topic)].clone()
                } else {
                    background[rng.below(background.len())].clone()
                };
                s.push(word);
            }
            sentences.push(s);
        }
        let label = present.iter().map(|k| format!("topic{k}")).collect::<Vec<_>>().join("+");
        documents.push(Document {
            sentences,
            label: Some(label),
        });
        doc_topics.push(present);
    }
    SynthCorpus {
        corpus: RawCorpus { documents },
        topic_words,
        background,
        doc_topics,
    }
}

/// word2vec text file where each topic's words cluster around a random
/// centre and every other word is isotropic noise.
pub fn clustered_embeddings(synth: &SynthCorpus, dim: usize, spread: f64, seed: u64) -> String {
    let mut rng = SeededRng::new(seed);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for words in &synth.topic_words {
        let centre: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        for w in words {
            rows.push((w.clone(), centre.iter().map(|c| c + spread * rng.normal()).collect()));
        }
    }
    for w in synth.background.iter().map(String::as_str).chain(FUNCTION_WORDS) {
        rows.push((w.to_owned(), (0..dim).map(|_| rng.normal()).collect()));
    }
    let mut out = format!("{} {dim}\n", rows.len());
    for (w, v) in rows {
        out.push_str(&w);
        for x in v {
            let _ = write!(out, " {x:.6}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let cfg = SynthConfig {
            docs: 10,
            ..Default::default()
        };
        assert_eq!(generate(&cfg, 3), generate(&cfg, 3));
        assert_ne!(generate(&cfg, 3), generate(&cfg, 4));
    }

    #[test]
    fn single_mixing_uses_one_topic_per_document() {
        let cfg = SynthConfig {
            docs: 30,
            topic_prob: 1.0,
            ..Default::default()
        };
        let s = generate(&cfg, 1);
        for (doc, topics) in s.corpus.documents.iter().zip(&s.doc_topics) {
            assert_eq!(topics.len(), 1);
            let prefix = format!("t{}w", topics[0]);
            assert!(doc
                .tokens()
                .filter(|t| !FUNCTION_WORDS.contains(t))
                .all(|t| t.starts_with(&prefix)));
        }
    }
}
