use super::{DualVocab, RawCorpus};
use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// A sentence with its tokens resolved against both vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub tokens: Vec<String>,
    pub nlm: Vec<usize>,
    pub ntm: Vec<Option<usize>>,
}

impl EncodedSentence {
    pub fn new(tokens: Vec<String>, vocab: &DualVocab) -> Self {
        let nlm = tokens.iter().map(|t| vocab.nlm_id(t)).collect();
        let ntm = tokens.iter().map(|t| vocab.ntm_id(t)).collect();
        EncodedSentence { tokens, nlm, ntm }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn view(&self) -> SentenceView<'_> {
        SentenceView {
            sentence: self,
            removed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDoc {
    pub sentences: Vec<EncodedSentence>,
    pub label: Option<String>,
}

impl EncodedDoc {
    pub fn view(&self) -> DocView<'_> {
        DocView {
            doc: self,
            excluded: None,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(EncodedSentence::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedCorpus {
    pub docs: Vec<EncodedDoc>,
    pub ntm_size: usize,
}

impl EncodedCorpus {
    pub fn encode(raw: &RawCorpus, vocab: &DualVocab) -> Self {
        let docs = raw
            .documents
            .iter()
            .map(|d| EncodedDoc {
                sentences: d
                    .sentences
                    .iter()
                    .map(|s| EncodedSentence::new(s.clone(), vocab))
                    .collect(),
                label: d.label.clone(),
            })
            .collect();
        EncodedCorpus {
            docs,
            ntm_size: vocab.ntm.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Read-only token sequence that can be turned into a bag of words.
pub trait TokenView {
    /// Visits `(token, ntm index)` for every included token.
    fn visit(&self, f: &mut dyn FnMut(&str, Option<usize>));

    fn bow(&self, ntm_size: usize) -> Tensor {
        let mut counts = Tensor::zeros(&[ntm_size]);
        let data = counts.data_mut();
        self.visit(&mut |_, id| {
            if let Some(i) = id {
                data[i] += 1.0;
            }
        });
        counts
    }

    fn tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |t, _| out.push(t.to_owned()));
        out
    }
}

/// A document, optionally with one sentence left out (`d - s`).
#[derive(Debug, Clone, Copy)]
pub struct DocView<'a> {
    pub doc: &'a EncodedDoc,
    pub excluded: Option<usize>,
}

impl TokenView for DocView<'_> {
    fn visit(&self, f: &mut dyn FnMut(&str, Option<usize>)) {
        for (i, s) in self.doc.sentences.iter().enumerate() {
            if Some(i) == self.excluded {
                continue;
            }
            for (t, id) in s.tokens.iter().zip(&s.ntm) {
                f(t, *id);
            }
        }
    }
}

impl DocView<'_> {
    pub fn sentence_indices(&self) -> Vec<usize> {
        (0..self.doc.sentences.len())
            .filter(|&i| Some(i) != self.excluded)
            .collect()
    }
}

/// A sentence with every occurrence of one token type removed (`s - y`).
#[derive(Debug, Clone, Copy)]
pub struct SentenceView<'a> {
    pub sentence: &'a EncodedSentence,
    pub removed: Option<&'a str>,
}

impl TokenView for SentenceView<'_> {
    fn visit(&self, f: &mut dyn FnMut(&str, Option<usize>)) {
        for (t, id) in self.sentence.tokens.iter().zip(&self.sentence.ntm) {
            if Some(t.as_str()) != self.removed {
                f(t, *id);
            }
        }
    }
}

pub fn doc_minus_sentence(doc: &EncodedDoc, sentence: usize) -> Result<DocView<'_>> {
    if sentence >= doc.sentences.len() {
        return Err(Error::Invalid(format!(
            "sentence {sentence} not in a document of {} sentences",
            doc.sentences.len()
        )));
    }
    Ok(DocView {
        doc,
        excluded: Some(sentence),
    })
}

/// Removes all occurrences of the token type `y` from `sentence`.
pub fn sentence_minus_word<'a>(sentence: &'a EncodedSentence, y: &'a str) -> SentenceView<'a> {
    SentenceView {
        sentence,
        removed: Some(y),
    }
}

/// One training sequence: `inputs[m]` predicts `targets[m]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub doc: usize,
    pub sentence: usize,
    pub inputs: Vec<usize>,
    pub targets: Vec<usize>,
    /// Position of each target inside the source sentence; `None` for `<eos>`.
    pub target_positions: Vec<Option<usize>>,
    pub mask: Vec<bool>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn active_positions(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Turns `<bos> t1 .. tn <eos>` into input/target pairs and cuts them into
/// chunks of at most `max_len` positions.
pub fn split_sequences(
    sentence: &EncodedSentence,
    vocab_bos: usize,
    vocab_eos: usize,
    max_len: usize,
    doc: usize,
    sentence_index: usize,
) -> Vec<Sequence> {
    let max_len = max_len.max(1);
    let n = sentence.len();
    let mut stream = Vec::with_capacity(n + 2);
    stream.push(vocab_bos);
    stream.extend_from_slice(&sentence.nlm);
    stream.push(vocab_eos);
    let positions: Vec<usize> = (0..=n).collect();
    positions
        .chunks(max_len)
        .map(|chunk| {
            let inputs: Vec<usize> = chunk.iter().map(|&m| stream[m]).collect();
            let targets: Vec<usize> = chunk.iter().map(|&m| stream[m + 1]).collect();
            let target_positions = chunk.iter().map(|&m| (m < n).then_some(m)).collect();
            Sequence {
                doc,
                sentence: sentence_index,
                mask: vec![true; inputs.len()],
                inputs,
                targets,
                target_positions,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabs, parse_text, VocabConfig};
    use std::collections::BTreeSet;
    use std::path::Path;

    fn setup(text: &str) -> (DualVocab, EncodedCorpus) {
        let raw = parse_text(text, Path::new("t")).unwrap();
        let cfg = VocabConfig {
            nlm_min_count: 1,
            ntm_min_count: 1,
            top_frac: 0.0,
        };
        let v = build_vocabs(&raw, &cfg, BTreeSet::new()).unwrap();
        let e = EncodedCorpus::encode(&raw, &v);
        (v, e)
    }

    #[test]
    fn minus_middle_sentence() {
        let (_, c) = setup("a b\nc d\ne f\n");
        let view = doc_minus_sentence(&c.docs[0], 1).unwrap();
        assert_eq!(view.sentence_indices(), vec![0, 2]);
        assert_eq!(view.tokens(), vec!["a", "b", "e", "f"]);
        assert!(doc_minus_sentence(&c.docs[0], 3).is_err());
    }

    #[test]
    fn single_sentence_doc_minus_itself_is_empty() {
        let (v, c) = setup("a b\n");
        let view = doc_minus_sentence(&c.docs[0], 0).unwrap();
        assert_eq!(view.bow(v.ntm.len()).sum(), 0.0);
    }

    #[test]
    fn removing_fewer_tokens_lowers_counts() {
        let (v, c) = setup("a b\nc a\n");
        let full = c.docs[0].view().bow(v.ntm.len()).sum();
        let minus = doc_minus_sentence(&c.docs[0], 0).unwrap().bow(v.ntm.len()).sum();
        assert!(minus < full);
    }

    #[test]
    fn sentence_minus_word_removes_every_occurrence() {
        let (v, c) = setup("a b a\n");
        let s = &c.docs[0].sentences[0];
        assert_eq!(sentence_minus_word(s, "a").tokens(), vec!["b"]);
        assert_eq!(sentence_minus_word(s, "zzz").tokens(), vec!["a", "b", "a"]);
        let b = sentence_minus_word(s, "a").bow(v.ntm.len());
        assert_eq!(b.data()[v.ntm_id("a").unwrap()], 0.0);
    }

    #[test]
    fn sequences_shift_targets_by_one() {
        let (v, c) = setup("a b c\n");
        let s = &c.docs[0].sentences[0];
        let seqs = split_sequences(s, v.bos(), v.eos(), 30, 0, 0);
        assert_eq!(seqs.len(), 1);
        let q = &seqs[0];
        assert_eq!(q.inputs[0], v.bos());
        assert_eq!(&q.inputs[1..], &q.targets[..q.len() - 1]);
        assert_eq!(*q.targets.last().unwrap(), v.eos());
        assert_eq!(q.target_positions, vec![Some(0), Some(1), Some(2), None]);
    }

    #[test]
    fn long_sentences_split_and_reassemble() {
        let text: Vec<String> = (0..70).map(|i| format!("w{}", i % 13)).collect();
        let (v, c) = setup(&text.join(" "));
        let s = &c.docs[0].sentences[0];
        let seqs = split_sequences(s, v.bos(), v.eos(), 30, 0, 0);
        assert_eq!(seqs.len(), 3);
        assert!(seqs.iter().all(|q| q.len() <= 30));
        let inputs: Vec<usize> = seqs.iter().flat_map(|q| q.inputs.clone()).collect();
        let mut expected = vec![v.bos()];
        expected.extend_from_slice(&s.nlm);
        assert_eq!(inputs, expected);
        assert_eq!(*seqs.last().unwrap().targets.last().unwrap(), v.eos());
    }
}
