//! Latent and explainable topic representations.
//!
//! The latent representation is the NTM latent `h` itself. The explainable
//! one masks the topic-word matrix down to words present in the context,
//! keeps the `top_n` strongest words of every topic, averages their
//! embeddings into one vector per topic and mixes those with
//! `softmax(h)` as weights.

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::numcore::{softmax, Graph, Tensor, Var};

/// Divisor used when averaging a topic's key-term embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermAveraging {
    /// Divide by the number of terms actually returned.
    #[default]
    ReturnedCount,
    /// Always divide by `top_n`, even when fewer terms exist.
    TopN,
}

impl TermAveraging {
    fn divisor(self, returned: usize, top_n: usize) -> f64 {
        match self {
            TermAveraging::ReturnedCount => returned.max(1) as f64,
            TermAveraging::TopN => top_n.max(1) as f64,
        }
    }
}

/// Topic context of one view: latent vector, explainable vector, key terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicBundle {
    pub ltr: Tensor,
    pub etr: Tensor,
    pub terms: Vec<Vec<usize>>,
    pub weights: Tensor,
}

/// Per topic, the `top_n` highest-weighted words among those with a
/// non-zero count in `bow`. Ties go to the lower vocabulary index.
pub fn topic_extract(topic_word: &Tensor, bow: &[f64], top_n: usize) -> Vec<Vec<usize>> {
    let present: Vec<usize> = bow
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, _)| i)
        .collect();
    (0..topic_word.rows())
        .map(|k| {
            let row = topic_word.row(k);
            let mut cols = present.clone();
            let take = top_n.min(cols.len());
            if take == 0 {
                return Vec::new();
            }
            let by_weight = |a: &usize, b: &usize| row[*b].total_cmp(&row[*a]).then(a.cmp(b));
            if take < cols.len() {
                cols.select_nth_unstable_by(take - 1, by_weight);
                cols.truncate(take);
            }
            cols.sort_by(by_weight);
            cols
        })
        .collect()
}

/// Mean embedding (columns of `embeddings: [D, Z]`) of one topic's terms.
/// Empty term lists give the zero vector.
pub fn topic_embedding(embeddings: &Tensor, terms: &[usize], top_n: usize, averaging: TermAveraging) -> Vec<f64> {
    let (d, z) = (embeddings.rows(), embeddings.cols());
    let mut out = vec![0.0; d];
    if terms.is_empty() {
        return out;
    }
    let data = embeddings.data();
    for &t in terms {
        for (i, o) in out.iter_mut().enumerate() {
            *o += data[i * z + t];
        }
    }
    let div = averaging.divisor(terms.len(), top_n);
    out.iter_mut().for_each(|o| *o /= div);
    out
}

/// Explainable representation `Σ_k softmax(h)_k · z^k` plus the key terms.
pub fn etr(
    topic_word: &Tensor,
    bow: &[f64],
    top_n: usize,
    h: &[f64],
    embeddings: &Tensor,
    averaging: TermAveraging,
) -> Result<(Tensor, Vec<Vec<usize>>)> {
    if h.len() != topic_word.rows() {
        return Err(Error::dim("etr", format!("h has {} entries for {} topics", h.len(), topic_word.rows())));
    }
    if embeddings.cols() != topic_word.cols() || bow.len() != topic_word.cols() {
        return Err(Error::dim("etr", "embedding, bag-of-words and topic matrix disagree on Z"));
    }
    let terms = topic_extract(topic_word, bow, top_n);
    if terms.iter().all(Vec::is_empty) {
        log::warn!("empty context: explainable topic vector is zero");
    }
    let weights = softmax(h);
    let mut z = vec![0.0; embeddings.rows()];
    for (k, t) in terms.iter().enumerate() {
        let zk = topic_embedding(embeddings, t, top_n, averaging);
        for (o, v) in z.iter_mut().zip(zk) {
            *o += weights[k] * v;
        }
    }
    Ok((Tensor::vector(z), terms))
}

/// Builds the full [`TopicBundle`] for an already-computed latent `h`.
pub fn bundle(
    topic_word: &Tensor,
    bow: &[f64],
    top_n: usize,
    h: &Tensor,
    embeddings: &Tensor,
    averaging: TermAveraging,
) -> Result<TopicBundle> {
    let (etr, terms) = etr(topic_word, bow, top_n, h.data(), embeddings, averaging)?;
    Ok(TopicBundle {
        ltr: h.clone(),
        etr,
        terms,
        weights: h.softmax(),
    })
}

/// Graph version of [`etr`] with the key terms already chosen. The terms
/// are constants of the forward pass; gradients reach `h` and `embeddings`.
pub fn etr_var(
    g: &mut Graph,
    embeddings: Var,
    terms: &[Vec<usize>],
    h: Var,
    top_n: usize,
    averaging: TermAveraging,
) -> Result<Var> {
    let rows = terms
        .iter()
        .map(|t| g.column_average(embeddings, t, averaging.divisor(t.len(), top_n)))
        .collect::<Result<Vec<_>>>()?;
    let stacked = g.stack(&rows)?;
    let weights = g.softmax(h)?;
    g.vecmat(weights, stacked)
}

/// Global top words of every topic, unmasked.
pub fn topic_report(topic_word: &Tensor, vocab: &Vocabulary, top_n: usize) -> Vec<Vec<String>> {
    let all = vec![1.0; topic_word.cols()];
    topic_extract(topic_word, &all, top_n)
        .into_iter()
        .map(|ids| ids.into_iter().map(|i| vocab.token(i).to_owned()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SeededRng;

    #[test]
    fn single_present_word_is_every_topic_term() {
        let w = SeededRng::new(1).uniform_tensor(&[3, 5], -1.0, 1.0);
        let v = [0.0, 0.0, 2.0, 0.0, 0.0];
        assert_eq!(topic_extract(&w, &v, 4), vec![vec![2]; 3]);
    }

    #[test]
    fn masked_two_topic_instance() {
        let w = Tensor::matrix(2, 4, vec![0.9, 0.1, 0.8, 0.2, 0.1, 0.9, 0.2, 0.8]).unwrap();
        let v = [1.0, 1.0, 0.0, 1.0];
        assert_eq!(topic_extract(&w, &v, 2), vec![vec![0, 3], vec![1, 3]]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let w = Tensor::matrix(1, 4, vec![0.5, 0.5, 0.5, 0.1]).unwrap();
        assert_eq!(topic_extract(&w, &[1.0; 4], 2), vec![vec![0, 1]]);
    }

    #[test]
    fn empty_bow_gives_empty_terms_and_zero_etr() {
        let w = Tensor::matrix(2, 3, vec![0.1, 0.2, 0.3, 0.3, 0.2, 0.1]).unwrap();
        let e = SeededRng::new(2).uniform_tensor(&[4, 3], -1.0, 1.0);
        let (z, t) = etr(&w, &[0.0; 3], 5, &[0.3, 0.1], &e, TermAveraging::ReturnedCount).unwrap();
        assert!(t.iter().all(Vec::is_empty));
        assert!(z.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn topic_embedding_cases() {
        let e = Tensor::matrix(2, 3, vec![1.0, -1.0, 5.0, 2.0, -2.0, 7.0]).unwrap();
        assert_eq!(topic_embedding(&e, &[2], 10, TermAveraging::ReturnedCount), vec![5.0, 7.0]);
        assert_eq!(topic_embedding(&e, &[0, 1], 10, TermAveraging::ReturnedCount), vec![0.0, 0.0]);
        assert_eq!(topic_embedding(&e, &[2], 2, TermAveraging::TopN), vec![2.5, 3.5]);
        assert_eq!(topic_embedding(&e, &[], 2, TermAveraging::TopN), vec![0.0, 0.0]);
    }

    #[test]
    fn single_topic_etr_ignores_h() {
        let w = SeededRng::new(3).uniform_tensor(&[1, 6], -1.0, 1.0);
        let e = SeededRng::new(4).uniform_tensor(&[3, 6], -1.0, 1.0);
        let v = [1.0, 0.0, 1.0, 1.0, 0.0, 2.0];
        let (a, _) = etr(&w, &v, 2, &[-4.0], &e, TermAveraging::ReturnedCount).unwrap();
        let (b, t) = etr(&w, &v, 2, &[9.0], &e, TermAveraging::ReturnedCount).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data(), &topic_embedding(&e, &t[0], 2, TermAveraging::ReturnedCount)[..]);
    }

    #[test]
    fn saturated_weights_select_first_topic() {
        let w = SeededRng::new(5).uniform_tensor(&[3, 6], -1.0, 1.0);
        let e = SeededRng::new(6).uniform_tensor(&[3, 6], -1.0, 1.0);
        let v = [1.0; 6];
        let (z, t) = etr(&w, &v, 3, &[50.0, -50.0, -50.0], &e, TermAveraging::ReturnedCount).unwrap();
        let z1 = topic_embedding(&e, &t[0], 3, TermAveraging::ReturnedCount);
        for (a, b) in z.data().iter().zip(z1) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn etr_is_shift_invariant_in_h() {
        let w = SeededRng::new(7).uniform_tensor(&[3, 6], -1.0, 1.0);
        let e = SeededRng::new(8).uniform_tensor(&[4, 6], -1.0, 1.0);
        let v = [1.0, 0.0, 3.0, 1.0, 1.0, 0.0];
        let (a, _) = etr(&w, &v, 2, &[0.1, 0.7, -0.4], &e, TermAveraging::ReturnedCount).unwrap();
        let (b, _) = etr(&w, &v, 2, &[5.1, 5.7, 4.6], &e, TermAveraging::ReturnedCount).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn report_puts_row_max_first() {
        let vocab = Vocabulary::from_tokens(vec!["apple".into(), "soldiers".into(), "pear".into()]).unwrap();
        let w = Tensor::matrix(1, 3, vec![0.1, 0.9, 0.5]).unwrap();
        assert_eq!(topic_report(&w, &vocab, 2), vec![vec!["soldiers", "pear"]]);
    }

    #[test]
    fn graph_etr_matches_value_etr() {
        let w = SeededRng::new(9).uniform_tensor(&[3, 6], -1.0, 1.0);
        let e = SeededRng::new(10).uniform_tensor(&[4, 6], -1.0, 1.0);
        let v = [1.0, 0.0, 3.0, 1.0, 1.0, 0.0];
        let h = [0.2, -0.3, 0.9];
        let (z, terms) = etr(&w, &v, 2, &h, &e, TermAveraging::ReturnedCount).unwrap();
        let mut g = Graph::new();
        let ev = g.constant(e.clone());
        let hv = g.constant(Tensor::vector(h.to_vec()));
        let out = etr_var(&mut g, ev, &terms, hv, 2, TermAveraging::ReturnedCount).unwrap();
        for (a, b) in g.value(out).data().iter().zip(z.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
