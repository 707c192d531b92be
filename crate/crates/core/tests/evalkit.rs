mod common;

use common::{brute_force_p_at_k, corpus, hand_npmi, labelled, npmi_fixture};
use nclm::corpus::{DualVocab, EncodedCorpus, TokenView};
use nclm::evalkit::{
    export_features, lm_perplexity, npmi_coherence, npmi_pair, retrieval_eval, CoherenceConfig,
    Reference,
};
use nclm::model::{ModelConfig, NclmModel};
use nclm::nlm::{Variant, VariantKind};
use nclm::ntm::{sample_h, LatentTransform, Noise};
use nclm::numcore::{SeededRng, Tensor};
use nclm::topics::TermAveraging;
use proptest::prelude::*;

fn model_config(variant: Variant, hidden: usize, input_dim: usize) -> ModelConfig {
    ModelConfig {
        variant,
        topics: 3,
        ntm_hidden: 5,
        hidden,
        layers: 1,
        input_dim,
        embed_dim: 4,
        top_n: 3,
        dropout: 0.0,
        latent_transform: LatentTransform::Identity,
        term_averaging: TermAveraging::ReturnedCount,
        sdt_once_per_sentence: false,
        whole_document_ntm: false,
        ntm_samples: 1,
        train_topic_embeddings: false,
    }
}

fn vocab() -> DualVocab {
    let nlm = ["<unk>", "<bos>", "<eos>", "x", "cat", "fish", "dog"];
    let ntm = ["cat", "fish", "dog"];
    DualVocab::from_parts(
        nlm.iter().map(|s| s.to_string()).collect(),
        ntm.iter().map(|s| s.to_string()).collect(),
        Default::default(),
    )
    .unwrap()
}

fn model(variant: Variant, seed: u64) -> NclmModel {
    let v = vocab();
    let mut rng = SeededRng::new(seed);
    let e = rng.uniform_tensor(&[4, v.ntm.len()], -1.0, 1.0);
    NclmModel::init(model_config(variant, 6, 5), v.nlm.len(), v.ntm.len(), e, &mut rng).unwrap()
}

fn encoded(docs: &[&str]) -> EncodedCorpus {
    EncodedCorpus::encode(&corpus(docs), &vocab())
}

#[test]
fn npmi_matches_hand_counts() {
    let r = Reference::build(&npmi_fixture(), None).unwrap();
    let eps = 1e-12;
    let cases = [
        ("apple", "banana", 3.0, 3.0, 2.0),
        ("apple", "cherry", 3.0, 2.0, 2.0),
        ("banana", "cherry", 3.0, 2.0, 1.0),
        ("apple", "date", 3.0, 2.0, 1.0),
        ("cherry", "date", 2.0, 2.0, 1.0),
    ];
    for (a, b, na, nb, nab) in cases {
        let got = npmi_pair(&r, a, b, eps).unwrap();
        assert!((got - hand_npmi(na, nb, nab)).abs() < 1e-9, "{a},{b}");
    }

    let topic = vec!["apple".to_owned(), "banana".to_owned(), "cherry".to_owned()];
    let config = CoherenceConfig {
        top_counts: vec![2, 3],
        epsilon: eps,
        window: None,
    };
    let report = npmi_coherence(&[topic], &r, &config).unwrap();
    let top2 = hand_npmi(3.0, 3.0, 2.0);
    let top3 = (hand_npmi(3.0, 3.0, 2.0) + hand_npmi(3.0, 2.0, 2.0) + hand_npmi(3.0, 2.0, 1.0)) / 3.0;
    assert!((report.average - (top2 + top3) / 2.0).abs() < 1e-9);

    let never = npmi_pair(&r, "elder", "apple", eps).unwrap();
    assert!(never < 0.0 && never >= -1.0);
}

#[test]
fn zeroed_output_layer_gives_vocabulary_size() {
    for variant in [Variant::LSTM, Variant::new(VariantKind::Leta, true).unwrap()] {
        let mut m = model(variant, 1);
        m.nlm.output_weight = Tensor::zeros(m.nlm.output_weight.shape());
        m.nlm.output_bias = Tensor::zeros(m.nlm.output_bias.shape());
        let c = encoded(&["x cat fish . dog x", "fish fish"]);
        let ppl = lm_perplexity(&m, &c, &vocab(), 30).unwrap();
        assert!((ppl - 7.0).abs() < 1e-9, "{ppl}");
    }
}

#[test]
fn perplexity_is_a_per_token_average() {
    let m = model(Variant::new(VariantKind::Lta, true).unwrap(), 2);
    let v = vocab();
    let once = lm_perplexity(&m, &encoded(&["x cat . fish dog x", "dog cat"]), &v, 30).unwrap();
    let twice = lm_perplexity(&m, &encoded(&["x cat . fish dog x", "dog cat", "x cat . fish dog x", "dog cat"]), &v, 30).unwrap();
    let reordered = lm_perplexity(&m, &encoded(&["dog cat", "x cat . fish dog x"]), &v, 30).unwrap();
    assert!((once - twice).abs() < 1e-9 * once);
    assert!((once - reordered).abs() < 1e-9 * once);
    assert!(lm_perplexity(&m, &encoded(&[]), &v, 30).is_err());
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One-unit LSTM worked step by step for the sentence `x x`.
#[test]
fn perplexity_matches_hand_computation() {
    let v = vocab();
    let mut rng = SeededRng::new(0);
    let cfg = model_config(Variant::LSTM, 1, 1);
    let mut m = NclmModel::init(cfg, 7, 3, Tensor::zeros(&[4, 3]), &mut rng).unwrap();
    let emb: Vec<f64> = (0..7).map(|i| 0.1 * i as f64 - 0.2).collect();
    m.nlm.input_embedding = Tensor::matrix(1, 7, emb.clone()).unwrap();
    // Gate rows (input, forget, candidate, output) over [x, h].
    let w = [[0.5, -0.3], [0.2, 0.4], [-0.7, 0.9], [0.3, 0.1]];
    let b = [0.1, 0.2, -0.1, 0.0];
    m.nlm.layers[0].weight = Tensor::matrix(4, 2, w.concat()).unwrap();
    m.nlm.layers[0].bias = Tensor::vector(b.to_vec());
    let u: Vec<f64> = (0..7).map(|i| 0.3 * i as f64 - 1.0).collect();
    let a: Vec<f64> = (0..7).map(|i| 0.05 * (i * i) as f64).collect();
    m.nlm.output_weight = Tensor::matrix(1, 7, u.clone()).unwrap();
    m.nlm.output_bias = Tensor::vector(a.clone());

    let (bos, x, eos) = (1, 3, 2);
    let (mut h, mut c) = (0.0, 0.0);
    let mut nll = 0.0;
    for (input, target) in [(bos, x), (x, x), (x, eos)] {
        let e = emb[input];
        let pre: Vec<f64> = (0..4).map(|r| w[r][0] * e + w[r][1] * h + b[r]).collect();
        c = sig(pre[1]) * c + sig(pre[0]) * pre[2].tanh();
        h = sig(pre[3]) * c.tanh();
        let logits: Vec<f64> = (0..7).map(|j| u[j] * h + a[j]).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        nll -= logits[target] - z.ln();
    }
    let expected = (nll / 3.0).exp();
    let got = lm_perplexity(&m, &encoded(&["x x"]), &v, 30).unwrap();
    assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");
}

#[test]
fn features_carry_the_posterior_mean() {
    let v = vocab();
    let c = encoded(&["cat fish x . dog cat", "fish"]);
    for kind in [VariantKind::Lta, VariantKind::Eta, VariantKind::Leta] {
        let variant = Variant::new(kind, false).unwrap();
        let m = model(variant, 5);
        let rows = export_features(&m, &c, &v).unwrap();
        let ctx = variant.context_dim(3, 4).unwrap();
        for (row, doc) in rows.iter().zip(&c.docs) {
            assert_eq!(row.features.len(), 6 + ctx);
            if kind != VariantKind::Eta {
                let mu = sample_h(&m.ntm, &doc.view().bow(3), Noise::Mean, LatentTransform::Identity)
                    .unwrap()
                    .mu;
                assert_eq!(&row.features[6..9], mu.data());
            }
        }
        assert_eq!(rows, export_features(&m, &c, &v).unwrap());
    }
    let lstm = model(Variant::LSTM, 5);
    assert_eq!(export_features(&lstm, &c, &v).unwrap()[0].features.len(), 6);
    assert!(export_features(&lstm, &encoded(&[""]), &v).is_err());
}

proptest! {
    #[test]
    fn retrieval_matches_exhaustive_oracle(
        train in prop::collection::vec((prop::collection::vec(-2i32..3, 4), 0usize..3), 20),
        test in prop::collection::vec((prop::collection::vec(-2i32..3, 4), 0usize..3), 1..20),
        scale in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0, 8.0]),
    ) {
        let split = |v: &[(Vec<i32>, usize)]| -> (Vec<Vec<f64>>, Vec<usize>) {
            v.iter().map(|(f, l)| (f.iter().map(|&x| x as f64).collect(), *l)).unzip()
        };
        let (tf, tl) = split(&train);
        let (qf, ql) = split(&test);
        let train = labelled(tf, &tl);
        let test = labelled(qf, &ql);
        let got = retrieval_eval(&train, &test, &[1, 5, 10]).unwrap();
        for k in [1, 5, 10] {
            prop_assert_eq!(got.p_at_k[&k], brute_force_p_at_k(&train, &test, k));
        }
        // Power-of-two rescaling keeps cosines exact, so ties survive too.
        let mut scaled = train.clone();
        scaled[0].features.iter_mut().for_each(|x| *x *= scale);
        let again = retrieval_eval(&scaled, &test, &[1, 5, 10]).unwrap();
        prop_assert_eq!(got.p_at_k, again.p_at_k);
    }
}

#[test]
fn sliding_window_reference_counts_windows() {
    let r = Reference::build(&corpus(&["a b c d"]), Some(2)).unwrap();
    assert_eq!(r.units(), 3);
    assert_eq!(r.joint_prob("a", "b"), Some(1.0 / 3.0));
    assert_eq!(r.joint_prob("a", "c"), Some(0.0));
}
