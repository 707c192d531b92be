"""Smoke test for the nclm_py extension.

Build and install it first:

    pip install --no-build-isolation -e crates/python
"""

import math
import tempfile
from pathlib import Path

import nclm_py


def corpus():
    fruit = ["apple", "banana", "cherry"]
    cars = ["engine", "wheel", "brake"]
    docs, labels = [], []
    for d in range(12):
        words, label = (fruit, "fruit") if d % 2 == 0 else (cars, "car")
        docs.append(
            [f"the {words[s % 3]} and a {words[(s + d) % 3]} of the {words[(s + 2) % 3]}" for s in range(3)]
        )
        labels.append(label)
    return docs, labels


def main():
    assert nclm_py.kl_divergence([0.0, 0.0], [1.0, 1.0]) == 0.0
    assert nclm_py.kl_divergence([1.0], [1.0]) == 0.5
    assert nclm_py.joint_loss(2.0, 4.0, 0.5) == 3.0
    assert nclm_py.topic_extract([[0.1, 0.9, 0.5], [0.7, 0.2, 0.3]], [1, 0, 1], 2) == [[2, 0], [0, 2]]
    assert abs(nclm_py.npmi(0.5, 0.5, 0.5) - 1.0) < 1e-9
    assert nclm_py.cosine([1.0, 0.0], [0.0, 2.0]) == 0.0

    try:
        nclm_py.TrainConfig('{"alpha": 1.5}')
    except ValueError as e:
        assert "alpha" in str(e)
    else:
        raise AssertionError("alpha out of range was accepted")

    config = nclm_py.TrainConfig(
        """{
          "K": 2, "topN": 3, "ntm_hidden": 6, "hidden": 5, "input_dim": 4, "embed_dim": 4,
          "batch_size": 4, "ntm_pretrain_epochs": 1, "nlm_pretrain_epochs": 1, "max_epochs": 2,
          "early_stop_patience": 1, "dropout": 0.0, "valid_fraction": 0.25,
          "vocab": {"nlm_min_count": 1, "ntm_min_count": 1, "top_frac": 0.0}
        }"""
    )
    docs, labels = corpus()
    model = nclm_py.Model.train(config, docs)
    assert model.variant == "LETA-NLM"

    ppl = model.perplexity(docs)
    assert math.isfinite(ppl) and ppl > 1.0
    topics = model.topics(3)
    assert len(topics) == 2 and all(len(t) == 3 for t in topics)
    per_topic, average = model.coherence(docs, [2, 3])
    assert len(per_topic) == 2 and -1.0 <= average <= 1.0

    sentences = model.generate(topic=0, count=3, max_len=6, seed=2)
    assert len(sentences) == 3 and sentences == model.generate(topic=0, count=3, max_len=6, seed=2)

    feats = model.features(docs)
    assert len(feats) == len(docs)
    p = nclm_py.retrieval(feats, labels, feats, labels, [1, 3])
    assert p[1] == 1.0

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.nclm"
        model.save(str(path))
        again = nclm_py.Model.load(str(path))
        assert again.to_bytes() == model.to_bytes()
        assert again.perplexity(docs) == ppl

        text = Path(tmp) / "corpus.txt"
        text.write_text("A b c.\nd e\n\nf g\n")
        loaded, doc_labels = nclm_py.load_corpus(str(text))
        assert loaded == [["a b c .", "d e"], ["f g"]] and doc_labels == [None, None]

    print(f"ok: {model!r} perplexity={ppl:.3f} topics={topics}")


if __name__ == "__main__":
    main()
