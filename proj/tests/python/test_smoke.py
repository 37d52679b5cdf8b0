"""Smoke tests for the python bindings over the C++ core."""

import math
import os

import pytest

import usmt


def test_tokenize():
    assert usmt.tokenize("the house") == ["the", "house"]
    assert usmt.tokenize("  a  b ") == ["a", "b"]
    assert usmt.tokenize("") == []


def test_phrase_score():
    assert usmt.phrase_score(110, 1000, 100, delta=10.0) == pytest.approx(1.0e-3)
    assert usmt.phrase_score(10, 50, 50, delta=10.0) == 0.0
    with pytest.raises(usmt.UsmtError):
        usmt.phrase_score(1, 0, 5, delta=10.0)


def test_collect_phrases():
    lines = ["new york"] * 100 + ["new deal"] * 8 + ["york city"] * 8
    inventory, merged = usmt.collect_phrases(lines, threshold=1e-3, passes=1)
    phrases = {p for p, _ in inventory}
    assert "new_york" in phrases
    assert merged.count("new_york") == 100


def test_lexical_prob():
    assert usmt.lexical_prob([[0.5, 0.2], [0.1, 0.4]]) == pytest.approx(0.1)


def test_fisher_pvalue():
    assert usmt.fisher_pvalue(2, 2, 2, 10) == pytest.approx(1.0 / 45.0)
    assert usmt.fisher_pvalue(0, 3, 3, 9) == 1.0


def test_filter_keep_count():
    assert usmt.filter_keep_count(0.5, 3000000, 2) == 3000000
    assert usmt.filter_keep_count(0.5, 3, 1) == 2


def test_language_model():
    model = usmt.NGramModel.train(["a b c", "a b d", "b c a"] * 5, order=2, estimator="add-k")
    assert model.order == 2
    seen = model.score(["a", "b", "c"])
    unseen = model.score(["zz", "qq", "xx"])
    assert seen > unseen
    clean = model.cleanliness(["a", "b", "c"])
    assert clean == pytest.approx(seen / 4.0)


def test_ibm1_and_extraction():
    result = usmt.train_ibm1([("la maison", "the house"), ("la fleur", "the flower")],
                             iterations=5)
    assert result.prob("la", "the") > result.prob("la", "house")
    assert len(result.log_likelihood) == 5
    assert result.log_likelihood[-1] >= result.log_likelihood[0]

    pairs = usmt.extract_phrases("w1 w2", "w1 w2", [(0, 0), (1, 1)], max_len=2)
    assert set(pairs) == {("w1", "w1"), ("w2", "w2"), ("w1 w2", "w1 w2")}


def test_bleu():
    report = usmt.bleu(["a b c d"], ["a b c d e"])
    assert report["bleu"] == pytest.approx(77.8800783, abs=1e-4)
    perfect = usmt.bleu(["x y z w"], ["x y z w"])
    assert perfect["bleu"] == pytest.approx(100.0)


def test_fixture_embeddings_and_topk(tmp_path):
    out = str(tmp_path / "fx")
    usmt.make_fixture(out, vocab=30, sentences=200, one_hot=True, seed=3)
    src = usmt.EmbeddingSpace.load(os.path.join(out, "src.emb"), "src")
    tgt = usmt.EmbeddingSpace.load(os.path.join(out, "tgt.emb"), "tgt")
    assert len(src) == 30 and src.dim == 30
    candidates = [f"t{i:03d}" for i in range(30)]
    ranked = usmt.topk_candidates("s000", candidates, src, tgt, k=5)
    assert len(ranked) == 5
    top_phrase, top_cos, top_prob = ranked[0]
    assert top_cos == pytest.approx(1.0)
    assert sum(p for _, _, p in ranked) == pytest.approx(1.0)


def test_translation_system_decode(tmp_path):
    table = tmp_path / "table.txt"
    table.write_text(
        "hund ||| dog ||| 0.9 0.9 0.9 0.9\n"
        "schlief ||| slept ||| 0.9 0.9 0.9 0.9\n"
    )
    lm_lines = ["dog slept"] * 10
    model = usmt.NGramModel.train(lm_lines, order=2, estimator="add-k")
    arpa = tmp_path / "lm.arpa"
    model.save(str(arpa))
    sys = usmt.TranslationSystem.from_files(str(table), str(arpa))
    assert sys.decode("hund schlief") == "dog slept"
    assert sys.decode("hund oov schlief") == "dog oov slept"
