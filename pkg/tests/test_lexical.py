import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hotspots.lexical import (
    LexicalError,
    MissingVectorError,
    SparseVector,
    Vocab,
    fit_vocab,
    iter_ngrams,
    pool_vectors,
    tfidf_window,
)
from hotspots.vectors import DenseVectorStore
from hotspots.windowing import Window

from conftest import make_meeting, make_utterance, make_word


def utterance_from_tokens(uid, tokens, start=0.0, step=0.5, **kw):
    words = []
    t = start
    for tok in tokens:
        words.append(make_word(tok, round(t, 3), round(t + 0.3, 3)))
        t += step
    return make_utterance(uid, words=words, **kw)


def window(start=0.0, length=60.0, index=0):
    return Window(meeting_id="m1", index=index, start_s=start, end_s=start + length, label="not_hot")


def test_two_word_utterance_vocab():
    vocab = fit_vocab([utterance_from_tokens("u1", ["a", "b"])])
    grams = {ng for ng, _ in vocab.entries}
    assert grams == {("a",), ("b",), ("a", "b")}
    # every n-gram occurs in the single document: df == 1, N == 1
    expected_idf = math.log((1 + 1) / (1 + 1)) + 1.0
    assert all(idf == pytest.approx(expected_idf) for _, idf in vocab.entries)


def test_token_in_every_utterance_has_idf_one():
    utts = [utterance_from_tokens(f"u{i}", ["common", f"rare{i}"]) for i in range(5)]
    vocab = fit_vocab(utts)
    idf = dict(vocab.entries)
    assert idf[("common",)] == pytest.approx(1.0)  # ln(6/6) + 1
    assert idf[("rare0",)] == pytest.approx(math.log(6 / 2) + 1.0)


def test_vocab_ranking_matches_bruteforce_recount():
    rng = np.random.default_rng(42)
    tokens = [f"t{i}" for i in range(12)]
    utts = []
    for i in range(30):
        n = int(rng.integers(1, 7))
        utts.append(utterance_from_tokens(f"u{i}", [tokens[rng.integers(12)] for _ in range(n)]))
    vocab = fit_vocab(utts, max_size=40)

    counts = Counter()
    df = Counter()
    for u in utts:
        toks = [w.text for w in u.words]
        grams = list(iter_ngrams(toks))
        counts.update(grams)
        df.update(set(grams))
    expected = sorted(counts, key=lambda g: (-counts[g], g))[:40]
    assert [ng for ng, _ in vocab.entries] == expected
    for ng, idf in vocab.entries:
        assert idf == pytest.approx(math.log((1 + len(utts)) / (1 + df[ng])) + 1.0)


def test_vocab_size_cap_and_deterministic_ties():
    utts = [utterance_from_tokens("u1", ["b", "a"]), utterance_from_tokens("u2", ["d", "c"])]
    vocab = fit_vocab(utts, max_size=3)
    assert len(vocab) == 3
    # all counts equal: lexicographic order breaks ties (prefix sorts first)
    assert [ng for ng, _ in vocab.entries] == [("a",), ("b",), ("b", "a")]


def test_empty_training_text_rejected():
    with pytest.raises(LexicalError):
        fit_vocab([make_utterance("u1", start=0.0, end=1.0)])


def test_ngrams_do_not_cross_utterances():
    utts = [utterance_from_tokens("u1", ["a"]), utterance_from_tokens("u2", ["b"], start=10.0)]
    vocab = fit_vocab(utts)
    assert ("a", "b") not in {ng for ng, _ in vocab.entries}


def test_vocab_save_load_round_trip(tmp_path):
    vocab = fit_vocab([utterance_from_tokens("u1", ["a", "b", "c"])])
    vocab.save(tmp_path / "vocab.json")
    loaded = Vocab.load(tmp_path / "vocab.json")
    assert loaded.entries == vocab.entries
    assert loaded.lowercase == vocab.lowercase


def test_tfidf_empty_window_is_zero_vector():
    vocab = fit_vocab([utterance_from_tokens("u1", ["a", "b"])])
    meeting = make_meeting([utterance_from_tokens("u1", ["a", "b"], start=100.0)], duration=300.0)
    sv = tfidf_window(vocab, meeting, window(0.0))
    assert sv.nnz == 0
    assert np.all(sv.to_dense() == 0.0)


def test_tfidf_single_vocab_unigram_has_unit_norm():
    vocab = fit_vocab([utterance_from_tokens("u1", ["a", "b"])])
    meeting = make_meeting([utterance_from_tokens("u2", ["a"], start=5.0)], duration=300.0)
    sv = tfidf_window(vocab, meeting, window(0.0))
    assert sv.nnz == 1
    assert sv.values[0] == pytest.approx(1.0)


def test_tfidf_counts_match_bruteforce():
    rng = np.random.default_rng(3)
    vocab_utts = [
        utterance_from_tokens(f"v{i}", [f"t{rng.integers(8)}" for _ in range(5)]) for i in range(20)
    ]
    vocab = fit_vocab(vocab_utts, max_size=100)
    meeting_utts = []
    t = 0.0
    for i in range(12):
        toks = [f"t{rng.integers(8)}" for _ in range(int(rng.integers(1, 6)))]
        meeting_utts.append(utterance_from_tokens(f"u{i}", toks, start=t))
        t += 11.0
    meeting = make_meeting(meeting_utts, duration=300.0)
    w = window(15.0, index=1)
    sv = tfidf_window(vocab, meeting, w)

    tf = Counter()
    for u in meeting_utts:
        toks = [wd.text for wd in u.words if w.start_s <= wd.start_s < w.end_s]
        tf.update(g for g in iter_ngrams(toks) if g in vocab.index)
    raw = np.zeros(len(vocab))
    for g, c in tf.items():
        raw[vocab.index[g]] = c * dict(vocab.entries)[g]
    norm = np.linalg.norm(raw)
    assert np.allclose(sv.to_dense(), raw / norm if norm else raw)
    assert np.linalg.norm(sv.to_dense()) == pytest.approx(1.0)


def test_window_membership_uses_word_onset():
    # word starts inside the window but ends outside: still counted
    vocab = fit_vocab([utterance_from_tokens("u1", ["edge"])])
    meeting = make_meeting(
        [make_utterance("u2", words=[make_word("edge", 59.9, 60.4)])], duration=300.0
    )
    assert tfidf_window(vocab, meeting, window(0.0)).nnz == 1
    assert tfidf_window(vocab, meeting, window(60.0, index=4)).nnz == 0


def test_sparse_vector_invariants():
    with pytest.raises(LexicalError):
        SparseVector(dim=4, indices=(2, 1), values=(1.0, 1.0))
    with pytest.raises(LexicalError):
        SparseVector(dim=4, indices=(0, 4), values=(1.0, 1.0))


# ---------------------------------------------------------------------------
# pooling


def store_with(vectors: dict[str, list[float]], dim: int) -> DenseVectorStore:
    store = DenseVectorStore(dim=dim, kind="utterance_embedding")
    for key, vec in vectors.items():
        store.add(key, np.asarray(vec, dtype=float))
    return store


def overlapping_meeting():
    return make_meeting(
        [
            make_utterance("u1", start=1.0, end=5.0, words=[make_word("a", 1.0, 4.9)]),
            make_utterance("u2", start=10.0, end=20.0, words=[make_word("b", 10.0, 19.9)]),
            make_utterance("u3", start=100.0, end=105.0, words=[make_word("c", 100.0, 104.9)]),
        ],
        duration=300.0,
    )


def test_mean_pool_singleton_is_identity():
    store = store_with({"u1": [1.0, -2.0], "u2": [0.0, 0.0], "u3": [9.9, 9.9]}, dim=2)
    meeting = make_meeting(
        [make_utterance("u1", start=1.0, end=5.0, words=[make_word("a", 1.0, 4.9)])],
        duration=300.0,
    )
    pooled, empty = pool_vectors(store, meeting, window(0.0), method="mean")
    assert not empty
    assert pooled == pytest.approx([1.0, -2.0])


def test_l2_pool_three_four_five():
    store = store_with({"u1": [3.0, 0.0], "u2": [4.0, 0.0], "u3": [0.0, 0.0]}, dim=2)
    pooled, empty = pool_vectors(store, overlapping_meeting(), window(0.0), method="l2")
    assert not empty
    assert pooled == pytest.approx([5.0, 0.0])


def test_rms_mode_divides_by_count():
    store = store_with({"u1": [3.0, 0.0], "u2": [4.0, 0.0], "u3": [0.0, 0.0]}, dim=2)
    pooled, _ = pool_vectors(store, overlapping_meeting(), window(0.0), method="l2", l2_mode="rms")
    assert pooled == pytest.approx([5.0 / math.sqrt(2), 0.0])


def test_empty_window_pool_flags_emptiness():
    store = store_with({"u1": [1.0], "u2": [1.0], "u3": [1.0]}, dim=1)
    pooled, empty = pool_vectors(store, overlapping_meeting(), window(200.0), method="mean")
    assert empty
    assert pooled == pytest.approx([0.0])


def test_truncated_key_preferred_and_fallback():
    store = store_with({"u1": [1.0], "u1#0": [7.0], "u2": [2.0], "u3": [0.0]}, dim=1)
    pooled, _ = pool_vectors(store, overlapping_meeting(), window(0.0), method="max")
    assert pooled == pytest.approx([7.0])  # u1#0 beats u1; u2 falls back


def test_missing_vector_reports_both_keys():
    store = store_with({"u1": [1.0]}, dim=1)
    with pytest.raises(MissingVectorError, match="u2#0"):
        pool_vectors(store, overlapping_meeting(), window(0.0), method="mean")


def test_unknown_method_rejected():
    store = store_with({"u1": [1.0], "u2": [1.0], "u3": [1.0]}, dim=1)
    with pytest.raises(ValueError):
        pool_vectors(store, overlapping_meeting(), window(0.0), method="sum")


@given(
    n=st.integers(1, 6),
    dim=st.integers(1, 5),
    seed=st.integers(0, 10_000),
)
def test_pooling_matches_reference_and_ordering(n, dim, seed):
    rng = np.random.default_rng(seed)
    vectors = {f"u{i}": rng.normal(size=dim).tolist() for i in range(n)}
    store = store_with(vectors, dim=dim)
    utts = [
        make_utterance(f"u{i}", start=1.0 + i, end=2.0 + i, words=[make_word("x", 1.0 + i, 1.5 + i)])
        for i in range(n)
    ]
    meeting = make_meeting(utts, duration=300.0)
    w = window(0.0)
    stack = np.array([vectors[f"u{i}"] for i in range(n)])
    l2, _ = pool_vectors(store, meeting, w, "l2")
    mean, _ = pool_vectors(store, meeting, w, "mean")
    mx, _ = pool_vectors(store, meeting, w, "max")
    mn, _ = pool_vectors(store, meeting, w, "min")
    assert l2 == pytest.approx(np.sqrt((stack**2).sum(axis=0)))
    assert mean == pytest.approx(stack.mean(axis=0))
    assert mx == pytest.approx(stack.max(axis=0))
    assert mn == pytest.approx(stack.min(axis=0))
    assert np.all(l2 >= -1e-12)
    assert np.all(mx >= mean - 1e-12) and np.all(mean >= mn - 1e-12)
