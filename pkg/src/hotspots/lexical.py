"""Word-based window features: TF-IDF n-gram vectors and pooled dense vectors.

The n-gram vocabulary is fit on training utterances only (each utterance is
one document for IDF). A word belongs to a window iff its start time lies in
the half-open window span, matching the onset convention used for turns;
n-grams never cross utterance boundaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Meeting, Utterance
from .vectors import DenseVectorStore
from .windowing import Window

DEFAULT_VOCAB_SIZE = 10_000
NGRAM_ORDERS = (1, 2, 3)

Ngram = tuple[str, ...]


class LexicalError(ValueError):
    pass


def tokens_of(utterance: Utterance, lowercase: bool = True) -> list[str]:
    if lowercase:
        return [w.text.lower() for w in utterance.words]
    return [w.text for w in utterance.words]


def iter_ngrams(tokens: Sequence[str], orders: Iterable[int] = NGRAM_ORDERS):
    for n in orders:
        for i in range(len(tokens) - n + 1):
            yield tuple(tokens[i : i + n])


@dataclass
class Vocab:
    entries: list[tuple[Ngram, float]]  # (ngram, idf), rank order
    lowercase: bool = True

    def __post_init__(self) -> None:
        self.index: dict[Ngram, int] = {ng: i for i, (ng, _) in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise LexicalError("vocabulary entries must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def idf(self) -> np.ndarray:
        return np.array([idf for _, idf in self.entries], dtype=np.float64)

    def save(self, path: str | Path) -> None:
        payload = {
            "lowercase": self.lowercase,
            "entries": [[list(ng), idf] for ng, idf in self.entries],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        entries = [(tuple(ng), float(idf)) for ng, idf in payload["entries"]]
        return cls(entries=entries, lowercase=payload.get("lowercase", True))


def fit_vocab(
    training_utterances: Iterable[Utterance],
    max_size: int = DEFAULT_VOCAB_SIZE,
    lowercase: bool = True,
) -> Vocab:
    """Rank n-grams by training occurrence count and keep the most frequent.

    Ties break lexicographically so the ranking is deterministic. IDF uses
    smoothed document frequency: idf = ln((1 + N) / (1 + df)) + 1 with each
    utterance as one document.
    """
    counts: dict[Ngram, int] = {}
    df: dict[Ngram, int] = {}
    n_docs = 0
    for utt in training_utterances:
        n_docs += 1
        tokens = tokens_of(utt, lowercase)
        seen: set[Ngram] = set()
        for ng in iter_ngrams(tokens):
            counts[ng] = counts.get(ng, 0) + 1
            seen.add(ng)
        for ng in seen:
            df[ng] = df.get(ng, 0) + 1
    if not counts:
        raise LexicalError("no n-grams found in training utterances")
    ranked = sorted(counts, key=lambda ng: (-counts[ng], ng))[:max_size]
    entries = [(ng, math.log((1 + n_docs) / (1 + df[ng])) + 1.0) for ng in ranked]
    return Vocab(entries=entries, lowercase=lowercase)


@dataclass(frozen=True)
class SparseVector:
    dim: int
    indices: tuple[int, ...]  # strictly increasing, < dim
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.values):
            raise LexicalError("indices and values must have equal length")
        prev = -1
        for idx in self.indices:
            if not prev < idx < self.dim:
                raise LexicalError(f"indices must be strictly increasing and < {self.dim}")
            prev = idx

    def to_dense(self) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        if self.indices:
            vec[list(self.indices)] = self.values
        return vec

    @property
    def nnz(self) -> int:
        return len(self.indices)


def window_tokens(meeting: Meeting, window: Window, lowercase: bool = True) -> list[list[str]]:
    """Token runs per utterance, restricted to words starting inside the window."""
    runs: list[list[str]] = []
    for utt in meeting.utterances:
        tokens = [
            (w.text.lower() if lowercase else w.text)
            for w in utt.words
            if window.start_s <= w.start_s < window.end_s
        ]
        if tokens:
            runs.append(tokens)
    return runs


def tfidf_window(vocab: Vocab, meeting: Meeting, window: Window) -> SparseVector:
    """TF-IDF vector over the window's words, L2-normalized when non-zero."""
    tf: dict[int, float] = {}
    for tokens in window_tokens(meeting, window, vocab.lowercase):
        for ng in iter_ngrams(tokens):
            idx = vocab.index.get(ng)
            if idx is not None:
                tf[idx] = tf.get(idx, 0.0) + 1.0
    if not tf:
        return SparseVector(dim=len(vocab), indices=(), values=())
    indices = sorted(tf)
    values = [tf[i] * vocab.entries[i][1] for i in indices]
    norm = math.sqrt(sum(v * v for v in values))
    values = [v / norm for v in values]
    return SparseVector(dim=len(vocab), indices=tuple(indices), values=tuple(values))


class MissingVectorError(KeyError):
    pass


def pool_vectors(
    store: DenseVectorStore,
    meeting: Meeting,
    window: Window,
    method: str = "l2",
    l2_mode: str = "rss",
) -> tuple[np.ndarray, bool]:
    """Pool per-utterance vectors of utterances overlapping the window.

    Prefers the boundary-truncated key "<utt>#<index>" and falls back to the
    whole-utterance key. l2_mode "rss" is root-sum-of-squares; "rms" divides
    by the member count before the root. Returns (vector, is_empty).
    """
    if method not in ("l2", "mean", "max", "min"):
        raise ValueError(f"unknown pooling method {method!r}")
    members: list[np.ndarray] = []
    for utt in meeting.utterances:
        if utt.start_s < window.end_s and utt.end_s > window.start_s:
            truncated_key = f"{utt.id}#{window.index}"
            vec = store.get(truncated_key)
            if vec is None:
                vec = store.get(utt.id)
            if vec is None:
                raise MissingVectorError(
                    f"no vector for utterance {utt.id!r} overlapping window "
                    f"{window.key!r} (tried keys {truncated_key!r} and {utt.id!r})"
                )
            members.append(vec)
    if not members:
        return np.zeros(store.dim, dtype=np.float64), True
    stack = np.stack(members)
    if method == "l2":
        sq = np.sum(stack * stack, axis=0)
        if l2_mode == "rms":
            sq = sq / len(members)
        pooled = np.sqrt(sq)
    elif method == "mean":
        pooled = stack.mean(axis=0)
    elif method == "max":
        pooled = stack.max(axis=0)
    else:
        pooled = stack.min(axis=0)
    return pooled, False


def write_tfidf_features(features: dict[str, SparseVector], dim: int, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": dim, "kind": "tfidf_window"}))
        fh.write("\n")
        for key in sorted(features):
            sv = features[key]
            fh.write(
                json.dumps({"key": key, "idx": list(sv.indices), "val": list(sv.values)})
            )
            fh.write("\n")


def read_tfidf_features(path: str | Path) -> tuple[dict[str, SparseVector], int]:
    features: dict[str, SparseVector] = {}
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        dim = int(header["dim"])
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            features[obj["key"]] = SparseVector(
                dim=dim, indices=tuple(obj["idx"]), values=tuple(obj["val"])
            )
    return features, dim
