"""Text encoders behind a single id string.

"hash-v1" (default) is a deterministic hashed n-gram projection: no model
downloads, byte-stable across runs and machines, which is what the store
format promises. "st:<model>" uses sentence-transformers when the weights
are available; load failures are surfaced verbatim.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_ENCODER = "hash-v1"
DEFAULT_HASH_DIM = 256


class HashedNgramEncoder:
    """Signed feature hashing over tokens and token bigrams, L2-normalized."""

    def __init__(self, dim: int = DEFAULT_HASH_DIM):
        self.dim = dim
        self.id = f"hash-v1:d{dim}"

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = text.lower().split()
        features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        for feat in features:
            digest = hashlib.md5(feat.encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "little") % self.dim
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec


class SentenceTransformerEncoder:
    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer  # optional dependency

        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.id = f"st:{model_name}"

    def encode(self, text: str) -> np.ndarray:
        return np.asarray(self._model.encode([text])[0], dtype=np.float64)


def load_encoder(encoder_id: str = DEFAULT_ENCODER, dim: int = DEFAULT_HASH_DIM):
    if encoder_id in ("hash-v1", "hash"):
        return HashedNgramEncoder(dim=dim)
    if encoder_id.startswith("st:"):
        return SentenceTransformerEncoder(encoder_id[3:])
    raise ValueError(f"unknown encoder {encoder_id!r}; expected 'hash-v1' or 'st:<model>'")
