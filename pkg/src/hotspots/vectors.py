"""Dense vector files: externally produced float vectors keyed by string.

File format: a JSON header line {"dim": D, "kind": "<kind>"} followed by one
JSON object per line {"key": "...", "vec": [floats]}. Keys use '#' as a field
separator ("<utt_id>#<window_index>", "<meeting_id>#<channel>#<start_s>"),
which is why ids in the corpus may not contain '#'.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class VectorStoreError(ValueError):
    """Raised for malformed vector files (bad header, duplicate keys, etc.)."""


class DenseVectorStore:
    def __init__(self, dim: int, kind: str):
        if dim <= 0:
            raise VectorStoreError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.kind = kind
        self._vecs: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._vecs)

    def __contains__(self, key: str) -> bool:
        return key in self._vecs

    def keys(self):
        return self._vecs.keys()

    def get(self, key: str) -> np.ndarray | None:
        return self._vecs.get(key)

    def add(self, key: str, vec: np.ndarray) -> None:
        if key in self._vecs:
            raise VectorStoreError(f"duplicate key {key!r}")
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise VectorStoreError(
                f"key {key!r}: expected vector of dim {self.dim}, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise VectorStoreError(f"key {key!r}: vector contains non-finite values")
        self._vecs[key] = arr

    @classmethod
    def load(cls, path: str | Path, expect_kind: str | None = None) -> "DenseVectorStore":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            header_line = fh.readline().strip()
            if not header_line:
                raise VectorStoreError(f"{path.name}: missing header line")
            try:
                header = json.loads(header_line)
            except json.JSONDecodeError as exc:
                raise VectorStoreError(f"{path.name}:1: malformed header: {exc}") from None
            if not isinstance(header, dict) or "dim" not in header or "kind" not in header:
                raise VectorStoreError(f"{path.name}:1: header must carry 'dim' and 'kind'")
            if expect_kind is not None and header["kind"] != expect_kind:
                raise VectorStoreError(
                    f"{path.name}: kind {header['kind']!r}, expected {expect_kind!r}"
                )
            store = cls(dim=int(header["dim"]), kind=header["kind"])
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise VectorStoreError(f"{path.name}:{lineno}: malformed record: {exc}") from None
                if not isinstance(obj, dict) or "key" not in obj or "vec" not in obj:
                    raise VectorStoreError(f"{path.name}:{lineno}: record must carry 'key' and 'vec'")
                try:
                    store.add(obj["key"], np.asarray(obj["vec"], dtype=np.float64))
                except VectorStoreError as exc:
                    raise VectorStoreError(f"{path.name}:{lineno}: {exc}") from None
        return store

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"dim": self.dim, "kind": self.kind}))
            fh.write("\n")
            for key in sorted(self._vecs):
                fh.write(json.dumps({"key": key, "vec": self._vecs[key].tolist()}))
                fh.write("\n")
