"""Writer for the hotspots dense-vector file format.

Header line {"dim": D, "kind": ...} followed by {"key", "vec"} records; the
producing backend is stamped into the header so stores are reproducible.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def write_store(
    path: str | Path,
    dim: int,
    kind: str,
    rows: dict[str, np.ndarray],
    backend: str | None = None,
) -> None:
    header = {"dim": dim, "kind": kind}
    if backend:
        header["backend"] = backend
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header))
        fh.write("\n")
        for key in sorted(rows):
            vec = np.asarray(rows[key], dtype=np.float64)
            if vec.shape != (dim,):
                raise ValueError(f"key {key!r}: vector shape {vec.shape} != ({dim},)")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"key {key!r}: non-finite values")
            fh.write(json.dumps({"key": key, "vec": vec.tolist()}))
            fh.write("\n")


def read_corpus_dir(path: str | Path) -> tuple[dict, dict[str, list[dict]]]:
    """Read a hotspots corpus directory as plain dicts (no kit import needed)."""
    path = Path(path)
    with open(path / "meetings.json", encoding="utf-8") as fh:
        index = {entry["id"]: entry for entry in json.load(fh)}
    utterances: dict[str, list[dict]] = {}
    for mid in index:
        records = []
        with open(path / f"{mid}.jsonl", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        utterances[mid] = records
    return index, utterances
