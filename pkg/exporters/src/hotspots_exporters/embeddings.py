"""Per-utterance embedding export, with boundary-truncated window variants.

One vector per utterance, keyed by utterance id. For every sliding window an
utterance overlaps without being fully contained, an extra vector of only
the words starting inside that window is emitted under "<utt_id>#<index>",
matching the lookup order of the consuming kit.
"""

from __future__ import annotations

from pathlib import Path

from .encoders import DEFAULT_ENCODER, DEFAULT_HASH_DIM, load_encoder
from .stores import read_corpus_dir, write_store


def window_starts(duration: float, window_len: float, step: float):
    start = 0.0
    index = 0
    while start + window_len <= duration:
        yield index, start, start + window_len
        index += 1
        start = index * step


def utterance_text(record: dict) -> str:
    return " ".join(w["text"] for w in record.get("words", []))


def truncated_text(record: dict, w_start: float, w_end: float) -> str:
    return " ".join(
        w["text"] for w in record.get("words", []) if w_start <= w["start_s"] < w_end
    )


def export_embeddings(
    corpus_dir: str | Path,
    out_path: str | Path,
    encoder_id: str = DEFAULT_ENCODER,
    dim: int = DEFAULT_HASH_DIM,
    window_len_s: float = 60.0,
    step_s: float = 15.0,
) -> dict:
    """Write the embedding store; returns a small summary dict."""
    encoder = load_encoder(encoder_id, dim=dim)
    index, utterances = read_corpus_dir(corpus_dir)
    rows = {}
    n_truncated = 0
    for mid, records in utterances.items():
        duration = index[mid]["duration_s"]
        for rec in records:
            rows[rec["id"]] = encoder.encode(utterance_text(rec))
            u_start, u_end = rec["start_s"], rec["end_s"]
            for w_index, w_start, w_end in window_starts(duration, window_len_s, step_s):
                overlaps = u_start < w_end and u_end > w_start
                contained = w_start <= u_start and u_end <= w_end
                if overlaps and not contained:
                    rows[f"{rec['id']}#{w_index}"] = encoder.encode(
                        truncated_text(rec, w_start, w_end)
                    )
                    n_truncated += 1
    write_store(out_path, encoder.dim, "utterance_embedding", rows, backend=encoder.id)
    return {
        "vectors": len(rows),
        "utterances": sum(len(r) for r in utterances.values()),
        "truncated": n_truncated,
        "dim": encoder.dim,
        "encoder": encoder.id,
    }
