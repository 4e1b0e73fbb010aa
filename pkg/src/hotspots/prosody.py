"""Ingestion of per-subwindow acoustic-prosodic vectors.

Vectors arrive precomputed in a dense vector file (kind "prosody_subwindow",
keys "<meeting_id>#<channel>#<start_s>" on a 5 s grid). They are normalized
with training-set statistics and arranged on a (channel x time) grid per
window for the pooling network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .vectors import DenseVectorStore, VectorStoreError
from .windowing import Window

SUBWINDOW_LEN_S = 5.0
STORE_KIND = "prosody_subwindow"


class ProsodyError(ValueError):
    pass


def cell_key(meeting_id: str, channel: int, start_s: float) -> str:
    start = int(start_s) if float(start_s).is_integer() else start_s
    return f"{meeting_id}#{channel}#{start}"


def parse_cell_key(key: str) -> tuple[str, int, float]:
    parts = key.split("#")
    if len(parts) != 3:
        raise ProsodyError(f"bad prosody key {key!r}; expected meeting#channel#start")
    meeting_id, channel_s, start_s = parts
    try:
        channel = int(channel_s)
        start = float(start_s)
    except ValueError:
        raise ProsodyError(f"bad prosody key {key!r}; channel/start not numeric") from None
    if channel < 0:
        raise ProsodyError(f"bad prosody key {key!r}; channel must be >= 0")
    if start < 0 or start % SUBWINDOW_LEN_S != 0:
        raise ProsodyError(f"bad prosody key {key!r}; start must sit on the 5 s grid")
    return meeting_id, channel, start


class ProsodyStore:
    """Validated store keyed by (meeting_id, channel, subwindow_start_s)."""

    def __init__(self, dim: int):
        self.dim = dim
        self._cells: dict[tuple[str, int, float], np.ndarray] = {}
        self._channels: dict[str, set[int]] = {}

    def __len__(self) -> int:
        return len(self._cells)

    def add(self, meeting_id: str, channel: int, start_s: float, vec: np.ndarray) -> None:
        key = (meeting_id, channel, float(start_s))
        if key in self._cells:
            raise ProsodyError(f"duplicate prosody cell {cell_key(*key)!r}")
        self._cells[key] = np.asarray(vec, dtype=np.float64)
        self._channels.setdefault(meeting_id, set()).add(channel)

    def get(self, meeting_id: str, channel: int, start_s: float) -> np.ndarray | None:
        return self._cells.get((meeting_id, channel, float(start_s)))

    def channels(self, meeting_id: str) -> list[int]:
        return sorted(self._channels.get(meeting_id, ()))

    def cells(self) -> Iterable[tuple[tuple[str, int, float], np.ndarray]]:
        return self._cells.items()


def load_prosody_store(path: str | Path) -> ProsodyStore:
    raw = DenseVectorStore.load(path, expect_kind=STORE_KIND)
    store = ProsodyStore(dim=raw.dim)
    for key in raw.keys():
        meeting_id, channel, start = parse_cell_key(key)
        try:
            store.add(meeting_id, channel, start, raw.get(key))
        except ProsodyError as exc:
            raise VectorStoreError(str(exc)) from None
    return store


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray  # population std; 0 marks constant dimensions
    fitted_on: str

    @property
    def constant_dims(self) -> np.ndarray:
        return self.std == 0.0

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Center and scale; constant dimensions collapse to exactly zero."""
        safe_std = np.where(self.std == 0.0, 1.0, self.std)
        z = (x - self.mean) / safe_std
        if np.any(self.constant_dims):
            z = np.where(self.constant_dims, 0.0, z)
        return z

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        payload = {
            "fitted_on": self.fitted_on,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        }
        if extra:
            payload.update(extra)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "NormStats":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            std=np.asarray(payload["std"], dtype=np.float64),
            fitted_on=payload["fitted_on"],
        )


def training_cell_keys(
    store: ProsodyStore,
    training_windows: Iterable[Window],
    subwindow_len_s: float = SUBWINDOW_LEN_S,
) -> list[tuple[str, int, float]]:
    """Distinct present cells covered by at least one training window."""
    keys: set[tuple[str, int, float]] = set()
    for w in training_windows:
        channels = store.channels(w.meeting_id)
        n_steps = int(round((w.end_s - w.start_s) / subwindow_len_s))
        for ch in channels:
            for k in range(n_steps):
                start = w.start_s + k * subwindow_len_s
                if store.get(w.meeting_id, ch, start) is not None:
                    keys.add((w.meeting_id, ch, start))
    return sorted(keys)


def fit_norm_stats(
    store: ProsodyStore,
    training_windows: Iterable[Window],
    fitted_on: str = "training",
) -> NormStats:
    """Per-dimension mean and population std over training-window cells."""
    keys = training_cell_keys(store, training_windows)
    if not keys:
        raise ProsodyError("no prosody cells fall inside training windows")
    x = np.stack([store.get(*k) for k in keys])
    return NormStats(mean=x.mean(axis=0), std=x.std(axis=0), fitted_on=fitted_on)


@dataclass
class ProsodyGrid:
    window_key: str
    channel_ids: list[int]
    tensor: np.ndarray  # (C, T, F); masked cells are all-zero
    mask: np.ndarray  # (C, T) bool, True where a cell is present
    normalized: bool = True  # stats are applied exactly once, at build time

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.tensor.shape

    @property
    def n_present(self) -> int:
        return int(self.mask.sum())


def build_grid(
    store: ProsodyStore,
    stats: NormStats,
    window: Window,
    channels: list[int] | None = None,
    subwindow_len_s: float = SUBWINDOW_LEN_S,
) -> ProsodyGrid:
    """Normalized (C, T, F) grid for one window; absent cells zero and masked."""
    if channels is None:
        channels = store.channels(window.meeting_id)
    if not channels:
        channels = [0]
    n_steps = int(round((window.end_s - window.start_s) / subwindow_len_s))
    tensor = np.zeros((len(channels), n_steps, store.dim), dtype=np.float64)
    mask = np.zeros((len(channels), n_steps), dtype=bool)
    for ci, ch in enumerate(channels):
        for k in range(n_steps):
            vec = store.get(window.meeting_id, ch, window.start_s + k * subwindow_len_s)
            if vec is not None:
                tensor[ci, k] = stats.apply(vec)
                mask[ci, k] = True
    return ProsodyGrid(
        window_key=window.key,
        channel_ids=list(channels),
        tensor=tensor,
        mask=mask,
        normalized=True,
    )
