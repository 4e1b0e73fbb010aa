"""Per-(channel, 5 s subwindow) prosodic feature export from WAV audio."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import feature_dim, read_wav, subwindow_vector
from .stores import write_store

SUBWINDOW_S = 5.0
BACKEND_ID = "lld-v1"


def export_prosody(
    meeting_id: str,
    channel_audio: dict[int, str | Path] | str | Path,
    out_path: str | Path,
) -> dict:
    """Write a prosody subwindow store for one meeting.

    channel_audio is either {channel: wav_path} (one file per close-talking
    mic) or a single multi-channel WAV whose audio channels become store
    channels 0..C-1.
    """
    per_channel: dict[int, tuple[float, np.ndarray]] = {}
    if isinstance(channel_audio, (str, Path)):
        rate, samples = read_wav(channel_audio)
        for ch in range(samples.shape[1]):
            per_channel[ch] = (rate, samples[:, ch])
    else:
        if not channel_audio:
            raise ValueError("no audio channels given")
        for ch, path in channel_audio.items():
            path = Path(path)
            if not path.exists():
                raise FileNotFoundError(f"missing audio for channel {ch}: {path}")
            rate, samples = read_wav(path)
            per_channel[int(ch)] = (rate, samples[:, 0])

    rows: dict[str, np.ndarray] = {}
    n_cells = 0
    for ch in sorted(per_channel):
        rate, x = per_channel[ch]
        duration = x.size / rate
        start = 0.0
        while start + SUBWINDOW_S <= duration + 1e-9:
            lo = int(round(start * rate))
            hi = int(round((start + SUBWINDOW_S) * rate))
            rows[f"{meeting_id}#{ch}#{int(start)}"] = subwindow_vector(x[lo:hi], rate)
            n_cells += 1
            start += SUBWINDOW_S
    write_store(out_path, feature_dim(), "prosody_subwindow", rows, backend=BACKEND_ID)
    return {"cells": n_cells, "channels": len(per_channel), "dim": feature_dim()}
