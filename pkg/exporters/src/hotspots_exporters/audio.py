"""Low-level descriptor extraction for prosodic feature export.

Per 25 ms frame (10 ms hop): log energy, zero-crossing rate, spectral
centroid / roll-off / flux, 13 MFCCs, autocorrelation F0 and a voicing
score. Each descriptor track is augmented with its delta, and seven
functionals (mean, std, min, max, range, skewness, kurtosis) summarize every
track over a subwindow. All arithmetic is float64 numpy, so identical audio
yields byte-identical features.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

FRAME_S = 0.025
HOP_S = 0.010
N_MFCC = 13
N_MEL = 26
F0_MIN = 50.0
F0_MAX = 400.0
_EPS = 1e-10

FUNCTIONALS = ("mean", "std", "min", "max", "range", "skewness", "kurtosis")


def read_wav(path: str | Path) -> tuple[float, np.ndarray]:
    """Returns (sample_rate, samples) with samples shaped (n, channels) in [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    if np.issubdtype(data.dtype, np.integer):
        scale = float(max(abs(np.iinfo(data.dtype).min), np.iinfo(data.dtype).max))
        samples = data.astype(np.float64) / scale
    else:
        samples = data.astype(np.float64)
    return float(rate), samples


def _frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    if x.size < frame:
        x = np.pad(x, (0, frame - x.size))
    n = 1 + (x.size - frame) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def _mel_filterbank(sr: float, n_fft: int, n_mel: int) -> np.ndarray:
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    points = from_mel(np.linspace(to_mel(0.0), to_mel(sr / 2.0), n_mel + 2))
    bins = np.floor((n_fft + 1) * points / sr).astype(int)
    fb = np.zeros((n_mel, n_fft // 2 + 1))
    for m in range(1, n_mel + 1):
        lo, center, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, center):
            if center > lo:
                fb[m - 1, k] = (k - lo) / (center - lo)
        for k in range(center, hi):
            if hi > center:
                fb[m - 1, k] = (hi - k) / (hi - center)
    return fb


def _dct_matrix(n_out: int, n_in: int) -> np.ndarray:
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    mat = np.cos(np.pi * k * (2 * n + 1) / (2 * n_in)) * np.sqrt(2.0 / n_in)
    mat[0] /= np.sqrt(2.0)
    return mat


def _autocorr_f0(frames: np.ndarray, sr: float) -> tuple[np.ndarray, np.ndarray]:
    lag_min = max(2, int(sr / F0_MAX))
    lag_max = min(frames.shape[1] - 1, int(sr / F0_MIN))
    centered = frames - frames.mean(axis=1, keepdims=True)
    energy = np.sum(centered * centered, axis=1) + _EPS
    f0 = np.zeros(frames.shape[0])
    voicing = np.zeros(frames.shape[0])
    if lag_max <= lag_min:
        return f0, voicing
    for i, frame in enumerate(centered):
        spec = np.fft.rfft(frame, n=2 * frame.size)
        ac = np.fft.irfft(spec * np.conj(spec))[: frame.size]
        segment = ac[lag_min : lag_max + 1]
        lag = lag_min + int(np.argmax(segment))
        voicing[i] = max(0.0, float(ac[lag] / energy[i]))
        if voicing[i] > 0.3:
            f0[i] = sr / lag
    return f0, voicing


def frame_descriptors(x: np.ndarray, sr: float) -> np.ndarray:
    """(n_frames, n_descriptors) matrix of per-frame LLDs for one channel."""
    frame = int(round(FRAME_S * sr))
    hop = int(round(HOP_S * sr))
    frames = _frames(x, frame, hop)
    window = np.hanning(frame)
    windowed = frames * window

    log_energy = np.log(np.sum(frames * frames, axis=1) + _EPS)
    zcr = np.mean(np.abs(np.diff(np.signbit(frames), axis=1)), axis=1)

    spectrum = np.abs(np.fft.rfft(windowed, axis=1))
    power = spectrum * spectrum
    freqs = np.fft.rfftfreq(frame, d=1.0 / sr)
    total = power.sum(axis=1)
    live = total > _EPS
    centroid = np.zeros(len(frames))
    centroid[live] = (power[live] * freqs).sum(axis=1) / total[live]
    cumulative = np.cumsum(power, axis=1)
    rolloff = np.zeros(len(frames))
    if live.any():
        thresholds = 0.85 * total[live]
        rolloff_idx = np.array(
            [np.searchsorted(c, t) for c, t in zip(cumulative[live], thresholds)]
        )
        rolloff[live] = freqs[np.minimum(rolloff_idx, freqs.size - 1)]
    flux = np.zeros(len(frames))
    if len(frames) > 1:
        norm = np.linalg.norm(spectrum, axis=1, keepdims=True)
        unit = spectrum / np.maximum(norm, _EPS)
        flux[1:] = np.linalg.norm(np.diff(unit, axis=0), axis=1)

    fb = _mel_filterbank(sr, frame, N_MEL)
    mel = np.log(power @ fb.T + _EPS)
    mfcc = mel @ _dct_matrix(N_MFCC, N_MEL).T

    f0, voicing = _autocorr_f0(frames, sr)

    lld = np.column_stack([log_energy, zcr, centroid, rolloff, flux, mfcc, f0, voicing])
    delta = np.diff(lld, axis=0, prepend=lld[:1])
    return np.column_stack([lld, delta])


def functionals(track: np.ndarray) -> np.ndarray:
    """Seven summary statistics per descriptor column."""
    mean = track.mean(axis=0)
    std = track.std(axis=0)
    mn = track.min(axis=0)
    mx = track.max(axis=0)
    centered = track - mean
    safe = np.where(std > _EPS, std, 1.0)
    skew = np.where(std > _EPS, (centered**3).mean(axis=0) / safe**3, 0.0)
    kurt = np.where(std > _EPS, (centered**4).mean(axis=0) / safe**4 - 3.0, 0.0)
    return np.concatenate([mean, std, mn, mx, mx - mn, skew, kurt])


def subwindow_vector(x: np.ndarray, sr: float) -> np.ndarray:
    return functionals(frame_descriptors(x, sr))


def feature_dim() -> int:
    n_lld = (5 + N_MFCC + 2) * 2  # descriptors plus deltas
    return n_lld * len(FUNCTIONALS)
