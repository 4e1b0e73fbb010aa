import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.io import wavfile

DATA = Path(__file__).parent / "data"
TOY_CORPUS = DATA / "toy_corpus"

TONE_SR = 16_000
TONE_SECONDS = 60.0


def synth_tone(path: Path, seconds: float = TONE_SECONDS, freq: float = 440.0,
               sr: int = TONE_SR, channels: int = 1, silent: bool = False) -> Path:
    t = np.arange(int(seconds * sr)) / sr
    if silent:
        mono = np.zeros(t.size)
    else:
        mono = 0.4 * np.sin(2 * np.pi * freq * t) * (1.0 + 0.1 * np.sin(2 * np.pi * 0.5 * t))
    data = np.stack([mono * (1.0 - 0.1 * c) for c in range(channels)], axis=1)
    pcm = np.round(data * 32767.0).astype(np.int16)
    wavfile.write(path, sr, pcm if channels > 1 else pcm[:, 0])
    return path


@pytest.fixture(scope="session")
def tone_wav(tmp_path_factory) -> Path:
    return synth_tone(tmp_path_factory.mktemp("audio") / "tone.wav")


def hotspots_validate(*args: str) -> subprocess.CompletedProcess:
    """Run the primary kit's CLI; its file formats are the only interface used."""
    return subprocess.run(
        [sys.executable, "-m", "hotspots.cli", "validate", *args],
        capture_output=True,
        text=True,
    )
