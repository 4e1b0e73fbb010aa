"""Involvement hot-spot detection for multi-party meetings.

Batch pipeline: time-aligned transcripts are cut into 60 s sliding windows,
featurized (speech activity, TF-IDF n-grams, pooled utterance embeddings,
prosody grids, laughter tallies), classified with class-weighted models and
late fusion, and scored with unweighted average recall.
"""

from .corpus import Corpus, Meeting, SplitConfig, Utterance, Word, load_corpus, write_corpus
from .evaluation import Confusion, EvalResult, uar
from .fusion import FusionModel, FusionSpec, train_fusion
from .models import LRModel, MLPArch, MLPModel, class_weights, train_lr, train_mlp
from .synth import SynthConfig, desk_bench_config, generate
from .windowing import Window, WindowSet, build_windows

__version__ = "0.1.0"

__all__ = [
    "Confusion",
    "Corpus",
    "EvalResult",
    "FusionModel",
    "FusionSpec",
    "LRModel",
    "MLPArch",
    "MLPModel",
    "Meeting",
    "SplitConfig",
    "SynthConfig",
    "Utterance",
    "Window",
    "WindowSet",
    "Word",
    "build_windows",
    "class_weights",
    "desk_bench_config",
    "generate",
    "load_corpus",
    "train_fusion",
    "train_lr",
    "train_mlp",
    "uar",
    "write_corpus",
    "__version__",
]
