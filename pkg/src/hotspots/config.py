"""Pipeline configuration: one self-describing JSON file drives every stage.

Unknown fields are rejected with the offending key named; JSON syntax errors
surface the parser's line/column. CLI flags (--seed, --jobs, --cache-dir)
override the file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class WindowConfig:
    length_s: float = 60.0
    step_s: float = 15.0


@dataclass
class ActivityConfig:
    max_gap_s: float = 0.3
    span_source: str = "words"  # "words" | "utterances"
    split_laughter_kinds: bool = False


@dataclass
class LexicalConfig:
    vocab_size: int = 10_000
    lowercase: bool = True
    pool_method: str = "l2"  # "l2" | "mean" | "max" | "min"
    l2_pool_mode: str = "rss"  # "rss" | "rms"


@dataclass
class LRConfig:
    l2_lambda: float = 1e-4
    grad_tol: float = 1e-6
    max_iters: int = 500


@dataclass
class MLPConfig:
    hidden: tuple[int, ...] = (64, 32, 12)
    dropout_rate: float = 0.4
    learning_rate: float = 1e-7
    epochs: int = 200
    batch_size: int = 32
    patience: int = 10


@dataclass
class FusionSectionConfig:
    blocks: tuple[str, ...] = ("activity", "embed", "prosody_posterior")
    posterior_mode: str = "k_fold"
    k: int = 5
    include_laughter: bool = False


@dataclass
class PipelineConfig:
    corpus_dir: str = "corpus"
    embeddings_store: str = "embeddings.jsonl"
    prosody_store: str = "prosody.jsonl"
    cache_dir: str = "cache"
    window: WindowConfig = field(default_factory=WindowConfig)
    activity: ActivityConfig = field(default_factory=ActivityConfig)
    lexical: LexicalConfig = field(default_factory=LexicalConfig)
    lr: LRConfig = field(default_factory=LRConfig)
    mlp_embed: MLPConfig = field(default_factory=MLPConfig)
    mlp_prosody: MLPConfig = field(default_factory=lambda: MLPConfig(hidden=(512, 128, 16)))
    fusion: FusionSectionConfig = field(default_factory=FusionSectionConfig)
    cv_folds: int | None = None
    seed: int = 0
    jobs: int = 1

    def to_json(self) -> dict:
        return asdict(self)

    def section_json(self, *names: str) -> dict:
        """Subset of the config used to fingerprint one stage."""
        obj = self.to_json()
        return {name: obj[name] for name in names}


_SECTION_TYPES = {
    "window": WindowConfig,
    "activity": ActivityConfig,
    "lexical": LexicalConfig,
    "lr": LRConfig,
    "mlp_embed": MLPConfig,
    "mlp_prosody": MLPConfig,
    "fusion": FusionSectionConfig,
}

_TUPLE_FIELDS = {"hidden", "blocks"}


def _build_section(cls, obj: dict, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"config section {where!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown config field {where}.{sorted(unknown)[0]}")
    kwargs = {}
    for key, value in obj.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config section {where!r}: {exc}") from None


def config_from_json(obj: dict) -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    top_fields = {f.name for f in fields(PipelineConfig)}
    unknown = set(obj) - top_fields
    if unknown:
        raise ConfigError(f"unknown config field {sorted(unknown)[0]}")
    kwargs: dict = {}
    for key, value in obj.items():
        if key in _SECTION_TYPES:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path.name}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    config = config_from_json(obj)
    base = path.parent
    # paths in the file are taken relative to the file itself
    for attr in ("corpus_dir", "embeddings_store", "prosody_store", "cache_dir"):
        value = getattr(config, attr)
        if value and not Path(value).is_absolute():
            setattr(config, attr, str((base / value).resolve()))
    return config


def save_config(config: PipelineConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
