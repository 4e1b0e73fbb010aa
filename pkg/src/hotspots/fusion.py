"""Late fusion of feature blocks into a final logistic-regression step.

Activity and word blocks enter the final classifier as raw features; prosody
contributes the log-posteriors of its pooling network; laughter is an
optional one-dimensional extra block. Concatenation order is fixed:
activity(8) | embed(D) | tfidf(V) | prosody log-posteriors(2) | laughter(1),
restricted to the included blocks.

Training-split prosody posteriors are produced by k-fold refits (meetings
kept intact) to avoid feeding in-sample posteriors to the fusion classifier;
dev/eval posteriors come from the model fit on the full training split. The
paper-faithful in-sample mode is kept behind a flag.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import EvalResult, assign_folds, evaluate_predictions
from .models import (
    FeatureSchema,
    LRModel,
    LRTrainConfig,
    MLPArch,
    MLPModel,
    ModelError,
    TrainConfig,
    decide,
    predict_lr,
    predict_mlp,
    sample_weights,
    train_lr,
    train_mlp,
)
from .prosody import ProsodyGrid

BLOCK_ORDER = ("activity", "embed", "tfidf", "prosody_posterior", "laughter")
SPLITS = ("training", "development", "evaluation")


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class FusionSpec:
    blocks: tuple[str, ...] = ("activity", "embed", "prosody_posterior")
    posterior_mode: str = "k_fold"  # "k_fold" | "in_sample"
    k: int = 5

    def __post_init__(self) -> None:
        if not self.blocks:
            raise FusionError("fusion spec needs at least one block")
        unknown = [b for b in self.blocks if b not in BLOCK_ORDER]
        if unknown:
            raise FusionError(f"unknown fusion blocks {unknown}; valid: {BLOCK_ORDER}")
        if self.posterior_mode not in ("k_fold", "in_sample"):
            raise FusionError(f"unknown posterior mode {self.posterior_mode!r}")
        if self.k < 2:
            raise FusionError("k_fold posterior generation needs k >= 2")

    def ordered_blocks(self) -> tuple[str, ...]:
        return tuple(b for b in BLOCK_ORDER if b in self.blocks)

    def to_json(self) -> dict:
        return {"blocks": list(self.blocks), "posterior_mode": self.posterior_mode, "k": self.k}

    @classmethod
    def from_json(cls, obj: dict) -> "FusionSpec":
        return cls(
            blocks=tuple(obj["blocks"]),
            posterior_mode=obj.get("posterior_mode", "k_fold"),
            k=int(obj.get("k", 5)),
        )


@dataclass
class FusionData:
    """In-memory featurized corpus handed to fusion training/evaluation."""

    keys: dict[str, list[str]]  # split -> window keys, deterministic order
    labels: dict[str, np.ndarray]  # split -> 0/1 labels aligned with keys
    blocks: dict[str, dict[str, np.ndarray]]  # block -> window key -> vector
    grids: dict[str, ProsodyGrid] = field(default_factory=dict)
    meeting_of: dict[str, str] = field(default_factory=dict)

    def block_dim(self, name: str) -> int:
        feats = self.blocks.get(name)
        if not feats:
            raise FusionError(f"missing feature cache for block {name!r}")
        return next(iter(feats.values())).shape[0]


def build_schema(spec: FusionSpec, data: FusionData) -> FeatureSchema:
    return FeatureSchema(
        blocks=tuple((name, data.block_dim(name)) for name in spec.ordered_blocks())
    )


def assemble_features(
    spec: FusionSpec, data: FusionData, keys: list[str]
) -> tuple[np.ndarray, FeatureSchema]:
    """Concatenate the included blocks for the given windows, in fixed order."""
    schema = build_schema(spec, data)
    rows = np.empty((len(keys), schema.dim), dtype=np.float64)
    for j, key in enumerate(keys):
        parts = []
        for name in spec.ordered_blocks():
            feats = data.blocks[name]
            if key not in feats:
                raise FusionError(f"block {name!r} has no features for window {key!r}")
            parts.append(feats[key])
        rows[j] = np.concatenate(parts)
    return rows, schema


def block_fingerprint(features: dict[str, np.ndarray]) -> str:
    """Content hash of one block cache; ablation rows must agree on these."""
    h = hashlib.sha256()
    for key in sorted(features):
        h.update(key.encode())
        h.update(np.ascontiguousarray(features[key], dtype=np.float64).tobytes())
    return h.hexdigest()


@dataclass
class FusionModel:
    spec: FusionSpec
    lr: LRModel
    prosody_mlp: MLPModel | None = None

    def to_json(self) -> dict:
        obj = {"type": "fusion", "spec": self.spec.to_json(), "lr": self.lr.to_json()}
        if self.prosody_mlp is not None:
            obj["prosody_mlp"] = self.prosody_mlp.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "FusionModel":
        if obj.get("type") != "fusion":
            raise ModelError("not a fusion model file")
        return cls(
            spec=FusionSpec.from_json(obj["spec"]),
            lr=LRModel.from_json(obj["lr"]),
            prosody_mlp=(
                MLPModel.from_json(obj["prosody_mlp"]) if "prosody_mlp" in obj else None
            ),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FusionModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class ProsodyBranchConfig:
    hidden: tuple[int, ...] = (512, 128, 16)
    train: TrainConfig = field(default_factory=TrainConfig)
    dropout_rate: float = 0.4


def posterior_block(
    data: FusionData,
    spec: FusionSpec,
    branch: ProsodyBranchConfig,
    seed: int,
) -> tuple[dict[str, np.ndarray], MLPModel]:
    """Log-posterior features for every window plus the full-training MLP.

    Training-split posteriors come from k-fold refits (fold meetings held
    out); dev/eval posteriors from the full model.
    """
    if not data.grids:
        raise FusionError("prosody_posterior requires prosody grids")
    train_keys = data.keys["training"]
    train_labels = data.labels["training"]
    grids0 = data.grids[train_keys[0]]
    feature_dim = grids0.tensor.shape[2]
    arch = MLPArch(
        layer_sizes=(feature_dim, *branch.hidden, 2),
        dropout_rate=branch.dropout_rate,
        pooling=True,
    )

    def fit(keys: list[str], labels: np.ndarray, fit_seed: int) -> MLPModel:
        cfg = TrainConfig(
            learning_rate=branch.train.learning_rate,
            epochs=branch.train.epochs,
            batch_size=branch.train.batch_size,
            seed=fit_seed,
            patience=branch.train.patience,
            class_weighting=branch.train.class_weighting,
        )
        return train_mlp(
            [data.grids[k] for k in keys],
            labels,
            sample_weights(labels, cfg.class_weighting),
            arch,
            cfg,
            dev_inputs=[data.grids[k] for k in data.keys["development"]],
            dev_labels=data.labels["development"],
        )

    full_model = fit(train_keys, train_labels, seed)
    block: dict[str, np.ndarray] = {}
    for split in ("development", "evaluation"):
        keys = data.keys[split]
        if keys:
            _, log_posts = predict_mlp(full_model, [data.grids[k] for k in keys])
            for key, lp in zip(keys, log_posts):
                block[key] = lp

    if spec.posterior_mode == "in_sample":
        _, log_posts = predict_mlp(full_model, [data.grids[k] for k in train_keys])
        for key, lp in zip(train_keys, log_posts):
            block[key] = lp
        return block, full_model

    meetings = sorted({data.meeting_of[k] for k in train_keys})
    n_folds = min(spec.k, len(meetings))
    if n_folds < 2:
        raise FusionError("k-fold posterior generation needs at least 2 training meetings")
    folds = assign_folds(meetings, n_folds, seed)
    label_of = dict(zip(train_keys, train_labels))
    for fi, fold in enumerate(folds):
        held = set(fold)
        fit_keys = [k for k in train_keys if data.meeting_of[k] not in held]
        out_keys = [k for k in train_keys if data.meeting_of[k] in held]
        fold_labels = np.array([label_of[k] for k in fit_keys], dtype=np.int64)
        fold_model = fit(fit_keys, fold_labels, seed + 1000 * (fi + 1))
        _, log_posts = predict_mlp(fold_model, [data.grids[k] for k in out_keys])
        for key, lp in zip(out_keys, log_posts):
            block[key] = lp
    return block, full_model


def train_fusion(
    spec: FusionSpec,
    data: FusionData,
    lr_config: LRTrainConfig | None = None,
    prosody_branch: ProsodyBranchConfig | None = None,
    seed: int = 0,
) -> FusionModel:
    """Fit the final class-weighted LR (plus the prosody branch when included)."""
    prosody_mlp = None
    if "prosody_posterior" in spec.blocks:
        branch = prosody_branch or ProsodyBranchConfig()
        block, prosody_mlp = posterior_block(data, spec, branch, seed)
        data.blocks["prosody_posterior"] = block
    train_keys = data.keys["training"]
    y = data.labels["training"]
    x, schema = assemble_features(spec, data, train_keys)
    lr = train_lr(x, y, sample_weights(y), schema, lr_config)
    return FusionModel(spec=spec, lr=lr, prosody_mlp=prosody_mlp)


def predict_fusion(
    model: FusionModel, data: FusionData, keys: list[str]
) -> tuple[np.ndarray, np.ndarray]:
    """(posteriors, log_posteriors) for the given windows.

    Recomputes the prosody posterior block from the stored branch model for
    any window missing from the cache.
    """
    if model.prosody_mlp is not None:
        block = data.blocks.setdefault("prosody_posterior", {})
        missing = [k for k in keys if k not in block]
        if missing:
            _, log_posts = predict_mlp(model.prosody_mlp, [data.grids[k] for k in missing])
            for key, lp in zip(missing, log_posts):
                block[key] = lp
    x, schema = assemble_features(model.spec, data, keys)
    if schema != model.lr.schema:
        raise ModelError(
            f"feature schema {schema.to_json()} does not match model {model.lr.schema.to_json()}"
        )
    return predict_lr(model.lr, x)


def evaluate_fusion(
    model: FusionModel, data: FusionData, split: str, fingerprint: str = ""
) -> EvalResult:
    keys = data.keys[split]
    posts, _ = predict_fusion(model, data, keys)
    return evaluate_predictions(data.labels[split], decide(posts), split, fingerprint)


# ---------------------------------------------------------------------------
# ablation


@dataclass
class AblationRow:
    name: str
    blocks: tuple[str, ...]
    uar: float
    recall_hot: float
    recall_not_hot: float


@dataclass
class AblationReport:
    rows: list[AblationRow]
    block_hashes: dict[str, str]
    split: str = "evaluation"

    def row(self, name: str) -> AblationRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "split": self.split,
            "rows": [
                {
                    "name": r.name,
                    "blocks": list(r.blocks),
                    "uar": r.uar,
                    "recall_hot": r.recall_hot,
                    "recall_not_hot": r.recall_not_hot,
                }
                for r in self.rows
            ],
            "block_hashes": self.block_hashes,
        }

    def to_text(self) -> str:
        width = max(len(r.name) for r in self.rows) + 2
        lines = [f"{'configuration':<{width}}{'blocks':<44}{'UAR':>8}"]
        for r in self.rows:
            lines.append(f"{r.name:<{width}}{'+'.join(r.blocks):<44}{r.uar:>7.1%}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["name,blocks,uar,recall_hot,recall_not_hot"]
        for r in self.rows:
            lines.append(
                f"{r.name},{'+'.join(r.blocks)},{r.uar:.6f},{r.recall_hot:.6f},{r.recall_not_hot:.6f}"
            )
        return "\n".join(lines) + "\n"


def ablation_report(
    data: FusionData,
    base_blocks: tuple[str, ...],
    lr_config: LRTrainConfig | None = None,
    prosody_branch: ProsodyBranchConfig | None = None,
    seed: int = 0,
    split: str = "evaluation",
) -> AblationReport:
    """UAR for each block alone, all blocks, and each leave-one-out.

    The prosody posterior block is generated once and shared by every row, so
    all rows see identical block caches (asserted via content hashes).
    """
    base = tuple(b for b in BLOCK_ORDER if b in base_blocks)
    if "prosody_posterior" in base and "prosody_posterior" not in data.blocks:
        branch = prosody_branch or ProsodyBranchConfig()
        block, _mlp = posterior_block(
            data, FusionSpec(blocks=base, posterior_mode="k_fold"), branch, seed
        )
        data.blocks["prosody_posterior"] = block

    specs: list[tuple[str, tuple[str, ...]]] = []
    for b in base:
        specs.append((f"only_{b}", (b,)))
    specs.append(("all", base))
    if len(base) > 1:
        for b in base:
            specs.append((f"without_{b}", tuple(x for x in base if x != b)))

    rows: list[AblationRow] = []
    hashes: dict[str, str] = {}
    for name, blocks in specs:
        spec = FusionSpec(blocks=blocks)
        x_train, schema = assemble_features(spec, data, data.keys["training"])
        y_train = data.labels["training"]
        lr = train_lr(x_train, y_train, sample_weights(y_train), schema, lr_config)
        x_eval, _ = assemble_features(spec, data, data.keys[split])
        posts, _ = predict_lr(lr, x_eval)
        result = evaluate_predictions(data.labels[split], decide(posts), split)
        rows.append(
            AblationRow(
                name=name,
                blocks=blocks,
                uar=result.uar,
                recall_hot=result.recall_hot,
                recall_not_hot=result.recall_not_hot,
            )
        )
        for b in blocks:
            h = block_fingerprint(data.blocks[b])
            if hashes.setdefault(b, h) != h:
                raise FusionError(f"block {b!r} cache changed between ablation rows")
    return AblationReport(rows=rows, block_hashes=hashes, split=split)
