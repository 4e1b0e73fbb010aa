"""UAR and confusion statistics; fixed-split evaluation and jackknife CV helpers.

UAR is the unweighted mean of per-class recalls, so chance is 0.5 regardless
of class skew. Hot is the positive class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when UAR is undefined because a class has no samples."""


@dataclass(frozen=True)
class Confusion:
    tp: int
    fn: int
    fp: int
    tn: int

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "Confusion":
        y_true = np.asarray(y_true).astype(np.int64)
        y_pred = np.asarray(y_pred).astype(np.int64)
        if y_true.shape != y_pred.shape:
            raise ValueError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
        return cls(
            tp=int(np.sum((y_true == 1) & (y_pred == 1))),
            fn=int(np.sum((y_true == 1) & (y_pred == 0))),
            fp=int(np.sum((y_true == 0) & (y_pred == 1))),
            tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "fp": self.fp, "tn": self.tn}


def recalls(confusion: Confusion) -> tuple[float, float]:
    """(recall_hot, recall_not_hot)."""
    n_hot = confusion.tp + confusion.fn
    n_not = confusion.tn + confusion.fp
    if n_hot == 0:
        raise UndefinedMetricError("no hot samples; UAR undefined")
    if n_not == 0:
        raise UndefinedMetricError("no not_hot samples; UAR undefined")
    return confusion.tp / n_hot, confusion.tn / n_not


def uar(confusion: Confusion) -> float:
    r_hot, r_not = recalls(confusion)
    return 0.5 * (r_hot + r_not)


@dataclass
class EvalResult:
    uar: float
    recall_hot: float
    recall_not_hot: float
    confusion: Confusion
    split: str
    fingerprint: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "uar": self.uar,
            "recall_hot": self.recall_hot,
            "recall_not_hot": self.recall_not_hot,
            "confusion": self.confusion.to_json(),
            "split": self.split,
            "fingerprint": self.fingerprint,
            **({"extra": self.extra} if self.extra else {}),
        }


def evaluate_predictions(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    split: str,
    fingerprint: str = "",
) -> EvalResult:
    confusion = Confusion.from_predictions(y_true, y_pred)
    r_hot, r_not = recalls(confusion)
    return EvalResult(
        uar=0.5 * (r_hot + r_not),
        recall_hot=r_hot,
        recall_not_hot=r_not,
        confusion=confusion,
        split=split,
        fingerprint=fingerprint,
    )


def append_result(result: EvalResult, path: str | Path) -> None:
    """Append to the run ledger (eval_results.jsonl)."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(result.to_json()))
        fh.write("\n")


def assign_folds(meeting_ids: list[str], n_folds: int, seed: int) -> list[list[str]]:
    """Deterministic partition of meetings into folds, meetings kept intact."""
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if len(meeting_ids) < n_folds:
        raise ValueError(f"{len(meeting_ids)} meetings cannot fill {n_folds} folds")
    rng = np.random.RandomState(seed)
    order = [meeting_ids[i] for i in rng.permutation(len(meeting_ids))]
    folds: list[list[str]] = [[] for _ in range(n_folds)]
    for i, mid in enumerate(order):
        folds[i % n_folds].append(mid)
    return [sorted(f) for f in folds]


def default_fold_count(n_meetings: int, target_meetings_per_fold: int = 10) -> int:
    """Leave-k-meetings-out with folds of roughly ten meetings."""
    return max(2, round(n_meetings / target_meetings_per_fold))


@dataclass
class CVResult:
    fold_uars: list[float]
    folds: list[list[str]]
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_uars))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_uars))

    def to_json(self) -> dict:
        return {
            "fold_uars": self.fold_uars,
            "mean_uar": self.mean,
            "std_uar": self.std,
            "folds": self.folds,
            "seed": self.seed,
        }
