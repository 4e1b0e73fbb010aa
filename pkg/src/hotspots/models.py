"""Classifiers: class-weighted logistic regression and small feed-forward nets.

Both models are trained with exact analytic gradients (finite-difference
checked in the test suite). Class index 0 is not_hot, index 1 is hot; at a
posterior tie the decision falls to not_hot. The prosody net applies
mask-aware pooling to its per-subwindow codes: max over present channels,
then mean over time steps that have at least one present channel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import Confusion, uar
from .prosody import ProsodyGrid

CLASSES = ("not_hot", "hot")
MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


class NonFiniteFeatureError(ModelError):
    pass


# ---------------------------------------------------------------------------
# class weighting


def class_weights(labels: np.ndarray) -> tuple[float, float]:
    """(w_hot, w_not) with w_c = N / (2 * N_c), so both classes weigh equally
    in aggregate."""
    labels = np.asarray(labels)
    n = labels.size
    n_hot = int(np.sum(labels == 1))
    n_not = n - n_hot
    if n_hot == 0 or n_not == 0:
        raise ModelError("class weighting needs both classes present")
    return n / (2.0 * n_hot), n / (2.0 * n_not)


def sample_weights(labels: np.ndarray, mode: str = "balanced") -> np.ndarray:
    labels = np.asarray(labels)
    if mode == "none":
        return np.ones(labels.size, dtype=np.float64)
    if mode != "balanced":
        raise ModelError(f"unknown class-weighting mode {mode!r}")
    w_hot, w_not = class_weights(labels)
    return np.where(labels == 1, w_hot, w_not).astype(np.float64)


# ---------------------------------------------------------------------------
# feature schema


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered (block name, dim) pairs describing a concatenated feature vector."""

    blocks: tuple[tuple[str, int], ...]

    @property
    def dim(self) -> int:
        return sum(d for _, d in self.blocks)

    def slices(self) -> dict[str, slice]:
        out: dict[str, slice] = {}
        offset = 0
        for name, d in self.blocks:
            out[name] = slice(offset, offset + d)
            offset += d
        return out

    def to_json(self) -> list[list]:
        return [[name, dim] for name, dim in self.blocks]

    @classmethod
    def from_json(cls, obj) -> "FeatureSchema":
        return cls(blocks=tuple((name, int(dim)) for name, dim in obj))


def check_finite(x: np.ndarray, schema: FeatureSchema | None = None) -> None:
    if np.all(np.isfinite(x)):
        return
    if schema is not None:
        for name, sl in schema.slices().items():
            if not np.all(np.isfinite(x[:, sl])):
                raise NonFiniteFeatureError(f"non-finite values in feature block {name!r}")
    raise NonFiniteFeatureError("non-finite values in feature matrix")


# ---------------------------------------------------------------------------
# logistic regression


@dataclass
class LRTrainConfig:
    l2_lambda: float = 1e-4
    grad_tol: float = 1e-6
    max_iters: int = 500


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lr_objective(
    w: np.ndarray,
    b: float,
    x: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray, float]:
    """Weighted L2-regularized logistic loss and its exact gradient.

    J = sum_i s_i * (softplus(z_i) - y_i * z_i) / sum_i s_i + lambda/2 ||w||^2
    """
    z = x @ w + b
    total = float(np.sum(s))
    loss = float(np.sum(s * (np.logaddexp(0.0, z) - y * z)) / total)
    loss += 0.5 * l2_lambda * float(w @ w)
    resid = s * (_sigmoid(z) - y) / total
    grad_w = x.T @ resid + l2_lambda * w
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


@dataclass
class LRModel:
    schema: FeatureSchema
    mean: np.ndarray
    std: np.ndarray  # training stats; zero-std dims are zeroed after centering
    weights: np.ndarray
    bias: float
    l2_lambda: float
    final_loss: float = float("nan")
    n_iters: int = 0
    converged: bool = False

    def standardize(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.std == 0.0, 1.0, self.std)
        z = (x - self.mean) / safe
        return np.where(self.std == 0.0, 0.0, z)

    def to_json(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "type": "lr",
            "schema": self.schema.to_json(),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "l2_lambda": self.l2_lambda,
            "final_loss": self.final_loss,
            "n_iters": self.n_iters,
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LRModel":
        if obj.get("format_version") != MODEL_FORMAT_VERSION or obj.get("type") != "lr":
            raise ModelError("not a supported LR model file")
        return cls(
            schema=FeatureSchema.from_json(obj["schema"]),
            mean=np.asarray(obj["mean"], dtype=np.float64),
            std=np.asarray(obj["std"], dtype=np.float64),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            bias=float(obj["bias"]),
            l2_lambda=float(obj["l2_lambda"]),
            final_loss=float(obj["final_loss"]),
            n_iters=int(obj["n_iters"]),
            converged=bool(obj["converged"]),
        )


def train_lr(
    x: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    schema: FeatureSchema,
    config: LRTrainConfig | None = None,
) -> LRModel:
    """Deterministic full-batch gradient descent with backtracking line search.

    Inputs are standardized with training stats before optimizing; training
    stops when the gradient infinity-norm drops below grad_tol.
    """
    config = config or LRTrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ModelError(f"feature matrix {x.shape} does not match {y.size} labels")
    if schema.dim != x.shape[1]:
        raise ModelError(f"schema dim {schema.dim} does not match features {x.shape[1]}")
    check_finite(x, schema)

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    safe = np.where(std == 0.0, 1.0, std)
    xs = np.where(std == 0.0, 0.0, (x - mean) / safe)

    w = np.zeros(x.shape[1], dtype=np.float64)
    b = 0.0
    loss, gw, gb = lr_objective(w, b, xs, y, s, config.l2_lambda)
    step = 1.0
    n_iters = 0
    converged = False
    while n_iters < config.max_iters:
        gnorm = max(float(np.max(np.abs(gw))) if gw.size else 0.0, abs(gb))
        if gnorm < config.grad_tol:
            converged = True
            break
        gsq = float(gw @ gw) + gb * gb
        step = min(step * 2.0, 1e6)
        accepted = False
        while step >= 1e-20:
            cand = lr_objective(w - step * gw, b - step * gb, xs, y, s, config.l2_lambda)
            if cand[0] <= loss - 1e-4 * step * gsq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # no descent step exists at float precision; treat as converged
        w, b = w - step * gw, b - step * gb
        loss, gw, gb = cand
        if not np.isfinite(loss):
            raise NonFiniteFeatureError("logistic loss became non-finite during training")
        n_iters += 1
    else:
        gnorm = max(float(np.max(np.abs(gw))) if gw.size else 0.0, abs(gb))
        converged = gnorm < config.grad_tol

    return LRModel(
        schema=schema,
        mean=mean,
        std=std,
        weights=w,
        bias=b,
        l2_lambda=config.l2_lambda,
        final_loss=loss,
        n_iters=n_iters,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# feed-forward networks


@dataclass(frozen=True)
class MLPArch:
    layer_sizes: tuple[int, ...]  # input, hidden..., 2
    dropout_rate: float = 0.0
    pooling: bool = False  # channel-max then time-mean before the final layer

    def __post_init__(self) -> None:
        if len(self.layer_sizes) < 2 or self.layer_sizes[-1] != 2:
            raise ModelError(f"layer sizes must end in a 2-class output, got {self.layer_sizes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelError("dropout_rate must be in [0, 1)")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-7
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    patience: int = 10
    class_weighting: str = "balanced"


@dataclass
class MLPModel:
    arch: MLPArch
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    best_epoch: int = -1
    best_dev_uar: float = float("nan")
    epochs_run: int = 0

    @property
    def input_dim(self) -> int:
        return self.arch.layer_sizes[0]

    def to_json(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "type": "mlp",
            "layer_sizes": list(self.arch.layer_sizes),
            "dropout_rate": self.arch.dropout_rate,
            "pooling": self.arch.pooling,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "best_epoch": self.best_epoch,
            "best_dev_uar": self.best_dev_uar,
            "epochs_run": self.epochs_run,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MLPModel":
        if obj.get("format_version") != MODEL_FORMAT_VERSION or obj.get("type") != "mlp":
            raise ModelError("not a supported MLP model file")
        arch = MLPArch(
            layer_sizes=tuple(obj["layer_sizes"]),
            dropout_rate=float(obj["dropout_rate"]),
            pooling=bool(obj["pooling"]),
        )
        return cls(
            arch=arch,
            weights=[np.asarray(w, dtype=np.float64) for w in obj["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in obj["biases"]],
            best_epoch=int(obj["best_epoch"]),
            best_dev_uar=float(obj["best_dev_uar"]),
            epochs_run=int(obj["epochs_run"]),
        )


def init_mlp(arch: MLPArch, seed: int) -> MLPModel:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.RandomState(seed)
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in zip(arch.layer_sizes, arch.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MLPModel(arch=arch, weights=weights, biases=biases)


def stack_grids(grids: list[ProsodyGrid]) -> tuple[np.ndarray, np.ndarray]:
    """Pad grids with differing channel counts into (B, Cmax, T, F) + mask."""
    if not grids:
        raise ModelError("empty grid batch")
    t_steps = {g.tensor.shape[1] for g in grids}
    f_dims = {g.tensor.shape[2] for g in grids}
    if len(t_steps) != 1 or len(f_dims) != 1:
        raise ModelError("grids in a batch must share time steps and feature dim")
    for g in grids:
        if not g.normalized:
            raise ModelError(f"grid {g.window_key!r} was not normalized")
    c_max = max(g.tensor.shape[0] for g in grids)
    t, f = t_steps.pop(), f_dims.pop()
    x = np.zeros((len(grids), c_max, t, f), dtype=np.float64)
    mask = np.zeros((len(grids), c_max, t), dtype=bool)
    for i, g in enumerate(grids):
        c = g.tensor.shape[0]
        x[i, :c] = g.tensor
        mask[i, :c] = g.mask
    return x, mask


def _forward(
    model: MLPModel,
    x: np.ndarray,
    mask: np.ndarray | None,
    train: bool = False,
    rng: np.random.RandomState | None = None,
) -> tuple[np.ndarray, dict]:
    """Logits plus the cache needed for the backward pass.

    Vector mode: x is (B, d), mask None. Grid mode (arch.pooling): x is
    (B, C, T, F) with a boolean presence mask (B, C, T); masked cells are
    excluded from the channel max and from the time-mean denominator.
    """
    arch = model.arch
    use_dropout = train and arch.dropout_rate > 0.0
    if arch.pooling:
        if mask is None or x.ndim != 4:
            raise ModelError("pooling architecture expects grid input with a mask")
        b_sz, c_sz, t_sz, f_dim = x.shape
        h = x.reshape(b_sz * c_sz * t_sz, f_dim)
    else:
        if x.ndim != 2:
            raise ModelError("vector architecture expects 2-D input")
        h = x
    if h.shape[1] != arch.layer_sizes[0]:
        raise ModelError(
            f"input dim {h.shape[1]} does not match architecture input {arch.layer_sizes[0]}"
        )

    layer_inputs: list[np.ndarray] = []
    tanh_outs: list[np.ndarray] = []
    dropout_masks: list[np.ndarray | None] = []
    for i in range(len(model.weights) - 1):
        layer_inputs.append(h)
        a = np.tanh(h @ model.weights[i] + model.biases[i])
        tanh_outs.append(a)
        if use_dropout:
            keep = rng.random_sample(a.shape) >= arch.dropout_rate
            dm = keep.astype(np.float64) / (1.0 - arch.dropout_rate)
            a = a * dm
            dropout_masks.append(dm)
        else:
            dropout_masks.append(None)
        h = a
    cache: dict = {
        "layer_inputs": layer_inputs,
        "tanh_outs": tanh_outs,
        "dropout_masks": dropout_masks,
    }

    if arch.pooling:
        dk = h.shape[1]
        codes = h.reshape(b_sz, c_sz, t_sz, dk)
        masked_codes = np.where(mask[..., None], codes, -np.inf)
        valid_t = mask.any(axis=1)  # (B, T)
        argmax_c = np.argmax(masked_codes, axis=1)  # (B, T, dk); 0 when nothing present
        h_time = np.take_along_axis(codes, argmax_c[:, None], axis=1)[:, 0]  # (B, T, dk)
        h_time = np.where(valid_t[..., None], h_time, 0.0)
        denom = np.maximum(valid_t.sum(axis=1), 1).astype(np.float64)  # (B,)
        h = h_time.sum(axis=1) / denom[:, None]
        cache.update(
            argmax_c=argmax_c,
            valid_t=valid_t,
            denom=denom,
            grid_shape=(b_sz, c_sz, t_sz, dk),
        )
    logits = h @ model.weights[-1] + model.biases[-1]
    cache["final_input"] = h
    return logits, cache


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def mlp_loss_and_grads(
    model: MLPModel,
    x: np.ndarray,
    mask: np.ndarray | None,
    y: np.ndarray,
    s: np.ndarray,
    train: bool = False,
    rng: np.random.RandomState | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Weighted-mean cross-entropy and exact gradients for every layer."""
    logits, cache = _forward(model, x, mask, train=train, rng=rng)
    log_p = _log_softmax(logits)
    y = np.asarray(y, dtype=np.int64)
    s = np.asarray(s, dtype=np.float64)
    total = float(np.sum(s))
    loss = float(-np.sum(s * log_p[np.arange(y.size), y]) / total)

    d_logits = np.exp(log_p)
    d_logits[np.arange(y.size), y] -= 1.0
    d_logits *= (s / total)[:, None]

    grads_w: list[np.ndarray] = [np.zeros_like(w) for w in model.weights]
    grads_b: list[np.ndarray] = [np.zeros_like(b) for b in model.biases]

    grads_w[-1] = cache["final_input"].T @ d_logits
    grads_b[-1] = d_logits.sum(axis=0)
    dh = d_logits @ model.weights[-1].T

    if model.arch.pooling:
        b_sz, c_sz, t_sz, dk = cache["grid_shape"]
        # mean over valid time steps, then route through the channel max
        d_time = np.repeat(dh[:, None, :], t_sz, axis=1) / cache["denom"][:, None, None]
        d_time = np.where(cache["valid_t"][..., None], d_time, 0.0)
        d_codes = np.zeros((b_sz, c_sz, t_sz, dk), dtype=np.float64)
        np.put_along_axis(d_codes, cache["argmax_c"][:, None], d_time[:, None], axis=1)
        dh = d_codes.reshape(b_sz * c_sz * t_sz, dk)

    for i in range(len(model.weights) - 2, -1, -1):
        dm = cache["dropout_masks"][i]
        if dm is not None:
            dh = dh * dm
        a = cache["tanh_outs"][i]
        da = dh * (1.0 - a * a)
        grads_w[i] = cache["layer_inputs"][i].T @ da
        grads_b[i] = da.sum(axis=0)
        dh = da @ model.weights[i].T

    return loss, grads_w, grads_b


def predict_mlp(
    model: MLPModel,
    inputs: np.ndarray | list[ProsodyGrid],
) -> tuple[np.ndarray, np.ndarray]:
    """(posteriors, log_posteriors), rows over (not_hot, hot); dropout off."""
    if model.arch.pooling:
        if isinstance(inputs, np.ndarray):
            raise ModelError("pooling model expects a list of prosody grids")
        x, mask = stack_grids(list(inputs))
    else:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        mask = None
    logits, _ = _forward(model, x, mask, train=False)
    return _softmax(logits), _log_softmax(logits)


def train_mlp(
    inputs: np.ndarray | list[ProsodyGrid],
    labels: np.ndarray,
    weights: np.ndarray,
    arch: MLPArch,
    config: TrainConfig,
    dev_inputs: np.ndarray | list[ProsodyGrid] | None = None,
    dev_labels: np.ndarray | None = None,
) -> MLPModel:
    """Mini-batch SGD on weighted cross-entropy, early stopped on dev UAR.

    Fully deterministic under config.seed (init, batch order, dropout masks).
    """
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if arch.pooling:
        x_all, mask_all = stack_grids(list(inputs))
        if not mask_all.any():
            raise ModelError("every prosody grid is fully masked; no data to train on")
    else:
        x_all = np.asarray(inputs, dtype=np.float64)
        mask_all = None
        check_finite(x_all)
    n = labels.size

    model = init_mlp(arch, config.seed)
    rng = np.random.RandomState(config.seed + 1)
    best: tuple[float, int, list[np.ndarray], list[np.ndarray]] | None = None
    stale = 0
    epochs_run = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            mb = mask_all[idx] if mask_all is not None else None
            _, gw, gb = mlp_loss_and_grads(
                model, x_all[idx], mb, labels[idx], weights[idx], train=True, rng=rng
            )
            for w_mat, g in zip(model.weights, gw):
                w_mat -= config.learning_rate * g
            for b_vec, g in zip(model.biases, gb):
                b_vec -= config.learning_rate * g
        epochs_run = epoch + 1
        if dev_inputs is None or dev_labels is None:
            continue
        posts, _ = predict_mlp(model, dev_inputs)
        dev_uar = uar(Confusion.from_predictions(np.asarray(dev_labels), decide(posts)))
        if best is None or dev_uar > best[0]:
            best = (
                dev_uar,
                epoch,
                [w.copy() for w in model.weights],
                [b.copy() for b in model.biases],
            )
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    if best is not None:
        model.best_dev_uar, model.best_epoch = best[0], best[1]
        model.weights, model.biases = best[2], best[3]
    model.epochs_run = epochs_run
    return model


# ---------------------------------------------------------------------------
# prediction helpers


def predict_lr(model: LRModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(posteriors, log_posteriors) over (not_hot, hot) for a feature matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.schema.dim:
        raise ModelError(
            f"feature dim {x.shape[1]} does not match model schema dim {model.schema.dim}"
        )
    z = model.standardize(x) @ model.weights + model.bias
    log_p_hot = -np.logaddexp(0.0, -z)
    log_p_not = -np.logaddexp(0.0, z)
    log_posts = np.stack([log_p_not, log_p_hot], axis=1)
    return np.exp(log_posts), log_posts


def decide(posteriors: np.ndarray) -> np.ndarray:
    """Argmax decisions with ties resolved to not_hot (class 0)."""
    posteriors = np.asarray(posteriors)
    return (posteriors[:, 1] > posteriors[:, 0]).astype(np.int64)


def save_model(model: LRModel | MLPModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh)
        fh.write("\n")


def load_model(path: str | Path) -> LRModel | MLPModel:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    kind = obj.get("type")
    if kind == "lr":
        return LRModel.from_json(obj)
    if kind == "mlp":
        return MLPModel.from_json(obj)
    raise ModelError(f"unknown model type {kind!r}")
