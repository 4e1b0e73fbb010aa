"""Stage orchestration with content-addressed on-disk caches.

Every stage derives a fingerprint from its config section plus the
fingerprints of its inputs; artifacts embed that fingerprint (JSON payloads
directly, JSONL caches via a .meta.json sidecar). Rerunning a stage whose
fingerprint matches the existing artifact is a no-op, which also guarantees
the ablation table's rows share identical block caches.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import activity as activity_mod
from . import lexical as lexical_mod
from .config import PipelineConfig
from .corpus import Corpus, load_corpus
from .evaluation import (
    CVResult,
    EvalResult,
    append_result,
    assign_folds,
    default_fold_count,
    evaluate_predictions,
)
from .fusion import (
    FusionData,
    FusionModel,
    FusionSpec,
    ProsodyBranchConfig,
    evaluate_fusion,
    train_fusion,
)
from .models import (
    LRTrainConfig,
    MLPArch,
    TrainConfig,
    decide,
    load_model,
    predict_lr,
    predict_mlp,
    sample_weights,
    train_lr,
    train_mlp,
)
from .prosody import NormStats, ProsodyStore, build_grid, fit_norm_stats, load_prosody_store
from .vectors import DenseVectorStore
from .windowing import WindowSet, build_window_set, read_windows, window_stats, write_windows

SPLITS = ("training", "development", "evaluation")
LR_BLOCKS = ("activity", "embed", "tfidf", "laughter", "prosody_posterior")


class DependencyError(RuntimeError):
    """A stage was requested before the artifacts it depends on exist."""


class CacheLockError(RuntimeError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def fingerprint(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class cache_lock:
    """One pipeline run per cache directory; stale locks from dead pids are reclaimed."""

    def __init__(self, cache_dir: str | Path):
        self.path = Path(cache_dir) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            try:
                pid = int(self.path.read_text().strip() or "0")
            except ValueError:
                pid = 0
            if pid and _pid_alive(pid):
                raise CacheLockError(
                    f"cache directory {self.path.parent} is locked by running pid {pid}"
                ) from None
            self.path.unlink(missing_ok=True)
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


# ---------------------------------------------------------------------------
# featurization helpers (shared by cached stages and in-memory CV refits)


def compute_activity_features(
    corpus: Corpus,
    meeting_ids: list[str],
    windows_by_meeting: dict[str, list],
    max_gap_s: float,
    span_source: str,
) -> dict[str, activity_mod.ActivityFeatures]:
    out: dict[str, activity_mod.ActivityFeatures] = {}
    for mid in meeting_ids:
        meeting = corpus.meeting(mid)
        spurts = activity_mod.build_talkspurts(meeting, max_gap_s, span_source)
        for w in windows_by_meeting.get(mid, []):
            out[w.key] = activity_mod.activity_features(meeting, spurts, w)
    return out


def compute_tfidf_features(
    vocab: lexical_mod.Vocab,
    corpus: Corpus,
    meeting_ids: list[str],
    windows_by_meeting: dict[str, list],
) -> dict[str, lexical_mod.SparseVector]:
    out: dict[str, lexical_mod.SparseVector] = {}
    for mid in meeting_ids:
        meeting = corpus.meeting(mid)
        for w in windows_by_meeting.get(mid, []):
            out[w.key] = lexical_mod.tfidf_window(vocab, meeting, w)
    return out


def compute_embed_features(
    store: DenseVectorStore,
    corpus: Corpus,
    meeting_ids: list[str],
    windows_by_meeting: dict[str, list],
    method: str,
    l2_mode: str,
) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    if store.kind == "window_embedding":
        # exporter already pooled to window level; use vectors directly
        for mid in meeting_ids:
            for w in windows_by_meeting.get(mid, []):
                vec = store.get(w.key)
                if vec is None:
                    raise DependencyError(f"window embedding store lacks key {w.key!r}")
                out[w.key] = vec
        return out
    for mid in meeting_ids:
        meeting = corpus.meeting(mid)
        for w in windows_by_meeting.get(mid, []):
            pooled, _empty = lexical_mod.pool_vectors(store, meeting, w, method, l2_mode)
            out[w.key] = pooled
    return out


def compute_grids(
    store: ProsodyStore,
    stats: NormStats,
    meeting_ids: list[str],
    windows_by_meeting: dict[str, list],
):
    grids = {}
    for mid in meeting_ids:
        for w in windows_by_meeting.get(mid, []):
            grids[w.key] = build_grid(store, stats, w)
    return grids


def compute_laughter_block(
    corpus: Corpus,
    meeting_ids: list[str],
    windows_by_meeting: dict[str, list],
    split_kinds: bool,
) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for mid in meeting_ids:
        meeting = corpus.meeting(mid)
        for w in windows_by_meeting.get(mid, []):
            if split_kinds:
                standalone, within = activity_mod.laughter_count(meeting, w, split_kinds=True)
                out[w.key] = np.array([float(standalone), float(within)])
            else:
                out[w.key] = np.array([float(activity_mod.laughter_count(meeting, w))])
    return out


# ---------------------------------------------------------------------------


@dataclass
class _Windows:
    window_set: WindowSet
    by_meeting: dict[str, list]
    by_split: dict[str, list]


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.cache = Path(config.cache_dir)
        self.cache.mkdir(parents=True, exist_ok=True)
        self._corpus: Corpus | None = None
        self._corpus_fp: str | None = None
        self._windows: _Windows | None = None
        self._embed_store: DenseVectorStore | None = None
        self._prosody_store: ProsodyStore | None = None

    # ----- inputs

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            self._corpus = load_corpus(self.config.corpus_dir, jobs=self.config.jobs)
        return self._corpus

    def corpus_fingerprint(self) -> str:
        if self._corpus_fp is None:
            root = Path(self.config.corpus_dir)
            if not root.exists():
                raise DependencyError(f"corpus directory {root} does not exist")
            files = sorted(p.name for p in root.iterdir() if p.suffix in (".json", ".jsonl"))
            self._corpus_fp = fingerprint(
                {"files": {name: file_sha256(root / name) for name in files}}
            )
        return self._corpus_fp

    def embed_store(self) -> DenseVectorStore:
        if self._embed_store is None:
            path = Path(self.config.embeddings_store)
            if not path.exists():
                raise DependencyError(f"embeddings store {path} does not exist")
            store = DenseVectorStore.load(path)
            if store.kind not in ("utterance_embedding", "window_embedding"):
                raise DependencyError(
                    f"embeddings store kind {store.kind!r} is not an embedding store"
                )
            self._embed_store = store
        return self._embed_store

    def prosody_store(self) -> ProsodyStore:
        if self._prosody_store is None:
            path = Path(self.config.prosody_store)
            if not path.exists():
                raise DependencyError(f"prosody store {path} does not exist")
            self._prosody_store = load_prosody_store(path)
        return self._prosody_store

    # ----- cache bookkeeping

    def _meta_path(self, artifact: Path) -> Path:
        return artifact.with_name(artifact.name + ".meta.json")

    def _is_fresh(self, artifact: Path, fp: str) -> bool:
        if not artifact.exists():
            return False
        meta = self._meta_path(artifact)
        if meta.exists():
            try:
                return json.loads(meta.read_text())["fingerprint"] == fp
            except (json.JSONDecodeError, KeyError):
                return False
        try:
            return json.loads(artifact.read_text()).get("fingerprint") == fp
        except (json.JSONDecodeError, UnicodeDecodeError):
            return False

    def _write_meta(self, artifact: Path, fp: str) -> None:
        with open(self._meta_path(artifact), "w", encoding="utf-8") as fh:
            json.dump({"fingerprint": fp, "seed": self.config.seed}, fh)
            fh.write("\n")

    def _require(self, artifact: Path, producer: str) -> Path:
        if not artifact.exists():
            raise DependencyError(
                f"missing artifact {artifact.name}; run the {producer!r} stage first"
            )
        return artifact

    # ----- windows

    def windows_fp(self) -> str:
        return fingerprint(
            {"corpus": self.corpus_fingerprint(), "window": self.config.section_json("window")}
        )

    def ensure_windows(self) -> Path:
        artifact = self.cache / "windows.jsonl"
        fp = self.windows_fp()
        if not self._is_fresh(artifact, fp):
            ws = build_window_set(
                (self.corpus.meetings[mid] for mid in sorted(self.corpus.meetings)),
                self.config.window.length_s,
                self.config.window.step_s,
            )
            write_windows(ws, artifact)
            self._write_meta(artifact, fp)
            self._windows = None
        return artifact

    def windows(self) -> _Windows:
        if self._windows is None:
            artifact = self.cache / "windows.jsonl"
            if not artifact.exists():
                raise DependencyError("missing artifact windows.jsonl; run the 'windows' stage first")
            ws = read_windows(artifact)
            by_meeting: dict[str, list] = {}
            for w in ws.windows:
                by_meeting.setdefault(w.meeting_id, []).append(w)
            # warnings are not persisted in the cache; rederive them
            for mid in sorted(self.corpus.meetings):
                if not by_meeting.get(mid):
                    meeting = self.corpus.meetings[mid]
                    ws.warnings.append(
                        f"meeting {mid!r}: duration {meeting.duration_s}s is shorter than one "
                        f"{self.config.window.length_s}s window; no windows emitted"
                    )
            by_split = {
                name: [w for mid in self.corpus.split.ids(name) for w in by_meeting.get(mid, [])]
                for name in SPLITS
            }
            self._windows = _Windows(window_set=ws, by_meeting=by_meeting, by_split=by_split)
        return self._windows

    # ----- feature stages

    def activity_fp(self) -> str:
        return fingerprint(
            {"windows": self.windows_fp(), "activity": self.config.section_json("activity")}
        )

    def ensure_activity(self) -> Path:
        self.ensure_windows()
        artifact = self.cache / "features_activity.jsonl"
        fp = self.activity_fp()
        if not self._is_fresh(artifact, fp):
            wins = self.windows()
            feats = compute_activity_features(
                self.corpus,
                sorted(wins.by_meeting),
                wins.by_meeting,
                self.config.activity.max_gap_s,
                self.config.activity.span_source,
            )
            activity_mod.write_activity_features(feats, artifact)
            self._write_meta(artifact, fp)
        return artifact

    def vocab_fp(self) -> str:
        lex = self.config.section_json("lexical")["lexical"]
        return fingerprint(
            {
                "corpus": self.corpus_fingerprint(),
                "vocab_size": lex["vocab_size"],
                "lowercase": lex["lowercase"],
            }
        )

    def ensure_vocab(self) -> Path:
        artifact = self.cache / "vocab.json"
        fp = self.vocab_fp()
        if not self._is_fresh(artifact, fp):
            utts = [
                u
                for m in self.corpus.meetings_for("training")
                for u in m.utterances
            ]
            vocab = lexical_mod.fit_vocab(
                utts, self.config.lexical.vocab_size, self.config.lexical.lowercase
            )
            vocab.save(artifact)
            self._write_meta(artifact, fp)
        return artifact

    def tfidf_fp(self) -> str:
        return fingerprint({"vocab": self.vocab_fp(), "windows": self.windows_fp()})

    def ensure_tfidf(self) -> Path:
        self.ensure_windows()
        self.ensure_vocab()
        artifact = self.cache / "features_tfidf.jsonl"
        fp = self.tfidf_fp()
        if not self._is_fresh(artifact, fp):
            vocab = lexical_mod.Vocab.load(self.cache / "vocab.json")
            wins = self.windows()
            feats = compute_tfidf_features(
                vocab, self.corpus, sorted(wins.by_meeting), wins.by_meeting
            )
            lexical_mod.write_tfidf_features(feats, len(vocab), artifact)
            self._write_meta(artifact, fp)
        return artifact

    def embed_fp(self) -> str:
        lex = self.config.section_json("lexical")["lexical"]
        return fingerprint(
            {
                "windows": self.windows_fp(),
                "store": file_sha256(self.config.embeddings_store),
                "pool_method": lex["pool_method"],
                "l2_pool_mode": lex["l2_pool_mode"],
            }
        )

    def ensure_embed(self) -> Path:
        self.ensure_windows()
        artifact = self.cache / "features_embed.jsonl"
        fp = self.embed_fp()
        if not self._is_fresh(artifact, fp):
            wins = self.windows()
            feats = compute_embed_features(
                self.embed_store(),
                self.corpus,
                sorted(wins.by_meeting),
                wins.by_meeting,
                self.config.lexical.pool_method,
                self.config.lexical.l2_pool_mode,
            )
            out = DenseVectorStore(dim=self.embed_store().dim, kind="window_embedding")
            for key, vec in feats.items():
                out.add(key, vec)
            out.write(artifact)
            self._write_meta(artifact, fp)
        return artifact

    def norm_stats_fp(self) -> str:
        return fingerprint(
            {"windows": self.windows_fp(), "store": file_sha256(self.config.prosody_store)}
        )

    def ensure_norm_stats(self) -> Path:
        self.ensure_windows()
        artifact = self.cache / "prosody_norm_stats.json"
        fp = self.norm_stats_fp()
        if not self._is_fresh(artifact, fp):
            wins = self.windows()
            stats = fit_norm_stats(self.prosody_store(), wins.by_split["training"])
            stats.save(artifact, extra={"fingerprint": fp, "seed": self.config.seed})
        return artifact

    def ensure_featurize(self, block: str) -> Path:
        if block == "activity":
            return self.ensure_activity()
        if block == "tfidf":
            return self.ensure_tfidf()
        if block == "embed":
            return self.ensure_embed()
        if block == "prosody":
            return self.ensure_norm_stats()
        raise DependencyError(f"unknown feature block {block!r}")

    # ----- data assembly

    def _block_deps(self, blocks: tuple[str, ...]) -> None:
        if "activity" in blocks or "laughter" in blocks:
            self._require(self.cache / "features_activity.jsonl", "featurize --block activity")
        if "embed" in blocks:
            self._require(self.cache / "features_embed.jsonl", "featurize --block embed")
        if "tfidf" in blocks:
            self._require(self.cache / "features_tfidf.jsonl", "featurize --block tfidf")
        if "prosody_posterior" in blocks:
            self._require(self.cache / "prosody_norm_stats.json", "featurize --block prosody")

    def fusion_data(self, blocks: tuple[str, ...]) -> FusionData:
        """Assemble in-memory features for the requested blocks from caches."""
        self._require(self.cache / "windows.jsonl", "windows")
        self._block_deps(blocks)
        wins = self.windows()
        keys = {name: [w.key for w in wins.by_split[name]] for name in SPLITS}
        labels = {
            name: np.array([int(w.hot) for w in wins.by_split[name]], dtype=np.int64)
            for name in SPLITS
        }
        meeting_of = {w.key: w.meeting_id for w in wins.window_set.windows}

        block_feats: dict[str, dict[str, np.ndarray]] = {}
        if "activity" in blocks:
            acts = activity_mod.read_activity_features(self.cache / "features_activity.jsonl")
            block_feats["activity"] = {
                k: np.asarray(f.vector(), dtype=np.float64) for k, f in acts.items()
            }
        if "laughter" in blocks:
            wins_by_meeting = wins.by_meeting
            block_feats["laughter"] = compute_laughter_block(
                self.corpus,
                sorted(wins_by_meeting),
                wins_by_meeting,
                self.config.activity.split_laughter_kinds,
            )
        if "embed" in blocks:
            store = DenseVectorStore.load(
                self.cache / "features_embed.jsonl", expect_kind="window_embedding"
            )
            block_feats["embed"] = {k: store.get(k) for k in store.keys()}
        if "tfidf" in blocks:
            sparse, _dim = lexical_mod.read_tfidf_features(self.cache / "features_tfidf.jsonl")
            block_feats["tfidf"] = {k: sv.to_dense() for k, sv in sparse.items()}

        grids = {}
        if "prosody_posterior" in blocks:
            stats = NormStats.load(self.cache / "prosody_norm_stats.json")
            grids = compute_grids(
                self.prosody_store(), stats, sorted(wins.by_meeting), wins.by_meeting
            )
            posterior_cache = self.cache / "features_prosody_posterior.jsonl"
            if posterior_cache.exists():
                store = DenseVectorStore.load(posterior_cache, expect_kind="prosody_posterior")
                block_feats["prosody_posterior"] = {k: store.get(k) for k in store.keys()}

        return FusionData(
            keys=keys,
            labels=labels,
            blocks=block_feats,
            grids=grids,
            meeting_of=meeting_of,
        )

    # ----- models

    def _lr_train_config(self) -> LRTrainConfig:
        return LRTrainConfig(
            l2_lambda=self.config.lr.l2_lambda,
            grad_tol=self.config.lr.grad_tol,
            max_iters=self.config.lr.max_iters,
        )

    def _prosody_branch(self) -> ProsodyBranchConfig:
        mc = self.config.mlp_prosody
        return ProsodyBranchConfig(
            hidden=tuple(mc.hidden),
            dropout_rate=mc.dropout_rate,
            train=TrainConfig(
                learning_rate=mc.learning_rate,
                epochs=mc.epochs,
                batch_size=mc.batch_size,
                seed=self.config.seed,
                patience=mc.patience,
            ),
        )

    def model_path(self, kind: str, block: str) -> Path:
        return self.cache / f"model_{kind}_{block}.json"

    def ensure_model(self, kind: str, block: str) -> Path:
        if kind == "lr":
            if block not in LR_BLOCKS:
                raise DependencyError(f"lr block must be one of {LR_BLOCKS}, got {block!r}")
            return self._ensure_lr_model(block)
        if kind == "mlp":
            if block == "embed":
                return self._ensure_mlp_embed()
            if block == "prosody":
                return self._ensure_mlp_prosody()
            raise DependencyError(f"mlp block must be 'embed' or 'prosody', got {block!r}")
        raise DependencyError(f"unknown model kind {kind!r}")

    def _ensure_lr_model(self, block: str) -> Path:
        artifact = self.model_path("lr", block)
        fp = fingerprint(
            {
                "block": block,
                "lr": self.config.section_json("lr"),
                "windows": self.windows_fp(),
                "seed": self.config.seed,
            }
        )
        if not self._is_fresh(artifact, fp):
            data = self.fusion_data((block,))
            if block == "prosody_posterior" and "prosody_posterior" not in data.blocks:
                raise DependencyError(
                    "missing artifact features_prosody_posterior.jsonl; run the 'fuse' stage first"
                )
            spec = FusionSpec(blocks=(block,))
            from .fusion import assemble_features

            x, schema = assemble_features(spec, data, data.keys["training"])
            y = data.labels["training"]
            model = train_lr(x, y, sample_weights(y), schema, self._lr_train_config())
            payload = model.to_json()
            payload["fingerprint"] = fp
            with open(artifact, "w", encoding="utf-8") as fh:
                json.dump(payload, fh)
                fh.write("\n")
        return artifact

    def _mlp_train_config(self, mc) -> TrainConfig:
        return TrainConfig(
            learning_rate=mc.learning_rate,
            epochs=mc.epochs,
            batch_size=mc.batch_size,
            seed=self.config.seed,
            patience=mc.patience,
        )

    def _ensure_mlp_embed(self) -> Path:
        artifact = self.model_path("mlp", "embed")
        fp = fingerprint(
            {
                "embed": self.embed_fp(),
                "mlp": self.config.section_json("mlp_embed"),
                "seed": self.config.seed,
            }
        )
        if not self._is_fresh(artifact, fp):
            data = self.fusion_data(("embed",))
            mc = self.config.mlp_embed
            x = np.stack([data.blocks["embed"][k] for k in data.keys["training"]])
            y = data.labels["training"]
            arch = MLPArch(
                layer_sizes=(x.shape[1], *mc.hidden, 2),
                dropout_rate=mc.dropout_rate,
                pooling=False,
            )
            dev_x = np.stack([data.blocks["embed"][k] for k in data.keys["development"]])
            model = train_mlp(
                x,
                y,
                sample_weights(y),
                arch,
                self._mlp_train_config(mc),
                dev_inputs=dev_x,
                dev_labels=data.labels["development"],
            )
            payload = model.to_json()
            payload["fingerprint"] = fp
            with open(artifact, "w", encoding="utf-8") as fh:
                json.dump(payload, fh)
                fh.write("\n")
        return artifact

    def _ensure_mlp_prosody(self) -> Path:
        artifact = self.model_path("mlp", "prosody")
        fp = fingerprint(
            {
                "norm": self.norm_stats_fp(),
                "mlp": self.config.section_json("mlp_prosody"),
                "seed": self.config.seed,
            }
        )
        if not self._is_fresh(artifact, fp):
            data = self.fusion_data(("prosody_posterior",))
            mc = self.config.mlp_prosody
            grids = [data.grids[k] for k in data.keys["training"]]
            y = data.labels["training"]
            feature_dim = grids[0].tensor.shape[2]
            arch = MLPArch(
                layer_sizes=(feature_dim, *mc.hidden, 2),
                dropout_rate=mc.dropout_rate,
                pooling=True,
            )
            model = train_mlp(
                grids,
                y,
                sample_weights(y),
                arch,
                self._mlp_train_config(mc),
                dev_inputs=[data.grids[k] for k in data.keys["development"]],
                dev_labels=data.labels["development"],
            )
            payload = model.to_json()
            payload["fingerprint"] = fp
            with open(artifact, "w", encoding="utf-8") as fh:
                json.dump(payload, fh)
                fh.write("\n")
        return artifact

    # ----- fusion

    def _fusion_blocks(self) -> tuple[str, ...]:
        blocks = tuple(self.config.fusion.blocks)
        if self.config.fusion.include_laughter and "laughter" not in blocks:
            blocks = blocks + ("laughter",)
        return blocks

    def fusion_fp(self) -> str:
        parts: dict = {
            "fusion": self.config.section_json("fusion"),
            "lr": self.config.section_json("lr"),
            "windows": self.windows_fp(),
            "seed": self.config.seed,
        }
        blocks = self._fusion_blocks()
        if "activity" in blocks or "laughter" in blocks:
            parts["activity"] = self.activity_fp()
        if "embed" in blocks:
            parts["embed"] = self.embed_fp()
        if "tfidf" in blocks:
            parts["tfidf"] = self.tfidf_fp()
        if "prosody_posterior" in blocks:
            parts["norm"] = self.norm_stats_fp()
            parts["mlp_prosody"] = self.config.section_json("mlp_prosody")
        return fingerprint(parts)

    def ensure_fusion(self) -> Path:
        artifact = self.cache / "fusion_model.json"
        fp = self.fusion_fp()
        if not self._is_fresh(artifact, fp):
            blocks = self._fusion_blocks()
            data = self.fusion_data(blocks)
            data.blocks.pop("prosody_posterior", None)  # always regenerate at fuse time
            spec = FusionSpec(
                blocks=blocks,
                posterior_mode=self.config.fusion.posterior_mode,
                k=self.config.fusion.k,
            )
            model = train_fusion(
                spec,
                data,
                lr_config=self._lr_train_config(),
                prosody_branch=self._prosody_branch(),
                seed=self.config.seed,
            )
            payload = model.to_json()
            payload["fingerprint"] = fp
            with open(artifact, "w", encoding="utf-8") as fh:
                json.dump(payload, fh)
                fh.write("\n")
            if "prosody_posterior" in data.blocks:
                out = DenseVectorStore(dim=2, kind="prosody_posterior")
                for key, vec in data.blocks["prosody_posterior"].items():
                    out.add(key, vec)
                posterior_path = self.cache / "features_prosody_posterior.jsonl"
                out.write(posterior_path)
                self._write_meta(posterior_path, fp)
        return artifact

    # ----- evaluation

    def evaluate(self, split: str, target: str = "fusion") -> EvalResult:
        if split not in ("development", "evaluation"):
            raise DependencyError(f"eval split must be development or evaluation, got {split!r}")
        if target == "fusion":
            artifact = self._require(self.cache / "fusion_model.json", "fuse")
            model = FusionModel.load(artifact)
            data = self.fusion_data(model.spec.blocks)
            if "prosody_posterior" in model.spec.blocks and "prosody_posterior" not in data.blocks:
                raise DependencyError(
                    "missing artifact features_prosody_posterior.jsonl; run the 'fuse' stage first"
                )
            fp = self.fusion_fp()
            result = evaluate_fusion(model, data, split, fingerprint=fp)
        else:
            kind, _, block = target.partition(":")
            if kind not in ("lr", "mlp") or not block:
                raise DependencyError(f"eval target must be 'fusion', 'lr:<block>' or 'mlp:<block>'")
            artifact = self._require(
                self.model_path(kind, block), f"train --model {kind} --block {block}"
            )
            model = load_model(artifact)
            if kind == "lr":
                data = self.fusion_data((block,))
                from .fusion import assemble_features

                x, schema = assemble_features(FusionSpec(blocks=(block,)), data, data.keys[split])
                posts, _ = predict_lr(model, x)
            elif block == "embed":
                data = self.fusion_data(("embed",))
                x = np.stack([data.blocks["embed"][k] for k in data.keys[split]])
                posts, _ = predict_mlp(model, x)
            else:
                data = self.fusion_data(("prosody_posterior",))
                posts, _ = predict_mlp(model, [data.grids[k] for k in data.keys[split]])
            result = evaluate_predictions(
                data.labels[split], decide(posts), split, fingerprint=""
            )
        result.extra["target"] = target
        result.extra["seed"] = self.config.seed
        out = self.cache / f"eval_{split}_{target.replace(':', '_')}.json"
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(result.to_json(), fh)
            fh.write("\n")
        append_result(result, self.cache / "eval_results.jsonl")
        return result

    # ----- ablation

    def ablate(self, blocks: tuple[str, ...] | None = None):
        from .fusion import ablation_report

        base = blocks if blocks is not None else self._fusion_blocks()
        data = self.fusion_data(base)
        report = ablation_report(
            data,
            base,
            lr_config=self._lr_train_config(),
            prosody_branch=self._prosody_branch(),
            seed=self.config.seed,
        )
        payload = report.to_json()
        payload["fingerprint"] = fingerprint(
            {"fusion": self.fusion_fp(), "blocks": list(base), "stage": "ablate"}
        )
        with open(self.cache / "ablation.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        (self.cache / "ablation.txt").write_text(report.to_text() + "\n", encoding="utf-8")
        (self.cache / "ablation.csv").write_text(report.to_csv(), encoding="utf-8")
        return report

    # ----- cross-validation

    def cross_validate(self, n_folds: int | None = None) -> CVResult:
        """Jackknife over training meetings with full per-fold refits."""
        train_ids = list(self.corpus.split.ids("training"))
        if len(train_ids) < 2:
            raise DependencyError("jackknife CV needs at least 2 training meetings")
        if n_folds is None:
            n_folds = self.config.cv_folds or default_fold_count(len(train_ids))
        if n_folds > len(train_ids):
            raise DependencyError(f"{len(train_ids)} training meetings cannot fill {n_folds} folds")
        folds = assign_folds(train_ids, n_folds, self.config.seed)
        blocks = self._fusion_blocks()
        fold_uars: list[float] = []
        for fold in folds:
            held = set(fold)
            fit_ids = [mid for mid in train_ids if mid not in held]
            data = self._build_data_in_memory(
                training_ids=fit_ids,
                development_ids=list(self.corpus.split.ids("development")),
                evaluation_ids=sorted(held),
                blocks=blocks,
            )
            spec = FusionSpec(
                blocks=blocks,
                posterior_mode=self.config.fusion.posterior_mode,
                k=self.config.fusion.k,
            )
            model = train_fusion(
                spec,
                data,
                lr_config=self._lr_train_config(),
                prosody_branch=self._prosody_branch(),
                seed=self.config.seed,
            )
            result = evaluate_fusion(model, data, "evaluation")
            fold_uars.append(result.uar)
        cv = CVResult(fold_uars=fold_uars, folds=folds, seed=self.config.seed)
        payload = cv.to_json()
        payload["fingerprint"] = fingerprint({"fusion": self.fusion_fp(), "stage": "cv"})
        with open(self.cache / "cv.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        return cv

    def _build_data_in_memory(
        self,
        training_ids: list[str],
        development_ids: list[str],
        evaluation_ids: list[str],
        blocks: tuple[str, ...],
    ) -> FusionData:
        """Featurize from scratch for a fold: vocab/stats refit on fold training."""
        split_map = {
            "training": training_ids,
            "development": development_ids,
            "evaluation": evaluation_ids,
        }
        all_ids = [mid for ids in split_map.values() for mid in ids]
        by_meeting: dict[str, list] = {}
        for mid in all_ids:
            ws = build_window_set(
                [self.corpus.meeting(mid)], self.config.window.length_s, self.config.window.step_s
            )
            by_meeting[mid] = ws.windows
        keys = {name: [w.key for mid in ids for w in by_meeting[mid]] for name, ids in split_map.items()}
        labels = {
            name: np.array(
                [int(w.hot) for mid in ids for w in by_meeting[mid]], dtype=np.int64
            )
            for name, ids in split_map.items()
        }
        meeting_of = {w.key: mid for mid in all_ids for w in by_meeting[mid]}

        block_feats: dict[str, dict[str, np.ndarray]] = {}
        if "activity" in blocks:
            acts = compute_activity_features(
                self.corpus,
                all_ids,
                by_meeting,
                self.config.activity.max_gap_s,
                self.config.activity.span_source,
            )
            block_feats["activity"] = {
                k: np.asarray(f.vector(), dtype=np.float64) for k, f in acts.items()
            }
        if "laughter" in blocks:
            block_feats["laughter"] = compute_laughter_block(
                self.corpus, all_ids, by_meeting, self.config.activity.split_laughter_kinds
            )
        if "embed" in blocks:
            block_feats["embed"] = compute_embed_features(
                self.embed_store(),
                self.corpus,
                all_ids,
                by_meeting,
                self.config.lexical.pool_method,
                self.config.lexical.l2_pool_mode,
            )
        if "tfidf" in blocks:
            utts = [u for mid in training_ids for u in self.corpus.meeting(mid).utterances]
            vocab = lexical_mod.fit_vocab(
                utts, self.config.lexical.vocab_size, self.config.lexical.lowercase
            )
            sparse = compute_tfidf_features(vocab, self.corpus, all_ids, by_meeting)
            block_feats["tfidf"] = {k: sv.to_dense() for k, sv in sparse.items()}

        grids = {}
        if "prosody_posterior" in blocks:
            train_windows = [w for mid in training_ids for w in by_meeting[mid]]
            stats = fit_norm_stats(self.prosody_store(), train_windows)
            grids = compute_grids(self.prosody_store(), stats, all_ids, by_meeting)

        return FusionData(
            keys=keys, labels=labels, blocks=block_feats, grids=grids, meeting_of=meeting_of
        )

    # ----- stats

    def stats(self):
        self.ensure_windows()
        wins = self.windows()
        window_sets = {
            name: WindowSet(windows=wins.by_split[name]) for name in SPLITS
        }
        table = window_stats(self.corpus, window_sets)
        payload = {"stats": table.to_json(), "fingerprint": self.windows_fp()}
        with open(self.cache / "stats.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        (self.cache / "stats.txt").write_text(table.to_text() + "\n", encoding="utf-8")
        return table
