"""Subcommand interface over the pipeline.

Exit codes: 0 ok, 2 validation failure, 3 missing stage dependency,
4 numeric/model failure. Stages are idempotent: rerunning with unchanged
inputs recomputes nothing and rewrites no artifact bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, LRConfig, MLPConfig, PipelineConfig, load_config, save_config
from .corpus import CorpusError, corpus_stats, load_corpus
from .evaluation import UndefinedMetricError
from .fusion import FusionError
from .lexical import LexicalError
from .models import ModelError
from .pipeline import CacheLockError, DependencyError, Pipeline, cache_lock
from .prosody import ProsodyError, load_prosody_store
from .synth import PRESETS, SynthConfig, SynthError, generate
from .vectors import DenseVectorStore, VectorStoreError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEPENDENCY = 3
EXIT_NUMERIC = 4

_VALIDATION_ERRORS = (CorpusError, VectorStoreError, ConfigError, SynthError, LexicalError, ProsodyError)
_DEPENDENCY_ERRORS = (DependencyError, CacheLockError, FileNotFoundError)
_NUMERIC_ERRORS = (ModelError, UndefinedMetricError, FusionError, FloatingPointError)


def build_parser() -> argparse.ArgumentParser:
    # global flags work both before and after the subcommand; SUPPRESS keeps
    # the subparser from clobbering a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", default=argparse.SUPPRESS, help="pipeline config JSON (required for most stages)"
    )
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override config seed")
    common.add_argument(
        "--jobs", type=int, default=argparse.SUPPRESS, help="override config worker count"
    )
    common.add_argument(
        "--cache-dir", default=argparse.SUPPRESS, help="override config cache directory"
    )

    parser = argparse.ArgumentParser(
        prog="hotspots",
        description="Detect involvement hot spots in multi-party meetings.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str):
        return sub.add_parser(name, help=help_text, parents=[common])

    p = add("validate", "validate a corpus directory (and optional stores)")
    p.add_argument("--corpus", help="corpus directory (defaults to config corpus_dir)")
    p.add_argument("--embeddings-store", help="also validate this embedding store")
    p.add_argument("--prosody-store", help="also validate this prosody store")

    add("windows", "materialize labeled sliding windows")

    p = add("featurize", "compute one feature block")
    p.add_argument("--block", required=True, choices=["activity", "tfidf", "embed", "prosody"])

    p = add("train", "train a single-block model")
    p.add_argument("--model", required=True, choices=["lr", "mlp"])
    p.add_argument("--block", required=True)

    add("fuse", "train the fused classifier")

    p = add("eval", "evaluate on a split")
    p.add_argument("--split", required=True, choices=["dev", "eval"])
    p.add_argument("--target", default="fusion", help="fusion (default), lr:<block> or mlp:<block>")

    p = add("cv", "jackknife cross-validation over training meetings")
    p.add_argument("--folds", type=int, help="fold count (default: ~10 meetings per fold)")

    p = add("ablate", "single-block / all / leave-one-out report")
    p.add_argument("--blocks", help="comma-separated block override")

    p = add("synth", "generate a synthetic benchmark corpus")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk-bench")
    p.add_argument("--synth-config", help="JSON file overriding preset fields")
    p.add_argument("--out", required=True, help="output directory")

    add("stats", "per-split corpus and window statistics")
    return parser


def _load_pipeline(args) -> Pipeline:
    if not args.config:
        raise ConfigError("this stage needs --config pointing at a pipeline config")
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.cache_dir is not None:
        config.cache_dir = args.cache_dir
    return Pipeline(config)


def _cmd_validate(args) -> int:
    corpus_dir = args.corpus
    if corpus_dir is None and args.config:
        corpus_dir = load_config(args.config).corpus_dir
    if corpus_dir is None:
        raise ConfigError("validate needs --corpus or --config")
    corpus = load_corpus(corpus_dir)
    table = corpus_stats(corpus)
    print(f"corpus at {corpus_dir}: OK ({len(corpus.meetings)} meetings)")
    print(table.to_text())
    if args.embeddings_store:
        store = DenseVectorStore.load(args.embeddings_store)
        if store.kind not in ("utterance_embedding", "window_embedding"):
            raise VectorStoreError(f"unexpected embedding store kind {store.kind!r}")
        print(f"embedding store {args.embeddings_store}: OK ({len(store)} vectors, dim {store.dim})")
    if args.prosody_store:
        store = load_prosody_store(args.prosody_store)
        print(f"prosody store {args.prosody_store}: OK ({len(store)} cells, dim {store.dim})")
    return EXIT_OK


def _bench_pipeline_config(seed: int) -> PipelineConfig:
    """Desk-scale model settings; paper-scale defaults would not train here.

    Paths are relative to the config file, which sits inside the output dir.
    """
    return PipelineConfig(
        corpus_dir="corpus",
        embeddings_store="embeddings.jsonl",
        prosody_store="prosody.jsonl",
        cache_dir="cache",
        lr=LRConfig(l2_lambda=0.01, max_iters=800),
        mlp_embed=MLPConfig(
            hidden=(16, 8),
            dropout_rate=0.15,
            learning_rate=0.05,
            epochs=60,
            batch_size=32,
            patience=10,
        ),
        mlp_prosody=MLPConfig(
            hidden=(32, 16, 8),
            dropout_rate=0.15,
            learning_rate=0.1,
            epochs=60,
            batch_size=32,
            patience=10,
        ),
        cv_folds=6,
        seed=seed,
    )


def _cmd_synth(args) -> int:
    config: SynthConfig = PRESETS[args.preset]()
    if args.synth_config:
        with open(args.synth_config, encoding="utf-8") as fh:
            overrides = json.load(fh)
        known = set(SynthConfig.__dataclass_fields__)
        unknown = set(overrides) - known
        if unknown:
            raise SynthError(f"unknown synth config field {sorted(unknown)[0]}")
        for key in ("meetings_per_split", "hot_region_len_s", "words_per_utterance", "word_len_s", "word_gap_s"):
            if key in overrides:
                overrides[key] = tuple(overrides[key])
        if "family_patterns" in overrides:
            overrides["family_patterns"] = tuple(tuple(p) for p in overrides["family_patterns"])
        config = replace(config, **overrides)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    out_dir = Path(args.out)
    ledger = generate(config, out_dir)
    save_config(_bench_pipeline_config(config.seed), out_dir / "pipeline_config.json")
    shares = {
        name: round(stats["hot_share"], 4) if stats["hot_share"] is not None else None
        for name, stats in ledger["per_split"].items()
    }
    print(f"synthetic corpus written to {out_dir} (hot shares: {shares})")
    print(f"pipeline config: {out_dir / 'pipeline_config.json'}")
    return EXIT_OK


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name in ("config", "seed", "jobs", "cache_dir"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "synth":
            return _cmd_synth(args)

        pipeline = _load_pipeline(args)
        with cache_lock(pipeline.cache):
            if args.command == "windows":
                artifact = pipeline.ensure_windows()
                ws = pipeline.windows()
                print(f"windows: {len(ws.window_set.windows)} -> {artifact}")
                for warning in ws.window_set.warnings:
                    print(f"warning: {warning}", file=sys.stderr)
            elif args.command == "featurize":
                artifact = pipeline.ensure_featurize(args.block)
                print(f"featurized block {args.block}: {artifact}")
            elif args.command == "train":
                artifact = pipeline.ensure_model(args.model, args.block)
                print(f"trained {args.model}:{args.block}: {artifact}")
            elif args.command == "fuse":
                artifact = pipeline.ensure_fusion()
                print(f"fusion model: {artifact}")
            elif args.command == "eval":
                split = {"dev": "development", "eval": "evaluation"}[args.split]
                result = pipeline.evaluate(split, target=args.target)
                print(
                    f"{args.target} on {split}: UAR {result.uar:.4f} "
                    f"(recall hot {result.recall_hot:.4f}, not_hot {result.recall_not_hot:.4f})"
                )
            elif args.command == "cv":
                cv = pipeline.cross_validate(n_folds=args.folds)
                print(
                    f"jackknife CV over {len(cv.folds)} folds: "
                    f"UAR {cv.mean:.4f} +- {cv.std:.4f}"
                )
            elif args.command == "ablate":
                blocks = tuple(args.blocks.split(",")) if args.blocks else None
                report = pipeline.ablate(blocks)
                print(report.to_text())
            elif args.command == "stats":
                table = pipeline.stats()
                print(table.to_text())
            else:  # pragma: no cover
                raise ConfigError(f"unhandled command {args.command!r}")
        return EXIT_OK
    except _VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _DEPENDENCY_ERRORS as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except _NUMERIC_ERRORS as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
