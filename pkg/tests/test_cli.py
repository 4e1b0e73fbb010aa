import hashlib
import json
import os
from pathlib import Path

import pytest

from hotspots.cli import EXIT_DEPENDENCY, EXIT_OK, EXIT_VALIDATION, run
from hotspots.config import ConfigError, PipelineConfig, config_from_json, load_config, save_config
from hotspots.pipeline import CacheLockError, cache_lock


def file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def tiny_bench(tmp_path_factory):
    """A small generated corpus with a ready pipeline config."""
    root = tmp_path_factory.mktemp("tiny")
    overrides = root / "synth.json"
    overrides.write_text(
        json.dumps(
            {
                "meetings_per_split": [4, 1, 1],
                "duration_s": 300.0,
                "speakers_per_meeting": 3,
                "hot_region_len_s": [40.0, 60.0],
            }
        )
    )
    assert (
        run(["synth", "--preset", "desk-bench", "--out", str(root), "--synth-config", str(overrides)])
        == EXIT_OK
    )
    # shrink training budgets: this corpus only smoke-tests the CLI surface
    cfg_path = root / "pipeline_config.json"
    cfg = json.loads(cfg_path.read_text())
    cfg["mlp_prosody"].update(epochs=6, patience=3)
    cfg["mlp_embed"].update(epochs=6, patience=3)
    cfg["fusion"]["k"] = 2
    cfg["cv_folds"] = 2
    cfg_path.write_text(json.dumps(cfg, indent=1, sort_keys=True))
    return root


def test_synth_then_validate_exits_zero(tiny_bench):
    assert run(["validate", "--corpus", str(tiny_bench / "corpus")]) == EXIT_OK
    assert (
        run(
            [
                "validate",
                "--corpus",
                str(tiny_bench / "corpus"),
                "--embeddings-store",
                str(tiny_bench / "embeddings.jsonl"),
                "--prosody-store",
                str(tiny_bench / "prosody.jsonl"),
            ]
        )
        == EXIT_OK
    )


def test_validate_rejects_broken_corpus(tmp_path):
    (tmp_path / "meetings.json").write_text("[{]")
    assert run(["validate", "--corpus", str(tmp_path)]) == EXIT_VALIDATION


def test_eval_before_fuse_is_dependency_error(tiny_bench, capsys):
    cfg = str(tiny_bench / "pipeline_config.json")
    fresh_cache = str(tiny_bench / "fresh_cache")
    assert run(["eval", "--split", "eval", "--config", cfg, "--cache-dir", fresh_cache]) == EXIT_DEPENDENCY
    err = capsys.readouterr().err
    assert "windows" in err or "fusion_model" in err


def test_eval_unknown_target_before_train(tiny_bench, capsys):
    cfg = str(tiny_bench / "pipeline_config.json")
    assert run(["windows", "--config", cfg]) == EXIT_OK
    assert run(["featurize", "--block", "activity", "--config", cfg]) == EXIT_OK
    code = run(["eval", "--split", "eval", "--target", "lr:activity", "--config", cfg])
    assert code == EXIT_DEPENDENCY
    assert "model_lr_activity" in capsys.readouterr().err


def test_full_stage_sequence(tiny_bench):
    cfg = str(tiny_bench / "pipeline_config.json")
    for argv in (
        ["windows", "--config", cfg],
        ["featurize", "--block", "activity", "--config", cfg],
        ["featurize", "--block", "embed", "--config", cfg],
        ["featurize", "--block", "tfidf", "--config", cfg],
        ["featurize", "--block", "prosody", "--config", cfg],
        ["train", "--model", "lr", "--block", "activity", "--config", cfg],
        ["fuse", "--config", cfg],
        ["eval", "--split", "eval", "--config", cfg],
        ["eval", "--split", "dev", "--config", cfg],
        ["eval", "--split", "eval", "--target", "lr:activity", "--config", cfg],
        ["train", "--model", "mlp", "--block", "prosody", "--config", cfg],
        ["eval", "--split", "eval", "--target", "mlp:prosody", "--config", cfg],
        ["ablate", "--config", cfg],
        ["stats", "--config", cfg],
        ["cv", "--config", cfg],
    ):
        assert run(argv) == EXIT_OK, argv
    cache = tiny_bench / "cache"
    for name in (
        "windows.jsonl",
        "features_activity.jsonl",
        "features_embed.jsonl",
        "features_tfidf.jsonl",
        "prosody_norm_stats.json",
        "fusion_model.json",
        "features_prosody_posterior.jsonl",
        "eval_evaluation_fusion.json",
        "eval_results.jsonl",
        "ablation.json",
        "ablation.txt",
        "ablation.csv",
        "stats.json",
        "cv.json",
        "model_lr_activity.json",
        "model_mlp_prosody.json",
    ):
        assert (cache / name).exists(), name


def test_stage_reruns_are_byte_idempotent(tiny_bench):
    cfg = str(tiny_bench / "pipeline_config.json")
    cache = tiny_bench / "cache"
    tracked = [
        "windows.jsonl",
        "features_activity.jsonl",
        "features_embed.jsonl",
        "fusion_model.json",
        "model_lr_activity.json",
    ]
    before = {name: (file_hash(cache / name), (cache / name).stat().st_mtime_ns) for name in tracked}
    for argv in (
        ["windows", "--config", cfg],
        ["featurize", "--block", "activity", "--config", cfg],
        ["featurize", "--block", "embed", "--config", cfg],
        ["train", "--model", "lr", "--block", "activity", "--config", cfg],
        ["fuse", "--config", cfg],
    ):
        assert run(argv) == EXIT_OK
    after = {name: (file_hash(cache / name), (cache / name).stat().st_mtime_ns) for name in tracked}
    assert after == before  # untouched files: no recomputation, no rewrites


def test_artifacts_embed_fingerprints(tiny_bench):
    cache = tiny_bench / "cache"
    fused = json.loads((cache / "fusion_model.json").read_text())
    assert fused["fingerprint"]
    meta = json.loads((cache / "windows.jsonl.meta.json").read_text())
    assert meta["fingerprint"]
    assert "seed" in meta


def test_changed_config_triggers_recompute(tiny_bench):
    cfg_path = tiny_bench / "pipeline_config.json"
    cache = tiny_bench / "cache"
    before = file_hash(cache / "features_activity.jsonl")
    cfg = json.loads(cfg_path.read_text())
    cfg["activity"]["max_gap_s"] = 0.5
    alt = tiny_bench / "alt_config.json"
    alt.write_text(json.dumps(cfg, indent=1))
    assert run(["featurize", "--block", "activity", "--config", str(alt)]) == EXIT_OK
    assert file_hash(cache / "features_activity.jsonl") != before
    # restore original cache contents for later tests
    assert run(["featurize", "--block", "activity", "--config", str(cfg_path)]) == EXIT_OK


def test_config_syntax_error_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "corpus_dir": \n}')
    assert run(["windows", "--config", str(bad)]) == EXIT_VALIDATION
    assert "line" in capsys.readouterr().err


def test_unknown_config_field_named(tmp_path):
    with pytest.raises(ConfigError, match="window_size"):
        config_from_json({"window_size": 3})
    with pytest.raises(ConfigError, match="lexical.vocab"):
        config_from_json({"lexical": {"vocab": 10}})


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(seed=7)
    save_config(cfg, tmp_path / "c.json")
    loaded = load_config(tmp_path / "c.json")
    assert loaded.seed == 7
    assert loaded.window.length_s == 60.0
    # relative paths resolve against the config file location
    assert Path(loaded.corpus_dir).is_absolute()


def test_cli_overrides_apply(tiny_bench, tmp_path):
    cfg = str(tiny_bench / "pipeline_config.json")
    alt_cache = tmp_path / "override_cache"
    assert run(["windows", "--config", cfg, "--cache-dir", str(alt_cache)]) == EXIT_OK
    assert (alt_cache / "windows.jsonl").exists()


def test_cache_lock_blocks_concurrent_runs(tmp_path):
    with cache_lock(tmp_path):
        with pytest.raises(CacheLockError):
            with cache_lock(tmp_path):
                pass
    # released afterwards
    with cache_lock(tmp_path):
        pass


def test_stale_lock_is_reclaimed(tmp_path):
    (tmp_path / ".lock").write_text("999999999")
    with cache_lock(tmp_path):
        assert (tmp_path / ".lock").read_text() == str(os.getpid())


def test_synth_rejects_unknown_override(tmp_path):
    bad = tmp_path / "synth.json"
    bad.write_text(json.dumps({"hot_region_minutes": 2}))
    assert (
        run(["synth", "--preset", "desk-bench", "--out", str(tmp_path / "o"), "--synth-config", str(bad)])
        == EXIT_VALIDATION
    )


def test_windows_warns_for_short_meetings(tmp_path, capsys):
    from hotspots.corpus import write_corpus
    from conftest import make_corpus, make_meeting, make_utterance, make_word

    corpus = make_corpus(
        [make_meeting([make_utterance("u1", words=[make_word("a", 1.0, 2.0)])], duration=30.0)]
    )
    corpus_dir = tmp_path / "corpus"
    write_corpus(corpus, corpus_dir)
    cfg = PipelineConfig(
        corpus_dir=str(corpus_dir),
        cache_dir=str(tmp_path / "cache"),
        embeddings_store=str(tmp_path / "none.jsonl"),
        prosody_store=str(tmp_path / "none2.jsonl"),
    )
    save_config(cfg, tmp_path / "c.json")
    assert run(["windows", "--config", str(tmp_path / "c.json")]) == EXIT_OK
    assert "shorter" in capsys.readouterr().err
