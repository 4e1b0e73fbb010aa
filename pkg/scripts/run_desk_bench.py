#!/usr/bin/env python3
"""Run the documented synthetic benchmark end to end and print the report.

Usage: python scripts/run_desk_bench.py [output_dir]

Generates the desk-bench corpus, featurizes every block, trains the fused
classifier, evaluates dev/eval, and prints the ablation table. Everything is
seeded; rerunning into the same directory is a cached no-op.
"""

import sys
import time
from pathlib import Path

from hotspots.cli import run as cli_run
from hotspots.config import load_config
from hotspots.pipeline import Pipeline


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("desk_bench_out")
    t0 = time.time()
    if cli_run(["synth", "--preset", "desk-bench", "--out", str(out)]) != 0:
        raise SystemExit(1)
    pipeline = Pipeline(load_config(out / "pipeline_config.json"))
    pipeline.ensure_windows()
    for block in ("activity", "embed", "tfidf", "prosody"):
        pipeline.ensure_featurize(block)
    pipeline.ensure_fusion()
    dev = pipeline.evaluate("development")
    ev = pipeline.evaluate("evaluation")
    report = pipeline.ablate()
    stats = pipeline.stats()

    print()
    print(stats.to_text())
    print()
    print(report.to_text())
    print()
    print(f"fused dev  UAR: {dev.uar:.4f}")
    print(f"fused eval UAR: {ev.uar:.4f}")
    print(f"artifacts in {out / 'cache'}  ({time.time() - t0:.0f}s)")


if __name__ == "__main__":
    main()
