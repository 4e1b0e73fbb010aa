#!/usr/bin/env python3
"""Regenerate tests/golden/desk_bench.json from a fresh benchmark run.

Run this once after any change that legitimately moves the benchmark numbers
(synth knobs, model defaults, seeds), then commit the new golden file. The
acceptance suite compares against it exactly, which is also the byte-identity
determinism check.
"""

import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from conftest import GOLDEN_PATH, DeskBench  # noqa: E402
from panel import compute_panel, write_golden  # noqa: E402


def main() -> None:
    with tempfile.TemporaryDirectory(prefix="desk_bench_freeze_") as tmp:
        tmp = Path(tmp)
        bench = DeskBench(tmp / "bench")
        panel = compute_panel(bench, tmp / "controls")
        write_golden(panel, GOLDEN_PATH)
    print(f"golden written to {GOLDEN_PATH}")
    for key in ("fused_eval_uar", "null_uar", "turn_only_activity_uar", "prosody_agreement"):
        print(f"  {key}: {panel[key]}")
    print(f"  singles: {panel['singles']}")
    print(f"  ablation: {panel['ablation_rows']}")


if __name__ == "__main__":
    main()
