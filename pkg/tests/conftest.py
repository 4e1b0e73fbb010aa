import json
import time
from pathlib import Path

import pytest
from hypothesis import settings

from hotspots.cli import run as cli_run
from hotspots.config import load_config
from hotspots.corpus import Corpus, LaughterEvent, Meeting, SplitConfig, Utterance, Word
from hotspots.pipeline import Pipeline

settings.register_profile("kit", deadline=None, max_examples=50)
settings.load_profile("kit")

GOLDEN_PATH = Path(__file__).parent / "golden" / "desk_bench.json"


def make_word(text: str, start: float, end: float) -> Word:
    return Word(text=text, start_s=start, end_s=end)


def make_utterance(
    uid: str,
    meeting_id: str = "m1",
    speaker: str = "spk00",
    channel: int = 0,
    start: float | None = None,
    end: float | None = None,
    hot_label: str = "n",
    words: list[Word] | None = None,
    laughter: list[LaughterEvent] | None = None,
) -> Utterance:
    words = words or []
    if start is None:
        start = words[0].start_s if words else 0.0
    if end is None:
        end = words[-1].end_s if words else start + 1.0
    return Utterance(
        id=uid,
        meeting_id=meeting_id,
        speaker_id=speaker,
        channel=channel,
        start_s=start,
        end_s=end,
        hot_label=hot_label,
        words=tuple(words),
        laughter=tuple(laughter or ()),
    )


def make_meeting(
    utterances: list[Utterance],
    meeting_id: str = "m1",
    duration: float = 300.0,
    speakers: set[str] | None = None,
) -> Meeting:
    roster = speakers or ({u.speaker_id for u in utterances} | {"spk00"})
    return Meeting(
        id=meeting_id,
        duration_s=duration,
        speakers=frozenset(roster),
        utterances=tuple(utterances),
    )


def make_corpus(meetings: list[Meeting], training=None, development=None, evaluation=None) -> Corpus:
    ids = [m.id for m in meetings]
    split = SplitConfig(
        training=tuple(training if training is not None else ids),
        development=tuple(development or ()),
        evaluation=tuple(evaluation or ()),
    )
    return Corpus(meetings={m.id: m for m in meetings}, split=split)


class DeskBench:
    """The documented synthetic benchmark, generated and featurized once."""

    def __init__(self, root: Path):
        self.root = root
        t0 = time.time()
        assert cli_run(["synth", "--preset", "desk-bench", "--out", str(root)]) == 0
        self.pipeline = Pipeline(load_config(root / "pipeline_config.json"))
        self.pipeline.ensure_windows()
        self.pipeline.ensure_activity()
        self.pipeline.ensure_embed()
        self.pipeline.ensure_tfidf()
        self.pipeline.ensure_norm_stats()
        self.pipeline.ensure_fusion()
        self.eval_result = self.pipeline.evaluate("evaluation")
        self.dev_result = self.pipeline.evaluate("development")
        self.ablation = self.pipeline.ablate()
        self.elapsed_s = time.time() - t0
        with open(root / "synth_ledger.json", encoding="utf-8") as fh:
            self.ledger = json.load(fh)

    @property
    def cache(self) -> Path:
        return Path(self.pipeline.config.cache_dir)


@pytest.fixture(scope="session")
def desk_bench(tmp_path_factory) -> DeskBench:
    return DeskBench(tmp_path_factory.mktemp("desk_bench"))


@pytest.fixture(scope="session")
def golden() -> dict:
    if not GOLDEN_PATH.exists():
        pytest.skip("golden file not generated yet (run scripts/freeze_golden.py)")
    with open(GOLDEN_PATH, encoding="utf-8") as fh:
        return json.load(fh)
