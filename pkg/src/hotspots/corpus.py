"""Transcript data model, corpus IO and train/dev/eval split handling.

A corpus directory contains:

    meetings.json       index: [{"id", "duration_s", "speakers": [...]}, ...]
    splits.json         {"training": [...], "development": [...], "evaluation": [...]}
    <meeting_id>.jsonl  one utterance record per line (UTF-8)

Utterance record schema, one JSON object per line::

    {"id": str, "meeting_id": str, "speaker_id": str, "channel": int,
     "start_s": float, "end_s": float, "hot_label": str,
     "words": [{"text": str, "start_s": float, "end_s": float}, ...],
     "laughter": [{"start_s": float, "end_s": float, "kind": str}, ...]}

Hot labels are stored verbatim; only ``b`` and ``b+`` count as involved.
Validation is deterministic: files are checked in sorted meeting-id order,
records in line order, so a bad corpus always fails with the same first error.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

INVOLVED_LABELS = frozenset({"b", "b+"})
LAUGHTER_KINDS = ("standalone", "within_speech")
SPLIT_NAMES = ("training", "development", "evaluation")

# '#' is reserved as the key separator in vector-store files.
_FORBIDDEN_ID_CHARS = set("#/\\\n\t")


class CorpusError(ValueError):
    """Raised for malformed corpus files or invariant violations."""


@dataclass(frozen=True)
class Word:
    text: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class LaughterEvent:
    start_s: float
    end_s: float
    kind: str  # "standalone" | "within_speech"


@dataclass(frozen=True)
class Utterance:
    id: str
    meeting_id: str
    speaker_id: str
    channel: int
    start_s: float
    end_s: float
    hot_label: str
    words: tuple[Word, ...] = ()
    laughter: tuple[LaughterEvent, ...] = ()

    @property
    def involved(self) -> bool:
        return self.hot_label in INVOLVED_LABELS


@dataclass(frozen=True)
class Meeting:
    id: str
    duration_s: float
    speakers: frozenset[str]
    utterances: tuple[Utterance, ...] = ()

    def involved_utterances(self) -> Iterator[Utterance]:
        return (u for u in self.utterances if u.involved)


@dataclass(frozen=True)
class SplitConfig:
    training: tuple[str, ...]
    development: tuple[str, ...]
    evaluation: tuple[str, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name in SPLIT_NAMES:
            ids = getattr(self, name)
            dup = seen.intersection(ids)
            if dup:
                raise CorpusError(f"meeting ids straddle splits: {sorted(dup)}")
            if len(set(ids)) != len(ids):
                raise CorpusError(f"duplicate meeting ids inside split {name!r}")
            seen.update(ids)

    def ids(self, split: str) -> tuple[str, ...]:
        if split not in SPLIT_NAMES:
            raise CorpusError(f"unknown split {split!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, split)

    def all_ids(self) -> tuple[str, ...]:
        return self.training + self.development + self.evaluation


@dataclass(frozen=True)
class Corpus:
    meetings: dict[str, Meeting]
    split: SplitConfig

    def meetings_for(self, split: str) -> list[Meeting]:
        return [self.meetings[mid] for mid in self.split.ids(split)]

    def meeting(self, meeting_id: str) -> Meeting:
        try:
            return self.meetings[meeting_id]
        except KeyError:
            raise CorpusError(f"unknown meeting id {meeting_id!r}") from None


@dataclass
class SplitStats:
    meetings: int = 0
    utterances: int = 0
    words: int = 0
    # Filled in by windowing.window_stats.
    windows: int | None = None
    hot_share: float | None = None


@dataclass
class StatsTable:
    per_split: dict[str, SplitStats] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {name: vars(stats) for name, stats in self.per_split.items()}

    def to_text(self) -> str:
        cols = ["meetings", "utterances", "words", "windows", "hot_share"]
        lines = ["split        " + "".join(f"{c:>12}" for c in cols)]
        for name in (*SPLIT_NAMES, "overall"):
            if name not in self.per_split:
                continue
            s = self.per_split[name]
            cells = []
            for c in cols:
                v = getattr(s, c)
                if v is None:
                    cells.append(f"{'-':>12}")
                elif c == "hot_share":
                    cells.append(f"{v:>11.1%} ")
                else:
                    cells.append(f"{v:>12}")
            lines.append(f"{name:<13}" + "".join(cells))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# validation helpers


def _check_id(value: str, what: str, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise CorpusError(f"{where}: {what} must be a non-empty string")
    bad = _FORBIDDEN_ID_CHARS.intersection(value)
    if bad:
        raise CorpusError(f"{where}: {what} {value!r} contains reserved characters {sorted(bad)}")
    return value


def _as_number(value, what: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CorpusError(f"{where}: {what} must be a number, got {value!r}")
    return float(value)


def _parse_word(obj: dict, where: str) -> Word:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: word entries must be objects")
    text = obj.get("text")
    if not isinstance(text, str) or not text:
        raise CorpusError(f"{where}: word text must be a non-empty string")
    start = _as_number(obj.get("start_s"), "word start_s", where)
    end = _as_number(obj.get("end_s"), "word end_s", where)
    if not 0 <= start < end:
        raise CorpusError(f"{where}: word {text!r} has invalid times [{start}, {end}]")
    return Word(text=text, start_s=start, end_s=end)


def _parse_laughter(obj: dict, where: str) -> LaughterEvent:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: laughter entries must be objects")
    start = _as_number(obj.get("start_s"), "laughter start_s", where)
    end = _as_number(obj.get("end_s"), "laughter end_s", where)
    kind = obj.get("kind")
    if kind not in LAUGHTER_KINDS:
        raise CorpusError(f"{where}: laughter kind must be one of {LAUGHTER_KINDS}, got {kind!r}")
    if not start < end:
        raise CorpusError(f"{where}: laughter event has invalid times [{start}, {end}]")
    return LaughterEvent(start_s=start, end_s=end, kind=kind)


def parse_utterance(obj: dict, where: str) -> Utterance:
    """Validate one utterance record; ``where`` names the file/line for errors."""
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: utterance record must be a JSON object")
    uid = _check_id(obj.get("id"), "utterance id", where)
    where = f"{where} (utterance {uid!r})"
    meeting_id = _check_id(obj.get("meeting_id"), "meeting_id", where)
    speaker_id = _check_id(obj.get("speaker_id"), "speaker_id", where)
    channel = obj.get("channel", 0)
    if isinstance(channel, bool) or not isinstance(channel, int) or channel < 0:
        raise CorpusError(f"{where}: channel must be an int >= 0, got {channel!r}")
    start = _as_number(obj.get("start_s"), "start_s", where)
    end = _as_number(obj.get("end_s"), "end_s", where)
    if not start < end:
        raise CorpusError(f"{where}: start_s must be < end_s, got [{start}, {end}]")
    hot_label = obj.get("hot_label")
    if not isinstance(hot_label, str) or not hot_label:
        raise CorpusError(f"{where}: hot_label must be a non-empty string")
    words = tuple(_parse_word(w, where) for w in obj.get("words", []))
    for prev, cur in zip(words, words[1:]):
        if cur.start_s < prev.end_s:
            raise CorpusError(
                f"{where}: words {prev.text!r} and {cur.text!r} overlap or are out of order"
            )
    if words:
        if start > words[0].start_s:
            raise CorpusError(f"{where}: start_s {start} is after first word start {words[0].start_s}")
        if end < words[-1].end_s:
            raise CorpusError(f"{where}: end_s {end} is before last word end {words[-1].end_s}")
    laughter = tuple(_parse_laughter(ev, where) for ev in obj.get("laughter", []))
    return Utterance(
        id=uid,
        meeting_id=meeting_id,
        speaker_id=speaker_id,
        channel=channel,
        start_s=start,
        end_s=end,
        hot_label=hot_label,
        words=words,
        laughter=laughter,
    )


def _parse_meeting_file(path: Path, entry: dict) -> Meeting:
    mid = entry["id"]
    duration = entry["duration_s"]
    roster = frozenset(entry["speakers"])
    utterances: list[Utterance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON record: {exc}") from None
            utt = parse_utterance(obj, where)
            if utt.meeting_id != mid:
                raise CorpusError(f"{where}: meeting_id {utt.meeting_id!r} does not match file {mid!r}")
            if utt.start_s < 0 or utt.end_s > duration:
                raise CorpusError(
                    f"{where}: utterance {utt.id!r} [{utt.start_s}, {utt.end_s}] "
                    f"outside meeting duration [0, {duration}]"
                )
            if utt.speaker_id not in roster:
                raise CorpusError(f"{where}: speaker {utt.speaker_id!r} not in meeting roster")
            utterances.append(utt)
    return Meeting(id=mid, duration_s=duration, speakers=roster, utterances=tuple(utterances))


def _load_index(path: Path) -> dict[str, dict]:
    index_path = path / "meetings.json"
    if not index_path.exists():
        raise CorpusError(f"missing index file {index_path}")
    with open(index_path, encoding="utf-8") as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{index_path.name}: malformed JSON: {exc}") from None
    if not isinstance(entries, list):
        raise CorpusError(f"{index_path.name}: expected a list of meeting entries")
    index: dict[str, dict] = {}
    for entry in entries:
        mid = _check_id(entry.get("id"), "meeting id", index_path.name)
        duration = _as_number(entry.get("duration_s"), "duration_s", f"meeting {mid!r}")
        if duration <= 0:
            raise CorpusError(f"meeting {mid!r}: duration_s must be positive")
        speakers = entry.get("speakers")
        if not isinstance(speakers, list) or not all(isinstance(s, str) for s in speakers):
            raise CorpusError(f"meeting {mid!r}: speakers must be a list of strings")
        if mid in index:
            raise CorpusError(f"duplicate meeting id {mid!r} in index")
        index[mid] = {"id": mid, "duration_s": duration, "speakers": speakers}
    return index


def load_split(path: Path) -> SplitConfig:
    split_path = Path(path) / "splits.json"
    if not split_path.exists():
        raise CorpusError(f"missing split file {split_path}")
    with open(split_path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{split_path.name}: malformed JSON: {exc}") from None
    for name in SPLIT_NAMES:
        ids = obj.get(name)
        if not isinstance(ids, list) or not all(isinstance(x, str) for x in ids):
            raise CorpusError(f"{split_path.name}: {name!r} must be a list of meeting ids")
    return SplitConfig(
        training=tuple(obj["training"]),
        development=tuple(obj["development"]),
        evaluation=tuple(obj["evaluation"]),
    )


def load_corpus(path: str | Path, split: SplitConfig | None = None, jobs: int = 1) -> Corpus:
    """Read and validate a corpus directory.

    Meetings are parsed in sorted-id order (optionally in parallel); the first
    validation failure in that order is raised, so rejection is deterministic.
    """
    path = Path(path)
    index = _load_index(path)
    if split is None:
        split = load_split(path)
    unknown = [mid for mid in split.all_ids() if mid not in index]
    if unknown:
        raise CorpusError(f"split references unknown meetings: {unknown}")

    meeting_ids = sorted(index)
    for mid in meeting_ids:
        if not (path / f"{mid}.jsonl").exists():
            raise CorpusError(f"missing transcript file {mid}.jsonl")

    def parse_one(mid: str) -> Meeting:
        return _parse_meeting_file(path / f"{mid}.jsonl", index[mid])

    meetings: dict[str, Meeting] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(parse_one, mid) for mid in meeting_ids]
        # Surface the first error in sorted-id order regardless of thread timing.
        for mid, fut in zip(meeting_ids, futures):
            meetings[mid] = fut.result()
    else:
        for mid in meeting_ids:
            meetings[mid] = parse_one(mid)

    seen_utt: set[str] = set()
    for mid in meeting_ids:
        for utt in meetings[mid].utterances:
            if utt.id in seen_utt:
                raise CorpusError(f"duplicate utterance id {utt.id!r}")
            seen_utt.add(utt.id)

    return Corpus(meetings=meetings, split=split)


# ---------------------------------------------------------------------------
# writing


def _word_obj(w: Word) -> dict:
    return {"text": w.text, "start_s": w.start_s, "end_s": w.end_s}


def _laughter_obj(ev: LaughterEvent) -> dict:
    return {"start_s": ev.start_s, "end_s": ev.end_s, "kind": ev.kind}


def utterance_obj(u: Utterance) -> dict:
    return {
        "id": u.id,
        "meeting_id": u.meeting_id,
        "speaker_id": u.speaker_id,
        "channel": u.channel,
        "start_s": u.start_s,
        "end_s": u.end_s,
        "hot_label": u.hot_label,
        "words": [_word_obj(w) for w in u.words],
        "laughter": [_laughter_obj(ev) for ev in u.laughter],
    }


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus so that load_corpus reads back structurally equal data."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    index = [
        {
            "id": m.id,
            "duration_s": m.duration_s,
            "speakers": sorted(m.speakers),
        }
        for m in (corpus.meetings[mid] for mid in sorted(corpus.meetings))
    ]
    with open(path / "meetings.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1)
        fh.write("\n")
    with open(path / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(
            {name: list(corpus.split.ids(name)) for name in SPLIT_NAMES},
            fh,
            indent=1,
        )
        fh.write("\n")
    for mid in sorted(corpus.meetings):
        with open(path / f"{mid}.jsonl", "w", encoding="utf-8") as fh:
            for utt in corpus.meetings[mid].utterances:
                fh.write(json.dumps(utterance_obj(utt)))
                fh.write("\n")


# ---------------------------------------------------------------------------
# statistics


def corpus_stats(corpus: Corpus) -> StatsTable:
    """Per-split counts of meetings, utterances and words (Table-1 style)."""
    table = StatsTable()
    for name in SPLIT_NAMES:
        meetings = corpus.meetings_for(name)
        stats = SplitStats(meetings=len(meetings))
        for m in meetings:
            stats.utterances += len(m.utterances)
            stats.words += sum(len(u.words) for u in m.utterances)
        table.per_split[name] = stats
    return table


def iter_utterances(meetings: Iterable[Meeting]) -> Iterator[Utterance]:
    for m in meetings:
        yield from m.utterances
