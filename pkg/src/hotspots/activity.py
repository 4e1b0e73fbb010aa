"""Speech-activity interaction features and laughter counts per window.

Per-speaker talkspurts are built by merging word intervals whose gaps do not
exceed a pause floor (0.3 s by default; the corpus only provides word times,
so "speaking" has to be reconstructed). Overlap fractions use a sweep line
over spurt boundaries clipped to the window; turn switches and laughter are
onset counts (event start inside the half-open window span).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Meeting
from .windowing import Window

OVERLAP_DIMS = 6
DEFAULT_MAX_GAP_S = 0.3


@dataclass(frozen=True)
class Talkspurt:
    speaker_id: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class ActivityFeatures:
    overlap: tuple[float, ...]  # fraction of window with >= i speakers, i = 1..6
    unique_speakers: int
    turn_switches: int
    laughter_count: int

    def vector(self) -> list[float]:
        return [*self.overlap, float(self.unique_speakers), float(self.turn_switches)]


def build_talkspurts(
    meeting: Meeting,
    max_gap_s: float = DEFAULT_MAX_GAP_S,
    span_source: str = "words",
) -> list[Talkspurt]:
    """Merge per-speaker word (or utterance) intervals into talkspurts.

    span_source "utterances" treats whole utterance spans as speech instead of
    word intervals; laughter-only utterances never contribute in "words" mode.
    """
    if span_source not in ("words", "utterances"):
        raise ValueError(f"span_source must be 'words' or 'utterances', got {span_source!r}")
    per_speaker: dict[str, list[tuple[float, float]]] = {}
    for utt in meeting.utterances:
        if span_source == "words":
            intervals = [(w.start_s, w.end_s) for w in utt.words]
        else:
            intervals = [(utt.start_s, utt.end_s)] if utt.words else []
        if intervals:
            per_speaker.setdefault(utt.speaker_id, []).extend(intervals)
    spurts: list[Talkspurt] = []
    for speaker in sorted(per_speaker):
        intervals = sorted(per_speaker[speaker])
        cur_start, cur_end = intervals[0]
        for start, end in intervals[1:]:
            if start - cur_end <= max_gap_s:
                cur_end = max(cur_end, end)
            else:
                spurts.append(Talkspurt(speaker, cur_start, cur_end))
                cur_start, cur_end = start, end
        spurts.append(Talkspurt(speaker, cur_start, cur_end))
    spurts.sort(key=lambda s: (s.start_s, s.end_s, s.speaker_id))
    return spurts


def overlap_features(
    spurts: list[Talkspurt],
    window: Window,
    dims: int = OVERLAP_DIMS,
) -> tuple[float, ...]:
    """Fraction of window time during which at least i speakers talk, i=1..dims.

    Concurrency above `dims` saturates into the last component. Per-speaker
    spurts are disjoint by construction, so active spurt count == distinct
    active speaker count at every instant.
    """
    w0, w1 = window.start_s, window.end_s
    length = w1 - w0
    events: list[tuple[float, int]] = []
    for spurt in spurts:
        s = max(spurt.start_s, w0)
        e = min(spurt.end_s, w1)
        if s < e:
            events.append((s, +1))
            events.append((e, -1))
    if not events:
        return (0.0,) * dims
    events.sort()
    time_at_least = [0.0] * dims
    count = 0
    prev_t = events[0][0]
    for t, delta in events:
        if t > prev_t and count > 0:
            time_at_least[min(count, dims) - 1] += t - prev_t
        count += delta
        prev_t = t
    # time with >= i speakers accumulates everything at higher concurrency too
    for i in range(dims - 2, -1, -1):
        time_at_least[i] += time_at_least[i + 1]
    return tuple(t / length for t in time_at_least)


def unique_speaker_count(spurts: list[Talkspurt], window: Window) -> int:
    """Distinct speakers with a spurt overlapping the window with positive measure."""
    w0, w1 = window.start_s, window.end_s
    return len({s.speaker_id for s in spurts if s.start_s < w1 and s.end_s > w0})


def turn_switch_count(spurts: list[Talkspurt], window: Window) -> int:
    """Number of talkspurt onsets inside [start, end)."""
    return sum(1 for s in spurts if window.start_s <= s.start_s < window.end_s)


def laughter_count(
    meeting: Meeting,
    window: Window,
    split_kinds: bool = False,
) -> int | tuple[int, int]:
    """Laughter events starting inside [start, end).

    With split_kinds, returns (standalone, within_speech) counts instead of
    the joint tally.
    """
    standalone = 0
    within = 0
    for utt in meeting.utterances:
        for ev in utt.laughter:
            if window.start_s <= ev.start_s < window.end_s:
                if ev.kind == "standalone":
                    standalone += 1
                else:
                    within += 1
    if split_kinds:
        return standalone, within
    return standalone + within


def activity_features(
    meeting: Meeting,
    spurts: list[Talkspurt],
    window: Window,
) -> ActivityFeatures:
    return ActivityFeatures(
        overlap=overlap_features(spurts, window),
        unique_speakers=unique_speaker_count(spurts, window),
        turn_switches=turn_switch_count(spurts, window),
        laughter_count=laughter_count(meeting, window),
    )


def write_activity_features(features: dict[str, ActivityFeatures], path: str | Path) -> None:
    """Cache file: window key + 8 floats (6 overlap, unique, switches) + laughter int."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(features):
            f = features[key]
            fh.write(
                json.dumps(
                    {
                        "key": key,
                        "overlap": list(f.overlap),
                        "unique_speakers": f.unique_speakers,
                        "turn_switches": f.turn_switches,
                        "laughter": f.laughter_count,
                    }
                )
            )
            fh.write("\n")


def read_activity_features(path: str | Path) -> dict[str, ActivityFeatures]:
    features: dict[str, ActivityFeatures] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            features[obj["key"]] = ActivityFeatures(
                overlap=tuple(obj["overlap"]),
                unique_speakers=obj["unique_speakers"],
                turn_switches=obj["turn_switches"],
                laughter_count=obj["laughter"],
            )
    return features
