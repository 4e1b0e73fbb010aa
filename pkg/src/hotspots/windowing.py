"""Sliding-window construction and binary hot labeling.

Windows are 60 s spans starting every 15 s; only full-length windows are
emitted (start + length <= meeting duration). A window is hot iff some
involved utterance overlaps it with strictly positive measure, so an
utterance that merely touches a window boundary does not mark it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .corpus import Corpus, Meeting, SplitStats, StatsTable, corpus_stats

WINDOW_LEN_S = 60.0
WINDOW_STEP_S = 15.0

LABEL_HOT = "hot"
LABEL_NOT_HOT = "not_hot"


@dataclass(frozen=True)
class Window:
    meeting_id: str
    index: int
    start_s: float
    end_s: float
    label: str  # "hot" | "not_hot"

    @property
    def key(self) -> str:
        return window_key(self.meeting_id, self.index)

    @property
    def hot(self) -> bool:
        return self.label == LABEL_HOT


def window_key(meeting_id: str, index: int) -> str:
    return f"{meeting_id}#{index}"


@dataclass
class WindowSet:
    windows: list[Window] = field(default_factory=list)
    # Meetings shorter than one window emit nothing; remember them.
    warnings: list[str] = field(default_factory=list)

    def hot_share(self) -> float | None:
        if not self.windows:
            return None
        return sum(w.hot for w in self.windows) / len(self.windows)

    def for_meeting(self, meeting_id: str) -> list[Window]:
        return [w for w in self.windows if w.meeting_id == meeting_id]

    def labels(self) -> dict[str, int]:
        """Window key -> 1 (hot) / 0 (not hot)."""
        return {w.key: int(w.hot) for w in self.windows}


def build_windows(
    meeting: Meeting,
    window_len_s: float = WINDOW_LEN_S,
    step_s: float = WINDOW_STEP_S,
) -> list[Window]:
    """Materialize labeled windows for one meeting.

    Emits starts 0, step, 2*step, ... while start + window_len <= duration.
    """
    if window_len_s <= 0 or step_s <= 0:
        raise ValueError("window_len_s and step_s must be positive")
    involved = [(u.start_s, u.end_s) for u in meeting.involved_utterances()]
    involved.sort()
    windows: list[Window] = []
    index = 0
    while index * step_s + window_len_s <= meeting.duration_s:
        start = index * step_s
        end = start + window_len_s
        hot = any(s < end and e > start for s, e in involved)
        windows.append(
            Window(
                meeting_id=meeting.id,
                index=index,
                start_s=start,
                end_s=end,
                label=LABEL_HOT if hot else LABEL_NOT_HOT,
            )
        )
        index += 1
    return windows


def build_window_set(
    meetings: Iterable[Meeting],
    window_len_s: float = WINDOW_LEN_S,
    step_s: float = WINDOW_STEP_S,
) -> WindowSet:
    ws = WindowSet()
    for meeting in meetings:
        windows = build_windows(meeting, window_len_s, step_s)
        if not windows:
            ws.warnings.append(
                f"meeting {meeting.id!r}: duration {meeting.duration_s}s is shorter "
                f"than one {window_len_s}s window; no windows emitted"
            )
        ws.windows.extend(windows)
    return ws


def window_stats(corpus: Corpus, window_sets: dict[str, WindowSet]) -> StatsTable:
    """Corpus stats augmented with window counts and hot shares.

    Reports per-split shares plus an overall row; per-split and overall
    roundings are presented side by side, never reconciled.
    """
    table = corpus_stats(corpus)
    for name, ws in window_sets.items():
        stats = table.per_split.setdefault(name, SplitStats())
        stats.windows = len(ws.windows)
        stats.hot_share = ws.hot_share()
    overall = SplitStats()
    all_windows: list[Window] = []
    for name, ws in window_sets.items():
        split_stats = table.per_split[name]
        overall.meetings += split_stats.meetings
        overall.utterances += split_stats.utterances
        overall.words += split_stats.words
        all_windows.extend(ws.windows)
    overall.windows = len(all_windows)
    overall.hot_share = (
        sum(w.hot for w in all_windows) / len(all_windows) if all_windows else None
    )
    table.per_split["overall"] = overall
    return table


def write_windows(ws: WindowSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in ws.windows:
            fh.write(
                json.dumps(
                    {
                        "meeting_id": w.meeting_id,
                        "index": w.index,
                        "start_s": w.start_s,
                        "end_s": w.end_s,
                        "label": w.label,
                    }
                )
            )
            fh.write("\n")


def read_windows(path: str | Path) -> WindowSet:
    ws = WindowSet()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            ws.windows.append(
                Window(
                    meeting_id=obj["meeting_id"],
                    index=obj["index"],
                    start_s=obj["start_s"],
                    end_s=obj["end_s"],
                    label=obj["label"],
                )
            )
    return ws
