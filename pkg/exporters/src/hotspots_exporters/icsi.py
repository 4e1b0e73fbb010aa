"""Best-effort converter from MRT-style meeting XML to the corpus schema.

MRT transcripts carry segment (utterance) boundaries and speaker attribution
but no word-level times, so the converter needs either a word-times sidecar
(JSONL: {"segment_index", "words": [{"text","start_s","end_s"}]}) or the
--synthesize-word-times escape hatch, which spreads the segment's tokens
uniformly over its span. Synthesized times are an approximation; features
built on them are only as good as that assumption.

Involvement labels live in a separate annotation pass; supply them as a TSV
of "<meeting_id>:<segment_index>\t<label>" lines. Unlabeled segments get
"n". Vocal sound elements whose description mentions laughter become
laughter events spanning the segment.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from pathlib import Path


class ConversionError(ValueError):
    pass


def _parse_participants(root) -> dict[str, int]:
    channels: dict[str, int] = {}
    for participant in root.iter("Participant"):
        name = participant.get("Name")
        chan = participant.get("Channel", "")
        digits = "".join(c for c in chan if c.isdigit())
        if name:
            channels[name] = int(digits) if digits else len(channels)
    return channels


def _segment_words(seg, index: int, word_times: dict[int, list[dict]], synthesize: bool):
    if index in word_times:
        return word_times[index]
    tokens = (seg.text or "").split()
    for child in seg:
        tokens.extend((child.tail or "").split())
    if not tokens:
        return []
    if not synthesize:
        raise ConversionError(
            f"segment {index} has no word times; supply a sidecar or pass synthesize_word_times"
        )
    start = float(seg.get("StartTime"))
    end = float(seg.get("EndTime"))
    slot = (end - start) / len(tokens)
    words = []
    for i, tok in enumerate(tokens):
        w_start = start + i * slot
        words.append(
            {"text": tok, "start_s": round(w_start, 3), "end_s": round(w_start + 0.9 * slot, 3)}
        )
    return words


def convert_mrt(
    xml_path: str | Path,
    out_dir: str | Path,
    word_times_path: str | Path | None = None,
    hot_labels_path: str | Path | None = None,
    synthesize_word_times: bool = False,
) -> dict:
    """Convert one MRT file into <out_dir>/<meeting_id>.jsonl plus index rows."""
    xml_path = Path(xml_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        root = ET.parse(xml_path).getroot()
    except ET.ParseError as exc:
        raise ConversionError(f"{xml_path.name}: not parseable XML: {exc}") from None
    meeting_id = root.get("Session") or xml_path.stem

    word_times: dict[int, list[dict]] = {}
    if word_times_path:
        with open(word_times_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    word_times[int(rec["segment_index"])] = rec["words"]

    labels: dict[str, str] = {}
    if hot_labels_path:
        with open(hot_labels_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    key, _, label = line.partition("\t")
                    labels[key] = label

    channels = _parse_participants(root)
    records = []
    duration = 0.0
    for index, seg in enumerate(root.iter("Segment")):
        start = float(seg.get("StartTime"))
        end = float(seg.get("EndTime"))
        speaker = seg.get("Participant") or "unknown"
        words = _segment_words(seg, index, word_times, synthesize_word_times)
        laughter = []
        for sound in seg.iter("VocalSound"):
            if "laugh" in (sound.get("Description") or "").lower():
                laughter.append(
                    {
                        "start_s": start,
                        "end_s": end,
                        "kind": "within_speech" if words else "standalone",
                    }
                )
        records.append(
            {
                "id": f"{meeting_id}-seg{index:05d}",
                "meeting_id": meeting_id,
                "speaker_id": speaker,
                "channel": channels.get(speaker, 0),
                "start_s": start,
                "end_s": end,
                "hot_label": labels.get(f"{meeting_id}:{index}", "n"),
                "words": words,
                "laughter": laughter,
            }
        )
        duration = max(duration, end)

    transcript = root.find("Transcript")
    if transcript is not None and transcript.get("EndTime"):
        duration = max(duration, float(transcript.get("EndTime")))

    with open(out_dir / f"{meeting_id}.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec))
            fh.write("\n")
    speakers = sorted({rec["speaker_id"] for rec in records} | set(channels))
    return {
        "id": meeting_id,
        "duration_s": duration,
        "speakers": speakers,
        "utterances": len(records),
    }


def write_corpus_indexes(entries: list[dict], out_dir: str | Path) -> None:
    """meetings.json plus an all-training splits.json for converted meetings."""
    out_dir = Path(out_dir)
    index = [
        {"id": e["id"], "duration_s": e["duration_s"], "speakers": e["speakers"]}
        for e in sorted(entries, key=lambda e: e["id"])
    ]
    with open(out_dir / "meetings.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1)
        fh.write("\n")
    splits = {"training": [e["id"] for e in index], "development": [], "evaluation": []}
    with open(out_dir / "splits.json", "w", encoding="utf-8") as fh:
        json.dump(splits, fh, indent=1)
        fh.write("\n")
