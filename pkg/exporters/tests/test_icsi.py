import json

import pytest

from hotspots_exporters.cli import run as export_run
from hotspots_exporters.icsi import ConversionError, convert_mrt, write_corpus_indexes

from conftest import hotspots_validate

TOY_MRT = """<?xml version="1.0"?>
<Meeting Session="Btoy01" DateTimeStamp="2000-01-01">
 <Preamble>
  <Participants>
   <Participant Name="me011" Channel="chan0"/>
   <Participant Name="fe016" Channel="chan1"/>
  </Participants>
 </Preamble>
 <Transcript StartTime="0.0" EndTime="120.0">
  <Segment StartTime="1.5" EndTime="4.0" Participant="me011">so we should start</Segment>
  <Segment StartTime="5.0" EndTime="7.5" Participant="fe016">yeah <VocalSound Description="laugh"/> agreed</Segment>
  <Segment StartTime="9.0" EndTime="10.0" Participant="me011"><VocalSound Description="laugh"/></Segment>
 </Transcript>
</Meeting>
"""


@pytest.fixture()
def mrt_file(tmp_path):
    path = tmp_path / "Btoy01.mrt"
    path.write_text(TOY_MRT)
    return path


def test_convert_requires_word_times_unless_synthesized(mrt_file, tmp_path):
    with pytest.raises(ConversionError, match="word times"):
        convert_mrt(mrt_file, tmp_path / "out")


def test_converted_corpus_passes_kit_validation(mrt_file, tmp_path):
    out = tmp_path / "corpus"
    entry = convert_mrt(mrt_file, out, synthesize_word_times=True)
    write_corpus_indexes([entry], out)
    assert entry["id"] == "Btoy01"
    assert entry["duration_s"] == 120.0
    proc = hotspots_validate("--corpus", str(out))
    assert proc.returncode == 0, proc.stderr


def test_segments_channels_labels_and_laughter(mrt_file, tmp_path):
    labels = tmp_path / "labels.tsv"
    labels.write_text("Btoy01:1\tb\n")
    out = tmp_path / "corpus"
    entry = convert_mrt(
        mrt_file, out, hot_labels_path=labels, synthesize_word_times=True
    )
    write_corpus_indexes([entry], out)
    records = [json.loads(line) for line in (out / "Btoy01.jsonl").read_text().splitlines()]
    assert len(records) == 3
    assert records[0]["speaker_id"] == "me011" and records[0]["channel"] == 0
    assert records[1]["channel"] == 1
    assert records[1]["hot_label"] == "b" and records[0]["hot_label"] == "n"
    assert records[1]["laughter"][0]["kind"] == "within_speech"
    assert records[2]["words"] == []  # laughter-only segment
    assert records[2]["laughter"][0]["kind"] == "standalone"
    # synthesized word times stay inside the segment and are ordered
    words = records[0]["words"]
    assert [w["text"] for w in words] == ["so", "we", "should", "start"]
    assert words[0]["start_s"] >= records[0]["start_s"]
    assert words[-1]["end_s"] <= records[0]["end_s"]


def test_word_times_sidecar_used_verbatim(mrt_file, tmp_path):
    sidecar = tmp_path / "wt.jsonl"
    rows = [
        {"segment_index": 0, "words": [
            {"text": "so", "start_s": 1.5, "end_s": 1.8},
            {"text": "we", "start_s": 1.9, "end_s": 2.1},
            {"text": "should", "start_s": 2.2, "end_s": 2.8},
            {"text": "start", "start_s": 3.0, "end_s": 3.9},
        ]},
        {"segment_index": 1, "words": [
            {"text": "yeah", "start_s": 5.0, "end_s": 5.4},
            {"text": "agreed", "start_s": 6.0, "end_s": 6.8},
        ]},
    ]
    sidecar.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    out = tmp_path / "corpus"
    entry = convert_mrt(mrt_file, out, word_times_path=sidecar, synthesize_word_times=True)
    write_corpus_indexes([entry], out)
    records = [json.loads(line) for line in (out / "Btoy01.jsonl").read_text().splitlines()]
    assert records[0]["words"][0] == {"text": "so", "start_s": 1.5, "end_s": 1.8}
    proc = hotspots_validate("--corpus", str(out))
    assert proc.returncode == 0, proc.stderr


def test_cli_icsi_subcommand(mrt_file, tmp_path):
    out = tmp_path / "corpus"
    code = export_run(
        ["icsi", "--mrt", str(mrt_file), "--out", str(out), "--synthesize-word-times"]
    )
    assert code == 0
    assert (out / "meetings.json").exists()
    assert (out / "splits.json").exists()


def test_cli_reports_parse_errors(tmp_path):
    bad = tmp_path / "bad.mrt"
    bad.write_text("<Meeting>")
    assert export_run(["icsi", "--mrt", str(bad), "--out", str(tmp_path / "o")]) == 2
