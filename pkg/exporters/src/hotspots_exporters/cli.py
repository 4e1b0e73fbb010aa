"""hotspots-export: produce vector stores and corpus conversions.

Outputs conform to the hotspots kit's documented file formats and can be
checked with `hotspots validate --embeddings-store/--prosody-store`.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .embeddings import export_embeddings
from .encoders import DEFAULT_ENCODER, DEFAULT_HASH_DIM
from .icsi import ConversionError, convert_mrt, write_corpus_indexes
from .prosody import export_prosody


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hotspots-export")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embeddings", help="per-utterance (and truncated) text vectors")
    p.add_argument("--corpus", required=True, help="corpus directory in the kit schema")
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--encoder", default=DEFAULT_ENCODER, help="hash-v1 (default) or st:<model>")
    p.add_argument("--dim", type=int, default=DEFAULT_HASH_DIM, help="dim for the hashed encoder")
    p.add_argument("--window-len", type=float, default=60.0)
    p.add_argument("--step", type=float, default=15.0)

    p = sub.add_parser("prosody", help="per-(channel, 5 s subwindow) acoustic features")
    p.add_argument("--meeting", required=True, help="meeting id for the store keys")
    p.add_argument(
        "--audio",
        required=True,
        nargs="+",
        help="either one multi-channel WAV, or channel=path pairs",
    )
    p.add_argument("--out", required=True)

    p = sub.add_parser("icsi", help="convert MRT-style XML transcripts to the corpus schema")
    p.add_argument("--mrt", required=True, nargs="+", help="MRT XML files")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--word-times", help="word-times JSONL sidecar (single meeting only)")
    p.add_argument("--hot-labels", help="TSV of '<meeting>:<segment_index>\\t<label>'")
    p.add_argument(
        "--synthesize-word-times",
        action="store_true",
        help="spread tokens uniformly over segments lacking word times (approximation)",
    )
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embeddings":
            summary = export_embeddings(
                args.corpus,
                args.out,
                encoder_id=args.encoder,
                dim=args.dim,
                window_len_s=args.window_len,
                step_s=args.step,
            )
            print(
                f"wrote {summary['vectors']} vectors (dim {summary['dim']}, "
                f"{summary['truncated']} truncated) to {args.out} [{summary['encoder']}]"
            )
        elif args.command == "prosody":
            if len(args.audio) == 1 and "=" not in args.audio[0]:
                channel_audio: dict[int, str] | str = args.audio[0]
            else:
                channel_audio = {}
                for item in args.audio:
                    ch, _, path = item.partition("=")
                    if not path:
                        raise ValueError(f"expected channel=path, got {item!r}")
                    channel_audio[int(ch)] = path
            summary = export_prosody(args.meeting, channel_audio, args.out)
            print(
                f"wrote {summary['cells']} cells over {summary['channels']} channels "
                f"(dim {summary['dim']}) to {args.out}"
            )
        elif args.command == "icsi":
            if args.word_times and len(args.mrt) > 1:
                raise ConversionError("--word-times applies to a single MRT file")
            entries = [
                convert_mrt(
                    path,
                    args.out,
                    word_times_path=args.word_times,
                    hot_labels_path=args.hot_labels,
                    synthesize_word_times=args.synthesize_word_times,
                )
                for path in args.mrt
            ]
            write_corpus_indexes(entries, args.out)
            total = sum(e["utterances"] for e in entries)
            print(f"converted {len(entries)} meetings, {total} utterances, into {args.out}")
        return 0
    except (ConversionError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
