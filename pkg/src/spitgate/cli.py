"""Command line entry point: analyze, synth, db, bench, features."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__, spam_db
from .capture_io import group_calls, read_capture
from .classify_media import MediaRuleParams, load_prototypes
from .features import FrameSpec, feature_vector, silence_stats
from .pipeline import (
    NoInviteError,
    Settings,
    analyze_capture,
    benchmark,
    caller_stream,
    default_patterns_path,
    default_prototypes_path,
    first_invite,
)
from .traffic_synth import read_manifest, read_spec_file, synth_corpus

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_SPAM = 3
DB_ENV = "SPITGATE_DB"

log = logging.getLogger("spitgate")


class UsageError(Exception):
    pass


def _db_path(args, required: bool) -> Path:
    path = args.db or os.environ.get(DB_ENV)
    if path:
        return Path(path)
    if required:
        raise UsageError(f"no pattern database: pass --db or set {DB_ENV}")
    return default_patterns_path()


def _existing(path: Path, what: str) -> Path:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def cmd_analyze(args) -> int:
    db = _existing(_db_path(args, required=False), "pattern database")
    protos = _existing(Path(args.prototypes) if args.prototypes else default_prototypes_path(), "prototype table")
    capture = _existing(Path(args.capture), "capture")
    settings = Settings(args.combination, MediaRuleParams(fail_closed=args.fail_closed))
    report = analyze_capture(capture, db, protos, settings, jobs=args.jobs, sip_port=args.sip_port)
    sys.stdout.write(report.format())
    return EXIT_SPAM if report.spam_count else EXIT_OK


def cmd_synth(args) -> int:
    profiles = read_spec_file(_existing(Path(args.spec), "profile spec"))
    paths = synth_corpus(profiles, args.out)
    for p in paths:
        print(p)
    log.info("wrote %d captures and a manifest to %s", len(paths), args.out)
    return EXIT_OK


def cmd_db(args) -> int:
    path = _db_path(args, required=True)
    if args.action == "list":
        store = spam_db.load(_existing(path, "pattern database"))
        for p in store:
            print(p.line())
        return EXIT_OK
    store = spam_db.load(path) if path.exists() else spam_db.PatternStore(path=path)
    pattern = spam_db.SpamPattern.make(args.field, args.kind, args.pattern)
    if args.action == "add":
        spam_db.add(store, pattern, path)
    else:
        spam_db.remove(store, pattern, path)
    print(pattern.line())
    return EXIT_OK


def _corpus_paths(corpus: Path) -> list[Path]:
    if corpus.is_file():
        return [corpus]
    if (corpus / "manifest.txt").is_file():
        return [row[0] for row in read_manifest(corpus)]
    return sorted(corpus.glob("*.pcap"))


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    if not corpus.exists():
        raise UsageError(f"corpus not found: {corpus}")
    table = benchmark(
        _corpus_paths(corpus), args.reps,
        store=_db_path(args, required=False),
        table=Path(args.prototypes) if args.prototypes else None,
        settings=Settings(args.combination),
    )
    sys.stdout.write(table.format())
    return EXIT_OK


def cmd_features(args) -> int:
    spec = FrameSpec()
    scale = load_prototypes(args.prototypes).scale if args.prototypes else 1.0
    groups = group_calls(read_capture(_existing(Path(args.capture), "capture")), args.sip_port)
    for call in sorted(groups, key=lambda c: c.call_id):
        try:
            _, caller_ip = first_invite(call)
        except NoInviteError:
            caller_ip = ""
        stream, _ = caller_stream(call, caller_ip)
        if stream is None or len(stream.samples) < spec.frame_length:
            log.warning("%s: not enough media for features", call.call_id)
            continue
        fv = feature_vector(stream.samples, spec, scale)
        st = silence_stats(stream, spec)
        print("\t".join([
            call.call_id,
            *(f"{v:.6f}" for v in (fv.zcr, fv.abs_mean, fv.energy, fv.entropy, st.silence_fraction)),
            str(st.longest_silent_run),
            str(st.longest_voiced_run),
        ]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spitgate", description=__doc__)
    parser.add_argument("--version", action="version", version=f"spitgate {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify every call in a capture")
    p.add_argument("--capture", required=True)
    p.add_argument("--db", help=f"pattern file (default: ${DB_ENV}, then the bundled file)")
    p.add_argument("--prototypes", help="prototype table (default: bundled calibrated table)")
    p.add_argument("--combination", choices=("any", "all"), default="any")
    p.add_argument("--fail-closed", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--sip-port", type=int, default=5060)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="write a synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--spec", required=True, help="profile lines kind|seed|duration|key=value...")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("db", help="manage the spam pattern file")
    p.add_argument("--db")
    db_sub = p.add_subparsers(dest="action", required=True)
    for action in ("add", "remove"):
        q = db_sub.add_parser(action)
        q.add_argument("field", choices=spam_db.FIELDS)
        q.add_argument("kind", choices=spam_db.KINDS)
        q.add_argument("pattern")
        q.add_argument("--db", default=argparse.SUPPRESS)
    q = db_sub.add_parser("list")
    q.add_argument("--db", default=argparse.SUPPRESS)
    p.set_defaults(func=cmd_db)

    p = sub.add_parser("bench", help="time signaling vs media layers over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--db")
    p.add_argument("--prototypes")
    p.add_argument("--combination", choices=("any", "all"), default="any")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("features", help="dump per-call media features")
    p.add_argument("--capture", required=True)
    p.add_argument("--prototypes", help="take the calibration scale from this table")
    p.add_argument("--sip-port", type=int, default=5060)
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spitgate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"spitgate: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
