"""Command-line entry point wiring the pipeline stages.

    ingest -> filter -> enrich -> assign -> score -> report -> chat/serve

Stages read and write files only; logs go to stderr. Exit codes:
1 usage, 2 configuration, 3 data, 4 backend.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path

from . import analytics, forum, sentiment, stages, taxonomy
from .corpus import DEFAULT_DATE_WINDOW, DEFAULT_MIN_WORDS, filter_text, parse_source
from .errors import (BackendError, ConfigError, DataError, GardenlensError)
from .inference import (element_classes, make_backend, scene_attributes,
                        scene_labels)
from .jsonutil import dumps_pretty
from .store import RecordStore, write_sorted
from .vision import TIER3_MIN_WEIGHT, enrich_all

log = logging.getLogger("gardenlens")

EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the documented contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(GardenlensError):
    pass


def _date(value: str) -> dt.date:
    return dt.date.fromisoformat(value)


def _load_taxonomy(path: str | None) -> taxonomy.Taxonomy:
    if path is None:
        return taxonomy.load_default_taxonomy(known_labels=scene_labels())
    return taxonomy.load_taxonomy(Path(path).read_text(encoding="utf-8"),
                                  known_labels=scene_labels())


def _load_lexicon(path: str | None) -> sentiment.Lexicon:
    if path is None:
        return sentiment.load_default_lexicon()
    return sentiment.Lexicon.load(path)


def _require_files(*paths: str | None) -> None:
    for path in paths:
        if path is not None and not Path(path).exists():
            raise ConfigError(f"no such file: {path}")


# --- stage commands ---------------------------------------------------------------

def cmd_ingest(args) -> int:
    _require_files(args.infile)
    report = parse_source(args.source, Path(args.infile).read_bytes(),
                          date_window=(args.date_from, args.date_to))
    for warning in report.warnings:
        log.warning("%s: %s", args.infile, warning)
    for issue in report.issues:
        log.warning("%s line %d: %s %s", args.infile, issue.line_no, issue.reason, issue.detail)
    out = Path(args.out)
    if (out / "index.json").exists():
        store = RecordStore.open(out)
    else:
        store = RecordStore.create(out)
    with store:
        store.put_all(report.records)
    stats = report.stats()
    log.info("ingested %d records (%d issues) into %s: %s",
             stats.kept, len(report.issues), out, stats.to_json_dict())
    return 0


def cmd_filter(args) -> int:
    store = RecordStore.open(args.store)
    kept, stats = filter_text(store.iter_records(), min_words=args.min_words,
                              language=args.language)
    write_sorted(args.out, kept)
    stats.check()
    stats_path = Path(args.out) / "filter_stats.json"
    stats_path.write_text(dumps_pretty(stats.to_json_dict()), encoding="utf-8")
    log.info("kept %d of %d records -> %s: %s", stats.kept, stats.total, args.out,
             stats.to_json_dict())
    return 0


def cmd_enrich(args) -> int:
    store = RecordStore.open(args.store)
    backend = make_backend(args.backend)
    enriched, stats = enrich_all(store.iter_records(), backend,
                                 tier3_min_weight=args.tier3_min_weight, jobs=args.jobs)
    stages.write_enriched(args.out, store.checksum(), enriched,
                          params={"tier3_min_weight": args.tier3_min_weight,
                                  "backend": args.backend})
    log.info("enriched %d of %d records -> %s: %s", stats.kept, stats.total, args.out,
             stats.to_json_dict())
    return 0


def cmd_assign(args) -> int:
    _require_files(args.enriched, args.taxonomy)
    tax = _load_taxonomy(args.taxonomy)
    enriched_set = stages.read_enriched(args.enriched)
    rows = taxonomy.assign_all(enriched_set.records, tax)
    stages.write_assignments(args.out, enriched_set.snapshot, tax.checksum, rows)
    log.info("assigned %d images -> %s", len(rows), args.out)
    return 0


def cmd_score(args) -> int:
    _require_files(args.lexicon)
    store = RecordStore.open(args.store)
    lexicon = _load_lexicon(args.lexicon)
    backend = make_backend(args.backend)
    include_comments = not args.no_comments

    def score_one(record):
        text = sentiment.record_text(record, include_comments=include_comments)
        model = backend.sentiment(record.id, text)
        return record.id, sentiment.score_text(text, lexicon, model, w_model=args.w_model)

    records = list(store.iter_records())
    if args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            scores = dict(pool.map(score_one, records))
    else:
        scores = dict(score_one(r) for r in records)
    stages.write_scores(args.out, store.checksum(), scores,
                        params={"w_model": args.w_model, "include_comments": include_comments,
                                "backend": args.backend})
    log.info("scored %d records -> %s", len(scores), args.out)
    return 0


def cmd_report(args) -> int:
    _require_files(args.enriched, args.assignments, args.scores, args.taxonomy)
    tax = _load_taxonomy(args.taxonomy)
    enriched_set = stages.read_enriched(args.enriched)
    assignment_set = stages.read_assignments(args.assignments)
    score_set = stages.read_scores(args.scores)
    snapshot = stages.check_same_snapshot(enriched_set, assignment_set, score_set)
    lexicon = _load_lexicon(args.lexicon)
    from .jsonutil import sha256_hex
    report = analytics.build_report(
        enriched_set.records, assignment_set.rows, score_set.scores, tax,
        params=analytics.ReportParams(bin_width=args.bin_width),
        snapshot=snapshot,
        lexicon_checksum="sha256:" + sha256_hex(lexicon.checksum_source()),
    )
    report.save(args.out)
    if args.csv_dir:
        analytics.write_csv_views(report, Path(args.csv_dir))
    log.info("report over %d records -> %s", len(enriched_set.records), args.out)
    return 0


# --- interactive / service commands -------------------------------------------------

def _chat_backend(spec: str) -> forum.ChatBackend:
    if spec == "canned":
        return forum.CannedChatBackend()
    if spec.startswith("scripted:"):
        path = spec[len("scripted:"):]
        _require_files(path)
        return forum.ScriptedChatBackend.from_file(path)
    raise ConfigError(f"unknown chat backend {spec!r}")


def cmd_chat(args) -> int:
    _require_files(args.kb)
    roles = forum.roles_from_preset(args.preset)
    backend = _chat_backend(args.chat_backend)
    session = forum.open_session(roles, args.kb, max_turns=args.max_turns,
                                 session_id="local")
    researcher = session.roles_of_kind("researcher")[0]

    def run_round(text: str) -> None:
        for message in forum.post(session, text, backend):
            print(f"[{message.seq}] {message.speaker}: {message.content}")

    if args.query:
        for query in args.query:
            run_round(query)
    else:
        print(f"chatting as {researcher.name!r}; empty line to quit", file=sys.stderr)
        for line in sys.stdin:
            line = line.strip()
            if not line:
                break
            run_round(line)

    if args.record:
        record_dir = Path(args.record)
        record_dir.mkdir(parents=True, exist_ok=True)
        forum.dump_transcript(session.transcript, record_dir / "transcript.jsonl")
        forum.dump_tool_log(session.tool_log, record_dir / "tools.json")
        log.info("session recorded under %s", record_dir)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(kb_dir=Path(args.kb_dir), chat_backend=_chat_backend(args.chat_backend),
                     preset=args.preset, console_dir=Path(args.console) if args.console else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_validate(args) -> int:
    problems: list[str] = []

    def check(label, fn):
        try:
            fn()
            print(f"ok: {label}")
        except GardenlensError as exc:
            problems.append(f"{label}: {exc}")
            print(f"FAIL: {label}: {exc}")

    check("element classes (150)", element_classes)
    check("scene labels (365)", scene_labels)
    check("scene attributes", scene_attributes)
    check("taxonomy config", lambda: _load_taxonomy(args.taxonomy))
    check("lexicon", lambda: _load_lexicon(args.lexicon))
    check("role presets", forum.roles_from_preset)
    check("web search fixtures", forum.MockWebSearch)
    if args.kb:
        check(f"knowledge base {args.kb}", lambda: analytics.load_report(args.kb))
    if args.store:
        check(f"store {args.store}", lambda: RecordStore.open(args.store))
    if problems:
        raise DataError(f"{len(problems)} validation failure(s)")
    return 0


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gardenlens", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a source dump into a record store")
    p.add_argument("--source", required=True, help="flickr|twitter|instagram|tripadvisor|reddit")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help="store directory")
    p.add_argument("--date-from", type=_date, default=DEFAULT_DATE_WINDOW[0])
    p.add_argument("--date-to", type=_date, default=DEFAULT_DATE_WINDOW[1])
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("filter", help="apply text filters to a store")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-words", type=int, default=DEFAULT_MIN_WORDS)
    p.add_argument("--language", default="english")
    p.set_defaults(fn=cmd_filter)

    p = sub.add_parser("enrich", help="attach segmentation profiles and scene tiers")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default=os.environ.get("GARDENLENS_BACKEND", "stub"),
                   help="stub | http(s) URL | stdio:<command>")
    p.add_argument("--tier3-min-weight", type=float, default=TIER3_MIN_WEIGHT)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_enrich)

    p = sub.add_parser("assign", help="map enriched images into the taxonomy")
    p.add_argument("--enriched", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_assign)

    p = sub.add_parser("score", help="fuse lexicon and model sentiment per record")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--backend", default=os.environ.get("GARDENLENS_BACKEND", "stub"))
    p.add_argument("--w-model", type=float, default=sentiment.DEFAULT_MODEL_WEIGHT)
    p.add_argument("--no-comments", action="store_true",
                   help="score the main text only, ignoring comments")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("report", help="build the analysis report / knowledge base")
    p.add_argument("--enriched", required=True)
    p.add_argument("--assignments", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--bin-width", type=float, default=analytics.DEFAULT_BIN_WIDTH)
    p.add_argument("--csv-dir", default=None, help="also emit plotting CSVs here")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("chat", help="discuss a knowledge base with the agent group")
    p.add_argument("--kb", required=True, help="report.json to ground the discussion in")
    p.add_argument("--preset", default="default")
    p.add_argument("--chat-backend", default="canned", help="canned | scripted:<fixtures.json>")
    p.add_argument("--max-turns", type=int, default=forum.DEFAULT_MAX_TURNS)
    p.add_argument("--query", action="append", help="run one round per query, then exit")
    p.add_argument("--record", default=None, help="directory for transcript.jsonl + tools.json")
    p.set_defaults(fn=cmd_chat)

    p = sub.add_parser("serve", help="host the discussion service API")
    p.add_argument("--kb-dir", required=True, help="directory of *.json knowledge bases")
    p.add_argument("--preset", default="default")
    p.add_argument("--chat-backend", default="canned")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--console", default=None, help="static console build to mount at /console")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("validate", help="check configs and data files without writing")
    p.add_argument("--taxonomy", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--kb", default=None)
    p.add_argument("--store", default=None)
    p.set_defaults(fn=cmd_validate)

    return parser


CONFIG_KEYS = ("store", "backend", "taxonomy", "lexicon", "min_words", "language",
               "tier3_min_weight", "w_model", "jobs", "bin_width", "kb", "kb_dir",
               "preset", "chat_backend", "host", "port", "max_turns", "out")


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Pop --config <file> from argv and install its values as flag defaults."""
    if "--config" not in argv:
        return argv
    index = argv.index("--config")
    if index + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = Path(argv[index + 1])
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}")
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    defaults = dict(values)
    if "min_words" in defaults:
        defaults["min_words"] = int(defaults["min_words"])
    parser.set_defaults(**defaults)
    return argv[:index] + argv[index + 2:]


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        argv = list(sys.argv[1:] if argv is None else argv)
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
