"""``replayaudit`` command line.

Subcommands: timemap, cdx, decode-id, classify, audit-coherence, audit-labels,
report, serve-fixtures.  Exit codes: 0 ok, 1 fatal, 2 partial archive failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .classifier import ClassifierConfig, calibrate_threshold, partition_corpus
from .clients import aggregate_timemaps, cdx_query, expand_language_variants, load_registry
from .errors import ReplayAuditError
from .fixtures import FixtureManifest, serve_fixtures
from .memento import dump_records, load_records, serialize_timemap
from .pipeline import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, run_audit
from .report import emit_report
from .snowflake import isoformat_ms, tweet_id_to_datetime


def _timemap(args) -> int:
    registry = load_registry(args.registry)
    uris = expand_language_variants(args.uri_r, args.lang or [])
    code = EXIT_OK
    for uri in uris:
        errors: dict[str, str] = {}
        tm = aggregate_timemaps(uri, registry, timeout=args.timeout, errors=errors)
        for archive_id, err in sorted(errors.items()):
            print(f"# {archive_id}: {err}", file=sys.stderr)
            code = EXIT_PARTIAL
        sys.stdout.write(serialize_timemap(tm) if args.format == "link" else dump_records(tm.entries))
    return code


def _cdx(args) -> int:
    filters = {}
    if args.status is not None:
        filters["status"] = args.status
    for rec in cdx_query(args.endpoint, args.url, args.match_type, filters, timeout=args.timeout):
        print(rec.to_line())
    return EXIT_OK


def _decode_id(args) -> int:
    code = EXIT_OK
    for line in sys.stdin:
        token = line.strip()
        if not token:
            continue
        try:
            print(f"{token}\t{isoformat_ms(tweet_id_to_datetime(int(token)))}")
        except ValueError as exc:
            print(f"# {token}: {exc}", file=sys.stderr)
            code = EXIT_FATAL
    return code


def _classify(args) -> int:
    records = load_records(Path(args.records).read_text())
    statuses = frozenset(args.include_status or [200])
    threshold = args.threshold
    if threshold is None:
        threshold = calibrate_threshold(
            [r.content_length for r in records if r.http_status in statuses and r.content_length is not None]
        )
        print(f"# calibrated threshold: {threshold}", file=sys.stderr)
    part, classified = partition_corpus(records, ClassifierConfig(threshold, statuses))
    print("archive,page_type,total,new_ui,old_ui")
    for row in part.table_rows():
        print(",".join(str(x) for x in row))
    print(f"# total={part.total} old_ui={part.old_ui} new_ui={part.new_ui} excluded={part.excluded}", file=sys.stderr)
    if args.output:
        Path(args.output).write_text(dump_records(classified))
    return EXIT_OK


def _run_and_emit(args, formats, drop=()) -> int:
    report, code = run_audit(args.config, args.out, overrides={k: None for k in drop} or None)
    if report is None:
        return code
    for fmt in formats:
        for path in emit_report(report, fmt, args.out):
            print(path)
    return code


def _audit_coherence(args) -> int:
    return _run_and_emit(args, ["csv", "plotdata"], drop=("labels",))


def _audit_labels(args) -> int:
    return _run_and_emit(args, ["csv"])


def _report(args) -> int:
    return _run_and_emit(args, args.format or ["csv", "json", "plotdata"])


def _serve(args) -> int:
    server = serve_fixtures(FixtureManifest.load(args.manifest), args.port)
    print(f"serving {len(server.manifest.resources)} resources at {server.url}", flush=True)
    if args.registry_out:
        Path(args.registry_out).write_text(json.dumps({"archives": [e.to_dict() for e in server.registry()]}, indent=2))
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="replayaudit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("timemap", help="aggregate TimeMaps for a URI-R across archives")
    s.add_argument("uri_r")
    s.add_argument("--registry", required=True, help="archive registry JSON")
    s.add_argument("--lang", nargs="*", help="language codes to expand into ?lang= variants")
    s.add_argument("--format", choices=["link", "records"], default="records")
    s.add_argument("--timeout", type=float)
    s.set_defaults(func=_timemap)

    s = sub.add_parser("cdx", help="query a CDX endpoint")
    s.add_argument("url")
    s.add_argument("--endpoint", required=True)
    s.add_argument("--match-type", choices=["exact", "prefix"], default="exact")
    s.add_argument("--status", type=int, help="keep only this status code")
    s.add_argument("--timeout", type=float)
    s.set_defaults(func=_cdx)

    s = sub.add_parser("decode-id", help="read tweet ids on stdin, print id<TAB>creation instant")
    s.set_defaults(func=_decode_id)

    s = sub.add_parser("classify", help="partition line-delimited memento records by UI")
    s.add_argument("records")
    s.add_argument("--threshold", type=int, help="content-length cut-off; calibrated when omitted")
    s.add_argument("--include-status", type=int, action="append")
    s.add_argument("-o", "--output", help="write classified records here")
    s.set_defaults(func=_classify)

    for name, func, hlp in (
        ("audit-coherence", _audit_coherence, "temporal-coherence audit of new-UI account mementos"),
        ("audit-labels", _audit_labels, "label presence audit of labeled tweets"),
        ("report", _report, "full audit with report emission"),
    ):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("config")
        s.add_argument("--out", required=True, help="output directory")
        if name == "report":
            s.add_argument("--format", action="append", choices=["csv", "json", "plotdata"])
        s.set_defaults(func=func)

    s = sub.add_parser("serve-fixtures", help="serve a fixture manifest over HTTP")
    s.add_argument("manifest")
    s.add_argument("--port", type=int, default=0)
    s.add_argument("--registry-out", help="write the matching archive registry JSON here")
    s.set_defaults(func=_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ReplayAuditError, OSError, ValueError) as exc:
        print(f"replayaudit: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
