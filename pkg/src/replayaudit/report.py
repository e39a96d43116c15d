"""Audit report model and its CSV / JSON / plot-data renderings.

CSV schema (version 1), one file per table:

``partition.csv``    archive,page_type,total,new_ui,old_ui
``summary.csv``      metric,value
``coverage.csv``     only_old,only_new,both,neither,pct_only_old,pct_only_new,pct_both,pct_neither
``audits.csv``       root_uri_m,root_datetime,archive,<five section deltas>,spread,completeness,direction,off_by_count
``stats.csv``        section,direction,count,min,max,median,mean,sd   (seconds, full precision)
``table_future.csv`` / ``table_past.csv``
                     Section,Memento Count,Min in sec,Max in sec (hr),Median in sec (hr),Mean in sec (hr),Sd in sec (hr)
``labels.csv``       label_type,tweets,new_ui_mementos,working,label_present
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from .classifier import CorpusPartition, UiCoverage
from .coherence import (
    CompositeMementoAudit,
    DeltaStats,
    Direction,
    SectionKind,
    ecdf,
)
from .labels import LabelSummaryRow

SCHEMA_VERSION = 1
STATS_HEADER = [
    "Section", "Memento Count", "Min in sec", "Max in sec (hr)",
    "Median in sec (hr)", "Mean in sec (hr)", "Sd in sec (hr)",
]
AUDIT_HEADER = (
    ["root_uri_m", "root_datetime", "archive"]
    + [f"delta_{k.value}" for k in SectionKind]
    + ["spread", "completeness", "direction", "off_by_count"]
)


@dataclass(frozen=True)
class AuditSummary:
    """Flat view of one composite-memento audit."""

    root_uri_m: str
    root_datetime: str
    archive: str
    deltas: dict[str, Optional[int]]
    spread: Optional[int]
    completeness: str
    direction: Optional[str]
    off_by_count: Optional[int]

    @classmethod
    def from_audit(cls, audit: CompositeMementoAudit) -> "AuditSummary":
        v = audit.tweet_violation
        return cls(
            audit.root.uri_m,
            audit.root.memento_datetime.strftime("%Y-%m-%dT%H:%M:%SZ"),
            audit.root.archive_id,
            {k.value: audit.deltas.get(k) for k in SectionKind},
            audit.spread,
            audit.completeness.value,
            v.direction.value if v else None,
            v.off_by_count if v else None,
        )

    def row(self) -> list[str]:
        def cell(x):
            return "-" if x is None else str(x)

        return (
            [self.root_uri_m, self.root_datetime, self.archive]
            + [cell(self.deltas.get(k.value)) for k in SectionKind]
            + [cell(self.spread), self.completeness, cell(self.direction), cell(self.off_by_count)]
        )

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "AuditSummary":
        def opt_int(x):
            return None if x in ("-", "", None) else int(x)

        return cls(
            row["root_uri_m"], row["root_datetime"], row["archive"],
            {k.value: opt_int(row[f"delta_{k.value}"]) for k in SectionKind},
            opt_int(row["spread"]), row["completeness"],
            None if row["direction"] == "-" else row["direction"],
            opt_int(row["off_by_count"]),
        )


@dataclass
class AuditReport:
    partition: CorpusPartition
    coverage: UiCoverage
    audits: list[AuditSummary] = field(default_factory=list)
    stats: dict[tuple[str, str], DeltaStats] = field(default_factory=dict)
    labels: list[LabelSummaryRow] = field(default_factory=list)
    archive_errors: dict[str, str] = field(default_factory=dict)
    records_file: Optional[str] = None
    meta: dict[str, Any] = field(default_factory=dict)

    # --- derived ------------------------------------------------------
    @property
    def complete_audits(self) -> list[AuditSummary]:
        return [a for a in self.audits if a.completeness == "Complete"]

    def violation_counts(self) -> dict[str, int]:
        complete = [a for a in self.complete_audits if a.off_by_count is not None]
        out = {
            "complete": len(self.complete_audits),
            "failed": len(self.audits) - len(self.complete_audits),
            "violative": sum(1 for a in complete if a.off_by_count >= 1),
        }
        for d in (Direction.PAST, Direction.FUTURE, Direction.NONE):
            sub = [a for a in complete if a.direction == d.value]
            out[f"{d.value.lower()}_audits"] = len(sub)
            out[f"{d.value.lower()}_violative"] = sum(1 for a in sub if a.off_by_count >= 1)
        return out

    def summary(self) -> dict[str, int]:
        p = self.partition
        out = {"total": p.total, "old_ui": p.old_ui, "new_ui": p.new_ui, "excluded": p.excluded}
        for status, n in sorted(p.excluded_statuses.items()):
            out[f"excluded_status_{status}"] = n
        out.update(self.violation_counts())
        return out

    def section_deltas(self, section: SectionKind) -> list[int]:
        return [
            a.deltas[section.value] for a in self.complete_audits if a.deltas.get(section.value) is not None
        ]

    # --- json ---------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        p = self.partition
        return {
            "schema_version": SCHEMA_VERSION,
            "meta": self.meta,
            "records_file": self.records_file,
            "archive_errors": dict(sorted(self.archive_errors.items())),
            "partition": {
                "total": p.total, "old_ui": p.old_ui, "new_ui": p.new_ui, "excluded": p.excluded,
                "excluded_statuses": {str(k): v for k, v in sorted(p.excluded_statuses.items())},
                "groups": [
                    {"archive": a, "page_type": t, "total": tot, "new_ui": new, "old_ui": old}
                    for a, t, tot, new, old in p.table_rows()
                ],
            },
            "coverage": vars(self.coverage) | {"percentages": self.coverage.percentages()},
            "summary": self.summary(),
            "audits": [vars(a) for a in self.audits],
            "stats": [
                {"section": s, "direction": d} | vars(st) for (s, d), st in sorted(self.stats.items())
            ],
            "labels": [vars(r) for r in self.labels],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AuditReport":
        p = data["partition"]
        partition = CorpusPartition(
            p["total"], p["old_ui"], p["new_ui"], p["excluded"],
            {(g["archive"], g["page_type"]): (g["old_ui"], g["new_ui"]) for g in p["groups"]},
            {int(k): v for k, v in p["excluded_statuses"].items()},
        )
        cov = data["coverage"]
        return cls(
            partition,
            UiCoverage(cov["only_old"], cov["only_new"], cov["both"], cov["neither"]),
            [AuditSummary(**a) for a in data["audits"]],
            {
                (s["section"], s["direction"]): DeltaStats(
                    s["count"], s["min"], s["max"], s["median"], s["mean"], s["sd"]
                )
                for s in data["stats"]
            },
            [LabelSummaryRow(**r) for r in data["labels"]],
            dict(data.get("archive_errors", {})),
            data.get("records_file"),
            dict(data.get("meta", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def report_counts(report: AuditReport) -> dict[str, Any]:
    """Every integer count in a report, for equality checks across renderings."""
    return {
        "summary": report.summary(),
        "groups": report.partition.table_rows(),
        "coverage": vars(report.coverage),
        "audits": [(a.root_uri_m, a.off_by_count, a.spread) for a in report.audits],
        "stats_counts": {k: v.count for k, v in sorted(report.stats.items())},
        "labels": [vars(r) for r in report.labels],
    }


# --- formatting ------------------------------------------------------------

def format_seconds(value: float) -> str:
    """Whole seconds, keeping an exact half (medians of even-length samples)."""
    if float(value).is_integer():
        return str(int(value))
    if float(value * 2).is_integer():
        return f"{value:.1f}"
    return str(int(math.floor(value + 0.5)))


def format_sec_hr(value: float) -> str:
    return f"{format_seconds(value)} ({value / 3600:.1f})"


def stats_row(section: str, st: DeltaStats) -> list[str]:
    return [
        section, str(st.count), format_seconds(st.min), format_sec_hr(st.max),
        format_sec_hr(st.median), format_sec_hr(st.mean), format_sec_hr(st.sd),
    ]


def _csv(rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def stats_table(stats: dict[tuple[str, str], DeltaStats], direction: Direction) -> str:
    """Per-section delta table in seconds with hours in parentheses."""
    rows = [STATS_HEADER]
    for kind in SectionKind:
        st = stats.get((kind.value, direction.value))
        if st is not None:
            rows.append(stats_row(kind.label, st))
    return _csv(rows)


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def emit_report(report: AuditReport, fmt: str, out_dir: Union[str, Path]) -> list[Path]:
    """Write the report as ``csv``, ``json`` or ``plotdata`` files under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if fmt == "json":
        written.append(_write(out / "report.json", report.to_json()))
    elif fmt == "csv":
        written.append(_write(
            out / "partition.csv",
            _csv([["archive", "page_type", "total", "new_ui", "old_ui"]] + [list(r) for r in report.partition.table_rows()]),
        ))
        written.append(_write(out / "summary.csv", _csv([["metric", "value"]] + [[k, v] for k, v in report.summary().items()])))
        c = report.coverage
        pct = c.percentages()
        written.append(_write(out / "coverage.csv", _csv([
            ["only_old", "only_new", "both", "neither", "pct_only_old", "pct_only_new", "pct_both", "pct_neither"],
            [c.only_old, c.only_new, c.both, c.neither,
             f"{pct['only_old']:.2f}", f"{pct['only_new']:.2f}", f"{pct['both']:.2f}", f"{pct['neither']:.2f}"],
        ])))
        written.append(_write(out / "audits.csv", _csv([AUDIT_HEADER] + [a.row() for a in report.audits])))
        written.append(_write(out / "stats.csv", _csv(
            [["section", "direction", "count", "min", "max", "median", "mean", "sd"]]
            + [[s, d, st.count, repr(st.min), repr(st.max), repr(st.median), repr(st.mean), repr(st.sd)]
               for (s, d), st in sorted(report.stats.items())]
        )))
        written.append(_write(out / "table_future.csv", stats_table(report.stats, Direction.FUTURE)))
        written.append(_write(out / "table_past.csv", stats_table(report.stats, Direction.PAST)))
        written.append(_write(out / "labels.csv", _csv(
            [["label_type", "tweets", "new_ui_mementos", "working", "label_present"]]
            + [[r.label_type, r.tweets, r.new_ui_mementos, r.working, r.label_present] for r in report.labels]
        )))
    elif fmt == "plotdata":
        for kind in SectionKind:
            deltas = report.section_deltas(kind)
            rows = [["delta_seconds", "cumulative_probability"]]
            if deltas:
                rows += [[v, repr(p)] for v, p in ecdf(deltas)]
            written.append(_write(out / f"ecdf_{kind.value}.csv", _csv(rows)))
        rows = [["root_uri_m", "delta_seconds", "off_by_count", "direction"]]
        for a in report.complete_audits:
            if a.off_by_count is not None:
                rows.append([a.root_uri_m, a.deltas[SectionKind.TWEET_FEED.value], a.off_by_count, a.direction])
        written.append(_write(out / "delta_vs_offby.csv", _csv(rows)))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return written


def _read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def read_csv_report(out_dir: Union[str, Path]) -> AuditReport:
    """Rebuild a report from its CSV tables (stats keep full precision)."""
    out = Path(out_dir)
    summary = {r["metric"]: int(r["value"]) for r in _read_csv(out / "summary.csv")}
    groups = {
        (r["archive"], r["page_type"]): (int(r["old_ui"]), int(r["new_ui"]))
        for r in _read_csv(out / "partition.csv")
    }
    statuses = {
        int(k.rsplit("_", 1)[1]): v for k, v in summary.items() if k.startswith("excluded_status_")
    }
    partition = CorpusPartition(
        summary["total"], summary["old_ui"], summary["new_ui"], summary["excluded"], groups, statuses
    )
    cov = _read_csv(out / "coverage.csv")[0]
    coverage = UiCoverage(int(cov["only_old"]), int(cov["only_new"]), int(cov["both"]), int(cov["neither"]))
    audits = [AuditSummary.from_row(r) for r in _read_csv(out / "audits.csv")]
    stats = {
        (r["section"], r["direction"]): DeltaStats(
            int(r["count"]), float(r["min"]), float(r["max"]), float(r["median"]), float(r["mean"]), float(r["sd"])
        )
        for r in _read_csv(out / "stats.csv")
    }
    labels = [
        LabelSummaryRow(r["label_type"], int(r["tweets"]), int(r["new_ui_mementos"]), int(r["working"]), int(r["label_present"]))
        for r in _read_csv(out / "labels.csv")
    ]
    return AuditReport(partition, coverage, audits, stats, labels)
