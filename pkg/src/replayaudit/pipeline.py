"""End-to-end audit: collect -> filter -> classify -> resolve -> audit -> report.

Config file (JSON; relative paths resolve against the config's directory)::

    {
      "fixture_manifest": "manifest.json",     # or "registry": "registry.json"
      "fixture_port": 0,
      "resources": ["https://twitter.com/realDonaldTrump",
                    "https://twitter.com/realDonaldTrump/status/1290000000000000000"],
      "language_codes": ["en", "fr"],          # variants of account pages
      "cdx_prefix": {"archive": "web.archive.org",
                     "url": "https://twitter.com/realDonaldTrump/status/"},
      "sections": {"TweetFeed": "<uri_r>", "Bio": "<uri_r>", "MediaTimeline": "<uri_r>",
                   "YouMightLike": "<uri_r>", "WhatsHappening": "<uri_r>"},
      "ground_truth": {"path": "timeline.csv", "profile": "trumparchive"},
      "classifier": {"content_length_threshold": 50000, "include_statuses": [200]},
      "labels": {"datasets": [{"path": "labels.csv", "profile": "twitterlabels6"}],
                 "iterations": 2,
                 "tweet_json": "https://api.twitter.com/2/timeline/conversation/{tweet_id}.json"},
      "parallelism": 8,
      "sample_sd": false
    }

``classifier`` may give ``"calibrate": true`` instead of a threshold.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from . import __version__
from .classifier import (
    ACCOUNT_PAGE,
    ClassifierConfig,
    UiCoverage,
    calibrate_threshold,
    page_type,
    partition_corpus,
    tweet_id_of,
    ui_coverage,
)
from .clients import (
    ArchiveRegistryEntry,
    collect_timemaps,
    expand_language_variants,
    cdx_query,
    fetch_memento,
    http_get,
    load_registry,
    merge_timemaps,
)
from .coherence import (
    CompositeMementoAudit,
    SectionKind,
    count_tweet_violation,
    delta_stats,
    resolve_sections,
    split_by_direction,
)
from .errors import ConfigError, ReplayAuditError, TransportError
from .fixtures import FixtureManifest, serve_fixtures
from .labels import (
    DEFAULT_LABEL_MARKERS,
    LabelType,
    TweetRecord,
    audit_label_presence,
    ingest_timeline,
    summarize_label_audits,
)
from .memento import MementoRecord, TimeMap, UiClass, canonicalize_uri, dump_records
from .report import AuditReport, AuditSummary

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
DEFAULT_TWEET_JSON = "https://api.twitter.com/2/timeline/conversation/{tweet_id}.json"


@dataclass
class AuditConfig:
    base_dir: Path
    resources: list[str] = field(default_factory=list)
    language_codes: list[str] = field(default_factory=list)
    registry: Optional[list[ArchiveRegistryEntry]] = None
    fixture_manifest: Optional[Path] = None
    fixture_port: int = 0
    cdx_prefix: Optional[dict[str, str]] = None
    sections: dict[SectionKind, str] = field(default_factory=dict)
    ground_truth: Optional[dict[str, Any]] = None
    threshold: Optional[int] = None
    include_statuses: frozenset[int] = frozenset({200})
    labels: Optional[dict[str, Any]] = None
    parallelism: int = 8
    sample_sd: bool = False
    timeout: Optional[float] = None

    def path(self, p: Union[str, Path]) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def load(cls, config_path: Union[str, Path], overrides: Optional[dict[str, Any]] = None) -> "AuditConfig":
        config_path = Path(config_path)
        try:
            data = json.loads(config_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        data.update(overrides or {})
        return cls.from_dict(data, config_path.resolve().parent)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path) -> "AuditConfig":
        cfg = cls(base_dir=base_dir)
        cfg.resources = list(data.get("resources", []))
        cfg.language_codes = list(data.get("language_codes", []))
        if "fixture_manifest" in data:
            cfg.fixture_manifest = cfg.path(data["fixture_manifest"])
            cfg.fixture_port = int(data.get("fixture_port", 0))
        elif "registry" in data:
            reg = data["registry"]
            cfg.registry = load_registry(cfg.path(reg) if isinstance(reg, str) else reg)
        else:
            raise ConfigError("config needs either 'registry' or 'fixture_manifest'")
        cfg.cdx_prefix = data.get("cdx_prefix")
        try:
            cfg.sections = {SectionKind(k): v for k, v in data.get("sections", {}).items()}
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cfg.ground_truth = data.get("ground_truth")
        clf = data.get("classifier", {})
        if "content_length_threshold" in clf:
            cfg.threshold = int(clf["content_length_threshold"])
        elif not clf.get("calibrate"):
            raise ConfigError("classifier needs content_length_threshold or calibrate: true")
        cfg.include_statuses = frozenset(int(s) for s in clf.get("include_statuses", [200]))
        cfg.labels = data.get("labels")
        cfg.parallelism = max(1, int(data.get("parallelism", 8)))
        cfg.sample_sd = bool(data.get("sample_sd", False))
        cfg.timeout = data.get("timeout")
        return cfg


@dataclass
class AuditRun:
    """Everything the pipeline computed, before flattening into a report."""

    records: list[MementoRecord] = field(default_factory=list)
    classified: list[MementoRecord] = field(default_factory=list)
    audits: list[CompositeMementoAudit] = field(default_factory=list)
    archive_errors: dict[str, dict[str, str]] = field(default_factory=dict)
    fetch_errors: dict[str, str] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.archive_errors or self.fetch_errors)

    def error_summary(self) -> dict[str, str]:
        """One line per failed archive; independent of request completion order."""
        out = {}
        for archive_id, by_uri in sorted(self.archive_errors.items()):
            first = min(by_uri)
            out[archive_id] = f"{len(by_uri)} request(s) failed; first: {by_uri[first]}"
        if self.fetch_errors:
            out["fetch"] = f"{len(self.fetch_errors)} memento fetches failed"
        return out

    def records_with_classes(self) -> list[MementoRecord]:
        """All fetched records, carrying their UI class where they were classified."""
        by_uri = {r.uri_m: r for r in self.classified}
        return [by_uri.get(r.uri_m, r) for r in self.records]


class Auditor:
    def __init__(self, cfg: AuditConfig, registry: list[ArchiveRegistryEntry]):
        self.cfg = cfg
        self.registry = registry
        self.by_id = {e.archive_id: e for e in registry}
        self.run = AuditRun()

    # -- collection ---------------------------------------------------
    def resource_list(self) -> list[str]:
        out: list[str] = []
        for uri in self.cfg.resources:
            if page_type(uri) == ACCOUNT_PAGE and self.cfg.language_codes:
                out.extend(expand_language_variants(uri, self.cfg.language_codes))
            else:
                out.append(uri)
        if self.cfg.cdx_prefix:
            entry = self.by_id.get(self.cfg.cdx_prefix.get("archive", ""))
            if entry is None or not entry.cdx_endpoint:
                raise ConfigError("cdx_prefix names an archive without a CDX endpoint")
            try:
                records = cdx_query(entry.cdx_endpoint, self.cfg.cdx_prefix["url"], "prefix",
                                    entry=entry, timeout=self.cfg.timeout)
            except TransportError as exc:
                self.run.archive_errors.setdefault(entry.archive_id, {})["cdx"] = f"cdx: {exc}"
                records = []
            out.extend(r.original for r in records)
        seen, unique = set(), []
        for uri in out:
            key = canonicalize_uri(uri)
            if key not in seen:
                seen.add(key)
                unique.append(uri)
        return unique

    def timemap(self, uri_r: str) -> TimeMap:
        timemaps, errors = collect_timemaps(uri_r, self.registry, self.cfg.timeout)
        for archive_id, err in errors.items():
            if "HTTP 404" not in err:
                self.run.archive_errors.setdefault(archive_id, {})[uri_r] = err
        return merge_timemaps(uri_r, (timemaps[e.archive_id] for e in self.registry if e.archive_id in timemaps))

    def fetch(self, rec: MementoRecord) -> Optional[MementoRecord]:
        try:
            return fetch_memento(rec, entry=self.by_id.get(rec.archive_id), timeout=self.cfg.timeout)
        except TransportError as exc:
            self.run.fetch_errors[rec.uri_m] = str(exc)
            return None

    def collect(self, resources: list[str]) -> list[MementoRecord]:
        with ThreadPoolExecutor(self.cfg.parallelism) as pool:
            timemaps = list(pool.map(self.timemap, resources))
            pending = [e for tm in timemaps for e in tm.entries]
            fetched = list(pool.map(self.fetch, pending))
        records = [r for r in fetched if r is not None]
        records.sort(key=lambda r: (r.uri_r, r.memento_datetime, r.uri_m))
        return records

    # -- coherence ----------------------------------------------------
    def audit_coherence(self, classified: list[MementoRecord], timeline: list[TweetRecord]) -> list[CompositeMementoAudit]:
        roots = [r for r in classified if r.ui_class is UiClass.NEW and page_type(r.uri_r) == ACCOUNT_PAGE]
        if not roots or not self.cfg.sections:
            return []
        with ThreadPoolExecutor(self.cfg.parallelism) as pool:
            kinds = list(self.cfg.sections)
            section_tms = dict(zip(kinds, pool.map(self.timemap, [self.cfg.sections[k] for k in kinds])))
        audits = []
        for root in sorted(roots, key=lambda r: (r.memento_datetime, r.uri_m)):
            # replay resolves subresources within the root's own archive
            local = {
                kind: TimeMap(tm.uri_r, tuple(e for e in tm.entries if e.archive_id == root.archive_id))
                for kind, tm in section_tms.items()
            }
            audit = resolve_sections(root, local)
            if audit.is_complete and timeline:
                audit = audit.with_violation(count_tweet_violation(audit, timeline))
            audits.append(audit)
        return audits

    # -- labels ------------------------------------------------------
    def payload_fetcher(self, template: str):
        def fetch(memento: MementoRecord, tweet: TweetRecord) -> Optional[str]:
            json_uri = template.replace("{tweet_id}", str(tweet.id))
            if not memento.uri_m.endswith(memento.uri_r):
                return None
            url = memento.uri_m[: len(memento.uri_m) - len(memento.uri_r)] + json_uri
            entry = self.by_id.get(memento.archive_id)
            for _ in range(5):
                resp = http_get(url, entry=entry, timeout=self.cfg.timeout)
                if resp.status_code in (301, 302, 303, 307, 308) and "Location" in resp.headers:
                    url = resp.headers["Location"]
                    continue
                return resp.text if resp.status_code == 200 else None
            return None

        return fetch

    def audit_labels(self, classified: list[MementoRecord]):
        lcfg = self.cfg.labels
        if not lcfg:
            return []
        tweets: dict[int, TweetRecord] = {}
        for ds in lcfg.get("datasets", []):
            for t in ingest_timeline(self.cfg.path(ds["path"]), ds.get("profile", "twitterlabels6"), ds.get("id")):
                tweets.setdefault(t.id, t)
        by_tweet: dict[int, list[MementoRecord]] = {}
        for r in classified:
            tid = tweet_id_of(r.uri_r)
            if tid is not None and r.ui_class is UiClass.NEW:
                by_tweet.setdefault(tid, []).append(r)
        markers = {LabelType(k): v for k, v in lcfg.get("markers", {}).items()} or DEFAULT_LABEL_MARKERS
        fetch = self.payload_fetcher(lcfg.get("tweet_json", DEFAULT_TWEET_JSON))
        iterations = int(lcfg.get("iterations", 2))

        def one(tid):
            mementos = sorted(by_tweet.get(tid, []), key=lambda r: (r.memento_datetime, r.uri_m))
            return audit_label_presence(tweets[tid], mementos, iterations, fetch, markers)

        with ThreadPoolExecutor(self.cfg.parallelism) as pool:
            return list(pool.map(one, sorted(tweets)))

    # -- driver --------------------------------------------------------
    def execute(self) -> AuditReport:
        resources = self.resource_list()
        records = self.collect(resources)
        self.run.records = records
        threshold = self.cfg.threshold
        if threshold is None:
            lengths = [r.content_length for r in records if r.http_status in self.cfg.include_statuses]
            threshold = calibrate_threshold(lengths)
        clf = ClassifierConfig(threshold, self.cfg.include_statuses)
        partition, classified = partition_corpus(records, clf)
        self.run.classified = classified

        tweet_pages: dict[int, list[MementoRecord]] = {}
        for uri in resources:
            tid = tweet_id_of(uri)
            if tid is not None:
                tweet_pages.setdefault(tid, [])
        for r in classified:
            tid = tweet_id_of(r.uri_r)
            if tid is not None:
                tweet_pages.setdefault(tid, []).append(r)
        coverage = ui_coverage(tweet_pages) if tweet_pages else UiCoverage()

        timeline: list[TweetRecord] = []
        if self.cfg.ground_truth:
            gt = self.cfg.ground_truth
            timeline = ingest_timeline(self.cfg.path(gt["path"]), gt.get("profile", "trumparchive"))
        audits = self.audit_coherence(classified, timeline)
        self.run.audits = audits

        stats = {}
        for (kind, direction), deltas in sorted(split_by_direction(audits).items()):
            stats[(kind.value, direction.value)] = delta_stats(deltas, direction, self.cfg.sample_sd)

        label_rows = summarize_label_audits(self.audit_labels(classified))
        errors = self.run.error_summary()
        return AuditReport(
            partition=partition,
            coverage=coverage,
            audits=[AuditSummary.from_audit(a) for a in audits],
            stats=stats,
            labels=label_rows,
            archive_errors=errors,
            records_file="records.tsv",
            meta={
                "tool_version": __version__,
                "threshold": threshold,
                "resources": len(resources),
                "archives": sorted(self.by_id),
            },
        )


def run_audit(
    config_path: Union[str, Path],
    out_dir: Optional[Union[str, Path]] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> tuple[Optional[AuditReport], int]:
    """Run the whole pipeline; returns ``(report, exit_code)``.

    Exit code 0 means every archive answered, 2 that some archives or memento
    fetches failed (the report covers the rest), 1 a fatal error (report is
    ``None``).  With ``out_dir`` the raw records are written to
    ``records.tsv`` there, so report aggregates can be re-derived.
    """
    try:
        cfg = AuditConfig.load(config_path, overrides)
        with ExitStack() as stack:
            if cfg.fixture_manifest is not None:
                server = stack.enter_context(serve_fixtures(FixtureManifest.load(cfg.fixture_manifest), cfg.fixture_port))
                registry = server.registry()
            else:
                registry = cfg.registry or []
            if not registry:
                raise ConfigError("empty archive registry")
            auditor = Auditor(cfg, registry)
            report = auditor.execute()
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "records.tsv").write_text(dump_records(auditor.run.records_with_classes()), encoding="utf-8")
    except (ReplayAuditError, OSError) as exc:
        log.error("audit failed: %s", exc)
        return None, EXIT_FATAL
    return report, EXIT_PARTIAL if auditor.run.partial else EXIT_OK
