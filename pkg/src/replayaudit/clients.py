"""Network-facing layer: archive registry, TimeMap aggregation, CDX and memento fetches.

Every request to an archive goes through that archive's :class:`Throttle`, so
``max_in_flight`` and ``min_request_gap_ms`` from the registry hold no matter
how many threads issue requests.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union
from urllib.parse import urlsplit, urlunsplit

import requests

from .errors import AllArchivesFailed, ConfigError, MalformedCdxLine, Timeout, TransportError
from .memento import (
    ArchivedResourceIds,
    MementoRecord,
    TimeMap,
    parse_timemap,
    parse_timestamp14,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0
TIMEOUT_ENV = "REPLAYAUDIT_TIMEOUT"


def default_timeout() -> float:
    raw = os.environ.get(TIMEOUT_ENV)
    if not raw:
        return DEFAULT_TIMEOUT
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{TIMEOUT_ENV}={raw!r} is not a number") from None
    if value <= 0:
        raise ConfigError(f"{TIMEOUT_ENV} must be positive")
    return value


@dataclass(frozen=True)
class ArchiveRegistryEntry:
    archive_id: str
    timemap_endpoint_template: str
    replay_url_pattern: str
    max_in_flight: int = 1
    min_request_gap_ms: float = 0.0
    replay_url_template: Optional[str] = None
    cdx_endpoint: Optional[str] = None

    def __post_init__(self):
        if not self.archive_id:
            raise ConfigError("archive_id must be non-empty")
        if self.timemap_endpoint_template.count("{uri_r}") != 1:
            raise ConfigError(f"{self.archive_id}: timemap template needs exactly one {{uri_r}}")
        if self.replay_url_template is not None and self.replay_url_template.count("{uri_r}") != 1:
            raise ConfigError(f"{self.archive_id}: replay template needs exactly one {{uri_r}}")
        if "(?P<timestamp>" not in self.replay_url_pattern:
            raise ConfigError(f"{self.archive_id}: replay pattern lacks a timestamp group")
        if self.max_in_flight < 1:
            raise ConfigError(f"{self.archive_id}: max_in_flight must be >= 1")
        if self.min_request_gap_ms < 0:
            raise ConfigError(f"{self.archive_id}: min_request_gap_ms must be >= 0")

    def timemap_url(self, uri_r: str) -> str:
        return self.timemap_endpoint_template.replace("{uri_r}", uri_r)

    def replay_url(self, timestamp: str, uri_r: str) -> str:
        if self.replay_url_template is None:
            raise ConfigError(f"{self.archive_id}: no replay_url_template configured")
        return self.replay_url_template.replace("{timestamp}", timestamp).replace("{uri_r}", uri_r)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ArchiveRegistryEntry":
        try:
            return cls(
                archive_id=data["id"],
                timemap_endpoint_template=data["timemap"],
                replay_url_pattern=data["replay_pattern"],
                max_in_flight=int(data.get("max_in_flight", 1)),
                min_request_gap_ms=float(data.get("min_request_gap_ms", 0)),
                replay_url_template=data.get("replay"),
                cdx_endpoint=data.get("cdx"),
            )
        except KeyError as exc:
            raise ConfigError(f"registry entry missing field {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "id": self.archive_id,
            "timemap": self.timemap_endpoint_template,
            "replay_pattern": self.replay_url_pattern,
            "max_in_flight": self.max_in_flight,
            "min_request_gap_ms": self.min_request_gap_ms,
        }
        if self.replay_url_template:
            out["replay"] = self.replay_url_template
        if self.cdx_endpoint:
            out["cdx"] = self.cdx_endpoint
        return out


def load_registry(source: Union[str, Path, Sequence[Mapping[str, Any]]]) -> list[ArchiveRegistryEntry]:
    """Read a registry from a JSON file (``{"archives": [...]}``) or a list of dicts."""
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read registry {source}: {exc}") from None
    else:
        data = source
    if isinstance(data, Mapping):
        data = data.get("archives", [])
    entries = [ArchiveRegistryEntry.from_dict(d) for d in data]
    ids = [e.archive_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate archive ids in registry")
    return entries


def replay_patterns(registry: Iterable[ArchiveRegistryEntry]) -> dict[str, str]:
    return {e.archive_id: e.replay_url_pattern for e in registry}


class Throttle:
    """Bounds concurrency and spaces request starts for one archive."""

    def __init__(self, max_in_flight: int = 1, min_gap_ms: float = 0.0):
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._gap = min_gap_ms / 1000.0
        self._last_start: Optional[float] = None

    def __enter__(self):
        self._slots.acquire()
        with self._lock:
            now = time.monotonic()
            if self._last_start is not None:
                wait = self._last_start + self._gap - now
                if wait > 0:
                    time.sleep(wait)
                    now = time.monotonic()
            self._last_start = now
        return self

    def __exit__(self, *exc):
        self._slots.release()
        return False


_throttles: dict[tuple, Throttle] = {}
_throttles_lock = threading.Lock()


def throttle_for(entry: Optional[ArchiveRegistryEntry]) -> Throttle:
    if entry is None:
        return Throttle(max_in_flight=64)
    key = (entry.archive_id, entry.max_in_flight, entry.min_request_gap_ms)
    with _throttles_lock:
        if key not in _throttles:
            _throttles[key] = Throttle(entry.max_in_flight, entry.min_request_gap_ms)
        return _throttles[key]


_local = threading.local()


def _session() -> requests.Session:
    s = getattr(_local, "session", None)
    if s is None:
        s = _local.session = requests.Session()
    return s


def http_get(
    url: str,
    *,
    entry: Optional[ArchiveRegistryEntry] = None,
    timeout: Optional[float] = None,
    params: Optional[Mapping[str, str]] = None,
) -> requests.Response:
    """GET without following redirects, under the archive's politeness limits."""
    timeout = default_timeout() if timeout is None else timeout
    with throttle_for(entry):
        try:
            return _session().get(url, params=params, timeout=timeout, allow_redirects=False)
        except requests.Timeout as exc:
            raise Timeout(f"{url}: timed out after {timeout}s") from exc
        except requests.RequestException as exc:
            raise TransportError(f"{url}: {exc}") from exc


# --- language variants ---------------------------------------------------

def expand_language_variants(uri_r: str, lang_codes: Sequence[str], param: str = "lang") -> list[str]:
    """The base URI followed by one ``?lang=<code>`` variant per code, in order."""
    if len(set(lang_codes)) != len(lang_codes):
        raise ValueError("language codes must be distinct")
    parts = urlsplit(uri_r)
    out = [uri_r]
    for code in lang_codes:
        query = f"{parts.query}&{param}={code}" if parts.query else f"{param}={code}"
        out.append(urlunsplit((parts.scheme, parts.netloc, parts.path, query, parts.fragment)))
    return out


# --- TimeMaps ------------------------------------------------------------

def fetch_timemap(uri_r: str, entry: ArchiveRegistryEntry, timeout: Optional[float] = None) -> TimeMap:
    url = entry.timemap_url(uri_r)
    resp = http_get(url, entry=entry, timeout=timeout)
    if resp.status_code != 200:
        raise TransportError(f"{url}: HTTP {resp.status_code}")
    return parse_timemap(
        resp.text, url, archive_id=entry.archive_id, patterns={entry.archive_id: entry.replay_url_pattern}
    )


def collect_timemaps(
    uri_r: str,
    registry: Sequence[ArchiveRegistryEntry],
    timeout: Optional[float] = None,
) -> tuple[dict[str, TimeMap], dict[str, str]]:
    """Query every archive concurrently; return per-archive TimeMaps and errors."""
    if not registry:
        raise ValueError("registry is empty")
    timemaps: dict[str, TimeMap] = {}
    errors: dict[str, str] = {}
    with ThreadPoolExecutor(max_workers=len(registry)) as pool:
        futures = {e.archive_id: pool.submit(fetch_timemap, uri_r, e, timeout) for e in registry}
        for archive_id, fut in futures.items():
            try:
                timemaps[archive_id] = fut.result()
            except Exception as exc:  # per-archive failure is data, not a crash
                log.info("timemap %s from %s failed: %s", uri_r, archive_id, exc)
                errors[archive_id] = f"{type(exc).__name__}: {exc}"
    return timemaps, errors


def merge_timemaps(uri_r: str, timemaps: Iterable[TimeMap]) -> TimeMap:
    entries = []
    sources: set[str] = set()
    for tm in timemaps:
        sources |= tm.source_archives
        for e in tm.entries:
            if e.uri_r != uri_r:
                e = e.evolve(ids=ArchivedResourceIds(uri_r, e.uri_m, e.ids.uri_t))
            entries.append(e)
    return TimeMap(uri_r, tuple(entries), frozenset(sources))


def aggregate_timemaps(
    uri_r: str,
    registry: Sequence[ArchiveRegistryEntry],
    timeout: Optional[float] = None,
    errors: Optional[dict[str, str]] = None,
) -> TimeMap:
    """Merged TimeMap for ``uri_r`` across all archives that answered.

    Failed archives are left out of ``source_archives``; pass a dict as
    ``errors`` to receive their error messages.
    """
    timemaps, errs = collect_timemaps(uri_r, registry, timeout)
    if errors is not None:
        errors.update(errs)
    if not timemaps:
        raise AllArchivesFailed(errs)
    return merge_timemaps(uri_r, (timemaps[e.archive_id] for e in registry if e.archive_id in timemaps))


# --- CDX -----------------------------------------------------------------

CDX_FIELDS = ("urlkey", "timestamp", "original", "mimetype", "statuscode", "digest", "length")


@dataclass(frozen=True)
class CdxRecord:
    urlkey: str
    timestamp: str
    original: str
    mimetype: str = "-"
    status: Optional[int] = None
    digest: Optional[str] = None
    content_length: Optional[int] = None

    def __post_init__(self):
        parse_timestamp14(self.timestamp)

    @property
    def datetime(self):
        return parse_timestamp14(self.timestamp)

    def to_line(self) -> str:
        def dash(v):
            return "-" if v is None else str(v)

        return " ".join(
            (self.urlkey, self.timestamp, self.original, self.mimetype,
             dash(self.status), dash(self.digest), dash(self.content_length))
        )

    def to_memento(self, entry: ArchiveRegistryEntry) -> MementoRecord:
        return MementoRecord(
            ArchivedResourceIds(self.original, entry.replay_url(self.timestamp, self.original)),
            entry.archive_id,
            self.datetime,
            self.status,
            self.content_length,
        )


def _dash_int(value: str, lineno: int, line: str, name: str) -> Optional[int]:
    if value == "-":
        return None
    try:
        return int(value)
    except ValueError:
        raise MalformedCdxLine(lineno, line, f"{name} is not an integer") from None


def parse_cdx_line(line: str, lineno: int = 1) -> CdxRecord:
    fields = line.split()
    if len(fields) != len(CDX_FIELDS):
        raise MalformedCdxLine(lineno, line, f"expected {len(CDX_FIELDS)} fields, got {len(fields)}")
    urlkey, ts, original, mime, status, digest, length = fields
    try:
        return CdxRecord(
            urlkey, ts, original, mime,
            _dash_int(status, lineno, line, "statuscode"),
            None if digest == "-" else digest,
            _dash_int(length, lineno, line, "length"),
        )
    except ValueError as exc:
        if isinstance(exc, MalformedCdxLine):
            raise
        raise MalformedCdxLine(lineno, line, str(exc)) from None


def parse_cdx(text: str) -> list[CdxRecord]:
    return [parse_cdx_line(line, k) for k, line in enumerate(text.splitlines(), 1) if line.strip()]


CdxFilter = Union[Callable[[Any], bool], Any]


def _matches(record: CdxRecord, filters: Mapping[str, CdxFilter]) -> bool:
    for name, want in filters.items():
        value = getattr(record, name)
        if callable(want):
            if not want(value):
                return False
        elif value != want:
            return False
    return True


def cdx_query(
    endpoint: str,
    url: str,
    match_type: str = "exact",
    filters: Optional[Mapping[str, CdxFilter]] = None,
    *,
    entry: Optional[ArchiveRegistryEntry] = None,
    timeout: Optional[float] = None,
) -> list[CdxRecord]:
    """Query a CDX server and return its records in server order.

    ``filters`` maps a :class:`CdxRecord` attribute to either a required value
    or a predicate; they are applied after parsing.
    """
    if match_type not in ("exact", "prefix"):
        raise ValueError(f"match_type must be 'exact' or 'prefix', not {match_type!r}")
    resp = http_get(endpoint, entry=entry, timeout=timeout, params={"url": url, "matchType": match_type})
    if resp.status_code != 200:
        raise TransportError(f"{endpoint}: HTTP {resp.status_code}")
    records = parse_cdx(resp.text)
    if filters:
        records = [r for r in records if _matches(r, filters)]
    return records


# --- mementos ------------------------------------------------------------

def fetch_memento(
    record: MementoRecord,
    *,
    entry: Optional[ArchiveRegistryEntry] = None,
    timeout: Optional[float] = None,
) -> MementoRecord:
    """Fill in status and content-length from one GET of the URI-M.

    Redirects are not followed: a 3xx is recorded as the memento's status.
    """
    resp = http_get(record.uri_m, entry=entry, timeout=timeout)
    header = resp.headers.get("Content-Length")
    length = int(header) if header is not None and header.isdigit() else len(resp.content)
    return record.evolve(http_status=resp.status_code, content_length=length)
