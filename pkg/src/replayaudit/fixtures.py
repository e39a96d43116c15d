"""Local replay server backed by a JSON manifest of canned captures.

Each simulated archive lives under its own path prefix::

    /<archive>/timemap/link/<uri_r>     link-format TimeMap
    /<archive>/cdx?url=...&matchType=   CDX lines
    /<archive>/web/<14 digits>/<uri_r>  replay; non-exact datetimes redirect (302)
                                        to the nearest capture

Manifest layout (JSON)::

    {
      "archives": [{"id": "web.archive.org", "fail": false,
                    "max_in_flight": 2, "min_request_gap_ms": 0}],
      "bodies": {"labeled-json": "..."},
      "resources": [
        {"uri_r": "https://twitter.com/realDonaldTrump",
         "captures": [{"archive": "web.archive.org", "timestamp": "20200818055223",
                       "status": 200, "content_length": 5120, "body_ref": null,
                       "ui_class_truth": "NewUI",
                       "sections_truth": {"TweetFeed": "20200816055223"},
                       "location": null, "fail_first": 0}]}
      ]
    }

``fail: true`` makes an archive answer 503 to everything.  ``fail_first: n``
makes one capture answer 503 to its first ``n`` replay requests.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Optional, Union
from urllib.parse import parse_qs, urlsplit

from .clients import ArchiveRegistryEntry
from .errors import InvalidManifest, PortInUse
from .memento import (
    ArchivedResourceIds,
    MementoRecord,
    TimeMap,
    UiClass,
    canonicalize_uri,
    nearest_memento,
    parse_timestamp14,
    serialize_timemap,
)


@dataclass
class Capture:
    archive: str
    timestamp: str
    status: int = 200
    content_length: Optional[int] = None
    body_ref: Optional[str] = None
    ui_class_truth: Optional[str] = None
    sections_truth: dict[str, Optional[str]] = field(default_factory=dict)
    location: Optional[str] = None
    fail_first: int = 0

    @property
    def datetime(self):
        return parse_timestamp14(self.timestamp)


@dataclass
class Resource:
    uri_r: str
    captures: list[Capture]


@dataclass
class FixtureManifest:
    archives: list[dict[str, Any]]
    resources: list[Resource]
    bodies: dict[str, str] = field(default_factory=dict)
    request_log: list[tuple[float, str]] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FixtureManifest":
        try:
            archives = [dict(a) for a in data["archives"]]
            resources = [
                Resource(r["uri_r"], [Capture(**c) for c in r.get("captures", [])])
                for r in data.get("resources", [])
            ]
        except (KeyError, TypeError) as exc:
            raise InvalidManifest(f"bad manifest structure: {exc}") from None
        manifest = cls(archives, resources, dict(data.get("bodies", {})))
        manifest.validate()
        return manifest

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FixtureManifest":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidManifest(f"cannot read manifest {path}: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "archives": self.archives,
            "bodies": self.bodies,
            "resources": [
                {"uri_r": r.uri_r, "captures": [vars(c) for c in r.captures]} for r in self.resources
            ],
        }

    @property
    def archive_ids(self) -> list[str]:
        return [a["id"] for a in self.archives]

    def validate(self) -> None:
        ids = self.archive_ids
        if len(set(ids)) != len(ids) or any(not re.fullmatch(r"[A-Za-z0-9._-]+", i) for i in ids):
            raise InvalidManifest("archive ids must be unique path-safe tokens")
        for res in self.resources:
            seen = set()
            for cap in res.captures:
                if cap.archive not in ids:
                    raise InvalidManifest(f"{res.uri_r}: unknown archive {cap.archive!r}")
                try:
                    cap.datetime
                except ValueError as exc:
                    raise InvalidManifest(f"{res.uri_r}: {exc}") from None
                if (cap.archive, cap.timestamp) in seen:
                    raise InvalidManifest(f"{res.uri_r}: duplicate capture {cap.archive}/{cap.timestamp}")
                seen.add((cap.archive, cap.timestamp))
                if cap.body_ref is not None:
                    if cap.body_ref not in self.bodies:
                        raise InvalidManifest(f"body_ref {cap.body_ref!r} does not resolve")
                    size = len(self.bodies[cap.body_ref].encode("utf-8"))
                    if cap.content_length is None:
                        cap.content_length = size
                    elif cap.content_length != size:
                        raise InvalidManifest(f"{cap.body_ref}: content_length {cap.content_length} != {size}")
                if cap.content_length is None:
                    cap.content_length = 0
                if cap.ui_class_truth is not None and cap.ui_class_truth not in {u.value for u in UiClass}:
                    raise InvalidManifest(f"{res.uri_r}: unknown ui_class_truth {cap.ui_class_truth!r}")

    def body_for(self, cap: Capture) -> bytes:
        if cap.body_ref is not None:
            return self.bodies[cap.body_ref].encode("utf-8")
        return b"x" * (cap.content_length or 0)

    def captures_for(self, archive: str, uri_r: str) -> list[Capture]:
        key = canonicalize_uri(uri_r)
        out = []
        for res in self.resources:
            if canonicalize_uri(res.uri_r) == key:
                out.extend(c for c in res.captures if c.archive == archive)
        return sorted(out, key=lambda c: c.timestamp)

    def archive_config(self, archive: str) -> dict[str, Any]:
        for a in self.archives:
            if a["id"] == archive:
                return a
        raise KeyError(archive)


def replay_url(base_url: str, archive: str, timestamp: str, uri_r: str) -> str:
    return f"{base_url}/{archive}/web/{timestamp}/{uri_r}"


def manifest_registry(manifest: FixtureManifest, base_url: str) -> list[ArchiveRegistryEntry]:
    """Registry entries pointing at a running fixture server."""
    entries = []
    for a in manifest.archives:
        aid = a["id"]
        entries.append(
            ArchiveRegistryEntry(
                archive_id=aid,
                timemap_endpoint_template=f"{base_url}/{aid}/timemap/link/{{uri_r}}",
                replay_url_pattern=(
                    rf"^{re.escape(base_url)}/{re.escape(aid)}/web/(?P<timestamp>\d+)(?:[a-z]{{2}}_)?/(?P<uri_r>.+)$"
                ),
                max_in_flight=int(a.get("max_in_flight", 2)),
                min_request_gap_ms=float(a.get("min_request_gap_ms", 0)),
                replay_url_template=f"{base_url}/{aid}/web/{{timestamp}}/{{uri_r}}",
                cdx_endpoint=f"{base_url}/{aid}/cdx",
            )
        )
    return entries


def surt(uri: str) -> str:
    """Simplified SURT key: reversed host, lowercase path and query."""
    parts = urlsplit(canonicalize_uri(uri))
    host = (parts.hostname or "").removeprefix("www.")
    key = ",".join(reversed(host.split("."))) + ")" + (parts.path or "/").lower()
    if parts.query:
        key += "?" + parts.query.lower()
    return key


def _timemap_for(manifest: FixtureManifest, base_url: str, archive: str, uri_r: str) -> TimeMap:
    caps = manifest.captures_for(archive, uri_r)
    entries = tuple(
        MementoRecord(
            ArchivedResourceIds(uri_r, replay_url(base_url, archive, c.timestamp, uri_r)), archive, c.datetime
        )
        for c in caps
    )
    return TimeMap(
        uri_r, entries, frozenset({archive}), uri_t=f"{base_url}/{archive}/timemap/link/{uri_r}"
    )


class _Handler(BaseHTTPRequestHandler):
    server: "_Server"
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):  # keep test output quiet
        pass

    def _send(self, status: int, body: bytes = b"", headers: Optional[dict[str, str]] = None):
        self.send_response(status)
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def do_HEAD(self):
        self.do_GET()

    def do_GET(self):
        fx = self.server.fixture
        fx.log_request(self.path)
        parts = self.path.split("/", 2)
        if len(parts) < 3 or parts[1] not in fx.manifest.archive_ids:
            return self._send(404, b"unknown archive")
        archive, rest = parts[1], parts[2]
        if fx.manifest.archive_config(archive).get("fail"):
            return self._send(503, b"archive unavailable")
        if rest.startswith("timemap/link/"):
            return self._timemap(archive, rest[len("timemap/link/"):])
        if rest.startswith("cdx"):
            return self._cdx(archive, urlsplit(rest).query)
        if rest.startswith("web/"):
            return self._replay(archive, rest[len("web/"):])
        return self._send(404, b"unknown endpoint")

    def _timemap(self, archive: str, uri_r: str):
        fx = self.server.fixture
        tm = _timemap_for(fx.manifest, fx.url, archive, uri_r)
        if not tm.entries:
            return self._send(404, b"no captures")
        body = serialize_timemap(tm).encode("utf-8")
        return self._send(200, body, {"Content-Type": "application/link-format"})

    def _cdx(self, archive: str, query: str):
        fx = self.server.fixture
        qs = parse_qs(query)
        url = qs.get("url", [""])[0]
        match = qs.get("matchType", ["exact"])[0]
        want = surt(url)
        lines = []
        for res in fx.manifest.resources:
            key = surt(res.uri_r)
            if key != want and not (match == "prefix" and key.startswith(want)):
                continue
            for c in res.captures:
                if c.archive == archive:
                    length = c.content_length if c.content_length is not None else "-"
                    lines.append((key, c.timestamp, f"{key} {c.timestamp} {res.uri_r} text/html {c.status} - {length}"))
        lines.sort()
        body = "".join(line + "\n" for _, _, line in lines).encode("utf-8")
        return self._send(200, body, {"Content-Type": "text/plain"})

    def _replay(self, archive: str, rest: str):
        fx = self.server.fixture
        m = re.match(r"(\d+)(?:[a-z]{2}_)?/(.+)$", rest, re.S)
        if not m:
            return self._send(404, b"bad replay url")
        ts, uri_r = m.groups()
        try:
            when = parse_timestamp14(ts)
        except ValueError:
            return self._send(400, b"bad timestamp")
        caps = fx.manifest.captures_for(archive, uri_r)
        if not caps:
            return self._send(404, b"not archived")
        exact = next((c for c in caps if c.timestamp == ts), None)
        if exact is None:
            nearest = nearest_memento(_timemap_for(fx.manifest, fx.url, archive, uri_r), when)
            return self._send(302, b"", {"Location": nearest.uri_m})
        if fx.should_fail(archive, uri_r, exact):
            return self._send(503, b"temporarily unavailable")
        headers = {"Memento-Datetime": exact.datetime.strftime("%a, %d %b %Y %H:%M:%S GMT")}
        if 300 <= exact.status < 400:
            headers["Location"] = exact.location or uri_r
            return self._send(exact.status, b"", headers)
        body = fx.manifest.body_for(exact)
        headers["Content-Type"] = "application/json" if exact.body_ref else "text/html"
        return self._send(exact.status, body, headers)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    fixture: "FixtureServer"


class FixtureServer:
    """Running fixture server; use as a context manager or call :meth:`close`."""

    def __init__(self, manifest: FixtureManifest, port: int = 0, host: str = "127.0.0.1"):
        self.manifest = manifest
        self._log_lock = threading.Lock()
        self._fail_counts: dict[tuple[str, str, str], int] = {}
        self.request_log: list[tuple[float, str]] = manifest.request_log
        try:
            self._httpd = _Server((host, port), _Handler)
        except OSError as exc:
            raise PortInUse(f"{host}:{port}: {exc}") from None
        self._httpd.fixture = self
        self.host, self.port = self._httpd.server_address[:2]
        self.url = f"http://{self.host}:{self.port}"
        self._thread = threading.Thread(target=self._httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)

    def start(self) -> "FixtureServer":
        self._thread.start()
        return self

    def close(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def log_request(self, path: str) -> None:
        with self._log_lock:
            self.request_log.append((time.monotonic(), path))

    def requests_for(self, archive: str) -> list[tuple[float, str]]:
        prefix = f"/{archive}/"
        with self._log_lock:
            return [(t, p) for t, p in self.request_log if p.startswith(prefix)]

    def should_fail(self, archive: str, uri_r: str, cap: Capture) -> bool:
        if cap.fail_first <= 0:
            return False
        key = (archive, canonicalize_uri(uri_r), cap.timestamp)
        with self._log_lock:
            seen = self._fail_counts.get(key, 0)
            self._fail_counts[key] = seen + 1
        return seen < cap.fail_first

    def registry(self) -> list[ArchiveRegistryEntry]:
        return manifest_registry(self.manifest, self.url)


def serve_fixtures(manifest: Union[FixtureManifest, str, Path], port: int = 0) -> FixtureServer:
    if not isinstance(manifest, FixtureManifest):
        manifest = FixtureManifest.load(manifest)
    return FixtureServer(manifest, port).start()
