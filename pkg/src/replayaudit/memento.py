"""Memento domain types, link-format TimeMaps and nearest-datetime resolution.

TimeMaps arrive as ``application/link-format`` bodies (one ``<uri>; rel=...``
link per memento).  Replay URLs of Wayback-style archives carry the
Memento-Datetime as a 14-digit ``YYYYMMDDhhmmss`` path segment, which
:func:`parse_memento_uri` recovers without touching the network.
"""

from __future__ import annotations

import bisect
import datetime as dt
import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Pattern, Union
from urllib.parse import urljoin, urlsplit, urlunsplit

from .errors import (
    EmptyTimeMap,
    InvalidTimestamp,
    MalformedLinkFormat,
    MissingOriginal,
    UnrecognizedArchivePattern,
)

UTC = dt.timezone.utc

# Replay URL layouts of the seven archives the toolkit knows out of the box.
# Each pattern captures the raw timestamp digits (validated separately, so a
# wrong digit count is reported as InvalidTimestamp rather than a mismatch)
# and the trailing original URI.
_MOD = r"(?:[a-z]{2}_)?"
DEFAULT_REPLAY_PATTERNS: dict[str, str] = {
    "web.archive.org": rf"^https?://web\.archive\.org/web/(?P<timestamp>\d+){_MOD}/(?P<uri_r>.+)$",
    "archive.today": r"^https?://archive\.(?:today|ph|is|li|vn|md|fo)/(?P<timestamp>\d+)/(?P<uri_r>.+)$",
    "perma.cc": rf"^https?://perma-archives\.org/warc/(?P<timestamp>\d+){_MOD}/(?P<uri_r>.+)$",
    "swap.stanford.edu": rf"^https?://swap\.stanford\.edu/(?:was/)?(?P<timestamp>\d+){_MOD}/(?P<uri_r>.+)$",
    "archive-it.org": rf"^https?://wayback\.archive-it\.org/\d+/(?P<timestamp>\d+){_MOD}/(?P<uri_r>.+)$",
    "vefsafn.is": rf"^https?://vefsafn\.is/(?:is/)?(?P<timestamp>\d+){_MOD}/(?P<uri_r>.+)$",
    "webarchive.org.uk": rf"^https?://www\.webarchive\.org\.uk/wayback/archive/(?P<timestamp>\d+){_MOD}/(?P<uri_r>.+)$",
}

PatternMap = Mapping[str, Union[str, Pattern[str]]]


class UiClass(str, enum.Enum):
    OLD = "OldUI"
    NEW = "NewUI"
    UNKNOWN = "Unknown"


def _is_absolute(uri: str) -> bool:
    parts = urlsplit(uri)
    return bool(parts.scheme) and bool(parts.netloc)


def canonicalize_uri(uri: str) -> str:
    """Lowercase scheme and host, drop the fragment, keep path and query as-is."""
    parts = urlsplit(uri.strip())
    netloc = parts.netloc
    if "@" in netloc:
        userinfo, _, hostport = netloc.rpartition("@")
        netloc = f"{userinfo}@{hostport.lower()}"
    else:
        netloc = netloc.lower()
    return urlunsplit((parts.scheme.lower(), netloc, parts.path, parts.query, ""))


def to_utc(value: dt.datetime) -> dt.datetime:
    """Normalize to an aware UTC datetime truncated to whole seconds."""
    if value.tzinfo is None:
        value = value.replace(tzinfo=UTC)
    return value.astimezone(UTC).replace(microsecond=0)


def parse_timestamp14(digits: str) -> dt.datetime:
    if not re.fullmatch(r"\d{14}", digits or ""):
        raise InvalidTimestamp(f"expected 14 digits, got {digits!r}")
    try:
        return dt.datetime.strptime(digits, "%Y%m%d%H%M%S").replace(tzinfo=UTC)
    except ValueError as exc:
        raise InvalidTimestamp(f"{digits!r}: {exc}") from None


def format_timestamp14(value: dt.datetime) -> str:
    return to_utc(value).strftime("%Y%m%d%H%M%S")


_MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
_DAYS = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]
_RFC1123 = re.compile(
    r"^(?:(?P<wd>[A-Z][a-z]{2}),\s*)?(?P<d>\d{1,2})\s+(?P<mon>[A-Z][a-z]{2})\s+(?P<y>\d{4})\s+"
    r"(?P<H>\d{2}):(?P<M>\d{2}):(?P<S>\d{2})\s+(?:GMT|UTC|\+0000)$"
)


def parse_http_date(text: str) -> dt.datetime:
    """Parse an RFC 1123 date such as ``Tue, 18 Aug 2020 05:52:23 GMT``."""
    m = _RFC1123.match(text.strip())
    if not m or m["mon"] not in _MONTHS:
        raise MalformedLinkFormat(f"unparseable datetime {text!r}")
    try:
        return dt.datetime(
            int(m["y"]), _MONTHS.index(m["mon"]) + 1, int(m["d"]),
            int(m["H"]), int(m["M"]), int(m["S"]), tzinfo=UTC,
        )
    except ValueError as exc:
        raise MalformedLinkFormat(f"unparseable datetime {text!r}: {exc}") from None


def format_http_date(value: dt.datetime) -> str:
    v = to_utc(value)
    return (
        f"{_DAYS[v.weekday()]}, {v.day:02d} {_MONTHS[v.month - 1]} {v.year:04d} "
        f"{v.hour:02d}:{v.minute:02d}:{v.second:02d} GMT"
    )


@dataclass(frozen=True)
class ArchivedResourceIds:
    uri_r: str
    uri_m: str
    uri_t: Optional[str] = None

    def __post_init__(self):
        for name in ("uri_r", "uri_m") + (("uri_t",) if self.uri_t else ()):
            value = getattr(self, name)
            if not _is_absolute(value):
                raise ValueError(f"{name} is not an absolute URI: {value!r}")
        if self.uri_m == self.uri_r:
            raise ValueError("uri_m must differ from uri_r")


@dataclass(frozen=True)
class MementoRecord:
    """One archived capture of an original resource."""

    ids: ArchivedResourceIds
    archive_id: str
    memento_datetime: dt.datetime
    http_status: Optional[int] = None
    content_length: Optional[int] = None
    ui_class: UiClass = UiClass.UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "memento_datetime", to_utc(self.memento_datetime))
        object.__setattr__(self, "ui_class", UiClass(self.ui_class))
        if self.http_status is not None and not 100 <= self.http_status <= 599:
            raise ValueError(f"http_status out of range: {self.http_status}")
        if self.content_length is not None and self.content_length < 0:
            raise ValueError("content_length must be >= 0")
        if self.content_length is None and self.ui_class is not UiClass.UNKNOWN:
            raise ValueError("ui_class requires a known content_length")

    @property
    def uri_m(self) -> str:
        return self.ids.uri_m

    @property
    def uri_r(self) -> str:
        return self.ids.uri_r

    @property
    def timestamp(self) -> str:
        return format_timestamp14(self.memento_datetime)

    def evolve(self, **changes) -> "MementoRecord":
        return replace(self, **changes)

    def sort_key(self):
        return (self.memento_datetime, self.uri_m)


@dataclass(frozen=True)
class TimeMap:
    uri_r: str
    entries: tuple[MementoRecord, ...] = ()
    source_archives: frozenset[str] = frozenset()
    uri_t: Optional[str] = None
    timegate: Optional[str] = None

    def __post_init__(self):
        canon = canonicalize_uri(self.uri_r)
        for e in self.entries:
            if canonicalize_uri(e.uri_r) != canon:
                raise ValueError(f"entry {e.uri_m} belongs to {e.uri_r}, not {self.uri_r}")
        object.__setattr__(self, "entries", _sort_dedup(self.entries))
        object.__setattr__(self, "source_archives", frozenset(self.source_archives))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def datetimes(self) -> list[dt.datetime]:
        return [e.memento_datetime for e in self.entries]


def _sort_dedup(entries: Iterable[MementoRecord]) -> tuple[MementoRecord, ...]:
    seen: set[str] = set()
    out = []
    for e in sorted(entries, key=MementoRecord.sort_key):
        if e.uri_m in seen:
            continue
        seen.add(e.uri_m)
        out.append(e)
    return tuple(out)


# --- link-format ---------------------------------------------------------

@dataclass
class Link:
    target: str
    params: dict[str, str] = field(default_factory=dict)

    @property
    def rels(self) -> list[str]:
        return self.params.get("rel", "").split()


def parse_link_format(body: str) -> list[Link]:
    """Tokenize a link-format body into links with their parameters."""
    links: list[Link] = []
    i, n = 0, len(body)

    def skip_ws(k):
        while k < n and body[k] in " \t\r\n":
            k += 1
        return k

    i = skip_ws(i)
    if i >= n:
        raise MalformedLinkFormat("empty link-format body")
    while i < n:
        if body[i] != "<":
            raise MalformedLinkFormat(f"expected '<' at offset {i}")
        close = body.find(">", i + 1)
        if close < 0 or "<" in body[i + 1:close]:
            raise MalformedLinkFormat(f"unbalanced '<' at offset {i}")
        link = Link(body[i + 1:close].strip())
        i = skip_ws(close + 1)
        while i < n and body[i] == ";":
            i = skip_ws(i + 1)
            m = re.compile(r"[A-Za-z0-9!#$&+\-.^_`|~*]+").match(body, i)
            if not m:
                raise MalformedLinkFormat(f"expected parameter name at offset {i}")
            name = m.group(0).lower()
            i = skip_ws(m.end())
            value = ""
            if i < n and body[i] == "=":
                i = skip_ws(i + 1)
                if i < n and body[i] == '"':
                    buf = []
                    i += 1
                    while True:
                        if i >= n:
                            raise MalformedLinkFormat("unterminated quoted string")
                        ch = body[i]
                        if ch == "\\" and i + 1 < n:
                            buf.append(body[i + 1])
                            i += 2
                            continue
                        if ch == '"':
                            i += 1
                            break
                        buf.append(ch)
                        i += 1
                    value = "".join(buf)
                else:
                    j = i
                    while j < n and body[j] not in ';,"<> \t\r\n':
                        j += 1
                    if j < n and body[j] in '"<>':
                        raise MalformedLinkFormat(f"stray {body[j]!r} at offset {j}")
                    value = body[i:j]
                    i = j
                i = skip_ws(i)
            link.params.setdefault(name, value)
        links.append(link)
        if i < n:
            if body[i] != ",":
                raise MalformedLinkFormat(f"expected ',' or ';' at offset {i}, got {body[i]!r}")
            i = skip_ws(i + 1)
            if i >= n:
                break
    return links


def archive_id_for(uri_m: str, patterns: Optional[PatternMap] = None) -> str:
    """Registry key of the archive serving ``uri_m``; falls back to its host."""
    for archive_id, pattern in _compiled(patterns).items():
        if pattern.match(uri_m):
            return archive_id
    return urlsplit(uri_m).hostname or "unknown"


def parse_timemap(
    body: str,
    base_uri: str,
    *,
    archive_id: Optional[str] = None,
    patterns: Optional[PatternMap] = None,
) -> TimeMap:
    """Parse a link-format TimeMap.

    Relative link targets are resolved against ``base_uri``.  When
    ``archive_id`` is not given, each entry is attributed via the replay
    URL patterns (or the URI-M host as a last resort).
    """
    links = parse_link_format(body)
    uri_r = uri_t = timegate = None
    raw = []
    for link in links:
        target = urljoin(base_uri, link.target)
        rels = link.rels
        if "original" in rels and uri_r is None:
            uri_r = target
        if "self" in rels or "timemap" in rels:
            uri_t = uri_t or target
        if "timegate" in rels:
            timegate = timegate or target
        if "memento" in rels:
            if "datetime" not in link.params:
                raise MalformedLinkFormat(f"memento link without datetime: {link.target}")
            raw.append((target, parse_http_date(link.params["datetime"])))
    if uri_r is None:
        raise MissingOriginal("TimeMap has no rel=\"original\" link")
    if uri_t is not None and uri_t == uri_r:
        uri_t = None
    entries = [
        MementoRecord(
            ArchivedResourceIds(uri_r, target, uri_t),
            archive_id or archive_id_for(target, patterns),
            when,
        )
        for target, when in raw
    ]
    sources = {e.archive_id for e in entries}
    if archive_id:
        sources.add(archive_id)
    return TimeMap(uri_r, tuple(entries), frozenset(sources), uri_t, timegate)


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_timemap(tm: TimeMap) -> str:
    """Render ``tm`` as link-format, one link per line."""
    lines = [f"<{tm.uri_r}>; rel=\"original\""]
    if tm.timegate:
        lines.append(f"<{tm.timegate}>; rel=\"timegate\"")
    if tm.uri_t:
        lines.append(f"<{tm.uri_t}>; rel=\"self\"; type=\"application/link-format\"")
    last = len(tm.entries) - 1
    for k, e in enumerate(tm.entries):
        rel = "memento"
        if k == 0:
            rel = "first " + rel
        if k == last:
            rel = "last " + rel if k else "first last memento"
        lines.append(f"<{e.uri_m}>; rel={_quote(rel)}; datetime={_quote(format_http_date(e.memento_datetime))}")
    return ",\n".join(lines) + "\n"


# --- line-delimited records ---------------------------------------------

RECORD_FIELDS = ("archive_id", "timestamp", "status", "length", "uri_m", "uri_r", "ui_class")


def record_to_line(rec: MementoRecord) -> str:
    status = "-" if rec.http_status is None else str(rec.http_status)
    length = "-" if rec.content_length is None else str(rec.content_length)
    return "\t".join(
        (rec.archive_id, rec.timestamp, status, length, rec.uri_m, rec.uri_r, rec.ui_class.value)
    )


def record_from_line(line: str) -> MementoRecord:
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) not in (6, 7):
        raise ValueError(f"expected 6 or 7 tab-separated fields, got {len(parts)}")
    archive_id, ts, status, length, uri_m, uri_r = parts[:6]
    ui = UiClass(parts[6]) if len(parts) == 7 else UiClass.UNKNOWN
    return MementoRecord(
        ArchivedResourceIds(uri_r, uri_m),
        archive_id,
        parse_timestamp14(ts),
        None if status == "-" else int(status),
        None if length == "-" else int(length),
        ui,
    )


def dump_records(records: Iterable[MementoRecord]) -> str:
    return "".join(record_to_line(r) + "\n" for r in records)


def load_records(text: str) -> list[MementoRecord]:
    return [record_from_line(line) for line in text.splitlines() if line.strip() and not line.startswith("#")]


# --- replay URL parsing --------------------------------------------------

_PATTERN_CACHE: dict[int, dict[str, Pattern[str]]] = {}


def _compiled(patterns: Optional[PatternMap]) -> dict[str, Pattern[str]]:
    source = DEFAULT_REPLAY_PATTERNS if patterns is None else patterns
    key = id(source)
    cached = _PATTERN_CACHE.get(key)
    if cached is not None and cached.keys() == source.keys():
        return cached
    compiled = {k: re.compile(v) if isinstance(v, str) else v for k, v in source.items()}
    if patterns is None:
        _PATTERN_CACHE[key] = compiled
    return compiled


def parse_memento_uri(uri_m: str, patterns: Optional[PatternMap] = None) -> tuple[str, dt.datetime, str]:
    """Split a replay URL into ``(archive_id, memento_datetime, uri_r)``.

    >>> parse_memento_uri("https://web.archive.org/web/20200818055223/https://twitter.com/realdonaldtrump")[1]
    datetime.datetime(2020, 8, 18, 5, 52, 23, tzinfo=datetime.timezone.utc)
    """
    for archive_id, pattern in _compiled(patterns).items():
        m = pattern.match(uri_m)
        if m:
            return archive_id, parse_timestamp14(m.group("timestamp")), m.group("uri_r")
    raise UnrecognizedArchivePattern(uri_m)


# --- resolution ----------------------------------------------------------

def nearest_memento(tm: TimeMap, target: dt.datetime) -> MementoRecord:
    """Entry closest to ``target``; the earlier one wins an exact tie."""
    if not tm.entries:
        raise EmptyTimeMap(tm.uri_r)
    target = to_utc(target)
    times = tm.datetimes
    k = bisect.bisect_left(times, target)
    if k == len(times):
        return tm.entries[-1]
    if k == 0:
        return tm.entries[0]
    before, after = tm.entries[k - 1], tm.entries[k]
    if after.memento_datetime == target:
        return after
    if target - before.memento_datetime <= after.memento_datetime - target:
        # several entries may share this datetime; prefer the first in sort order
        j = k - 1
        while j > 0 and times[j - 1] == times[k - 1]:
            j -= 1
        return tm.entries[j]
    return after
