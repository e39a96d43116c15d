"""Ground-truth timelines and moderation-label auditing.

Covers ingestion of third-party tweet exports, set relations between
labeled-tweet datasets, the T1/T2/T3 capture-window model, the zero-engagement
heuristic for "Violated Twitter Rules" tweets, the two-pass working-memento
check, and the categorization of ids seen only in archives.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import itertools
import json
import logging
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    CaptureBeforeCreation,
    EmptyStatuses,
    InconsistentId,
    MissingCounts,
    SchemaMismatch,
    TransportError,
)
from .memento import MementoRecord
from .snowflake import tweet_id_to_datetime

log = logging.getLogger(__name__)

UTC = dt.timezone.utc
ID_TOLERANCE_SECONDS = 60


class TweetKind(str, enum.Enum):
    TWEET = "Tweet"
    RETWEET = "Retweet"


class LabelType(str, enum.Enum):
    FACT_CHECK = "FactCheck"
    VTR = "VTR"


@dataclass(frozen=True)
class Label:
    type: Optional[LabelType] = None
    applied_at: Optional[dt.datetime] = None


@dataclass(frozen=True)
class TweetRecord:
    id: int
    created_at: dt.datetime
    kind: TweetKind = TweetKind.TWEET
    retweet_count: Optional[int] = None
    favorite_count: Optional[int] = None
    label: Optional[Label] = None
    source_datasets: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.created_at.tzinfo is None:
            object.__setattr__(self, "created_at", self.created_at.replace(tzinfo=UTC))
        for name in ("retweet_count", "favorite_count"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.label and self.label.applied_at and self.label.applied_at < self.created_at:
            raise ValueError("label applied before the tweet was created")

    @classmethod
    def from_id(cls, tweet_id: int, **kw) -> "TweetRecord":
        return cls(tweet_id, tweet_id_to_datetime(tweet_id), **kw)


# --- ingestion -----------------------------------------------------------

@dataclass(frozen=True)
class SchemaProfile:
    """Column names of one export format; ``None`` marks an absent column."""

    name: str
    id: str
    date: Optional[str] = None
    date_format: Optional[str] = None
    is_retweet: Optional[str] = None
    is_flagged: Optional[str] = None
    retweets: Optional[str] = None
    favorites: Optional[str] = None
    label_type: Optional[str] = None
    all_labeled: bool = False
    retweet_values: frozenset[str] = frozenset({"true", "t", "1", "yes", "rt", "retweet"})

    @property
    def required(self) -> list[str]:
        return [c for c in (self.id, self.date) if c]


PROFILES: dict[str, SchemaProfile] = {
    # thetrumparchive.com CSV/JSON export
    "trumparchive": SchemaProfile(
        "trumparchive", id="id", date="date", date_format="%Y-%m-%d %H:%M:%S",
        is_retweet="isRetweet", is_flagged="isFlagged", retweets="retweets", favorites="favorites",
    ),
    # hand-collected labeled tweets (date, tweet_id, is_retweet, label_type)
    "twitterlabels6": SchemaProfile(
        "twitterlabels6", id="tweet_id", date="date", is_retweet="is_retweet", label_type="label_type",
        all_labeled=True,
    ),
    # parsed flagged-tweet page: id and Tweet/RT only
    "factbase": SchemaProfile(
        "factbase", id="id", is_retweet="type", label_type="label_type", all_labeled=True,
    ),
}

_TRUE = {"true", "t", "1", "yes", "y"}
_LABEL_ALIASES = {
    "factcheck": LabelType.FACT_CHECK, "fact-check": LabelType.FACT_CHECK, "fact_check": LabelType.FACT_CHECK,
    "vtr": LabelType.VTR, "violated twitter rules": LabelType.VTR,
}


def _parse_date(raw: str, fmt: Optional[str]) -> dt.datetime:
    raw = raw.strip()
    if fmt:
        try:
            return dt.datetime.strptime(raw, fmt).replace(tzinfo=UTC)
        except ValueError:
            pass
    if raw.isdigit():
        return dt.datetime.fromtimestamp(int(raw) / 1000, UTC)
    try:
        value = dt.datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaMismatch(f"unparseable date {raw!r}") from None
    return value.replace(tzinfo=UTC) if value.tzinfo is None else value.astimezone(UTC)


def _opt_int(raw) -> Optional[int]:
    if raw is None or str(raw).strip() in ("", "-"):
        return None
    return int(str(raw).strip())


def _rows(path: Path) -> list[dict]:
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    if path.suffix.lower() in (".json", ".jsonl", ".ndjson"):
        stripped = text.lstrip()
        if stripped.startswith("["):
            return json.loads(text)
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    return list(csv.DictReader(io.StringIO(text)))


def ingest_timeline(
    path: Union[str, Path],
    schema_profile: Union[str, SchemaProfile] = "trumparchive",
    dataset_id: Optional[str] = None,
) -> list[TweetRecord]:
    """Load a tweet export as TweetRecords sorted by creation time.

    Ids whose snowflake instant differs from the stated date by more than a
    minute trigger an :class:`InconsistentId` warning; the row is kept.
    """
    profile = PROFILES[schema_profile] if isinstance(schema_profile, str) else schema_profile
    path = Path(path)
    rows = _rows(path)
    source = frozenset({dataset_id or profile.name})
    records = []
    for lineno, row in enumerate(rows, 1):
        missing = [c for c in profile.required if c not in row]
        if missing:
            raise SchemaMismatch(f"{path}:{lineno}: missing columns {missing} for profile {profile.name}")
        tweet_id = int(str(row[profile.id]).strip())
        decoded = tweet_id_to_datetime(tweet_id)
        if profile.date:
            created = _parse_date(str(row[profile.date]), profile.date_format)
            if abs((created - decoded).total_seconds()) > ID_TOLERANCE_SECONDS:
                warnings.warn(
                    f"{tweet_id}: stated {created.isoformat()} but id decodes to {decoded.isoformat()}",
                    InconsistentId,
                    stacklevel=2,
                )
        else:
            created = decoded
        kind = TweetKind.TWEET
        if profile.is_retweet and str(row.get(profile.is_retweet, "")).strip().lower() in profile.retweet_values:
            kind = TweetKind.RETWEET
        label = None
        label_raw = str(row.get(profile.label_type, "") or "").strip().lower() if profile.label_type else ""
        flagged = bool(profile.is_flagged) and str(row.get(profile.is_flagged, "")).strip().lower() in _TRUE
        if label_raw or flagged or profile.all_labeled:
            label = Label(_LABEL_ALIASES.get(label_raw))
        records.append(
            TweetRecord(
                tweet_id, created, kind,
                _opt_int(row.get(profile.retweets)) if profile.retweets else None,
                _opt_int(row.get(profile.favorites)) if profile.favorites else None,
                label, source,
            )
        )
    records.sort(key=lambda t: (t.created_at, t.id))
    return records


def filter_window(records: Iterable[TweetRecord], start: dt.datetime, end: dt.datetime) -> list[TweetRecord]:
    return [t for t in records if start <= t.created_at <= end]


# --- dataset relations ---------------------------------------------------

@dataclass(frozen=True)
class DatasetRelations:
    """Venn-region counts; each region is keyed by the exact set of datasets containing its ids."""

    names: tuple[str, ...]
    union: int
    regions: Mapping[frozenset[str], int]
    region_labels: Mapping[frozenset[str], Mapping[LabelType, int]] = field(default_factory=dict)

    def region(self, *names: str) -> int:
        return self.regions.get(frozenset(names), 0)

    def only(self, name: str) -> int:
        return self.region(name)

    def difference(self, a: str, b: str) -> int:
        """|a \\ b| summed over every region containing a but not b."""
        return sum(c for k, c in self.regions.items() if a in k and b not in k)

    def intersection(self, *names: str) -> int:
        want = set(names)
        return sum(c for k, c in self.regions.items() if want <= k)


def dataset_relations(
    datasets: Mapping[str, Iterable[int]],
    label_types: Optional[Mapping[int, LabelType]] = None,
) -> DatasetRelations:
    if len(datasets) < 2:
        raise ValueError("need at least two datasets")
    sets = {name: set(ids) for name, ids in datasets.items()}
    names = tuple(sets)
    membership: dict[int, frozenset[str]] = {}
    for name, ids in sets.items():
        for i in ids:
            membership[i] = membership.get(i, frozenset()) | {name}
    regions: dict[frozenset[str], int] = {}
    for size in range(1, len(names) + 1):
        for combo in itertools.combinations(names, size):
            regions[frozenset(combo)] = 0
    by_label: dict[frozenset[str], Counter] = {}
    for i, key in membership.items():
        regions[key] += 1
        if label_types is not None and i in label_types:
            by_label.setdefault(key, Counter())[label_types[i]] += 1
    return DatasetRelations(
        names, len(membership), regions, {k: dict(v) for k, v in by_label.items()}
    )


# --- capture windows -----------------------------------------------------

class WindowClass(str, enum.Enum):
    BEFORE_LABEL = "T3_1"
    AFTER_LABEL = "T3_2"
    INDETERMINATE = "Indeterminate"


def classify_window(t1: dt.datetime, t2: Optional[dt.datetime], t3: dt.datetime) -> WindowClass:
    """Place a capture at ``t3`` relative to creation ``t1`` and labeling ``t2``."""
    if t3 < t1:
        raise CaptureBeforeCreation(f"capture {t3.isoformat()} precedes creation {t1.isoformat()}")
    if t2 is None:
        return WindowClass.INDETERMINATE
    return WindowClass.BEFORE_LABEL if t3 < t2 else WindowClass.AFTER_LABEL


def vtr_candidate(record: TweetRecord) -> bool:
    """Zero retweets and zero favorites on an original tweet."""
    if record.retweet_count is None or record.favorite_count is None:
        raise MissingCounts(str(record.id))
    return record.kind is TweetKind.TWEET and record.retweet_count == 0 and record.favorite_count == 0


# --- working mementos and label presence ---------------------------------

DEFAULT_LABEL_MARKERS: dict[LabelType, str] = {
    LabelType.FACT_CHECK: r"softInterventionPivot|Get the facts about|Learn about US 2020 election",
    LabelType.VTR: r"violated the Twitter Rules",
}

PayloadFetcher = Callable[[MementoRecord, TweetRecord], Optional[str]]


@dataclass
class LabelAudit:
    tweet: TweetRecord
    mementos: list[MementoRecord]
    working_iterations: dict[str, list[bool]] = field(default_factory=dict)
    label_seen: dict[str, bool] = field(default_factory=dict)
    window_class: dict[str, WindowClass] = field(default_factory=dict)
    errors: dict[str, list[str]] = field(default_factory=dict)

    def working(self, uri_m: str) -> bool:
        return any(self.working_iterations.get(uri_m, ()))

    @property
    def working_count(self) -> int:
        return sum(1 for m in self.mementos if self.working(m.uri_m))

    @property
    def label_count(self) -> int:
        return sum(1 for v in self.label_seen.values() if v)


def _marker_regex(tweet: TweetRecord, markers: Mapping[LabelType, str]) -> re.Pattern:
    if tweet.label and tweet.label.type in markers:
        return re.compile(markers[tweet.label.type])
    return re.compile("|".join(f"(?:{m})" for m in markers.values()))


def audit_label_presence(
    tweet: TweetRecord,
    new_ui_mementos: Sequence[MementoRecord],
    iterations: int = 2,
    fetch_payload: Optional[PayloadFetcher] = None,
    markers: Optional[Mapping[LabelType, str]] = None,
) -> LabelAudit:
    """Try each memento ``iterations`` times and OR the outcomes.

    A memento is working if any attempt returned a payload mentioning the
    tweet id; the label counts as present if any working attempt matched the
    label marker.  ``fetch_payload`` returns the archived tweet JSON text or
    ``None``; a raised :class:`TransportError` is recorded as a failed attempt.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if fetch_payload is None:
        raise ValueError("fetch_payload is required")
    pattern = _marker_regex(tweet, markers or DEFAULT_LABEL_MARKERS)
    audit = LabelAudit(tweet, list(new_ui_mementos))
    created = tweet.created_at.replace(microsecond=0)
    applied = tweet.label.applied_at if tweet.label else None
    for memento in audit.mementos:
        attempts: list[bool] = []
        seen = False
        for _ in range(iterations):
            try:
                payload = fetch_payload(memento, tweet)
            except TransportError as exc:
                audit.errors.setdefault(memento.uri_m, []).append(str(exc))
                payload = None
            ok = payload is not None and str(tweet.id) in payload
            attempts.append(ok)
            if ok and pattern.search(payload):
                seen = True
        audit.working_iterations[memento.uri_m] = attempts
        if any(attempts):
            audit.label_seen[memento.uri_m] = seen
        if memento.memento_datetime >= created:
            audit.window_class[memento.uri_m] = classify_window(created, applied, memento.memento_datetime)
    return audit


@dataclass(frozen=True)
class LabelSummaryRow:
    label_type: str
    tweets: int
    new_ui_mementos: int
    working: int
    label_present: int


def summarize_label_audits(audits: Iterable[LabelAudit]) -> list[LabelSummaryRow]:
    """Per-label-type totals in the column order of the label report."""
    acc: dict[str, list[int]] = {}
    for a in audits:
        key = a.tweet.label.type.value if a.tweet.label and a.tweet.label.type else "Unknown"
        slot = acc.setdefault(key, [0, 0, 0, 0])
        slot[0] += 1
        slot[1] += len(a.mementos)
        slot[2] += a.working_count
        slot[3] += a.label_count
    return [LabelSummaryRow(k, *v) for k, v in sorted(acc.items())]


# --- old UI rollout window -----------------------------------------------

def old_ui_label_window(
    observations: Iterable[tuple[dt.datetime, bool]],
) -> tuple[Optional[dt.datetime], Optional[dt.datetime]]:
    """(earliest labeled capture, latest unlabeled capture) across old-UI observations."""
    obs = list(observations)
    if not obs:
        raise ValueError("need at least one observation")
    labeled = [when for when, flag in obs if flag]
    unlabeled = [when for when, flag in obs if not flag]
    return (min(labeled) if labeled else None, max(unlabeled) if unlabeled else None)


# --- archive-only ids ----------------------------------------------------

class Corroboration(str, enum.Enum):
    TWEET = "TweetCorroborated"
    RETWEET = "RetweetCorroborated"
    NONE = "None"


class DiscrepancyCategory(str, enum.Enum):
    ORIGINAL_ID_OTHER_ACCOUNT = "OriginalIdOtherAccount"
    RETWEET_ID = "RetweetId"
    TWEET_ID = "TweetId"
    APOCRYPHAL = "Apocryphal"


def categorize_discrepancy(
    tweet_id: int, memento_statuses: Sequence[int], corroborated: Corroboration
) -> DiscrepancyCategory:
    """Category of an id that archives hold but the ground-truth export lacks.

    Mementos that only ever redirect (301) point at another account's tweet
    that was retweeted.  Otherwise third-party corroboration decides between
    tweet and retweet ids, and an uncorroborated id is apocryphal.
    """
    if not memento_statuses:
        raise EmptyStatuses(str(tweet_id))
    if all(s == 301 for s in memento_statuses):
        return DiscrepancyCategory.ORIGINAL_ID_OTHER_ACCOUNT
    corroborated = Corroboration(corroborated)
    if corroborated is Corroboration.TWEET:
        return DiscrepancyCategory.TWEET_ID
    if corroborated is Corroboration.RETWEET:
        return DiscrepancyCategory.RETWEET_ID
    return DiscrepancyCategory.APOCRYPHAL
