"""Temporal coherence of composite (new UI) mementos.

A new-UI account page is a skeleton root HTML plus five JSON responses, each
archived on its own schedule.  Replay pulls the capture of each JSON nearest
to the root's Memento-Datetime, so the pieces can come from different times.
"""

from __future__ import annotations

import bisect
import datetime as dt
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import EmptyInput, IncompleteAudit, MissingTweetFeed, MixedSigns
from .memento import MementoRecord, TimeMap, UiClass, nearest_memento

WHATS_HAPPENING_POLL_SECONDS = 300


class SectionKind(str, enum.Enum):
    TWEET_FEED = "TweetFeed"
    BIO = "Bio"
    MEDIA_TIMELINE = "MediaTimeline"
    YOU_MIGHT_LIKE = "YouMightLike"
    WHATS_HAPPENING = "WhatsHappening"

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    SectionKind.TWEET_FEED: "Tweet",
    SectionKind.BIO: "Bio",
    SectionKind.MEDIA_TIMELINE: "Media",
    SectionKind.YOU_MIGHT_LIKE: "You might like",
    SectionKind.WHATS_HAPPENING: "What's happening",
}


class Completeness(str, enum.Enum):
    COMPLETE = "Complete"
    FAILED = "Failed"


class Direction(str, enum.Enum):
    PAST = "Past"
    FUTURE = "Future"
    NONE = "None"


@dataclass(frozen=True)
class TweetViolation:
    direction: Direction
    off_by_count: int
    violative: bool


@dataclass(frozen=True)
class CompositeMementoAudit:
    root: MementoRecord
    sections: Mapping[SectionKind, Optional[MementoRecord]]
    deltas: Mapping[SectionKind, int]
    spread: Optional[int]
    completeness: Completeness
    tweet_violation: Optional[TweetViolation] = None

    @property
    def is_complete(self) -> bool:
        return self.completeness is Completeness.COMPLETE

    def with_violation(self, violation: TweetViolation) -> "CompositeMementoAudit":
        return replace(self, tweet_violation=violation)


def time_delta(root_dt: dt.datetime, section_dt: dt.datetime) -> int:
    """Signed whole seconds from root to section; negative means the section is older."""
    return int((section_dt - root_dt).total_seconds())


def resolve_sections(root: MementoRecord, section_timemaps: Mapping[SectionKind, TimeMap]) -> CompositeMementoAudit:
    if root.ui_class is UiClass.OLD:
        raise ValueError(f"{root.uri_m} is an old-UI memento")
    sections: dict[SectionKind, Optional[MementoRecord]] = {}
    deltas: dict[SectionKind, int] = {}
    for kind in SectionKind:
        tm = section_timemaps.get(kind)
        if tm is None or not tm.entries:
            sections[kind] = None
            continue
        hit = nearest_memento(tm, root.memento_datetime)
        sections[kind] = hit
        deltas[kind] = time_delta(root.memento_datetime, hit.memento_datetime)
    complete = all(v is not None for v in sections.values())
    audit = CompositeMementoAudit(
        root=root,
        sections=sections,
        deltas=deltas,
        spread=None,
        completeness=Completeness.COMPLETE if complete else Completeness.FAILED,
    )
    if complete:
        audit = replace(audit, spread=temporal_spread(audit))
    return audit


def temporal_spread(audit: CompositeMementoAudit) -> int:
    """Seconds between the earliest and latest section captures."""
    if not audit.is_complete:
        raise IncompleteAudit(audit.root.uri_m)
    times = [m.memento_datetime for m in audit.sections.values()]
    return int((max(times) - min(times)).total_seconds())


def count_tweet_violation(audit: CompositeMementoAudit, timeline: Sequence) -> TweetViolation:
    """Missing (feed older than root) or premature (feed newer) tweets.

    ``timeline`` holds TweetRecords sorted by ``created_at``.  With root
    capture ``r`` and feed capture ``s`` the counted window is ``(s, r]`` for
    a stale feed and ``(r, s]`` for a feed from the future.
    """
    feed = audit.sections.get(SectionKind.TWEET_FEED)
    if feed is None:
        raise MissingTweetFeed(audit.root.uri_m)
    r, s = audit.root.memento_datetime, feed.memento_datetime
    if s == r:
        return TweetViolation(Direction.NONE, 0, False)
    lo, hi = (s, r) if s < r else (r, s)
    created = [t.created_at for t in timeline]
    n = bisect.bisect_right(created, hi) - bisect.bisect_right(created, lo)
    return TweetViolation(Direction.PAST if s < r else Direction.FUTURE, n, n >= 1)


def missed_whats_happening_updates(delta: float, poll_seconds: int = WHATS_HAPPENING_POLL_SECONDS) -> int:
    """Polls strictly between the root and section captures."""
    span = abs(delta)
    if span == 0:
        return 0
    return max(math.ceil(span / poll_seconds) - 1, 0)


@dataclass(frozen=True)
class DeltaStats:
    count: int
    min: float
    max: float
    median: float
    mean: float
    sd: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def hours(self) -> dict[str, float]:
        return {k: getattr(self, k) / 3600.0 for k in ("min", "max", "median", "mean", "sd")}


def delta_stats(deltas: Sequence[float], direction: Direction, sample_sd: bool = False) -> DeltaStats:
    """Summary of ``|delta|`` for deltas that all share the direction's sign.

    Standard deviation is the population one unless ``sample_sd`` is set.
    """
    if len(deltas) == 0:
        raise EmptyInput("no deltas")
    arr = np.asarray(deltas, dtype=float)
    if direction is Direction.PAST:
        ok = arr < 0
    elif direction is Direction.FUTURE:
        ok = arr > 0
    else:
        raise ValueError("direction must be Past or Future")
    if not ok.all():
        raise MixedSigns(f"{int((~ok).sum())} deltas do not match {direction.value}")
    a = np.abs(arr)
    sd = float(a.std(ddof=1)) if sample_sd and a.size > 1 else float(a.std())
    return DeltaStats(int(a.size), float(a.min()), float(a.max()), float(np.median(a)), float(a.mean()), sd)


def ecdf(deltas: Sequence[float]) -> list[tuple[float, float]]:
    """Sorted distinct values with the fraction of samples at or below each."""
    if len(deltas) == 0:
        raise EmptyInput("no deltas")
    values, counts = np.unique(np.asarray(deltas), return_counts=True)
    n = int(counts.sum())
    cum = np.cumsum(counts)
    out = [(v.item(), int(c) / n) for v, c in zip(values, cum)]
    return out


def split_by_direction(audits: Sequence[CompositeMementoAudit]) -> dict[tuple[SectionKind, Direction], list[int]]:
    """Group the non-zero deltas of complete audits by (section, direction)."""
    out: dict[tuple[SectionKind, Direction], list[int]] = {}
    for audit in audits:
        if not audit.is_complete:
            continue
        for kind, d in audit.deltas.items():
            if d == 0:
                continue
            out.setdefault((kind, Direction.PAST if d < 0 else Direction.FUTURE), []).append(d)
    return out


@dataclass
class ViolationSummary:
    complete: int = 0
    violative: int = 0
    by_direction: dict[str, list[int]] = field(default_factory=dict)

    @property
    def violative_fraction(self) -> float:
        return self.violative / self.complete if self.complete else 0.0


def summarize_violations(audits: Sequence[CompositeMementoAudit]) -> ViolationSummary:
    """Counts of complete audits and of those with >= 1 off-by tweet, overall and per direction."""
    summary = ViolationSummary()
    for audit in audits:
        if not audit.is_complete or audit.tweet_violation is None:
            continue
        v = audit.tweet_violation
        summary.complete += 1
        summary.violative += int(v.violative)
        slot = summary.by_direction.setdefault(v.direction.value, [0, 0])
        slot[0] += 1
        slot[1] += int(v.violative)
    return summary
