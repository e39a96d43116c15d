"""Old-UI / new-UI separation of a memento corpus by response size."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateDistribution, MissingContentLength, MissingStatus
from .memento import MementoRecord, UiClass

ACCOUNT_PAGE = "account"
TWEET_PAGE = "tweet"

_STATUS_PATH = re.compile(r"/status(?:es)?/(\d+)")


@dataclass(frozen=True)
class ClassifierConfig:
    content_length_threshold: int
    include_statuses: frozenset[int] = frozenset({200})
    excluded_statuses_reported: bool = True

    def __post_init__(self):
        if self.content_length_threshold <= 0:
            raise ValueError("content_length_threshold must be positive")
        object.__setattr__(self, "include_statuses", frozenset(self.include_statuses))


def page_type(uri_r: str) -> str:
    """``tweet`` for status pages, ``account`` for everything else."""
    return TWEET_PAGE if _STATUS_PATH.search(uri_r) else ACCOUNT_PAGE


def tweet_id_of(uri_r: str):
    m = _STATUS_PATH.search(uri_r)
    return int(m.group(1)) if m else None


def filter_by_status(records: Sequence[MementoRecord], cfg: ClassifierConfig):
    kept, excluded = [], []
    for rec in records:
        if rec.http_status is None:
            raise MissingStatus(rec.uri_m)
        (kept if rec.http_status in cfg.include_statuses else excluded).append(rec)
    return kept, excluded


def classify_ui(record: MementoRecord, cfg: ClassifierConfig) -> UiClass:
    if record.content_length is None:
        raise MissingContentLength(record.uri_m)
    return UiClass.OLD if record.content_length > cfg.content_length_threshold else UiClass.NEW


def classify_all(records: Iterable[MementoRecord], cfg: ClassifierConfig) -> list[MementoRecord]:
    return [r.evolve(ui_class=classify_ui(r, cfg)) for r in records]


def calibrate_threshold(lengths: Sequence[int]) -> int:
    """Cut-off between the small (new UI) and large (old UI) response sizes.

    Runs an exact two-cluster k-means on ``log10(length)`` and returns the
    geometric midpoint of the gap between the clusters, floored to bytes.
    Every length in the low cluster is ``<=`` the result and every length in
    the high cluster is ``>`` it.
    """
    values = np.sort(np.asarray(lengths, dtype=float))
    if values.size < 2 or values[0] == values[-1]:
        raise DegenerateDistribution("need at least two distinct lengths")
    logs = np.log10(np.maximum(values, 1.0))
    n = logs.size
    csum = np.cumsum(logs)
    csq = np.cumsum(logs * logs)
    k = np.arange(1, n)  # size of the low cluster
    low_sse = csq[k - 1] - csum[k - 1] ** 2 / k
    high_sum = csum[-1] - csum[k - 1]
    high_sse = (csq[-1] - csq[k - 1]) - high_sum ** 2 / (n - k)
    cost = low_sse + high_sse
    # a split between equal values is not a real boundary
    cost[values[k - 1] == values[k]] = np.inf
    split = int(np.argmin(cost)) + 1
    lo, hi = values[split - 1], values[split]
    mid = 10 ** ((np.log10(max(lo, 1.0)) + np.log10(hi)) / 2)
    threshold = int(np.floor(mid))
    return int(min(max(threshold, lo), hi - 1))


@dataclass(frozen=True)
class CorpusPartition:
    total: int
    old_ui: int
    new_ui: int
    excluded: int
    per_group: Mapping[tuple[str, str], tuple[int, int]] = field(default_factory=dict)
    excluded_statuses: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.old_ui + self.new_ui + self.excluded != self.total:
            raise ValueError("old_ui + new_ui + excluded must equal total")

    @property
    def per_archive(self) -> dict[str, tuple[int, int]]:
        """archive_id -> (old, new), summed over page types."""
        out: dict[str, tuple[int, int]] = {}
        for (archive, _), (old, new) in self.per_group.items():
            o, n = out.get(archive, (0, 0))
            out[archive] = (o + old, n + new)
        return out

    def table_rows(self) -> list[tuple[str, str, int, int, int]]:
        """(archive, page type, total, new, old) rows sorted by archive then page type."""
        return [
            (archive, ptype, old + new, new, old)
            for (archive, ptype), (old, new) in sorted(self.per_group.items())
        ]


def partition_corpus(records: Sequence[MementoRecord], cfg: ClassifierConfig) -> tuple[CorpusPartition, list[MementoRecord]]:
    """Filter, classify and tally a corpus; returns the partition and the classified kept records."""
    kept, excluded = filter_by_status(records, cfg)
    classified = classify_all(kept, cfg)
    groups: dict[tuple[str, str], list[int]] = {}
    for rec in classified:
        slot = groups.setdefault((rec.archive_id, page_type(rec.uri_r)), [0, 0])
        slot[0 if rec.ui_class is UiClass.OLD else 1] += 1
    old = sum(v[0] for v in groups.values())
    new = sum(v[1] for v in groups.values())
    statuses = Counter(r.http_status for r in excluded) if cfg.excluded_statuses_reported else Counter()
    part = CorpusPartition(
        total=len(records),
        old_ui=old,
        new_ui=new,
        excluded=len(excluded),
        per_group={k: (v[0], v[1]) for k, v in sorted(groups.items())},
        excluded_statuses=dict(sorted(statuses.items())),
    )
    return part, classified


@dataclass(frozen=True)
class UiCoverage:
    only_old: int = 0
    only_new: int = 0
    both: int = 0
    neither: int = 0

    @property
    def resources(self) -> int:
        return self.only_old + self.only_new + self.both + self.neither

    def percentages(self, ndigits: int = 2) -> dict[str, float]:
        n = self.resources
        if n == 0:
            return {"only_old": 0.0, "only_new": 0.0, "both": 0.0, "neither": 0.0}
        return {
            name: round(100.0 * getattr(self, name) / n, ndigits)
            for name in ("only_old", "only_new", "both", "neither")
        }


def ui_coverage(resource_to_mementos: Mapping[object, Iterable[MementoRecord]]) -> UiCoverage:
    counts = Counter()
    for mementos in resource_to_mementos.values():
        classes = {m.ui_class for m in mementos}
        has_old, has_new = UiClass.OLD in classes, UiClass.NEW in classes
        if has_old and has_new:
            counts["both"] += 1
        elif has_old:
            counts["only_old"] += 1
        elif has_new:
            counts["only_new"] += 1
        else:
            counts["neither"] += 1
    return UiCoverage(**counts)
