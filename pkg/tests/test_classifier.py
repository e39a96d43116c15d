import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replayaudit.classifier import (
    ClassifierConfig,
    UiCoverage,
    calibrate_threshold,
    classify_ui,
    filter_by_status,
    page_type,
    partition_corpus,
    tweet_id_of,
    ui_coverage,
)
from replayaudit.errors import DegenerateDistribution, MissingContentLength, MissingStatus
from replayaudit.memento import UiClass
from tests.conftest import record, utc

ACCOUNT = "https://twitter.com/realDonaldTrump"
TWEET = ACCOUNT + "/status/1290000000000000000"


def rec(n, length, status=200, uri_r=ACCOUNT, archive="web.archive.org"):
    return record(utc(2020, 8, 1, 0, 0, n % 60, 0).replace(minute=n // 60 % 60, hour=n // 3600),
                  uri_r, archive, http_status=status, content_length=length)


def test_page_type():
    assert page_type(ACCOUNT) == "account"
    assert page_type(ACCOUNT + "?lang=fr") == "account"
    assert page_type(TWEET) == "tweet"
    assert tweet_id_of(TWEET + "?s=20") == 1290000000000000000
    assert tweet_id_of(ACCOUNT) is None


def test_threshold_is_strict():
    cfg = ClassifierConfig(50_000)
    assert classify_ui(rec(0, 50_000), cfg) is UiClass.NEW
    assert classify_ui(rec(0, 50_001), cfg) is UiClass.OLD
    with pytest.raises(MissingContentLength):
        classify_ui(rec(0, None), cfg)
    with pytest.raises(ValueError):
        ClassifierConfig(0)


def test_filter_by_status():
    cfg = ClassifierConfig(50_000)
    kept, excluded = filter_by_status([rec(0, 10, 200), rec(1, 0, 451), rec(2, 0, 302)], cfg)
    assert [r.http_status for r in kept] == [200]
    assert sorted(r.http_status for r in excluded) == [302, 451]
    with pytest.raises(MissingStatus):
        filter_by_status([record(utc(2020, 1, 1))], cfg)


def test_partition_groups():
    records = [
        rec(0, 250_000), rec(1, 6_000), rec(2, 7_000), rec(3, 0, 451, archive="webarchive.org.uk"),
        rec(4, 300_000, uri_r=TWEET), rec(5, 300_000, uri_r=TWEET, archive="archive.today"),
    ]
    part, classified = partition_corpus(records, ClassifierConfig(50_000))
    assert (part.total, part.old_ui, part.new_ui, part.excluded) == (6, 3, 2, 1)
    assert part.excluded_statuses == {451: 1}
    assert part.per_archive == {"web.archive.org": (2, 2), "archive.today": (1, 0)}
    assert part.table_rows() == [
        ("archive.today", "tweet", 1, 0, 1),
        ("web.archive.org", "account", 3, 2, 1),
        ("web.archive.org", "tweet", 1, 0, 1),
    ]
    assert len(classified) == 5


statuses = st.sampled_from([200, 200, 200, 301, 302, 404, 451])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 400_000), statuses), max_size=40), st.integers(1, 400_000))
def test_partition_identity(rows, threshold):
    records = [rec(i, length, status) for i, (length, status) in enumerate(rows)]
    part, _ = partition_corpus(records, ClassifierConfig(threshold))
    assert part.old_ui + part.new_ui + part.excluded == part.total == len(rows)
    assert part.old_ui == sum(1 for length, s in rows if s == 200 and length > threshold)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 400_000), min_size=1, max_size=30), st.integers(1, 200_000), st.integers(1, 200_000))
def test_old_count_monotone_in_threshold(lengths, a, b):
    lo, hi = sorted((a, b))
    records = [rec(i, n) for i, n in enumerate(lengths)]
    old_lo = partition_corpus(records, ClassifierConfig(lo))[0].old_ui
    old_hi = partition_corpus(records, ClassifierConfig(hi))[0].old_ui
    assert old_hi <= old_lo


def _sse(xs):
    if not xs:
        return 0.0
    m = sum(xs) / len(xs)
    return sum((x - m) ** 2 for x in xs)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(1, 500_000), min_size=2, max_size=9, unique=True))
def test_calibration_matches_exhaustive_two_means(lengths):
    logs = {n: math.log10(n) for n in lengths}
    best = math.inf
    # every non-trivial two-way split, contiguous or not
    for mask in range(1, 2 ** len(lengths) - 1):
        low = [logs[n] for i, n in enumerate(lengths) if mask >> i & 1]
        high = [logs[n] for i, n in enumerate(lengths) if not mask >> i & 1]
        best = min(best, _sse(low) + _sse(high))
    t = calibrate_threshold(lengths)
    low = [logs[n] for n in lengths if n <= t]
    high = [logs[n] for n in lengths if n > t]
    assert low and high
    assert _sse(low) + _sse(high) <= best + 1e-9


def test_calibration_bimodal():
    lengths = [5_000, 6_200, 7_100, 8_800, 210_000, 250_000, 260_000, 300_000]
    t = calibrate_threshold(lengths)
    assert 8_800 <= t < 210_000
    # geometric midpoint of the gap
    assert t == math.floor(math.sqrt(8_800 * 210_000))


def test_calibration_degenerate():
    for bad in ([], [5], [7, 7, 7]):
        with pytest.raises(DegenerateDistribution):
            calibrate_threshold(bad)


def test_calibration_with_ties():
    t = calibrate_threshold([10, 10, 10, 10_000, 10_000])
    assert 10 <= t < 10_000


def test_ui_coverage():
    old = lambda n: rec(n, 1, uri_r=TWEET).evolve(ui_class=UiClass.OLD, content_length=300_000)
    new = lambda n: rec(n, 1, uri_r=TWEET).evolve(ui_class=UiClass.NEW, content_length=5_000)
    cov = ui_coverage({1: [old(0)], 2: [new(1)], 3: [old(2), new(3)], 4: [], 5: [rec(4, None)]})
    assert cov == UiCoverage(only_old=1, only_new=1, both=1, neither=2)
    assert cov.resources == 5
    assert cov.percentages() == {"only_old": 20.0, "only_new": 20.0, "both": 20.0, "neither": 40.0}
    assert UiCoverage().percentages()["both"] == 0.0


def test_coverage_percentages_oracle():
    cov = UiCoverage(only_old=1, only_new=1, both=1)
    assert cov.percentages() == {"only_old": 33.33, "only_new": 33.33, "both": 33.33, "neither": 0.0}
