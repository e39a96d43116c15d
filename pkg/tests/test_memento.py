import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replayaudit.errors import (
    EmptyTimeMap,
    InvalidTimestamp,
    MalformedLinkFormat,
    MissingOriginal,
    UnrecognizedArchivePattern,
)
from replayaudit.memento import (
    ArchivedResourceIds,
    MementoRecord,
    TimeMap,
    UiClass,
    canonicalize_uri,
    dump_records,
    format_http_date,
    format_timestamp14,
    load_records,
    nearest_memento,
    parse_http_date,
    parse_link_format,
    parse_memento_uri,
    parse_timemap,
    parse_timestamp14,
    serialize_timemap,
)
from tests.conftest import record, timemap, utc

TIMEMAP_BODY = """<https://twitter.com/realDonaldTrump>; rel="original",
<https://web.archive.org/web/timemap/link/https://twitter.com/realDonaldTrump>; rel="self"; type="application/link-format",
<https://web.archive.org/web/https://twitter.com/realDonaldTrump>; rel="timegate",
<https://web.archive.org/web/20200818055223/https://twitter.com/realDonaldTrump>; rel="first memento"; datetime="Tue, 18 Aug 2020 05:52:23 GMT",
<https://archive.ph/20200901120000/https://twitter.com/realDonaldTrump>; rel="memento"; datetime="Tue, 01 Sep 2020 12:00:00 GMT",
<https://web.archive.org/web/20201001000000/https://twitter.com/realDonaldTrump>; rel="last memento"; datetime="Thu, 01 Oct 2020 00:00:00 GMT"
"""


def test_parse_timemap_example():
    tm = parse_timemap(TIMEMAP_BODY, "https://web.archive.org/web/timemap/link/x")
    assert tm.uri_r == "https://twitter.com/realDonaldTrump"
    assert len(tm) == 3
    assert [e.archive_id for e in tm] == ["web.archive.org", "archive.today", "web.archive.org"]
    assert tm.entries[0].memento_datetime == utc(2020, 8, 18, 5, 52, 23)
    assert tm.timegate == "https://web.archive.org/web/https://twitter.com/realDonaldTrump"


def test_compound_rel_single_memento():
    body = ('<https://a.example/>; rel="original",\n'
            '<https://web.archive.org/web/20200101000000/https://a.example/>; rel="first last memento"; '
            'datetime="Wed, 01 Jan 2020 00:00:00 GMT",\n'
            '<https://web.archive.org/web/timemap/link/https://a.example/>; rel="self"')
    links = parse_link_format(body)
    assert len(links) == 3
    assert links[1].rels == ["first", "last", "memento"]
    tm = parse_timemap(body, "https://web.archive.org/")
    assert len(tm) == 1


def test_quoted_commas_inside_datetime():
    links = parse_link_format('<http://x/>; datetime="Wed, 01 Jan 2020 00:00:00 GMT"; rel=memento')
    assert len(links) == 1
    assert links[0].params["datetime"] == "Wed, 01 Jan 2020 00:00:00 GMT"


@pytest.mark.parametrize("body", [
    "", "   \n", "<http://x/", '<http://x/>; rel="memento', "<http://x/> junk", '<a>; rel="x" <b>',
])
def test_malformed_link_format(body):
    with pytest.raises(MalformedLinkFormat):
        parse_link_format(body)


def test_missing_original():
    body = ('<https://web.archive.org/web/20200101000000/https://a.example/>; rel="memento"; '
            'datetime="Wed, 01 Jan 2020 00:00:00 GMT"')
    with pytest.raises(MissingOriginal):
        parse_timemap(body, "https://web.archive.org/")


def test_bad_memento_datetime():
    body = ('<https://a.example/>; rel="original",'
            '<https://web.archive.org/web/20200101000000/https://a.example/>; rel="memento"; datetime="yesterday"')
    with pytest.raises(MalformedLinkFormat):
        parse_timemap(body, "https://web.archive.org/")


def test_http_dates():
    assert parse_http_date("Tue, 18 Aug 2020 05:52:23 GMT") == utc(2020, 8, 18, 5, 52, 23)
    assert format_http_date(utc(2020, 8, 18, 5, 52, 23)) == "Tue, 18 Aug 2020 05:52:23 GMT"


def test_timestamps():
    assert parse_timestamp14("20200818055223") == utc(2020, 8, 18, 5, 52, 23)
    assert format_timestamp14(utc(1999, 12, 31, 23, 59, 59)) == "19991231235959"
    for bad in ("2020081805522", "202008180552230", "20201318055223", "2020aa18055223"):
        with pytest.raises(InvalidTimestamp):
            parse_timestamp14(bad)


def test_parse_memento_uri():
    archive, when, uri_r = parse_memento_uri(
        "https://web.archive.org/web/20200818055223/https://twitter.com/realdonaldtrump")
    assert archive == "web.archive.org"
    assert when == utc(2020, 8, 18, 5, 52, 23)
    assert uri_r == "https://twitter.com/realdonaldtrump"
    assert parse_memento_uri("https://web.archive.org/web/19700101000000/http://x/")[1] == utc(1970, 1, 1)
    assert parse_memento_uri("https://web.archive.org/web/20200818055223id_/http://x/")[2] == "http://x/"
    assert parse_memento_uri("https://archive.ph/20200101000000/http://x/")[0] == "archive.today"
    with pytest.raises(InvalidTimestamp):
        parse_memento_uri("https://web.archive.org/web/2020081805522/http://x/")
    with pytest.raises(UnrecognizedArchivePattern):
        parse_memento_uri("https://example.org/some/page")


def test_canonicalize_uri():
    assert canonicalize_uri("HTTPS://Twitter.COM/RealDonaldTrump?lang=en#top") == \
        "https://twitter.com/RealDonaldTrump?lang=en"


def test_record_validation():
    ids = ArchivedResourceIds("https://a.example/", "https://web.archive.org/web/20200101000000/https://a.example/")
    with pytest.raises(ValueError):
        MementoRecord(ids, "web.archive.org", utc(2020, 1, 1), http_status=99)
    with pytest.raises(ValueError):
        MementoRecord(ids, "web.archive.org", utc(2020, 1, 1), content_length=-1)
    with pytest.raises(ValueError):
        MementoRecord(ids, "web.archive.org", utc(2020, 1, 1), ui_class=UiClass.NEW)
    with pytest.raises(ValueError):
        ArchivedResourceIds("https://a.example/", "https://a.example/")
    with pytest.raises(ValueError):
        ArchivedResourceIds("a.example", "https://web.archive.org/x")


def test_timemap_sorts_and_dedups():
    t = [utc(2020, 1, 3), utc(2020, 1, 1), utc(2020, 1, 2)]
    recs = [record(x) for x in t] + [record(t[0])]
    tm = TimeMap("https://twitter.com/example", tuple(recs))
    assert tm.datetimes == sorted(t)


def test_records_round_trip():
    recs = [
        record(utc(2020, 1, 1), http_status=200, content_length=5000, ui_class=UiClass.NEW),
        record(utc(2020, 1, 2), http_status=302),
        record(utc(2020, 1, 3)),
    ]
    assert load_records(dump_records(recs)) == recs


def test_nearest_empty():
    with pytest.raises(EmptyTimeMap):
        nearest_memento(TimeMap("https://twitter.com/example", ()), utc(2020, 1, 1))


def test_nearest_tie_goes_earlier():
    tm = timemap([utc(2020, 1, 1, 0, 0, 0), utc(2020, 1, 1, 0, 0, 10)])
    assert nearest_memento(tm, utc(2020, 1, 1, 0, 0, 5)).memento_datetime == utc(2020, 1, 1, 0, 0, 0)
    assert nearest_memento(tm, utc(2020, 1, 1, 0, 0, 6)).memento_datetime == utc(2020, 1, 1, 0, 0, 10)


instants = st.integers(min_value=0, max_value=10_000).map(
    lambda s: utc(2020, 8, 1) + dt.timedelta(seconds=s))


@settings(max_examples=200, deadline=None)
@given(st.lists(instants, min_size=1, max_size=30, unique=True), instants)
def test_nearest_matches_brute_force(times, target):
    tm = timemap(times)
    expect = min(sorted(times), key=lambda t: (abs(t - target), t))
    assert nearest_memento(tm, target).memento_datetime == expect


@settings(max_examples=100, deadline=None)
@given(st.lists(instants, min_size=1, max_size=15, unique=True))
def test_serialize_parse_round_trip(times):
    tm = timemap(times)
    back = parse_timemap(serialize_timemap(tm), "https://web.archive.org/")
    assert [e.uri_m for e in back] == [e.uri_m for e in tm]
    assert back.datetimes == tm.datetimes
