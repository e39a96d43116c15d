import datetime as dt

import pytest

from replayaudit.fixtures import FixtureManifest, serve_fixtures
from replayaudit.memento import ArchivedResourceIds, MementoRecord, TimeMap, format_timestamp14

UTC = dt.timezone.utc
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def utc(*args) -> dt.datetime:
    return dt.datetime(*args, tzinfo=UTC)


def record(when, uri_r="https://twitter.com/example", archive="web.archive.org", **kw) -> MementoRecord:
    uri_m = f"https://{archive}/web/{format_timestamp14(when)}/{uri_r}"
    return MementoRecord(ArchivedResourceIds(uri_r, uri_m), archive, when, **kw)


def timemap(times, uri_r="https://twitter.com/example") -> TimeMap:
    return TimeMap(uri_r, tuple(record(t, uri_r) for t in times))


@pytest.fixture
def small_manifest():
    return FixtureManifest.from_dict({
        "archives": [
            {"id": "alpha", "max_in_flight": 1, "min_request_gap_ms": 40},
            {"id": "beta"},
            {"id": "down", "fail": True},
        ],
        "bodies": {"hello": "hello world"},
        "resources": [
            {"uri_r": "https://twitter.com/example", "captures": [
                {"archive": "alpha", "timestamp": "20200801000000", "status": 200, "content_length": 1024},
                {"archive": "alpha", "timestamp": "20200805000000", "status": 451, "content_length": 0},
                {"archive": "beta", "timestamp": "20200803000000", "status": 302, "content_length": 0,
                 "location": "https://twitter.com/example?lang=en"},
                {"archive": "beta", "timestamp": "20200807000000", "status": 200, "body_ref": "hello"},
                {"archive": "beta", "timestamp": "20200809000000", "status": 200, "content_length": 64},
            ]},
            {"uri_r": "https://twitter.com/example/status/1290000000000000000", "captures": [
                {"archive": "alpha", "timestamp": "20200810000000", "status": 200, "content_length": 300000},
                {"archive": "alpha", "timestamp": "20200811000000", "status": 200, "content_length": 7000,
                 "fail_first": 1},
            ]},
        ],
    })


@pytest.fixture
def server(small_manifest):
    srv = serve_fixtures(small_manifest)
    yield srv
    srv.close()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, text = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")
