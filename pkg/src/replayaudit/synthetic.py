"""Deterministic synthetic archive corpus for the fixture replay server.

:func:`build_corpus` lays out seven simulated archives holding captures of
an account page (plus a language variant), a handful of tweet pages, the five
JSON sections of the new-UI account page and archived tweet JSON, together
with a ground-truth tweet timeline and a labeled-tweet dataset.  Nothing here
is real archive data; it exists so every stage of the pipeline can run
offline against known answers.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import random
from dataclasses import dataclass
from importlib import resources as _resources
from pathlib import Path
from typing import Any, Optional

from .labels import TweetRecord, ingest_timeline
from .memento import format_timestamp14
from .snowflake import datetime_to_tweet_id

UTC = dt.timezone.utc

ARCHIVES = [
    "web.archive.org",
    "archive.today",
    "perma.cc",
    "swap.stanford.edu",
    "archive-it.org",
    "vefsafn.is",
    "webarchive.org.uk",
]
FAILING_ARCHIVE = "swap.stanford.edu"

ACCOUNT = "https://twitter.com/realDonaldTrump"
SECTION_URIS = {
    "TweetFeed": "https://api.twitter.com/2/timeline/profile/25073877.json",
    "Bio": "https://api.twitter.com/graphql/user/UserByScreenName?screen_name=realDonaldTrump",
    "MediaTimeline": "https://api.twitter.com/2/timeline/media/25073877.json",
    "YouMightLike": "https://api.twitter.com/1.1/users/recommendations.json?user_id=25073877",
    "WhatsHappening": "https://api.twitter.com/2/guide.json",
}
TWEET_JSON = "https://api.twitter.com/2/timeline/conversation/{tweet_id}.json"
THRESHOLD = 50_000
FACT_CHECK_MARKER = '"softInterventionPivot": {"text": "Get the facts about mail-in ballots"}'

START = dt.datetime(2020, 8, 1, tzinfo=UTC)
END = dt.datetime(2020, 9, 30, tzinfo=UTC)


SAMPLE_TIMELINE = "timeline_2020-08-17.csv"


def sample_timeline() -> list[TweetRecord]:
    """A packaged, synthetic slice of account activity around 2020-08-17 (trumparchive columns)."""
    ref = _resources.files("replayaudit") / "data" / SAMPLE_TIMELINE
    with _resources.as_file(ref) as path:
        return ingest_timeline(path, "trumparchive", "sample")


@dataclass
class SyntheticCorpus:
    manifest: dict[str, Any]
    timeline_rows: list[dict[str, Any]]
    label_rows: list[dict[str, Any]]
    resources: list[str]

    def write(self, directory: Path, port: int = 0) -> Path:
        """Write manifest, ground truth, labels and an audit config; returns the config path."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "manifest.json").write_text(json.dumps(self.manifest, indent=1, sort_keys=True))
        _write_csv(directory / "timeline.csv", self.timeline_rows)
        _write_csv(directory / "labels.csv", self.label_rows)
        config = {
            "fixture_manifest": "manifest.json",
            "fixture_port": port,
            "resources": self.resources,
            "language_codes": ["fr"],
            "sections": SECTION_URIS,
            "ground_truth": {"path": "timeline.csv", "profile": "trumparchive"},
            "classifier": {"content_length_threshold": THRESHOLD, "include_statuses": [200]},
            "labels": {
                "datasets": [{"path": "labels.csv", "profile": "twitterlabels6"}],
                "iterations": 2,
                "tweet_json": TWEET_JSON,
            },
            "parallelism": 8,
        }
        path = directory / "audit.json"
        path.write_text(json.dumps(config, indent=1))
        return path


def _write_csv(path: Path, rows: list[dict[str, Any]]) -> None:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    path.write_text(buf.getvalue())


def _ts(when: dt.datetime) -> str:
    return format_timestamp14(when)


def _rand_time(rng: random.Random, lo: dt.datetime, hi: dt.datetime) -> dt.datetime:
    span = int((hi - lo).total_seconds())
    return lo + dt.timedelta(seconds=rng.randrange(span))


def build_timeline(rng: random.Random, lo: dt.datetime, hi: dt.datetime) -> list[dict[str, Any]]:
    rows = []
    t = lo
    while t < hi:
        t += dt.timedelta(seconds=rng.randint(300, 5400), milliseconds=rng.randint(0, 999))
        tid = datetime_to_tweet_id(t) | rng.randrange(1 << 22)
        retweet = rng.random() < 0.3
        rows.append({
            "id": tid,
            "text": "synthetic",
            "isRetweet": "t" if retweet else "f",
            "isDeleted": "f",
            "device": "Twitter for iPhone",
            "favorites": 0 if retweet else rng.randint(1000, 90000),
            "retweets": rng.randint(100, 20000),
            "date": t.strftime("%Y-%m-%d %H:%M:%S"),
            "isFlagged": "f",
        })
    return rows


def build_corpus(seed: int = 7) -> SyntheticCorpus:
    rng = random.Random(seed)
    resources: list[dict[str, Any]] = []
    bodies: dict[str, str] = {}

    def add(uri_r: str, captures: list[dict[str, Any]]) -> None:
        seen = set()
        uniq = []
        for c in captures:
            key = (c["archive"], c["timestamp"])
            if key not in seen:
                seen.add(key)
                uniq.append(c)
        resources.append({"uri_r": uri_r, "captures": uniq})

    def page(archive: str, when: dt.datetime, ui: str, status: int = 200, location: Optional[str] = None):
        if status != 200:
            return {"archive": archive, "timestamp": _ts(when), "status": status, "content_length": 0,
                    "location": location}
        size = rng.randint(180_000, 260_000) if ui == "OldUI" else rng.randint(4_000, 9_000)
        return {"archive": archive, "timestamp": _ts(when), "status": 200, "content_length": size,
                "ui_class_truth": ui}

    # account page and one language variant
    plan = {
        "web.archive.org": [("NewUI", 200)] * 8 + [("OldUI", 200)] * 6 + [(None, 302)],
        "archive.today": [("OldUI", 200)] * 3 + [("NewUI", 200)],
        "archive-it.org": [("OldUI", 200)] * 3,
        "vefsafn.is": [("NewUI", 200)] * 2 + [("OldUI", 200)],
        "perma.cc": [("NewUI", 200)],
        "webarchive.org.uk": [(None, 451)] * 2,
        "swap.stanford.edu": [("OldUI", 200)] * 2,
    }
    account_caps = []
    for archive, kinds in plan.items():
        for ui, status in kinds:
            when = _rand_time(rng, START + dt.timedelta(days=3), END - dt.timedelta(days=3))
            account_caps.append(page(archive, when, ui, status, location=ACCOUNT + "?lang=en"))
    variant = ACCOUNT + "?lang=fr"
    variant_caps = [
        page("web.archive.org", _rand_time(rng, START, END), ui) for ui in ("OldUI", "OldUI", "NewUI")
    ]

    # section JSON captures at the Wayback Machine only
    roots = sorted(
        parse(c["timestamp"]) for c in account_caps + variant_caps
        if c["archive"] == "web.archive.org" and c.get("ui_class_truth") == "NewUI"
    )
    section_caps: dict[str, list[dict[str, Any]]] = {}
    for name, uri in SECTION_URIS.items():
        caps = []
        for root in roots:
            offset = rng.randint(-2 * 86400, 2 * 86400)
            caps.append({"archive": "web.archive.org", "timestamp": _ts(root + dt.timedelta(seconds=offset)),
                         "status": 200, "content_length": 2048})
        if name == "TweetFeed":
            # one root served exactly on time, one feed from about two days earlier
            caps.append({"archive": "web.archive.org", "timestamp": _ts(roots[0]), "status": 200, "content_length": 2048})
            caps.append({"archive": "web.archive.org", "timestamp": _ts(roots[1] - dt.timedelta(seconds=172800)),
                         "status": 200, "content_length": 2048})
        section_caps[name] = caps

    timeline = build_timeline(rng, START - dt.timedelta(days=5), END + dt.timedelta(days=5))
    originals = [r for r in timeline if r["isRetweet"] == "f" and START < parse_date(r["date"]) < END]

    # tweet pages
    tweet_ids = [r["id"] for r in rng.sample(originals, 8)]
    tweet_uris = [f"{ACCOUNT}/status/{tid}" for tid in tweet_ids]
    tweet_caps: dict[str, list[dict[str, Any]]] = {}
    for k, (tid, uri) in enumerate(zip(tweet_ids, tweet_uris)):
        created = parse_date(next(r["date"] for r in timeline if r["id"] == tid))
        after = [created + dt.timedelta(seconds=rng.randint(60, 20 * 86400)) for _ in range(4)]
        if k < 3:
            kinds = ["NewUI", "NewUI", "OldUI", "NewUI"]
        elif k < 5:
            kinds = ["OldUI"] * 4
        elif k < 7:
            kinds = ["NewUI"] * 4
        else:
            kinds = ["OldUI", "NewUI", "OldUI", "OldUI"]
        caps = [page("web.archive.org", when, ui) for when, ui in zip(after, kinds)]
        caps.append(page("web.archive.org", created + dt.timedelta(days=30), None, 301, location=uri + "?s=20"))
        caps.append(page("archive.today", created + dt.timedelta(hours=3), "OldUI"))
        tweet_caps[uri] = caps

    # labels: the first three tweets are fact-check labeled; their archived JSON
    label_rows = []
    json_caps: dict[str, list[dict[str, Any]]] = {}
    for k, tid in enumerate(tweet_ids[:3]):
        created = parse_date(next(r["date"] for r in timeline if r["id"] == tid))
        label_rows.append({"date": created.strftime("%Y-%m-%d %H:%M:%S"), "tweet_id": tid,
                           "is_retweet": "false", "label_type": "fact-check"})
        labeled_ref, plain_ref = f"labeled-{tid}", f"plain-{tid}"
        bodies[labeled_ref] = json.dumps({"globalObjects": {"tweets": {str(tid): {"full_text": "synthetic"}}},
                                          "marker": FACT_CHECK_MARKER})
        bodies[plain_ref] = json.dumps({"globalObjects": {"tweets": {str(tid): {"full_text": "synthetic"}}}})
        new_ui = sorted(parse(c["timestamp"]) for c in tweet_caps[tweet_uris[k]] if c.get("ui_class_truth") == "NewUI")
        caps = []
        if k == 0:
            # every new-UI memento resolves to a labeled payload; one is flaky
            for j, when in enumerate(new_ui):
                caps.append({"archive": "web.archive.org", "timestamp": _ts(when), "status": 200,
                             "body_ref": labeled_ref, "fail_first": 1 if j == 0 else 0})
        elif k == 1:
            # payload archived but without the label
            for when in new_ui:
                caps.append({"archive": "web.archive.org", "timestamp": _ts(when), "status": 200,
                             "body_ref": plain_ref})
        # k == 2: no archived JSON at all -> nothing works
        if caps:
            json_caps[TWEET_JSON.format(tweet_id=tid)] = caps

    add(ACCOUNT, account_caps)
    add(variant, variant_caps)
    for uri, caps in tweet_caps.items():
        add(uri, caps)
    for name, uri in SECTION_URIS.items():
        add(uri, section_caps[name])
    for uri, caps in json_caps.items():
        add(uri, caps)

    manifest = {
        "archives": [
            {"id": a, "fail": a == FAILING_ARCHIVE, "max_in_flight": 2, "min_request_gap_ms": 0}
            for a in ARCHIVES
        ],
        "bodies": bodies,
        "resources": resources,
    }
    _annotate_sections_truth(manifest)
    return SyntheticCorpus(manifest, timeline, label_rows, [ACCOUNT] + tweet_uris)


def parse(ts: str) -> dt.datetime:
    return dt.datetime.strptime(ts, "%Y%m%d%H%M%S").replace(tzinfo=UTC)


def parse_date(text: str) -> dt.datetime:
    return dt.datetime.strptime(text, "%Y-%m-%d %H:%M:%S").replace(tzinfo=UTC)


def _annotate_sections_truth(manifest: dict[str, Any]) -> None:
    """Record, for every new-UI account capture, the section capture replay should pick."""
    by_uri = {r["uri_r"]: r for r in manifest["resources"]}
    for res in manifest["resources"]:
        if "/status/" in res["uri_r"] or not res["uri_r"].startswith(ACCOUNT):
            continue
        for cap in res["captures"]:
            if cap.get("ui_class_truth") != "NewUI":
                continue
            root = parse(cap["timestamp"])
            truth = {}
            for name, uri in SECTION_URIS.items():
                local = [parse(c["timestamp"]) for c in by_uri.get(uri, {"captures": []})["captures"]
                         if c["archive"] == cap["archive"]]
                truth[name] = _ts(min(local, key=lambda t: (abs(t - root), t))) if local else None
            cap["sections_truth"] = truth
