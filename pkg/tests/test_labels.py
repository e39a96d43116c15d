import datetime as dt
import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from replayaudit.errors import (
    CaptureBeforeCreation,
    EmptyStatuses,
    InconsistentId,
    MissingCounts,
    SchemaMismatch,
    TransportError,
)
from replayaudit.labels import (
    Corroboration,
    DiscrepancyCategory,
    Label,
    LabelType,
    TweetKind,
    TweetRecord,
    WindowClass,
    audit_label_presence,
    categorize_discrepancy,
    classify_window,
    dataset_relations,
    filter_window,
    ingest_timeline,
    old_ui_label_window,
    summarize_label_audits,
    vtr_candidate,
)
from replayaudit.memento import UiClass
from replayaudit.snowflake import datetime_to_tweet_id, tweet_id_to_datetime
from tests.conftest import record, utc

TID = 1265255835124539392
CREATED = tweet_id_to_datetime(TID)


def test_ingest_trumparchive_csv(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text(
        "id,text,isRetweet,isDeleted,device,favorites,retweets,date,isFlagged\n"
        f"{TID},x,f,f,web,10,5,{CREATED:%Y-%m-%d %H:%M:%S},t\n"
        "1290000000000000000,y,t,f,web,0,9,2020-08-02 19:02:21,f\n"
    )
    rows = ingest_timeline(p)
    assert [r.id for r in rows] == [TID, 1290000000000000000]
    assert rows[0].label == Label(None) and rows[1].label is None
    assert rows[1].kind is TweetKind.RETWEET
    assert (rows[0].retweet_count, rows[0].favorite_count) == (5, 10)
    assert rows[0].source_datasets == frozenset({"trumparchive"})


def test_ingest_json_and_jsonl(tmp_path):
    rows = [{"tweet_id": TID, "date": CREATED.isoformat(), "is_retweet": "false", "label_type": "fact-check"}]
    (tmp_path / "a.json").write_text(json.dumps(rows))
    (tmp_path / "b.jsonl").write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    for name in ("a.json", "b.jsonl"):
        (t,) = ingest_timeline(tmp_path / name, "twitterlabels6", "mine")
        assert t.label.type is LabelType.FACT_CHECK
        assert t.source_datasets == frozenset({"mine"})


def test_ingest_id_only_profile(tmp_path):
    (tmp_path / "f.csv").write_text(f"id,type\n{TID},RT\n")
    (t,) = ingest_timeline(tmp_path / "f.csv", "factbase")
    assert t.created_at == CREATED
    assert t.kind is TweetKind.RETWEET and t.label is not None


def test_ingest_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("tweet,when\n1,2\n")
    with pytest.raises(SchemaMismatch):
        ingest_timeline(tmp_path / "bad.csv")
    (tmp_path / "drift.csv").write_text(f"id,date\n{TID},2020-01-01 00:00:00\n")
    with pytest.warns(InconsistentId):
        ingest_timeline(tmp_path / "drift.csv")
    (tmp_path / "empty.csv").write_text("")
    assert ingest_timeline(tmp_path / "empty.csv") == []


def test_filter_window_inclusive():
    ts = [TweetRecord.from_id(datetime_to_tweet_id(utc(2020, 5, d))) for d in (1, 2, 3)]
    assert len(filter_window(ts, utc(2020, 5, 1), utc(2020, 5, 2))) == 2


def test_tweet_record_validation():
    with pytest.raises(ValueError):
        TweetRecord(TID, CREATED, retweet_count=-1)
    with pytest.raises(ValueError):
        TweetRecord(TID, CREATED, label=Label(LabelType.VTR, CREATED - dt.timedelta(seconds=1)))


def test_vtr_candidate():
    assert vtr_candidate(TweetRecord(TID, CREATED, TweetKind.TWEET, 0, 0))
    assert not vtr_candidate(TweetRecord(TID, CREATED, TweetKind.TWEET, 0, 1))
    assert not vtr_candidate(TweetRecord(TID, CREATED, TweetKind.RETWEET, 0, 0))
    with pytest.raises(MissingCounts):
        vtr_candidate(TweetRecord(TID, CREATED))


def test_classify_window_orderings():
    t1, t2 = utc(2020, 5, 26, 0, 0, 0), utc(2020, 5, 26, 1, 0, 0)
    assert classify_window(t1, t2, t1) is WindowClass.BEFORE_LABEL
    assert classify_window(t1, t2, t2 - dt.timedelta(seconds=1)) is WindowClass.BEFORE_LABEL
    assert classify_window(t1, t2, t2) is WindowClass.AFTER_LABEL
    assert classify_window(t1, t1, t1) is WindowClass.AFTER_LABEL
    assert classify_window(t1, None, t2) is WindowClass.INDETERMINATE
    with pytest.raises(CaptureBeforeCreation):
        classify_window(t1, t2, t1 - dt.timedelta(seconds=1))


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=6), st.lists(st.integers(0, 10**6), max_size=6),
       st.lists(st.integers(0, 10**6), max_size=6))
def test_dataset_relations_match_set_algebra(a, b, c):
    sets = {"A": set(a), "B": set(b), "C": set(c)}
    rel = dataset_relations(sets)
    assert rel.union == len(sets["A"] | sets["B"] | sets["C"])
    for size in (1, 2, 3):
        for combo in itertools.combinations("ABC", size):
            inside = set.intersection(*(sets[n] for n in combo))
            outside = set().union(*(sets[n] for n in "ABC" if n not in combo))
            assert rel.region(*combo) == len(inside - outside)
            assert rel.intersection(*combo) == len(inside)
    assert rel.difference("A", "B") == len(sets["A"] - sets["B"])
    assert sum(rel.regions.values()) == rel.union


def test_dataset_relations_needs_two():
    with pytest.raises(ValueError):
        dataset_relations({"A": [1]})


def new_ui(minutes, tid=TID):
    when = CREATED.replace(microsecond=0) + dt.timedelta(minutes=minutes)
    return record(when, f"https://twitter.com/realDonaldTrump/status/{tid}",
                  http_status=200, content_length=6000, ui_class=UiClass.NEW)


class Flaky:
    """Fails the first ``n`` calls per memento, then returns ``body``."""

    def __init__(self, body, n=1, exc=False):
        self.body, self.n, self.exc, self.calls = body, n, exc, {}

    def __call__(self, memento, tweet):
        k = self.calls[memento.uri_m] = self.calls.get(memento.uri_m, 0) + 1
        if k <= self.n:
            if self.exc:
                raise TransportError("503")
            return None
        return self.body


def labeled_tweet(applied_minutes=30):
    return TweetRecord(TID, CREATED, label=Label(LabelType.FACT_CHECK, CREATED + dt.timedelta(minutes=applied_minutes)))


def test_label_presence_or_combination():
    body = f'{{"id_str": "{TID}", "x": "softInterventionPivot"}}'
    mems = [new_ui(10), new_ui(60)]
    audit = audit_label_presence(labeled_tweet(), mems, 2, Flaky(body, 1))
    assert all(audit.working(m.uri_m) for m in mems)
    assert audit.working_iterations[mems[0].uri_m] == [False, True]
    assert audit.label_count == 2
    assert audit.window_class == {mems[0].uri_m: WindowClass.BEFORE_LABEL, mems[1].uri_m: WindowClass.AFTER_LABEL}
    # one attempt is not enough for a memento that fails first
    assert audit_label_presence(labeled_tweet(), mems, 1, Flaky(body, 1)).working_count == 0


def test_label_presence_transport_errors_recorded():
    body = f'{{"id_str": "{TID}"}}'
    audit = audit_label_presence(labeled_tweet(), [new_ui(5)], 2, Flaky(body, 1, exc=True))
    assert audit.working_count == 1 and audit.label_count == 0
    assert audit.errors[new_ui(5).uri_m] == ["503"]


def test_label_presence_wrong_payload():
    audit = audit_label_presence(labeled_tweet(), [new_ui(5)], 3, lambda m, t: '{"id_str": "1"} softInterventionPivot')
    assert audit.working_count == 0 and audit.label_seen == {}


def test_label_presence_arguments():
    with pytest.raises(ValueError):
        audit_label_presence(labeled_tweet(), [], 0, lambda m, t: None)
    with pytest.raises(ValueError):
        audit_label_presence(labeled_tweet(), [], 1, None)


def test_summarize_label_audits():
    body = f"{TID} violated the Twitter Rules"
    vtr = TweetRecord(TID, CREATED, label=Label(LabelType.VTR))
    rows = summarize_label_audits([
        audit_label_presence(vtr, [new_ui(1), new_ui(2)], 1, lambda m, t: body),
        audit_label_presence(labeled_tweet(), [new_ui(3)], 1, lambda m, t: None),
    ])
    assert [(r.label_type, r.tweets, r.new_ui_mementos, r.working, r.label_present) for r in rows] == [
        ("FactCheck", 1, 1, 0, 0), ("VTR", 1, 2, 2, 2)]


def test_old_ui_label_window():
    obs = [(utc(2020, 8, 20), False), (utc(2020, 8, 26), True), (utc(2020, 9, 1), False),
           (utc(2020, 9, 9), False), (utc(2020, 9, 10), True)]
    assert old_ui_label_window(obs) == (utc(2020, 8, 26), utc(2020, 9, 9))
    assert old_ui_label_window([(utc(2020, 1, 1), True)]) == (utc(2020, 1, 1), None)
    with pytest.raises(ValueError):
        old_ui_label_window([])


def test_categorize_discrepancy():
    cat = categorize_discrepancy
    assert cat(1, [301, 301], Corroboration.NONE) is DiscrepancyCategory.ORIGINAL_ID_OTHER_ACCOUNT
    assert cat(1, [301, 301], Corroboration.TWEET) is DiscrepancyCategory.ORIGINAL_ID_OTHER_ACCOUNT
    assert cat(1, [200, 301], Corroboration.TWEET) is DiscrepancyCategory.TWEET_ID
    assert cat(1, [200], "RetweetCorroborated") is DiscrepancyCategory.RETWEET_ID
    assert cat(1, [404], Corroboration.NONE) is DiscrepancyCategory.APOCRYPHAL
    with pytest.raises(EmptyStatuses):
        cat(1, [], Corroboration.NONE)
