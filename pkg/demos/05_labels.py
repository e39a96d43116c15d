"""
Were moderation labels archived?
================================

Compare labeled-tweet datasets, then check archived tweet JSON for the
label marker, retrying each memento because replay is flaky.
"""

import datetime as dt
import random

from replayaudit.labels import (
    Label,
    LabelType,
    TweetRecord,
    audit_label_presence,
    dataset_relations,
)
from replayaudit.memento import ArchivedResourceIds, MementoRecord, UiClass
from replayaudit.snowflake import tweet_id_to_datetime

rng = random.Random(1)
ids = list(range(1_265_000_000_000_000_000, 1_265_000_000_000_000_000 + 40 * (1 << 22), 1 << 22))
datasets = {
    "export": set(rng.sample(ids, 25)),
    "scrape": set(rng.sample(ids, 30)),
    "manual": set(rng.sample(ids, 12)),
}
rel = dataset_relations(datasets)
print("union:", rel.union)
for region, n in sorted(rel.regions.items(), key=lambda kv: (-len(kv[0]), sorted(kv[0]))):
    print(" ", " & ".join(sorted(region)).ljust(24), n)

tid = 1265255835124539392
created = tweet_id_to_datetime(tid)
tweet = TweetRecord(tid, created, label=Label(LabelType.FACT_CHECK, created + dt.timedelta(hours=3)))
mementos = []
for hours in (1, 5, 30):
    when = created.replace(microsecond=0) + dt.timedelta(hours=hours)
    uri_r = f"https://twitter.com/realDonaldTrump/status/{tid}"
    uri_m = f"https://web.archive.org/web/{when:%Y%m%d%H%M%S}/{uri_r}"
    mementos.append(MementoRecord(ArchivedResourceIds(uri_r, uri_m), "web.archive.org", when,
                                  200, 6000, UiClass.NEW))


def fetch(memento, tweet):
    # every other attempt fails; the first memento predates the label
    if rng.random() < 0.5:
        return None
    label = "" if memento is mementos[0] else '"softInterventionPivot": {}'
    return f'{{"id_str": "{tweet.id}", {label}}}'


audit = audit_label_presence(tweet, mementos, iterations=3, fetch_payload=fetch)
for m in mementos:
    print(m.memento_datetime.isoformat(), audit.working_iterations[m.uri_m],
          audit.window_class.get(m.uri_m).value, audit.label_seen.get(m.uri_m))
