"""
How far apart in time are the parts of one replayed page?
=========================================================

A new-UI account page pulls five JSON responses.  Each one is replayed from
whichever capture is nearest the root, so the tweet feed can be days stale.
"""

import datetime as dt

from replayaudit.coherence import (
    SectionKind,
    count_tweet_violation,
    missed_whats_happening_updates,
    resolve_sections,
)
from replayaudit.memento import ArchivedResourceIds, MementoRecord, TimeMap, UiClass
from replayaudit.synthetic import sample_timeline

UTC = dt.timezone.utc
root_time = dt.datetime(2020, 8, 18, 5, 52, 23, tzinfo=UTC)


def memento(uri_r, when, **kw):
    uri_m = f"https://web.archive.org/web/{when:%Y%m%d%H%M%S}/{uri_r}"
    return MementoRecord(ArchivedResourceIds(uri_r, uri_m), "web.archive.org", when, **kw)


root = memento("https://twitter.com/realDonaldTrump", root_time,
               http_status=200, content_length=6000, ui_class=UiClass.NEW)

offsets = {
    SectionKind.TWEET_FEED: -172800,   # two days stale
    SectionKind.BIO: 120,
    SectionKind.MEDIA_TIMELINE: -4000,
    SectionKind.YOU_MIGHT_LIKE: 86400,
    SectionKind.WHATS_HAPPENING: 3600,
}
section_tms = {
    kind: TimeMap(f"https://api.twitter.com/{kind.value}",
                  (memento(f"https://api.twitter.com/{kind.value}", root_time + dt.timedelta(seconds=s)),))
    for kind, s in offsets.items()
}

audit = resolve_sections(root, section_tms)
for kind, delta in audit.deltas.items():
    print(f"{kind.label:18s} {delta:+8d} s")
print("temporal spread:", audit.spread, "s")

# which tweets did the stale feed miss?
violation = count_tweet_violation(audit, sample_timeline())
print("feed is", violation.direction.value, "by", violation.off_by_count, "tweets")

print("trend refreshes skipped:", missed_whats_happening_updates(audit.deltas[SectionKind.WHATS_HAPPENING]))
