"""
Reading TimeMaps and picking the memento replay would show
==========================================================

A TimeMap lists every capture of one URI-R.  Parse one, then ask which
capture a replay system would pick for an arbitrary moment.
"""

import datetime as dt

from replayaudit.memento import nearest_memento, parse_memento_uri, parse_timemap

body = """<https://twitter.com/realDonaldTrump>; rel="original",
<https://web.archive.org/web/20200816055223/https://twitter.com/realDonaldTrump>; rel="first memento"; datetime="Sun, 16 Aug 2020 05:52:23 GMT",
<https://archive.ph/20200817120000/https://twitter.com/realDonaldTrump>; rel="memento"; datetime="Mon, 17 Aug 2020 12:00:00 GMT",
<https://web.archive.org/web/20200818055223/https://twitter.com/realDonaldTrump>; rel="last memento"; datetime="Tue, 18 Aug 2020 05:52:23 GMT"
"""

tm = parse_timemap(body, "https://web.archive.org/web/timemap/link/https://twitter.com/realDonaldTrump")
for m in tm:
    print(m.archive_id.ljust(16), m.memento_datetime.isoformat())

# halfway between two captures the earlier one wins
target = dt.datetime(2020, 8, 16, 20, 56, 11, 500000, tzinfo=dt.timezone.utc)
print("nearest to", target.isoformat(), "->", nearest_memento(tm, target).uri_m)

# a URI-M carries its own archive, datetime and URI-R
print(parse_memento_uri("https://web.archive.org/web/20200818055223/https://twitter.com/realdonaldtrump"))
