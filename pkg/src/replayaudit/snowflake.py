"""Creation instants embedded in 64-bit tweet identifiers.

The high 42 bits of a snowflake id count milliseconds since
1288834974657 (2010-11-04T01:42:54.657Z); the low 22 bits hold worker and
sequence numbers that are ignored here.
"""

from __future__ import annotations

import datetime as dt

from .errors import PreSnowflakeId

TWITTER_EPOCH_MS = 1288834974657
TIMESTAMP_SHIFT = 22
MAX_ID = (1 << 64) - 1

UTC = dt.timezone.utc


def _from_unix_ms(ms: int) -> dt.datetime:
    # timedelta arithmetic keeps exact milliseconds (fromtimestamp goes through a float)
    return dt.datetime(1970, 1, 1, tzinfo=UTC) + dt.timedelta(milliseconds=ms)


SNOWFLAKE_EPOCH = _from_unix_ms(TWITTER_EPOCH_MS)


def tweet_id_to_unix_ms(tweet_id: int) -> int:
    tweet_id = int(tweet_id)
    if tweet_id > MAX_ID:
        raise ValueError(f"{tweet_id} does not fit in 64 bits")
    if tweet_id <= 0:
        raise PreSnowflakeId(f"{tweet_id} predates the snowflake epoch")
    return (tweet_id >> TIMESTAMP_SHIFT) + TWITTER_EPOCH_MS


def tweet_id_to_datetime(tweet_id: int) -> dt.datetime:
    """UTC creation instant of ``tweet_id`` at millisecond precision."""
    return _from_unix_ms(tweet_id_to_unix_ms(tweet_id))


def datetime_to_tweet_id(when: dt.datetime) -> int:
    """Smallest id whose decoded instant is ``when`` (worker/sequence bits zero)."""
    if when.tzinfo is None:
        when = when.replace(tzinfo=UTC)
    delta = when - SNOWFLAKE_EPOCH
    ms = (delta.days * 86_400_000) + delta.seconds * 1000 + delta.microseconds // 1000
    if ms < 0:
        raise PreSnowflakeId(f"{when.isoformat()} predates the snowflake epoch")
    return ms << TIMESTAMP_SHIFT


def in_window(tweet_id: int, start: dt.datetime, end: dt.datetime) -> bool:
    """True when the decoded instant lies in ``[start, end]``."""
    if start > end:
        raise ValueError("start must not be after end")
    return start <= tweet_id_to_datetime(tweet_id) <= end


def isoformat_ms(when: dt.datetime) -> str:
    return when.astimezone(UTC).isoformat(timespec="milliseconds").replace("+00:00", "Z")
