"""
When was a tweet created?
=========================

Tweet ids embed a millisecond timestamp, so an id alone dates a tweet,
even when the tweet itself is gone.
"""

from replayaudit.snowflake import datetime_to_tweet_id, isoformat_ms, tweet_id_to_datetime

ids = [1258113511730884611, 1311785763559797506, 1334001254012497923]
for tid in ids:
    print(tid, isoformat_ms(tweet_id_to_datetime(tid)))

# going the other way gives the smallest id minted at that instant
when = tweet_id_to_datetime(ids[0])
print("lower bound id:", datetime_to_tweet_id(when), "<=", ids[0])
