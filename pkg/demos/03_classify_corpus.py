"""
Old UI or new UI?
=================

The legacy server-rendered page is hundreds of kilobytes; the client-rendered
skeleton is a few.  Calibrate a cut-off from the sizes and split a corpus.
"""

import numpy as np

from replayaudit.classifier import ClassifierConfig, calibrate_threshold, partition_corpus
from replayaudit.clients import aggregate_timemaps, fetch_memento
from replayaudit.fixtures import FixtureManifest, serve_fixtures
from replayaudit.synthetic import build_corpus

corpus = build_corpus()
with serve_fixtures(FixtureManifest.from_dict(corpus.manifest)) as server:
    registry = {e.archive_id: e for e in server.registry()}
    errors = {}
    tm = aggregate_timemaps(corpus.resources[0], list(registry.values()), errors=errors)
    records = [fetch_memento(m, entry=registry[m.archive_id]) for m in tm]

print("archives that failed:", sorted(errors))

sizes = np.array([r.content_length for r in records if r.http_status == 200])
print("sizes (kB):", np.sort(sizes // 1000))

threshold = calibrate_threshold(sizes)
print("calibrated threshold:", threshold)

part, _ = partition_corpus(records, ClassifierConfig(threshold))
print(f"total={part.total} old={part.old_ui} new={part.new_ui} excluded={part.excluded}")
for row in part.table_rows():
    print("  ", row)
