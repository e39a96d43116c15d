"""
A whole audit against the local replay server
=============================================

Writes a synthetic corpus, runs the pipeline and emits every report format.
One of the seven archives is down on purpose, so the exit code is 2.
"""

import sys
import tempfile
from pathlib import Path

from replayaudit.pipeline import run_audit
from replayaudit.report import emit_report
from replayaudit.synthetic import build_corpus

work = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="replayaudit-"))
config = build_corpus().write(work)

report, code = run_audit(config, work / "report")
print("exit code:", code)
for fmt in ("csv", "json", "plotdata"):
    emit_report(report, fmt, work / "report")

for key, value in report.summary().items():
    print(f"{key:24s} {value}")
print()
print((work / "report" / "table_future.csv").read_text())
print("files in", work / "report")
