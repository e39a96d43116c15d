import io
import json
import subprocess
import sys
import time

import pytest
import requests

from replayaudit.cli import main
from replayaudit.memento import dump_records, load_records
from replayaudit.synthetic import build_corpus
from tests.conftest import record, utc

URI = "https://twitter.com/example"


@pytest.fixture
def registry_file(server, tmp_path):
    p = tmp_path / "registry.json"
    p.write_text(json.dumps({"archives": [e.to_dict() for e in server.registry()]}))
    return p


def test_decode_id(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO("1258113511730884611\n\n1334001254012497923\n"))
    assert main(["decode-id"]) == 0
    assert capsys.readouterr().out == (
        "1258113511730884611\t2020-05-06T19:16:50.472Z\n1334001254012497923\t2020-12-02T05:07:38.158Z\n")


def test_decode_id_bad_input(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO("abc\n0\n"))
    assert main(["decode-id"]) == 1
    assert capsys.readouterr().err.count("#") == 2


def test_timemap_partial(registry_file, capsys):
    assert main(["timemap", URI, "--registry", str(registry_file), "--timeout", "5"]) == 2
    out, err = capsys.readouterr()
    assert len(load_records(out)) == 5
    assert "down" in err


def test_timemap_link_format(registry_file, capsys):
    main(["timemap", URI, "--registry", str(registry_file), "--format", "link"])
    out = capsys.readouterr().out
    assert out.startswith(f"<{URI}>; rel=\"original\"")


def test_timemap_all_failed(registry_file, capsys):
    assert main(["timemap", "https://twitter.com/nobody", "--registry", str(registry_file)]) == 1


def test_cdx(server, capsys):
    assert main(["cdx", URI, "--endpoint", f"{server.url}/alpha/cdx", "--match-type", "prefix", "--status", "200"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3 and all(" 200 " in line for line in lines)


def test_classify(tmp_path, capsys):
    recs = [record(utc(2020, 8, 1, h), http_status=200, content_length=n)
            for h, n in enumerate([5_000, 6_000, 250_000, 260_000, 270_000])]
    recs.append(record(utc(2020, 8, 2), http_status=451, content_length=0))
    src = tmp_path / "r.tsv"
    src.write_text(dump_records(recs))
    out = tmp_path / "c.tsv"
    assert main(["classify", str(src), "--threshold", "50000", "-o", str(out)]) == 0
    stdout, err = capsys.readouterr()
    assert stdout.splitlines() == ["archive,page_type,total,new_ui,old_ui", "web.archive.org,account,5,2,3"]
    assert "excluded=1" in err
    assert [r.ui_class.value for r in load_records(out.read_text())] == ["NewUI"] * 2 + ["OldUI"] * 3
    assert main(["classify", str(src)]) == 0
    assert "calibrated threshold" in capsys.readouterr().err


def test_report_commands(tmp_path, capsys):
    cfg = build_corpus().write(tmp_path / "c")
    out = tmp_path / "out"
    assert main(["report", str(cfg), "--out", str(out), "--format", "json"]) == 2
    data = json.loads((out / "report.json").read_text())
    assert data["summary"]["failed"] >= 1
    assert main(["audit-coherence", str(cfg), "--out", str(tmp_path / "coh")]) == 2
    assert (tmp_path / "coh" / "ecdf_TweetFeed.csv").exists()
    assert (tmp_path / "coh" / "labels.csv").read_text() == "label_type,tweets,new_ui_mementos,working,label_present\n"
    assert main(["audit-labels", str(cfg), "--out", str(tmp_path / "lab")]) == 2
    assert (tmp_path / "lab" / "labels.csv").read_text().splitlines()[1].startswith("FactCheck,3,")
    assert main(["report", str(tmp_path / "nope.json"), "--out", str(out)]) == 1


def test_serve_fixtures_subprocess(tmp_path, small_manifest):
    man = tmp_path / "m.json"
    man.write_text(json.dumps(small_manifest.to_dict()))
    reg = tmp_path / "reg.json"
    proc = subprocess.Popen([sys.executable, "-m", "replayaudit", "serve-fixtures", str(man), "--registry-out", str(reg)],
                            stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        assert line.startswith("serving 2 resources at http://127.0.0.1:")
        base = line.rsplit(" ", 1)[1].strip()
        for _ in range(50):
            if reg.exists():
                break
            time.sleep(0.05)
        assert json.loads(reg.read_text())["archives"][0]["id"] == "alpha"
        assert requests.get(f"{base}/alpha/timemap/link/{URI}", timeout=5).status_code == 200
    finally:
        proc.terminate()
        proc.wait(5)


def test_bad_manifest_is_fatal(tmp_path, capsys):
    (tmp_path / "m.json").write_text("{}")
    assert main(["serve-fixtures", str(tmp_path / "m.json")]) == 1
