import json
import subprocess
import sys

import pytest

from shrinkcomb.cli import main


def write_cfg(path, **extra):
    doc = {
        "scenario": {"data_len": 100, "master_seed": 9},
        "sweep": {"kind": "ue_power_dbm", "values": [10, 18]},
        "trials": 4,
    }
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return path


def test_run_writes_outputs(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--trace"]) == 0
    for name in ("sweep.csv", "per_ue.csv", "trace.csv", "sweep.svg", "run.json"):
        assert (out / name).exists(), name
    summary = json.loads((out / "run.json").read_text())
    assert summary["trials_per_point"] == 4
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 5
    assert all(line.endswith(",") for line in lines[1:])


def test_overrides_and_timing(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--trials", "2",
                 "--seed", "3", "--timing", "--no-plot"]) == 0
    assert not (out / "sweep.svg").exists()
    rows = (out / "sweep.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[3] == "2" and r.split(",")[-1] != "" for r in rows)


def test_seed_changes_results(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1", "--no-plot"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2", "--no-plot"])
    assert (tmp_path / "a/per_ue.csv").read_text() != (tmp_path / "b/per_ue.csv").read_text()


def test_plot_subcommand(tmp_path):
    cfg = write_cfg(tmp_path / "c.json")
    main(["run", "--config", str(cfg), "--out", str(tmp_path), "--no-plot"])
    assert main(["plot", "--csv", str(tmp_path / "sweep.csv"), "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").read_text().startswith("<svg")


@pytest.mark.parametrize("doc", [
    {"scenario": {"pilot_len": 2}},
    {"scenario": {}, "trials": -1},
    {"scenario": {"unknown_key": 1}},
])
def test_bad_config_reports_json_error(tmp_path, capsys, doc):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "x")]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and err["message"]


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "error" in json.loads(capsys.readouterr().err.strip())


def test_validate_subprocess():
    proc = subprocess.run([sys.executable, "-m", "shrinkcomb", "validate"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert len(lines) == 5 and all(line.startswith("PASS") for line in lines)
