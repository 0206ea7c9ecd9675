from __future__ import annotations

import json
import subprocess
import sys

import pytest

from opbench.backend import MemoryBackend, restore_from_file
from opbench.cli import main
from opbench.prescription import builtin, builtin_text, dataset_bytes, load_dataset

SMALL_GRAPH = ["--override", "dataset.params.n=60", "--override", "dataset.params.m=240"]


def test_list(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in lines] == ["fast_storage", "log_monitoring", "pagerank"]


def test_validate_ok_and_broken(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(builtin_text("pagerank"))
    assert main(["validate", str(good)]) == 0
    broken = tmp_path / "broken.json"
    broken.write_text(builtin_text("pagerank").replace('"seed": 1,', '"seed": 1', 1))
    assert main(["validate", str(broken)]) == 2
    assert "line 4 column 3" in capsys.readouterr().err  # the token after the missing comma


def test_validate_reports_every_diagnostic(tmp_path, capsys):
    doc = json.loads(builtin_text("log_monitoring"))
    doc["streams"][1]["pipeline"][2]["field"] = "latency"
    doc["operations"].remove("filter")
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", str(path)]) == 2
    err = capsys.readouterr().err
    assert "undeclared-operation" in err and "unknown-field" in err


def run_pagerank(tmp_path, tag, *extra, env_seed=None, monkeypatch=None):
    report, results = tmp_path / f"{tag}.report.json", tmp_path / f"{tag}.results.json"
    if monkeypatch is not None and env_seed is not None:
        monkeypatch.setenv("BIGOP_SEED", str(env_seed))
    code = main(["run", "--builtin", "pagerank", "--report", str(report), "--results", str(results),
                 *SMALL_GRAPH, *extra])
    assert code == 0
    return json.loads(report.read_text()), json.loads(results.read_text())


def test_run_is_reproducible(tmp_path):
    r1, res1 = run_pagerank(tmp_path, "a", "--seed", "7")
    r2, res2 = run_pagerank(tmp_path, "b", "--seed", "7")
    assert res1 == res2 and r1["seed"] == 7
    ranks = [e["record"]["rank"] for e in res1["pagerank"]]
    assert ranks == sorted(ranks, reverse=True) and sum(ranks) == pytest.approx(1.0, abs=1e-9)
    assert list(r1["streams"][0]) == ["name", "ops_completed", "ops_failed", "termination_reason", "active_seconds"]
    assert "duration_s" in r1
    _, res3 = run_pagerank(tmp_path, "c", "--seed", "8")
    assert res3 != res1


def test_seed_from_environment_and_flag_precedence(tmp_path, monkeypatch):
    env, _ = run_pagerank(tmp_path, "env", env_seed=11, monkeypatch=monkeypatch)
    assert env["seed"] == 11
    flag, _ = run_pagerank(tmp_path, "flag", "--seed", "12", env_seed=11, monkeypatch=monkeypatch)
    assert flag["seed"] == 12


def test_bad_environment_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("BIGOP_SEED", "abc")
    assert main(["run", "--builtin", "pagerank", "--report", str(tmp_path / "r.json")]) == 2


def test_invalidating_override_exits_2(tmp_path, capsys):
    code = main(["run", "--builtin", "fast_storage", "--report", str(tmp_path / "r.json"),
                 "--override", "operations=[\"put\"]"])
    assert code == 2
    assert "invalid prescription" in capsys.readouterr().err
    assert not (tmp_path / "r.json").exists()


def test_run_failure_exits_1(tmp_path, capsys):
    doc = json.loads(builtin_text("log_monitoring"))
    doc["dataset"] = {"set": "logs", "import_path": str(tmp_path / "missing.log"), "target_size_bytes": 1000}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    assert main(["run", "--prescription", str(path), "--report", str(tmp_path / "r.json")]) == 1
    assert "phase" in capsys.readouterr().err


def test_fake_clock_run(tmp_path):
    report = tmp_path / "r.json"
    assert main(["run", "--builtin", "fast_storage", "--clock", "fake", "--report", str(report),
                 "--override", "streams.0.termination.op_count=500"]) == 0
    doc = json.loads(report.read_text())
    kv = doc["streams"][0]
    assert kv["ops_completed"] + kv["ops_failed"] == 500
    assert doc["streams"][1]["termination_reason"] == "co_termination"


@pytest.mark.parametrize("argv", [[], ["run"], ["run", "--builtin", "nope", "--report", "r"], ["frobnicate"],
                                  ["run", "--builtin", "pagerank"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_gen_data_from_generator_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "records", "seed": 3, "params": {"count": 25}, "set": "t"}))
    out = tmp_path / "snap.bin"
    assert main(["gen-data", "--spec", str(spec), "--out", str(out)]) == 0
    restored = restore_from_file(out)
    assert restored.cardinality("t") == 25
    assert main(["gen-data", "--spec", str(spec), "--out", str(tmp_path / "again.bin")]) == 0
    assert out.read_bytes() == (tmp_path / "again.bin").read_bytes()


def test_gen_data_from_prescription(tmp_path):
    spec = tmp_path / "p.json"
    spec.write_text(builtin_text("pagerank"))
    out = tmp_path / "snap.bin"
    assert main(["gen-data", "--spec", str(spec), "--out", str(out)]) == 0
    direct = MemoryBackend()
    load_dataset(builtin("pagerank"), direct)
    assert dataset_bytes(restore_from_file(out)) == dataset_bytes(direct)


def test_gen_data_bad_spec(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "trees"}))
    assert main(["gen-data", "--spec", str(spec), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "opbench", "list"], capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout.count("\n") == 3
