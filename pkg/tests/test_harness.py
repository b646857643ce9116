import csv
import json
import subprocess
import sys

import pytest

from qkdake.cli import main
from qkdake.harness import (CATALOG, InvalidOverride, UnknownScenario, explain, list_scenarios,
                            resolve_params, run_scenario)

SMALL = {"trials": 3}


def test_catalog_contents_stable():
    names = list_scenarios()
    assert names == list_scenarios()
    assert names == ["honest-baseline", "intercept-full", "intercept-partial", "mitm-ideal",
                     "mitm-broken-auth", "reveal-matrix", "longterm-offline",
                     "universality-exhaustive", "reconcile-sweep"]


@pytest.mark.parametrize("name", list(CATALOG))
def test_every_scenario_runs(name):
    overrides = {} if name == "universality-exhaustive" else SMALL
    report = run_scenario(name, overrides)
    assert report.assertions
    json.loads(report.dumps())


def test_unknown_scenario():
    with pytest.raises(UnknownScenario, match="honest-baseline"):
        run_scenario("nonexistent")


def test_invalid_overrides():
    with pytest.raises(InvalidOverride):
        run_scenario("honest-baseline", {"trials": 0})
    with pytest.raises(InvalidOverride):
        run_scenario("honest-baseline", {"fraction": 0.5})
    with pytest.raises(InvalidOverride):
        run_scenario("intercept-full", {"sig": "rsa"})


def test_precedence():
    s = CATALOG["intercept-partial"]
    assert resolve_params(s)["fraction"] == 0.2
    assert resolve_params(s, config_file={"fraction": 0.4})["fraction"] == 0.4
    got = resolve_params(s, {"fraction": 0.1, "seed": None}, {"fraction": 0.4, "seed": 7})
    assert got["fraction"] == 0.1 and got["seed"] == 7


def test_report_reproducible_modulo_timing(tmp_path):
    a = run_scenario("intercept-partial", {"trials": 3, "seed": 5}, dump=tmp_path / "a.jsonl")
    b = run_scenario("intercept-partial", {"trials": 3, "seed": 5}, dump=tmp_path / "b.jsonl")
    assert a.dumps(timing=False) == b.dumps(timing=False)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_transcript_lines(tmp_path):
    run_scenario("honest-baseline", {"trials": 1}, dump=tmp_path / "t.jsonl")
    rows = [json.loads(l) for l in (tmp_path / "t.jsonl").read_text().splitlines()]
    ords = [r["ordinal"] for r in rows]
    assert ords == sorted(ords)
    for r in rows:
        assert {"ordinal", "channel", "sid_a", "sid_b", "tag", "payload"} <= set(r)
        bytes.fromhex(r["payload"])


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QKDAKE_OUT_DIR", str(tmp_path))
    run_scenario("universality-exhaustive")
    data = json.loads((tmp_path / "universality-exhaustive.json").read_text())
    assert data["passed"] and data["version"] and "timing" in data


def test_csv(tmp_path):
    run_scenario("reconcile-sweep", {"trials": 30}, csv_path=tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert rows[0]["scenario"] == "reconcile-sweep" and "recovery_rate" in rows[0]


def test_explain():
    text = explain("intercept-full")
    assert "fraction" in text and "1024" in text


class TestCli:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        assert "honest-baseline" in capsys.readouterr().out

    def test_explain(self, capsys):
        assert main(["explain", "reveal-matrix"]) == 0

    def test_pass_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["run", "reconcile-sweep", "--trials", "60", "--out", str(out), "--quiet"]) == 0
        assert json.loads(out.read_text())["passed"]
        assert "PASS" in capsys.readouterr().out

    def test_failing_assertion_exit_one(self, capsys):
        # 16 qubits leave no room for a key, so the baseline cannot pass
        assert main(["run", "honest-baseline", "--n1", "16", "--trials", "3", "--quiet"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_usage_errors_exit_two(self, capsys):
        assert main(["run", "nope"]) == 2
        assert main(["run", "universality-exhaustive", "--n1", "64"]) == 2

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"trials": 2, "seed": 3}))
        out = tmp_path / "r.json"
        main(["run", "mitm-ideal", "--config", str(cfg), "--seed", "4", "--out", str(out), "--quiet"])
        config = json.loads(out.read_text())["config"]
        assert config["trials"] == 2 and config["seed"] == 4

    def test_entry_point_module(self):
        proc = subprocess.run([sys.executable, "-m", "qkdake.cli", "list"], capture_output=True, text=True)
        assert proc.returncode == 0 and "reconcile-sweep" in proc.stdout
