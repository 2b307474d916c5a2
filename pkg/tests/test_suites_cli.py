import csv
import json

import pytest

from wexlab.cli import main
from wexlab.suites import SUITES, Scenario, ScenarioError, load_scenario, run_scenario


def test_scenario_rejects_unknown_keys():
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"suite": "rdf", "trails": 5})
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"trials": 5})
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"suite": "no-such-suite"}).resolved()


@pytest.mark.parametrize("cfg", [
    {"suite": "rdf", "n_cells": 1000},
    {"suite": "rdf", "p_list": [1]},
    {"suite": "lemma-weights", "range": [4, 2]},
    {"suite": "buckley-scan", "p": 2, "a_list": [1.5]},
    {"suite": "rdf", "weight": {"family": "gaussian"}},
    {"suite": "extrapolation-offdiag", "cases": [{"p": 2, "q": 2, "p0": 2, "q0": 2, "range": [1, 4],
                                                  "direction": "sideways"}]},
])
def test_invalid_parameters_raise(cfg):
    with pytest.raises(ScenarioError):
        Scenario.from_dict(cfg).resolved()


def test_to_dict_roundtrip(tmp_path):
    sc = Scenario.from_dict({"suite": "openness", "seed": 7, "trials": 3, "workers": 2})
    d = sc.to_dict()
    assert "workers" not in d and d["seed"] == 7
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    assert load_scenario(path).to_dict() == d


def test_every_suite_has_defaults():
    for name, suite in SUITES.items():
        sc = Scenario.from_dict({"suite": name}).resolved()
        assert sc.suite == name and sc.n_cells & (sc.n_cells - 1) == 0, name


def test_small_runs_pass():
    for cfg in ({"suite": "openness", "trials": 4, "power_trials": 2, "n_cells": 256},
                {"suite": "sparse-domination", "trials": 10, "n_cells": 64},
                {"suite": "extrapolation-diag", "trials": 3, "n_cells": 256}):
        rep = run_scenario(cfg)
        assert rep.passed, rep.summary()
        assert rep.environment["suite"] == cfg["suite"]


def test_report_independent_of_worker_count():
    cfg = {"suite": "lemma-weights", "seed": 3, "trials": 8, "power_trials": 4, "n_cells": 256}
    a = run_scenario({**cfg, "workers": 1}).to_json(include_timing=False)
    b = run_scenario({**cfg, "workers": 4}).to_json(include_timing=False)
    assert a == b
    c = run_scenario({**cfg, "seed": 4, "workers": 1}).to_json(include_timing=False)
    assert c != a


def test_cli_identities(capsys):
    assert main(["identities", "--count", "50"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in SUITES)


def test_cli_invalid_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"suite": "rdf", "bogus": 1}))
    assert main(["run", "--suite", "rdf", "--config", str(bad)]) == 2
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"suite": "openness"}))
    assert main(["run", "--suite", "rdf", "--config", str(other)]) == 2
    assert main(["run", "--suite", "rdf", "--config", str(tmp_path / "missing.json")]) == 2
    assert "invalid scenario" in capsys.readouterr().err


def test_cli_run_writes_report(tmp_path):
    out = tmp_path / "rep.json"
    code = main(["run", "--suite", "sparse-domination", "--trials", "5", "--n-cells", "64",
                 "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["suite"] == "sparse-domination" and data["checks"]


def test_cli_scan_csv_and_band(tmp_path):
    path = tmp_path / "rows.csv"
    code = main(["scan", "--suite", "buckley-scan", "--p", "2", "--a", "0", "0.5", "0.9",
                 "--n-cells", "512", "--trials", "2", "--band", "100", "200", "--csv", str(path)])
    # a band nobody can hit must fail, and the rows are still written
    assert code == 1
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["parameter", "lower_char", "upper_char", "measured", "allowed",
                             "slope_contribution"]
    assert len(rows) == 3
