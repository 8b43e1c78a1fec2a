import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from bayesmix.cli import main, parse_history, parse_k_range
from bayesmix.errors import ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MIRROR = str(CONFIGS / "mirror_bandits.json")
DETERMINISTIC = str(CONFIGS / "deterministic_bandits.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_horizon_geometric_half(capsys):
    code, out, _ = run(capsys, "horizon", "--discount", "geometric:0.5", "--k", "1..5")
    assert code == 0
    table = rows(out)
    assert table[0] == ["bayesmix.horizon.v1", "k", "gamma", "Gamma", "h_eff"]
    assert table[1][1:] == ["1", "0.5", "1.0", "0"]
    assert len(table) == 6
    assert all(r[4] == "0" for r in table[1:])


def test_horizon_finite_past_the_end(capsys):
    code, out, _ = run(capsys, "horizon", "--discount", "finite:2", "--k", "1,3")
    assert code == 0
    assert rows(out)[2][1:] == ["3", "0.0", "0.0", "undefined"]


def test_pareto_deterministic_bandits(capsys):
    code, out, _ = run(capsys, "pareto", "--class", DETERMINISTIC, "--horizon", "3", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["meta"]["verdict"] == "not dominated"
    assert len(doc["records"]) == 128
    assert all(r["balanced_ok"] and not r["dominates"] for r in doc["records"])


def test_act_reports_posterior(capsys):
    code, out, _ = run(capsys, "act", "--class", MIRROR, "--horizon", "3", "--history", "0:0:1")
    assert code == 0
    table = rows(out)
    assert table[1][2] == "0"
    assert float(table[1][5]) == pytest.approx(0.9, abs=1e-12)


def test_value_modes(capsys):
    code, out, _ = run(capsys, "value", "--class", MIRROR, "--horizon", "3", "--policy", "bayes")
    assert code == 0
    table = rows(out)
    assert [r[1] for r in table[1:]] == ["mixture", "env0", "env1"]
    code, out, _ = run(capsys, "value", "--class", MIRROR, "--discount", "geometric:0.5", "--eps", "0.01")
    assert code == 0
    first = rows(out)[1]
    assert first[4] == "discounted" and float(first[6]) <= 0.01


def test_simulate_is_reproducible(capsys):
    args = ["simulate", "--class", MIRROR, "--horizon", "6", "--cycles", "6", "--seed", "7", "--replicates", "3"]
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    _, threaded, _ = run(capsys, *args, "--threads", "3")
    assert first == second == threaded
    _, other, _ = run(capsys, *args[:-3], "8", "--replicates", "3")
    assert other != first


def test_posterior_trace(capsys):
    code, out, _ = run(capsys, "posterior", "--class", MIRROR, "--agent", "random", "--cycles", "20", "--seed", "1")
    assert code == 0
    table = rows(out)
    assert len(table) == 1 + 20 * 2
    assert all(r[8] == "true" for r in table[1:])


def test_converge_exact_bayes(capsys):
    code, out, _ = run(capsys, "converge", "--class", MIRROR, "--m-grid", "1,2,3", "--agent", "bayes")
    assert code == 0
    for r in rows(out)[1:]:
        assert float(r[5]) >= -1e-12 and float(r[5]) <= float(r[7]) + 1e-9


def test_exit_codes(capsys, tmp_path, monkeypatch):
    assert run(capsys, "act", "--class", MIRROR)[0] == 1
    assert run(capsys, "act", "--class", MIRROR, "--horizon", "2", "--history", "0:0")[0] == 1
    assert run(capsys, "act", "--class", str(tmp_path / "none.json"), "--horizon", "2")[0] == 1
    assert run(capsys, "horizon", "--discount", "geometric:2")[0] == 1
    assert run(capsys, "simulate", "--class", MIRROR, "--agent", "ete", "--cycles", "5")[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"environments": [{"kind": "bandit", "arms": [0.5]}], "weights": [-1.0]}))
    code, _, err = run(capsys, "act", "--class", str(bad), "--horizon", "1")
    assert code == 1 and "weights[0]" in err
    monkeypatch.setenv("BAYESMIX_MAX_POLICIES", "10")
    assert run(capsys, "pareto", "--class", MIRROR, "--horizon", "3")[0] == 2
    monkeypatch.setenv("BAYESMIX_MAX_NODES", "10")
    assert run(capsys, "value", "--class", MIRROR, "--horizon", "5")[0] == 2


def test_out_file(capsys, tmp_path):
    target = tmp_path / "h.json"
    assert run(capsys, "horizon", "--discount", "quadratic", "--k", "1", "--format", "json", "--out", str(target))[0] == 0
    doc = json.loads(target.read_text())
    assert doc["schema"] == "bayesmix.horizon.v1"
    assert doc["records"][0]["Gamma"] == pytest.approx(1.6449340668482264, abs=1e-15)


def test_parsers():
    assert parse_k_range("1..5") == [1, 2, 3, 4, 5]
    assert parse_k_range("2,7") == [2, 7]
    h = parse_history("0:0:1;1:0:0.0")
    assert h.actions == (0, 1) and h.percepts[0].reward == 1.0
    with pytest.raises(ValidationError):
        parse_history("0:0:1:4")
    with pytest.raises(ValidationError):
        parse_k_range("a..b")


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "bayesmix.cli", "horizon", "--discount", "finite:3", "--k", "1..3"],
                         capture_output=True, text=True, check=True).stdout
    assert out.splitlines()[1] == "0,1,1.0,3.0,1"
