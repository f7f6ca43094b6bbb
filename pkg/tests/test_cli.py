import json

import pytest

from nlsgraph import cli
from nlsgraph import shooting as sh

G31 = ["-N", "3", "-K", "1", "--alphas", "0.7071067811865476", "1", "1"]


def run(argv, tmp_path):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_shoot_writes_report(tmp_path, capsys):
    assert run(["shoot", *G31, "--a", "-0.7", "--assert-theorem"], tmp_path) == 0
    rep = json.loads((tmp_path / "shooting.json").read_text())
    assert rep["morse_index"] == 1 and rep["zero_multiplicity"] == 1
    assert "morse_index 1" in capsys.readouterr().out


def test_shoot_is_deterministic(tmp_path):
    for sub in ("r1", "r2"):
        assert run(["shoot", *G31, "--a", "0.7"], tmp_path / sub) == 0
    assert (tmp_path / "r1/shooting.json").read_bytes() == (tmp_path / "r2/shooting.json").read_bytes()


def test_failed_assertion_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(sh, "predicted_counts", lambda g, a, pattern=None: (7, 0))
    assert run(["shoot", *G31, "--a", "0.7", "--assert-theorem"], tmp_path) == cli.EXIT_ASSERT


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"graph": {"edges": 3,,}}')
    assert run(["shoot", "--config", str(bad)], tmp_path) == cli.EXIT_CONFIG
    assert "line 1, column" in capsys.readouterr().err


def test_bad_field_named(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": {"edges": "three"}}))
    assert run(["shoot", "--config", str(cfg)], tmp_path) == cli.EXIT_CONFIG
    assert "graph.edges" in capsys.readouterr().err


def test_constraint_violation(tmp_path):
    assert run(["shoot", "-N", "3", "-K", "1", "--alphas", "1", "1", "1"], tmp_path) == cli.EXIT_CONFIG


def test_set_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": {"edges": 4, "incoming": 2}, "a": 0.3}))
    assert run(["shoot", "--config", str(cfg), "--set", "a=-0.3"], tmp_path) == 0
    assert json.loads((tmp_path / "shooting.json").read_text())["a"] == -0.3


def test_families(tmp_path):
    assert run(["families", "-N", "6", "-K", "3"], tmp_path) == 0
    fam = json.loads((tmp_path / "families.json").read_text())
    assert fam["count_families"] == 10
    assert len(fam["patterns"]) == 20


def test_evolve_stationary(tmp_path):
    argv = ["evolve", *G31, "--a", "0.7", "--mode", "stationary", "--spacing", "0.05",
            "--tau", "0.02", "--t-end", "0.2"]
    assert run(argv, tmp_path) == 0
    header = (tmp_path / "series.csv").read_text().splitlines()[0]
    assert header.startswith("t,Q,E,P")


def test_verify_filter(tmp_path, capsys):
    assert run(["verify", "--filter", "A1"], tmp_path) == 0
    assert "A1   PASS" in capsys.readouterr().out
    assert json.loads((tmp_path / "verify.json").read_text())[0]["passed"]


def test_verify_unknown_filter(tmp_path):
    assert run(["verify", "--filter", "nonsense"], tmp_path) == cli.EXIT_CONFIG


@pytest.mark.parametrize("argv", [["frobnicate"], []])
def test_usage_errors(argv):
    with pytest.raises(SystemExit):
        cli.main(argv)
