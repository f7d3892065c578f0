import csv
import io
import json
import math

import numpy as np
import pytest

from robustmdp.bench import (
    CSV_HEADER,
    BenchSpec,
    load_bench_spec,
    parse_setting,
    residual_ratio,
    run_bench,
    setting_id,
    write_csv,
)
from robustmdp.checks import run_oracle_checks
from robustmdp.cli import cli_main, resolve_threads
from robustmdp.errors import InvalidConfig
from robustmdp.mdp import NormIndex, Rect


def test_setting_ids_round_trip():
    for text in ["nr", "sa-p1", "sa-p2", "s-pinf", "s-p10", "sa-p2.5"]:
        rect, p = parse_setting(text)
        assert setting_id(rect, p) == text
    assert parse_setting({"rect": "s", "p": 2}) == (Rect.S, NormIndex(2))
    with pytest.raises(InvalidConfig):
        parse_setting("x-p2")
    with pytest.raises(InvalidConfig):
        parse_setting({"p": 2})


def test_spec_validation():
    with pytest.raises(InvalidConfig):
        BenchSpec(repeats=2)
    with pytest.raises(InvalidConfig):
        BenchSpec(iters=5)
    with pytest.raises(InvalidConfig):
        BenchSpec(gamma=1.0)


def test_residual_ratio_of_geometric_sequence():
    assert residual_ratio(0.9 ** np.arange(100)) == pytest.approx(0.9)
    assert math.isnan(residual_ratio([0.0, 0.0]))


def test_load_spec(tmp_path):
    path = tmp_path / "b.toml"
    path.write_text('sizes = [[5, 3]]\nsettings = ["s-p2", {rect = "sa", p = "inf"}]\n'
                    "repeats = 3\niters = 10\n")
    spec = load_bench_spec(path)
    assert spec.sizes == [(5, 3)]
    assert spec.settings == [(Rect.S, NormIndex(2)), (Rect.SA, NormIndex(math.inf))]
    path.write_text("sizes = [[5, 3]]\ncolour = 1\n")
    with pytest.raises(InvalidConfig):
        load_bench_spec(path)
    path.write_text("sizes = [[5, 3]\n")
    with pytest.raises(InvalidConfig):
        load_bench_spec(path)


def test_run_bench_rows():
    spec = BenchSpec(sizes=[(6, 3), (8, 2)], settings=[parse_setting("s-p1"),
                     parse_setting("sa-p3")], repeats=3, iters=30)
    rows = run_bench(spec)
    assert [(r.setting, r.S) for r in rows] == [
        ("nr", 6), ("s-p1", 6), ("sa-p3", 6), ("nr", 8), ("s-p1", 8), ("sa-p3", 8)]
    for r in rows:
        assert r.relative_cost >= 0 and r.ms_per_iter > 0
        assert spec.gamma - 0.05 <= r.residual_ratio <= spec.gamma + 0.02
    assert rows[0].relative_cost == 1.0
    buf = io.StringIO()
    write_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 7


def test_threads_precedence(monkeypatch):
    monkeypatch.delenv("ROBUSTMDP_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("ROBUSTMDP_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("ROBUSTMDP_THREADS", "lots")
    with pytest.raises(InvalidConfig):
        resolve_threads(None)


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "m.json"
    assert cli_main(["gen", "--S", "3", "--A", "2", "--seed", "7", "-o", str(path)]) == 0
    return path


def test_gen_then_solve(instance_file, tmp_path, capsys):
    out = tmp_path / "v.json"
    assert cli_main(["solve", str(instance_file), "--rect", "none", "-o", str(out)]) == 0
    result = json.loads(out.read_text())
    assert len(result["value"]) == 3 and result["converged"]
    assert np.allclose(np.sum(result["policy"], axis=1), 1.0)


def test_robust_solve_is_dominated(instance_file, tmp_path):
    nr, rob = tmp_path / "nr.json", tmp_path / "s.json"
    assert cli_main(["solve", str(instance_file), "-o", str(nr)]) == 0
    assert cli_main(["solve", str(instance_file), "--rect", "s", "--p", "2",
                     "--alpha", "0.1", "--beta", "0.1", "-o", str(rob)]) == 0
    a = np.array(json.loads(nr.read_text())["value"])
    b = np.array(json.loads(rob.read_text())["value"])
    assert (b <= a).all()


def test_qvi_and_threads(instance_file, tmp_path, monkeypatch):
    monkeypatch.setenv("ROBUSTMDP_THREADS", "2")
    out = tmp_path / "q.json"
    assert cli_main(["solve", str(instance_file), "--rect", "sa", "--p", "inf",
                     "--alpha", "0.1", "--beta", "0.05", "--method", "qvi",
                     "-o", str(out)]) == 0
    assert json.loads(out.read_text())["converged"]


def test_eval_matches_solve(instance_file, tmp_path):
    sol = tmp_path / "s.json"
    flags = ["--rect", "s", "--p", "2", "--alpha", "0.1", "--beta", "0.1"]
    assert cli_main(["solve", str(instance_file), *flags, "-o", str(sol)]) == 0
    ev = tmp_path / "e.json"
    assert cli_main(["eval", str(instance_file), str(sol), *flags, "-o", str(ev)]) == 0
    a = np.array(json.loads(sol.read_text())["value"])
    b = np.array(json.loads(ev.read_text())["value"])
    assert np.max(np.abs(a - b)) <= 2e-6


def test_exit_codes(instance_file, tmp_path, capsys):
    assert cli_main(["solve", str(instance_file), "--bogus"]) == 1
    assert cli_main(["frobnicate"]) == 1
    assert cli_main(["solve", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"S": 1, "A": 1, "gamma": 0.5, "P0": [[[0.5]]], "R0": [[0]]}')
    assert cli_main(["solve", str(bad)]) == 1
    assert cli_main(["solve", str(instance_file), "--max-iters", "2"]) == 2
    assert cli_main(["solve", str(instance_file), "--rect", "s", "--p", "0.5"]) == 1
    pol = tmp_path / "p.json"
    pol.write_text("[[0.5, 0.6], [1, 0], [1, 0]]")
    assert cli_main(["eval", str(instance_file), str(pol)]) == 1
    err = capsys.readouterr().err
    assert "robustmdp" in err


def test_bench_command(tmp_path):
    spec = tmp_path / "b.toml"
    spec.write_text('sizes = [[5, 3]]\nsettings = ["nr", "s-p2"]\nrepeats = 3\niters = 20\n')
    out = tmp_path / "out.csv"
    assert cli_main(["bench", str(spec), "-o", str(out), "--threads", "1"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["setting"] for r in rows] == ["nr", "s-p2"]
    assert float(rows[0]["relative_cost"]) == 1.0


def test_oracle_check_command(tmp_path):
    out = tmp_path / "o.csv"
    assert cli_main(["oracle-check", "--cases", "3", "--tols", "1e-6,1e-9",
                     "--samples", "2000", "-o", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert {r["check"] for r in rows} >= {"kappa", "waterfill", "inner-min-s", "vi-reference"}
    assert all(r["passed"] == "true" for r in rows)
    assert {r["inner_tol"] for r in rows} == {"1e-06", "1e-09"}
    assert cli_main(["oracle-check", "--tols", "abc"]) == 1


def test_oracle_checks_api():
    rows = run_oracle_checks(seed=1, cases=2, tols=[1e-8], samples=500)
    assert all(r.passed for r in rows)
