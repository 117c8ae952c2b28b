import csv
import json

import numpy as np
import pytest

from robustmax.cli import main

STEP = {
    "utility": {"knots": [0, 1], "values": [0, 1], "slopes": [0], "tail_slope": 0},
    "space": {"p": ["1/2", "1/2"], "w": [2, 2]},
    "pricing": {"psi": [0.8, 1.2]},
    "family": [[1, 1]],
    "budget": {"x": 0.5},
}


@pytest.fixture
def step_file(tmp_path):
    path = tmp_path / "step.json"
    path.write_text(json.dumps(STEP))
    return path


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_concavify_step(tmp_path, step_file):
    out, table = tmp_path / "env.json", tmp_path / "s.csv"
    assert main(["concavify", str(step_file), "-o", str(out), "--csv", str(table)]) == 0
    env = json.loads(out.read_text())["envelope"]
    assert env["knots"] == [0.0, 1.0] and env["slopes"] == [1.0]
    header, rows = read_csv(table)
    assert header == ["x", "U", "Uc"]
    np.testing.assert_allclose(rows[:, 2], np.minimum(rows[:, 0], 1.0))


def test_concavify_concave_input(tmp_path):
    data = dict(STEP, utility={"knots": [0, 1], "values": [0, 1], "slopes": [1], "tail_slope": 0})
    table = tmp_path / "s.csv"
    assert main(["concavify", write(tmp_path, "c.json", data), "-o", str(tmp_path / "e.json"), "--csv", str(table)]) == 0
    _, rows = read_csv(table)
    np.testing.assert_array_equal(rows[:, 1], rows[:, 2])


def test_concavify_bad_knots(tmp_path, capsys):
    data = dict(STEP, utility={"knots": [0, 0], "values": [0, 1], "slopes": [0], "tail_slope": 0})
    assert main(["concavify", write(tmp_path, "bad.json", data)]) == 2
    assert "knot index 1" in capsys.readouterr().err


def test_improve_example(tmp_path, step_file):
    pay = write(tmp_path, "pay.json", {"states": [0.5, 0.5]})
    out = tmp_path / "out.json"
    assert main(["improve", str(step_file), pay, "--density", "0", "-o", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["plan"]["cost"]["before"] == pytest.approx(0.5)
    assert res["plan"]["cost"]["after"] == pytest.approx(0.4)
    assert res["payoff"]["states"] == [[[1.0, 1.0]], [[0.0, 1.0]]]
    assert res["plan"]["classes"][0]["balance_residual"] < 1e-12


def test_improve_empty_gap_set(tmp_path, step_file):
    pay = write(tmp_path, "pay.json", {"states": [1.0, 0.0]})
    out = tmp_path / "out.json"
    assert main(["improve", str(step_file), pay, "-o", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["payoff"]["states"] == [[[1.0, 1.0]], [[0.0, 1.0]]]
    assert res["plan"]["classes"] == [] and res["plan"]["gap_slots"] == []


def test_improve_errors(tmp_path, step_file):
    assert main(["improve", str(step_file), str(tmp_path / "missing.json")]) == 2
    data = dict(STEP, family=[[1, 1], [2, 0]])
    pay = write(tmp_path, "pay.json", {"states": [0.5, 0.5]})
    assert main(["improve", write(tmp_path, "ne.json", data), pay, "--density", "1"]) == 3


def test_solve_symmetric(tmp_path):
    data = dict(STEP, pricing={"psi": [1, 1]}, family=[[1.2, 0.8], [0.8, 1.2]])
    data["utility"] = {"knots": [0, 1], "values": [0, 1], "slopes": [1], "tail_slope": 0}
    out = tmp_path / "s.json"
    assert main(["solve", write(tmp_path, "sym.json", data), "-o", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["supinf"]["value"] == pytest.approx(0.5) == res["infsup"]["value"]


def test_verify_symmetric(tmp_path, capsys):
    data = dict(STEP, pricing={"psi": [1, 1]}, family=[[1.2, 0.8], [0.8, 1.2]])
    report = tmp_path / "r.json"
    assert main(["verify", write(tmp_path, "sym.json", data), "-o", str(report)]) == 0
    text = capsys.readouterr().out
    assert text.count("[") >= 8 and "violated" not in text
    assert len(json.loads(report.read_text())["quantities"]) == 8


def test_verify_trivial_regime(tmp_path, capsys):
    data = dict(STEP, space={"p": [0.5, 0.5], "w": [0.5, 0.5]}, budget={"x": 1.0})
    assert main(["verify", write(tmp_path, "t.json", data), "--constrained"]) == 0
    assert "trivial regime" in capsys.readouterr().out


def test_verify_ensemble_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--ensemble", "3", "--seed", "7", "-o", str(a)]) == 0
    assert main(["verify", "--ensemble", "3", "--seed", "7", "-o", str(b)]) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    da.pop("runtime"), db.pop("runtime")
    assert da == db


def test_verify_violation_exit_code(tmp_path, monkeypatch):
    from robustmax import diagram

    real = diagram.judge
    monkeypatch.setattr(diagram, "judge", lambda *a: (real(*a)[0], 0.0, "violated"))
    data = dict(STEP, pricing={"psi": [1, 1]})
    assert main(["verify", write(tmp_path, "v.json", data)]) == 1


def test_verify_usage_errors(tmp_path):
    assert main(["verify"]) == 2
    assert main(["verify", "--ensemble", "1", "--tolerance", "-1"]) == 2
    assert main(["bogus"]) == 2


def test_generate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["generate", "--seed", "42", "--states", "3", "--extremes", "2", "-o", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["concavify", str(a), "-o", str(tmp_path / "e.json")]) == 0


def test_generate_concave_and_oracle_limits(tmp_path):
    out = tmp_path / "c.json"
    assert main(["generate", "--seed", "1", "--kinks", "0", "-o", str(out)]) == 0
    from robustmax.instance import load_instance

    assert load_instance(out).curve.is_concave()
    assert main(["generate", "--states", "9", "--oracle-safe"]) == 2
