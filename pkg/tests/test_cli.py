import csv
import io
import json

import pytest

from herald_opt.cli import (
    CSV_HEADER,
    EXIT_INVALID,
    EXIT_NO_SOLUTION,
    EXIT_OK,
    EXIT_ORACLE,
    Scenario,
    ScenarioError,
    main,
)
from reference_data import match_rows

BALANCED6 = [[1, 0], [0, 0], [1, 0], [0, 0], [1, 0], [0, 0], [1, 0]]


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_table1_csv(capsys):
    assert main(["table1"]) == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == CSV_HEADER
    assert len(rows) == 25
    parsed = [dict(zip(CSV_HEADER, map(float, r))) for r in rows[1:]]
    table = [{"n1": int(r["n1"]), "n2": int(r["n2"]), "nu": complex(r["Re_nu"], r["Im_nu"]),
              "s1": complex(r["Re_s1"], r["Im_s1"]), "s2": complex(r["Re_s2"], r["Im_s2"]),
              "X1": r["X1"], "X2": r["X2"], "p_S": r["p_S"]} for r in parsed]
    assert len(match_rows(table)) == 24


def test_table1_json_and_out_alias(capsys, tmp_path):
    code, doc = run_json(capsys, ["table1", "--out", "json"])
    assert code == EXIT_OK and doc["header"] == CSV_HEADER and len(doc["rows"]) == 24
    target = tmp_path / "t.csv"
    assert main(["table1", "--out", str(target)]) == EXIT_OK
    assert target.read_text().splitlines()[0] == ",".join(CSV_HEADER)


def test_singlerail(capsys):
    assert main(["singlerail", "--w-min", "0", "--w-max", "1", "--steps", "3", "--format", "json"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r["w"] for r in rows] == [0, 0.5, 1]
    assert rows[0]["p_S"] == pytest.approx(1 / 16)
    assert rows[2]["X"] == pytest.approx(1 / 3)
    assert main(["singlerail", "--steps", "2", "--w-max", "0.5", "--verify"]) == EXIT_OK
    text = capsys.readouterr().out.splitlines()
    assert text[0] == "w,X,p_S,p_S_solver"
    for line in text[1:]:
        _, _, p, q = map(float, line.split(","))
        assert p == pytest.approx(q, rel=1e-5)
    assert main(["singlerail", "--w-min", "2", "--w-max", "1"]) == EXIT_INVALID


def test_solve_core(capsys, tmp_path):
    path = write(tmp_path, {"mode": "solve-core", "pattern": [3, 3], "target": {"coefficients": BALANCED6}})
    code, doc = run_json(capsys, ["run", path])
    assert code == EXIT_OK
    assert len(doc["solutions"]) == 6


def test_optimize_ranked(capsys, tmp_path):
    path = write(tmp_path, {"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": BALANCED6, "parity": "even"}})
    code, doc = run_json(capsys, ["run", path])
    assert code == EXIT_OK
    ps = [c["p_S"] for c in doc["configurations"]]
    assert ps == sorted(ps, reverse=True)
    assert ps[0] == pytest.approx(0.013200601, abs=1e-8)


def test_optimize_single_photon(capsys, tmp_path):
    path = write(tmp_path, {"mode": "optimize", "pattern": [1], "target": {"coefficients": [[0, 0], [1, 0]]}})
    code, doc = run_json(capsys, ["run", path])
    assert code == EXIT_OK
    best = doc["configurations"][0]
    assert best["X"][0] == pytest.approx(0.5, abs=1e-8)
    assert best["p_S"] == pytest.approx(0.25, abs=1e-10)


def test_constrained_curve(capsys, tmp_path):
    path = write(tmp_path, {"mode": "constrained", "pattern": [3, 3], "target": {"coefficients": BALANCED6},
                            "mu2_sweep": {"start": 0.4, "stop": 0.95, "steps": 4}})
    code, doc = run_json(capsys, ["run", path])
    assert code == EXIT_OK
    curve = doc["curve"]
    assert len(curve) == 4
    ps = [row["p_S"] for row in curve]
    assert all(b >= a - 1e-12 for a, b in zip(ps, ps[1:]))
    for row in curve:
        assert row["max_eigenvalue"] <= row["mu2"] + 1e-9


def test_oracle_check_passes(capsys, tmp_path):
    path = write(tmp_path, {"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": BALANCED6}})
    code, doc = run_json(capsys, ["oracle-check", path])
    assert code == EXIT_OK
    assert all(r["status"] == "pass" for r in doc["reports"])


def test_oracle_check_inconclusive_exit(capsys, tmp_path):
    path = write(tmp_path, {"mode": "oracle-check", "pattern": [1],
                            "target": {"coefficients": [[0, 0], [1, 0]], "output_squeezing_r": 3.0},
                            "spec": {"s": [[0, 0]]}, "damping": [0.001]})
    code, doc = run_json(capsys, ["oracle-check", path])
    assert code == EXIT_ORACLE
    assert doc["reports"][0]["status"] == "inconclusive"


def test_no_solution_exit(capsys, tmp_path):
    path = write(tmp_path, {"mode": "optimize", "pattern": [1, 1, 1],
                            "target": {"coefficients": [[0, 0], [1, 0], [0, 0], [1, 0]]},
                            "solver": {"start_count": 1, "max_iter": 1}})
    assert main(["run", path]) == EXIT_NO_SOLUTION
    assert "no physical solution" in capsys.readouterr().err


@pytest.mark.parametrize("doc,field", [
    ({"mode": "bogus"}, "mode"),
    ({"mode": "optimize"}, "pattern"),
    ({"mode": "optimize", "pattern": [3, -1], "target": {"coefficients": BALANCED6}}, "pattern"),
    ({"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": [1, 0]}}, "target.coefficients"),
    ({"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": BALANCED6, "parity": "odd"}}, "target.parity"),
    ({"mode": "optimize", "pattern": [3, 2], "target": {"coefficients": BALANCED6}}, "pattern"),
    ({"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": BALANCED6}, "squeezing_bound_mu2": 1.5},
     "squeezing_bound_mu2"),
    ({"mode": "constrained", "pattern": [3, 3], "target": {"coefficients": BALANCED6}}, "mu2_sweep"),
    ({"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": BALANCED6}, "solver": {"start_count": 0}},
     "solver"),
    ({"mode": "optimize", "pattern": [3, 3], "target": {"coefficients": BALANCED6}, "solver": {"speed": 1}},
     "solver"),
])
def test_invalid_fields_are_named(capsys, tmp_path, doc, field):
    with pytest.raises(ScenarioError) as err:
        Scenario.from_dict(doc)
    assert err.value.field == field
    assert main(["run", write(tmp_path, doc)]) == EXIT_INVALID
    assert field in capsys.readouterr().err


def test_unreadable_scenario(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == EXIT_INVALID
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_INVALID


def test_deterministic_output(capsys, tmp_path):
    path = write(tmp_path, {"mode": "optimize", "pattern": [4, 3],
                            "target": {"coefficients": [[0, 0], [1, 0], [0, 0], [1, 0], [0, 0], [1, 0], [0, 0], [1, 0]]}})
    main(["run", path])
    first = capsys.readouterr().out
    main(["run", path])
    assert capsys.readouterr().out == first
