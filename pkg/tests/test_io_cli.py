import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from measent import linalg as la
from measent.cli import main
from measent.errors import InputError
from measent.io import decode_matrix, dumps, encode_matrix, load_problem, parse_problem

from helpers import DEPOLARIZING, I2, PLUS, rng

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def write(path: Path, obj) -> Path:
    path.write_text(dumps(obj) + "\n")
    return path


def states_file(tmp_path, rho, sigma, name="p.json", **extra):
    return write(tmp_path / name, {"kind": "states", "rho": encode_matrix(rho), "sigma": encode_matrix(sigma), **extra})


def channel_file(tmp_path, kn, km, name="c.json", **extra):
    return write(tmp_path / name, {
        "kind": "channel", "d_A": 2, "d_B": 2,
        "N": {"kraus": [encode_matrix(k) for k in kn]},
        "M": {"kraus": [encode_matrix(k) for k in km]}, **extra,
    })


def run(argv) -> int:
    return main([str(a) for a in argv])


def report(path: Path) -> dict:
    return json.loads(path.read_text())


# ------------------------------------------------------------ encoding


def test_matrix_round_trip_is_exact():
    m = la.random_density(3, rng(50))
    text = dumps({"m": encode_matrix(m)})
    assert np.array_equal(decode_matrix(json.loads(text)["m"], "m"), m)


def test_non_finite_written_as_null():
    assert dumps({"x": float("inf")}).count("null") == 1


def test_decode_diagnostics_name_the_field():
    with pytest.raises(InputError, match=r"rho\[1\]\[0\]"):
        decode_matrix([[[1, 0], [0, 0]], [[0, "a"], [1, 0]]], "rho")
    with pytest.raises(InputError, match="alpha"):
        parse_problem({"kind": "states", "alpha": 0.5, "rho": [[[1, 0]]], "sigma": [[[1, 0]]]})


def test_malformed_json_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "states",\n  "rho": [}\n')
    with pytest.raises(InputError, match="line 2"):
        load_problem(bad)
    assert run(["states-renyi", "--input", bad, "--alpha", "1/2"]) == 4


def test_kraus_and_choi_forms_agree(tmp_path):
    a = load_problem(channel_file(tmp_path, [I2], DEPOLARIZING))
    b = parse_problem({"kind": "channel", "d_A": 2, "d_B": 2, "N": {"choi": encode_matrix(la.choi_from_kraus([I2]))},
                       "M": {"choi": encode_matrix(np.eye(4) / 2)}})
    assert np.allclose(a.gammaN, b.gammaN) and np.allclose(a.gammaM, b.gammaM)


# ------------------------------------------------------------ exit codes


def test_identical_states(tmp_path):
    rho = la.random_density(2, rng(51))
    out = tmp_path / "r.json"
    assert run(["states-renyi", "--input", states_file(tmp_path, rho, rho), "--alpha", "1/2", "--out", out]) == 0
    assert abs(report(out)["value"]) < 1e-7
    assert run(["verify", out]) == 0


def test_orthogonal_pure_states(tmp_path):
    out = tmp_path / "r.json"
    path = states_file(tmp_path, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert run(["states-relent", "--input", path, "--out", out]) == 2
    rep = report(out)
    assert rep["infinite"] is True and rep["value"] is None
    assert run(["verify", out]) == 0


def test_infeasible_energy(tmp_path, capsys):
    out = tmp_path / "r.json"
    path = channel_file(tmp_path, [I2], DEPOLARIZING,
                        energy={"H": encode_matrix(np.diag([0.0, 1.0])), "E": -1.0})
    assert run(["channel-relent", "--input", path, "--out", out]) == 2
    assert "infeasible constraint" in capsys.readouterr().err
    assert report(out)["infeasible_constraint"] is True


def test_wrong_kind_is_malformed(tmp_path):
    path = states_file(tmp_path, np.eye(2) / 2, np.eye(2) / 2)
    assert run(["channel-renyi", "--input", path, "--alpha", "1/2"]) == 4


def test_iteration_failure_exit_code(tmp_path, monkeypatch):
    import measent.report as rep
    from measent.sdp import Tolerances

    monkeypatch.setattr(rep, "_tolerances", lambda p: Tolerances(max_iter=2))
    path = states_file(tmp_path, la.random_density(2, rng(52)), la.random_density(2, rng(53)))
    out = tmp_path / "r.json"
    assert run(["states-renyi", "--input", path, "--alpha", "2", "--out", out]) == 3
    assert report(out)["status"] == "numerical-failure"


# ------------------------------------------------------------ verification


def _fresh(tmp_path) -> Path:
    rho, sigma = la.random_density(2, rng(54)), la.random_density(2, rng(55))
    out = tmp_path / "r.json"
    assert run(["states-renyi", "--input", states_file(tmp_path, rho, sigma), "--alpha", "3/4", "--out", out]) == 0
    return out


def test_tampered_value_fails(tmp_path, capsys):
    out = _fresh(tmp_path)
    rep = report(out)
    rep["value"] += 0.01
    write(out, rep)
    assert run(["verify", out]) == 5
    assert "value" in capsys.readouterr().err


def test_zeroed_measurement_column_fails(tmp_path):
    out = _fresh(tmp_path)
    rep = report(out)
    for row in rep["measurement"]["vectors"]:
        row[0] = [0.0, 0.0]
    write(out, rep)
    assert run(["verify", out]) == 5


def test_tampered_problem_breaks_digest(tmp_path):
    out = _fresh(tmp_path)
    rep = report(out)
    rep["problem"]["seed"] = 7
    write(out, rep)
    assert run(["verify", out]) == 5


def test_report_is_deterministic(tmp_path):
    path = channel_file(tmp_path, [I2], DEPOLARIZING, alpha="3/4")
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert run(["channel-renyi", "--input", path, "--out", out]) == 0
        rep = report(out)
        rep.pop("wall_time")
        texts.append(dumps(rep))
    assert texts[0] == texts[1]


def test_flags_override_file(tmp_path):
    path = states_file(tmp_path, np.diag([0.75, 0.25]), np.diag([0.5, 0.5]), alpha="1/2")
    out = tmp_path / "r.json"
    assert run(["states-renyi", "--input", path, "--alpha", "2", "--out", out]) == 0
    assert abs(report(out)["value"] - np.log(1.25)) < 1e-7


def test_oracle_command(tmp_path):
    path = states_file(tmp_path, np.diag([1.0, 0.0]), PLUS, alpha="1/2")
    out = tmp_path / "r.json"
    assert run(["oracle", "--input", path, "--budget", "200", "--seed", "3", "--out", out]) == 0
    assert abs(report(out)["value"] - np.log(2)) < 1e-4
    assert run(["verify", out]) == 0


@pytest.mark.parametrize("name, command", [
    ("qubit_fidelity.json", "states-renyi"),
    ("qubit_relent.json", "states-relent"),
    ("channel_depolarizing.json", "channel-renyi"),
])
def test_shipped_examples_round_trip(tmp_path, name, command):
    out = tmp_path / "r.json"
    assert run([command, "--input", PROBLEMS / name, "--out", out]) == 0
    assert run(["verify", out]) == 0


def test_batch_mode(tmp_path):
    src = tmp_path / "in"
    src.mkdir()
    states_file(src, np.diag([0.75, 0.25]), np.diag([0.5, 0.5]), name="a.json")
    states_file(src, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), name="b.json")
    assert run(["states-relent", "--input", src, "--jobs", "2"]) == 2
    reports = sorted(p.name for p in (src / "reports").iterdir())
    assert reports == ["a.report.json", "b.report.json"]
    assert run(["verify", src / "reports" / "a.report.json"]) == 0


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "measent.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "states-renyi" in proc.stdout
