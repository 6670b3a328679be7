import json
import subprocess
import sys

import numpy as np
import pytest

from akmeasure import cli, spectral, symplectic
from akmeasure.formats import matrix_from_json, matrix_to_json, write_json

from oracles import ak_closed_form


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def load(path):
    return json.loads(path.read_text())


def test_evolve_special_convention(tmp_path, capsys):
    b = 2.0
    code, out, _ = run(capsys, "evolve", "--out", str(tmp_path), "--set", f"params.b1={b}", "--set", f"params.b2={1 / b}")
    assert code == 0
    rep = load(tmp_path / "evolve.json")
    np.testing.assert_array_equal(matrix_from_json(rep["S"]), ak_closed_form(1, 1, 1))
    assert rep["physicality"]["V_t"]["physical"] is True
    assert rep["pointer"]["product"] >= rep["pointer"]["bound"] * (1 - 1e-12)
    assert "dQ1 dQ2" in out
    for name in ("evolve_curve.csv", "evolve.png", "config.json", "meta.json"):
        assert (tmp_path / name).exists()
    assert "timestamp" in load(tmp_path / "meta.json")
    assert "timestamp" not in (tmp_path / "evolve.json").read_text()


def test_evolve_t0_echoes_V0(tmp_path, capsys):
    code, _, _ = run(capsys, "evolve", "--out", str(tmp_path), "--set", "params.t=0", "--set", "psi.var_q=0.3")
    assert code == 0
    rep = load(tmp_path / "evolve.json")
    assert rep["V_t"] == rep["V0"]
    assert rep["xi_t"] == rep["xi0"]


def test_evolve_random_configs_revalidated(tmp_path, capsys):
    rng = np.random.default_rng(4)
    for k in range(5):
        vals = dict(K1=rng.uniform(-2, 2), K2=rng.uniform(-2, 2), b1=rng.uniform(0.2, 3), b2=rng.uniform(0.2, 3), t=rng.uniform(0, 2))
        sets = sum((["--set", f"params.{a}={v!r}"] for a, v in vals.items()), [])
        sets += ["--set", f"moments={json.dumps({'var_q': 0.7, 'var_p': 0.9, 'cov_qp': 0.1})}"]
        out = tmp_path / str(k)
        assert run(capsys, "evolve", "--out", str(out), *sets)[0] == 0
        Vt = matrix_from_json(load(out / "evolve.json")["V_t"])
        assert spectral.is_physical(Vt).physical


def test_embedded_config_reproduces_run(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "evolve", "--out", str(a), "--set", "params.K1=0.3", "--set", "psi.p0=1")
    run(capsys, "evolve", "--config", str(a / "config.json"), "--out", str(b))
    assert (a / "evolve.json").read_bytes() == (b / "evolve.json").read_bytes()


def test_williamson_vacuum(tmp_path, capsys):
    m = tmp_path / "v.json"
    write_json(m, matrix_to_json(np.eye(6)))
    code, out, _ = run(capsys, "williamson", str(m), "--out", str(tmp_path / "w"), "--set", "params.hbar=2")
    assert code == 0
    rep = load(tmp_path / "w" / "williamson.json")
    np.testing.assert_allclose(rep["kappas"], [1, 1, 1], atol=1e-14)
    assert rep["physical"] and rep["boundary"]


def test_williamson_round_trip(tmp_path, capsys):
    S = symplectic.random_symplectic(3, np.random.default_rng(8))
    V = S.T @ np.diag([3, 3, 2, 2, 1, 1.0]) @ S
    write_json(tmp_path / "v.json", matrix_to_json(V))
    assert run(capsys, "williamson", str(tmp_path / "v.json"), "--out", str(tmp_path / "w"))[0] == 0
    rep = load(tmp_path / "w" / "williamson.json")
    np.testing.assert_allclose(rep["kappas"], [3, 2, 1], atol=1e-9)
    assert rep["residual"] <= 1e-9 * np.abs(V).max()


def test_williamson_errors(tmp_path, capsys):
    write_json(tmp_path / "bad.json", matrix_to_json(np.diag([1.0, -1.0])))
    code, _, err = run(capsys, "williamson", str(tmp_path / "bad.json"), "--out", str(tmp_path / "w"))
    assert code == 3
    payload = json.loads(err)
    assert payload["error"] == "SpectralError" and payload["exit_code"] == 3
    (tmp_path / "junk.json").write_text("{")
    assert run(capsys, "williamson", str(tmp_path / "junk.json"))[0] == 2


def test_pdist_outputs(tmp_path, capsys):
    psi = {"kind": "superposition", "components": [{"q0": -1.5}, {"q0": 1.5, "phase": 0.5}]}
    code, out, _ = run(capsys, "pdist", "--out", str(tmp_path), "--set", f"psi={json.dumps(psi)}", "--save-psi")
    assert code == 0
    rep = load(tmp_path / "pdist_moments.json")
    assert set(rep["routes"]) == {"grid", "product_form", "special_case"}
    assert max(rep["relative_linf"].values()) < 1e-3
    for route in rep["routes"].values():
        assert route["total"] == pytest.approx(1.0, abs=1e-5)
    for row in rep["comparison"]:
        assert row["grid"] == pytest.approx(row["closed_form"], abs=1e-6)
    header = (tmp_path / "pdist.csv").read_text().splitlines()[0]
    assert header == "Q1,Q2,P"
    assert (tmp_path / "psi_t.akwf").exists() and (tmp_path / "psi_t.akwf.json").exists()
    assert (tmp_path / "pdist.png").exists()


def test_pdist_quadrature_failure_exit(tmp_path, capsys):
    code, _, err = run(capsys, "pdist", "--out", str(tmp_path), "--set", "tolerances.quadrature=1e-300")
    assert code == 3
    assert json.loads(err)["error"] == "QuadratureError"


def test_pdist_needs_pure_state(tmp_path, capsys):
    code, _, err = run(capsys, "pdist", "--out", str(tmp_path), "--set", 'moments={"var_q": 1, "var_p": 1}')
    assert code == 2
    assert "mixed" in json.loads(err)["message"]


def test_sample_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, "sample", "--out", str(tmp_path), "--seed", "3", "--set", "samples=2000", "--set", "psi.q0=0.5")
    assert code == 0
    rep = load(tmp_path / "estimate.json")
    assert rep["report"]["seed"] == 3 and rep["report"]["sample_count"] == 2000
    assert rep["config"]["seed"] == 3 and rep["config"]["output"] is None
    lines = (tmp_path / "samples.csv").read_text().splitlines()
    assert lines[0] == "index,Q1,Q2" and len(lines) == 2001


def test_sample_sequential(tmp_path, capsys):
    seq = {"stage1": {"K1": 0.5}, "stage2": {"K2": 1.0}}
    code, _, _ = run(capsys, "sample", "--out", str(tmp_path), "--set", "regime=sequential", "--set", f"sequential={json.dumps(seq)}", "--set", "samples=2000")
    assert code == 0
    rep = load(tmp_path / "estimate.json")["report"]
    assert rep["regime"] == "sequential"
    assert rep["extras"]["stage1_strength"] == 0.5


def test_config_errors(tmp_path, capsys):
    code, _, err = run(capsys, "evolve", "--set", "params.bogus=1")
    assert code == 2 and json.loads(err)["error"] == "ConfigError"
    code, _, err = run(capsys, "evolve", "--set", 'moments={"var_q": 0.1, "var_p": 0.1}')
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["evolve", "--nope"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "UsageError"


def test_tol_flag(tmp_path, capsys):
    run(capsys, "evolve", "--out", str(tmp_path), "--tol", "1e-8")
    tol = load(tmp_path / "config.json")["tolerances"]
    assert tol["symplectic"] == 1e-8 and tol["physical"] == 1e-8


def test_check_command(capsys, monkeypatch):
    code, out, _ = run(capsys, "check")
    assert code == 0 and "10/10 passed" in out
    good = symplectic.metric

    def corrupted(n):
        b = good(n)
        b[0, 1] = -1.0
        return b

    monkeypatch.setattr(symplectic, "metric", corrupted)
    code, out, _ = run(capsys, "check")
    assert code == 3 and "FAIL" in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "akmeasure", "evolve", "--out", str(tmp_path), "--set", "params.b1=-1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["exit_code"] == 2
