import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from equilibra import report
from equilibra.cli import EXIT_CONFIG, EXIT_MATH, EXIT_OK, main
from equilibra.equilibria import verify

from conftest import seed_problem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

EXPECTED = {
    "validate_newtonian": EXIT_OK,
    "validate_sin_inverse": EXIT_MATH,
    "find_lagrange": EXIT_OK,
    "find_euler": EXIT_OK,
    "find_sphere_lagrange": EXIT_OK,
    "find_hyperbolic_pair": EXIT_OK,
    "sweep_two_body_omega": EXIT_OK,
    "sweep_lagrange_mass": EXIT_OK,
    "sweep_sqrt_law_bounded": EXIT_MATH,
    "certify_divergence_flat": EXIT_OK,
    "certify_divergence_quasi": EXIT_OK,
    "certify_identity_sphere": EXIT_OK,
    "certify_identity_hyperboloid": EXIT_OK,
    "certify_cluster_sphere": EXIT_OK,
    "certify_cluster_hyperboloid": EXIT_OK,
    "certify_cluster_antipodal": EXIT_MATH,
    "simulate_two_body": EXIT_OK,
    "simulate_lagrange_hiprec": EXIT_OK,
    "simulate_pseudo_re": EXIT_MATH,
}


def run(command, cfg, out, capsys=None):
    if isinstance(cfg, dict):
        path = out / "config.json"
        out.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(cfg))
        cfg = path
    code = main([command, "--config", str(cfg), "--out", str(out)])
    body = json.loads(capsys.readouterr().out) if capsys else None
    return code, body


def test_every_shipped_config_is_covered():
    assert sorted(p.stem for p in CONFIGS.glob("*.json")) == sorted(EXPECTED)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_shipped_config_exit_codes(name, tmp_path, capsys):
    command = name.split("_")[0].replace("validate", "validate-law")
    code, body = run(command, CONFIGS / f"{name}.json", tmp_path, capsys)
    assert code == EXPECTED[name], body


def test_validate_missing_law(tmp_path, capsys):
    code, body = run("validate-law", {"masses": [1, 1]}, tmp_path, capsys)
    assert code == EXIT_CONFIG and body["status"] == "config_error"


def test_unknown_key_rejected(tmp_path, capsys):
    code, _ = run("validate-law", {"law": {"kind": "newtonian"}, "lawz": 1}, tmp_path, capsys)
    assert code == EXIT_CONFIG
    code, _ = run("validate-law", {"law": {"kind": "newtonian", "colour": "red"}}, tmp_path, capsys)
    assert code == EXIT_CONFIG


def test_usage_errors(tmp_path, capsys):
    assert main(["frobnicate", "--config", "x.json"]) == EXIT_CONFIG
    assert main(["find", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["find", "--config", str(bad)]) == EXIT_CONFIG
    cfg = CONFIGS / "find_lagrange.json"
    assert main(["find", "--config", str(cfg), "--out", str(tmp_path), "--threads", "0"]) == EXIT_CONFIG


def test_find_lagrange_output(tmp_path, capsys):
    run("find", CONFIGS / "find_lagrange.json", tmp_path, capsys)
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert np.ptp(sol["side_lengths"]) < 1e-8
    assert sol["verify"]["is_re"]


def test_find_sphere_residual(tmp_path, capsys):
    code, body = run("find", CONFIGS / "find_sphere_lagrange.json", tmp_path, capsys)
    assert code == EXIT_OK and body["solution"]["residual_norm"] < 1e-10


def test_find_coincident(tmp_path, capsys):
    cfg = {"space": {"kind": "flat", "k": 2}, "masses": [1, 1, 1], "omega": 1.0,
           "law": {"kind": "newtonian"}, "positions": [[1, 0], [1, 0], [-1, 0.5]]}
    code, body = run("find", cfg, tmp_path, capsys)
    assert code == EXIT_MATH and body["error"] == "CollisionSingularity"


def test_sweep_two_body_csv(tmp_path, capsys):
    run("sweep", CONFIGS / "sweep_two_body_omega.json", tmp_path, capsys)
    with (tmp_path / "sweep.csv").open() as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == report.SWEEP_COLUMNS
    rows = report.read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 20
    for r in rows:
        assert r["min_separation"] == pytest.approx((2 / r["param_value"] ** 2) ** (1 / 3), abs=1e-8)
        assert r["residual_norm"] < 1e-10
    certs = json.loads((tmp_path / "certificates.json").read_text())
    assert certs["boundedness"]["C_hat"] == pytest.approx(1.0, abs=1e-6)
    assert certs["separation"]["c_hat"] == pytest.approx(2 ** (-1 / 3), abs=1e-6)


def test_sweep_refused_for_weak_law(tmp_path, capsys):
    code, body = run("sweep", CONFIGS / "sweep_sqrt_law_bounded.json", tmp_path, capsys)
    assert code == EXIT_MATH and body["error"] == "HypothesisNotMet"


def test_sweep_single_point(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "sweep_two_body_omega.json").read_text())
    cfg["sweep"]["grid"] = [1.0]
    code, _ = run("sweep", cfg, tmp_path, capsys)
    assert code == EXIT_OK
    assert len(report.read_csv(tmp_path / "sweep.csv")) == 1


def test_sweep_lagrange_stability(tmp_path, capsys):
    run("sweep", CONFIGS / "sweep_lagrange_mass.json", tmp_path, capsys)
    sep = json.loads((tmp_path / "certificates.json").read_text())["separation"]
    assert sep["c_hat"] > 0 and 0.95 <= sep["stability_ratio"] <= 1.05


def test_sweep_branch_lost_keeps_partial_csv(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "sweep_two_body_omega.json").read_text())
    cfg["sweep"]["grid"] = [1.0, 1.01, 40.0]
    cfg["sweep"]["trust_radius"] = 1e-3
    cfg["sweep"]["boundedness"] = False
    code, body = run("sweep", cfg, tmp_path, capsys)
    assert code == EXIT_MATH
    assert 1 <= len(report.read_csv(tmp_path / "sweep.csv")) < 3


def test_csv_roundtrip_preserves_classification(tmp_path, capsys):
    run("sweep", CONFIGS / "sweep_two_body_omega.json", tmp_path, capsys)
    fam = json.loads((tmp_path / "sweep.json").read_text())["family"]
    rows = report.read_csv(tmp_path / "sweep.csv")
    problem, _ = seed_problem("two_body")
    for r, m in zip(rows, fam["members"]):
        assert r["residual_norm"] == m["residual_norm"]  # exact float round trip
        p = problem.with_gen(problem.gen.scaled(r["param_value"]))
        assert verify(np.array(m["positions"]), p, tol=1e-10).is_re == (r["residual_norm"] <= 1e-10)


def test_certify_outputs(tmp_path, capsys):
    code, body = run("certify", CONFIGS / "certify_divergence_flat.json", tmp_path, capsys)
    assert code == EXIT_OK and abs(body["slope"] + 3) <= 0.05
    with (tmp_path / "probe.csv").open() as fh:
        assert tuple(next(csv.reader(fh))) == report.DIVERGENCE_COLUMNS
    code, body = run("certify", CONFIGS / "certify_cluster_sphere.json", tmp_path / "c", capsys)
    with (tmp_path / "c" / "probe.csv").open() as fh:
        assert tuple(next(csv.reader(fh))) == report.CLUSTER_COLUMNS


def test_certify_antipodal_named(tmp_path, capsys):
    code, body = run("certify", CONFIGS / "certify_cluster_antipodal.json", tmp_path, capsys)
    assert code == EXIT_MATH and body["error"] == "AntipodalGuardViolation"


def test_certify_identity_deterministic(tmp_path, capsys):
    _, a = run("certify", CONFIGS / "certify_identity_hyperboloid.json", tmp_path / "a", capsys)
    _, b = run("certify", CONFIGS / "certify_identity_hyperboloid.json", tmp_path / "b", capsys)
    assert a == b and a["rng_seed"] is not None
    assert (tmp_path / "a" / "probe.csv").read_bytes() == (tmp_path / "b" / "probe.csv").read_bytes()


def test_simulate_outputs(tmp_path, capsys):
    code, body = run("simulate", CONFIGS / "simulate_two_body.json", tmp_path, capsys)
    assert code == EXIT_OK and body["drift"] < 1e-6
    with (tmp_path / "trajectory.csv").open() as fh:
        assert next(csv.reader(fh)) == ["t", "body", "q0", "q1", "v0", "v1"]
    assert json.loads((tmp_path / "trajectory.json").read_text())["drift"] == body["drift"]


def test_simulate_pseudo_re_reports_drift(tmp_path, capsys):
    code, body = run("simulate", CONFIGS / "simulate_pseudo_re.json", tmp_path, capsys)
    assert code == EXIT_MATH and body["drift"] > 1e-3


def test_simulate_zero_horizon(tmp_path, capsys):
    cfg = json.loads((CONFIGS / "simulate_two_body.json").read_text())
    cfg["simulate"]["periods"] = 0
    code, body = run("simulate", cfg, tmp_path, capsys)
    assert code == EXIT_OK and body["drift"] == 0.0
    assert len(report.read_csv(tmp_path / "trajectory.csv")) == 2  # one sample, two bodies


def test_simulate_from_solution_file(tmp_path, capsys):
    run("find", CONFIGS / "find_hyperbolic_pair.json", tmp_path / "f", capsys)
    sol = json.loads((tmp_path / "f" / "solution.json").read_text())
    cfg = {k: sol[k] for k in ("space", "masses", "omega")}
    cfg["solution"] = str(tmp_path / "f" / "solution.json")
    cfg["simulate"] = {"periods": 10, "rel_tol": 1e-10}
    code, body = run("simulate", cfg, tmp_path / "s", capsys)
    assert code == EXIT_OK, body
    assert body["constraint_drift"] < 1e-9


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "equilibra.cli", "find", "--config",
                           str(CONFIGS / "find_euler.json"), "--out", "/tmp/equilibra_cli_test"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "converged"
