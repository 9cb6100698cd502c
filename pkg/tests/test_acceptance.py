"""Acceptance criteria 1-9, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed even
without ``-s``).  Each test times itself against its budget.
"""

import json
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from equilibra.certify import (
    collision_divergence_probe,
    curved_cluster_divergence,
    curved_cluster_identity,
)
from equilibra.cli import EXIT_MATH, EXIT_OK, main
from equilibra.equilibria import (
    MASS,
    OMEGA,
    _fd_jacobian,
    continue_family,
    jacobian,
    newton_solve,
    residual,
    side_lengths,
    simulate_solution,
)
from equilibra.forcelaw import ForceLaw
from equilibra.geometry import (
    boost_generator,
    group_element,
    inner,
    planar_generator,
    random_point,
    validate_generator,
)

from conftest import FLAT2, H2, S2, seed_problem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
NEWT = ForceLaw.newtonian()


@contextmanager
def criterion(number, title, budget, request):
    capman = request.config.pluginmanager.getplugin("capturemanager")
    t0 = time.perf_counter()
    notes = {}
    ok = False
    try:
        yield notes
        ok = True
    finally:
        dt = time.perf_counter() - t0
        ok = ok and dt < budget
        detail = ", ".join(f"{k}={v}" for k, v in notes.items())
        line = f"criterion {number} {'PASS' if ok else 'FAIL'} [{dt:.2f}s / {budget}s] {title}: {detail}"
        with capman.global_and_fixture_disabled():
            print("\n" + line)
    assert dt < budget, f"runtime {dt:.2f}s over budget {budget}s"


def test_criterion_1_two_body(request):
    with criterion(1, "two-body d(omega)", 5, request) as notes:
        problem, P = seed_problem("two_body", omega=0.5)
        grid = np.linspace(0.5, 2.0, 20)
        fam = continue_family(problem, newton_solve(problem, 1.02 * P), OMEGA, grid)
        err = max(abs(side_lengths(s.positions)[0] - (2 / w**2) ** (1 / 3)) for w, s in zip(grid, fam.members))
        res = max(s.residual_norm for s in fam.members)
        notes.update(points=len(fam), max_d_error=f"{err:.2e}", max_residual=f"{res:.2e}")
        assert len(fam) == 20 and err < 1e-8 and res < 1e-10


def test_criterion_2_lagrange(request):
    with criterion(2, "Lagrange equilateral", 30, request) as notes:
        problem, P = seed_problem("lagrange")
        sol = newton_solve(problem, 1.05 * P)
        d = side_lengths(sol.positions)
        w2 = 3.0 / d.mean() ** 3
        w2_err = abs(w2 - problem.gen.omega**2)
        start, P0 = seed_problem("lagrange", masses=(1, 1, 0.1))
        grid = np.geomspace(0.1, 10, 25)
        fam = continue_family(start, newton_solve(start, P0), MASS, grid, index=2)
        spread = max(np.ptp(side_lengths(s.positions)) for s in fam.members)
        notes.update(iterations=sol.newton_iterations, omega2_error=f"{w2_err:.2e}",
                     seed_spread=f"{np.ptp(d):.2e}", sweep_points=len(fam), max_sweep_spread=f"{spread:.2e}")
        assert sol.residual_norm < 1e-10 and w2_err < 1e-8 and np.ptp(d) < 1e-8
        assert len(fam) == 25 and spread < 1e-8


def _quintic(x, m1, m2, m3):
    return ((m1 + m2) * x**5 + (3 * m1 + 2 * m2) * x**4 + (3 * m1 + m2) * x**3
            - (m2 + 3 * m3) * x**2 - (2 * m2 + 3 * m3) * x - (m2 + m3))


def test_criterion_3_euler(request):
    with criterion(3, "Euler collinear vs quintic", 5, request) as notes:
        worst = 0.0
        for masses in ((1, 1, 1), (1, 2, 3)):
            oracle = brentq(_quintic, 1e-6, 10, args=masses, xtol=1e-15)
            problem, P = seed_problem("euler_collinear", masses=masses)
            x = newton_solve(problem, P).positions[:, 0]
            gaps = np.diff(x)
            err = abs(gaps[1] / gaps[0] - oracle)
            worst = max(worst, err)
            notes[f"ratio{masses}".replace(" ", "")] = f"{gaps[1] / gaps[0]:.15f}"
        notes["max_error"] = f"{worst:.2e}"
        assert worst < 1e-9


RIGIDITY_CASES = [
    ("two_body", {}),
    ("lagrange", {}),
    ("lagrange", {"masses": (1, 2, 3)}),
    ("euler_collinear", {}),
    ("euler_collinear", {"masses": (1, 2, 3)}),
    ("sphere_lagrange", {"z0": 0.5}),
    ("sphere_lagrange", {"z0": 0.3}),
    ("hyperbolic_pair", {}),
]


def test_criterion_4_rigidity(request):
    with criterion(4, "dynamic rigidity, 10 periods, rel_tol 1e-10, 70-digit arithmetic", 60, request) as notes:
        worst, worst_c = 0.0, 0.0
        for name, kw in RIGIDITY_CASES:
            problem, P = seed_problem(name, **kw)
            sol = newton_solve(problem, P)
            r = simulate_solution(problem, sol.positions, periods=10, rel_tol=1e-10, precision=70)
            worst = max(worst, r.drift)
            if r.constraint_drift is not None:
                worst_c = max(worst_c, r.constraint_drift)
        notes.update(cases=len(RIGIDITY_CASES), max_drift=f"{worst:.2e}", max_constraint_drift=f"{worst_c:.2e}")
        assert worst < 1e-6 and worst_c < 1e-9


def test_criterion_5_flat_divergence(request):
    with criterion(5, "collision divergence", 10, request) as notes:
        gen = validate_generator(planar_generator(1.0), FLAT2)
        newt = collision_divergence_probe([1.0, 1.0, 1.0], gen, NEWT)
        quasi = collision_divergence_probe([1.0, 1.0, 1.0], gen, ForceLaw.quasi_homogeneous(1, 2, 1, 3))
        notes.update(newton_slope=f"{newt.slope:.6f}", triangle_max=f"{newt.triangle_ratio_max:.4f}",
                     remainder_band=f"[{newt.remainder_band[0]:.4f}, {newt.remainder_band[1]:.4f}]",
                     quasi_slope=f"{quasi.slope:.6f}")
        assert newt.slope_ok(-3.0, 0.05) and newt.remainder_bounded and newt.triangle_ok
        assert float(np.max(newt.required_bound)) > 1e6
        assert quasi.slope_ok(-3.0, 0.05) and quasi.triangle_ok


def test_criterion_6_double_sum_identity(request):
    with criterion(6, "double-sum identity", 5, request) as notes:
        rng = np.random.default_rng(2024)
        worst = {"S2": 0.0, "S2_printed": 0.0, "H2": 0.0, "H2_printed": 0.0}
        for label, space in (("S2", S2), ("H2", H2)):
            for _ in range(100):
                n = int(rng.integers(2, 7))
                Q = np.array([random_point(rng, space, 1.0) for _ in range(n)])
                r = curved_cluster_identity(Q, rng.uniform(0.2, 3, n), space, range(n))
                worst[label] = max(worst[label], r.identity_residual)
                worst[label + "_printed"] = max(worst[label + "_printed"], r.identity_residual_printed)
        notes.update({k: f"{v:.2e}" for k, v in worst.items()})
        assert worst["S2"] < 1e-12 and worst["S2_printed"] < 1e-12 and worst["H2"] < 1e-12
        # the printed reading is pinned as wrong for sigma = -1
        assert worst["H2_printed"] > 1e-6


def test_criterion_7_cluster_divergence(request):
    with criterion(7, "curved cluster divergence", 10, request) as notes:
        for label, space in (("S2", S2), ("H2", H2)):
            gen = validate_generator(planar_generator(1.0, 3), space)
            r = curved_cluster_divergence([1.0, 1.0, 1.0], gen, space, epsilon=0.1)
            sel = r.s < 1e-5
            notes[label] = (f"slope={r.slope:.4f} max_rhs(s<1e-5)={np.max(r.rhs[sel]):.2e} "
                            f"lhs_band=[{r.lhs_band[0]:.3f}, {r.lhs_band[1]:.3f}]")
            assert r.rhs_exceeds(1e6, 1e-5) and r.slope_ok(-1.0, 0.1)
            assert r.lhs_bounded and r.identity_ok


def test_criterion_8_boundedness_gating(request, tmp_path):
    with criterion(8, "boundedness gating", 5, request) as notes:
        code = main(["sweep", "--config", str(CONFIGS / "sweep_two_body_omega.json"), "--out", str(tmp_path / "a")])
        certs = json.loads((tmp_path / "a" / "certificates.json").read_text())
        C_hat = certs["boundedness"]["C_hat"]
        refused = main(["sweep", "--config", str(CONFIGS / "sweep_sqrt_law_bounded.json"),
                        "--out", str(tmp_path / "b")])
        body = json.loads((tmp_path / "b" / "sweep.json").read_text())
        notes.update(C_hat=repr(C_hat), refusal=body.get("error"))
        assert code == EXIT_OK and abs(C_hat - 1.0) < 1e-6
        assert refused == EXIT_MATH and body.get("error") == "HypothesisNotMet"


def test_criterion_9_invariants(request):
    with criterion(9, "invariant suite", 60, request) as notes:
        rng = np.random.default_rng(99)
        eq = centroid = glaw = iso = jac = 0.0
        law = ForceLaw.quasi_homogeneous(1, 3, 0.5, 1.5)
        gen = validate_generator(planar_generator(1.2), FLAT2)
        problem, _ = seed_problem("lagrange", law=law)
        problem = problem.with_gen(gen).with_masses(rng.uniform(0.5, 2, 3))
        for _ in range(50):
            Q = rng.uniform(-2, 2, (3, 2))
            S = group_element(gen, rng.uniform(-3, 3))
            R = residual(Q, problem).reshape(3, 2)
            eq = max(eq, np.abs(residual(Q @ S.T, problem).reshape(3, 2) - R @ S.T).max() / max(1, np.abs(R).max()))
            J = jacobian(Q, problem)
            Jfd = _fd_jacobian(lambda x: residual(x, problem), Q.ravel())
            jac = max(jac, (np.abs(J - Jfd) / np.maximum(1, np.abs(J))).max())
        for name, kw in (("two_body", {}), ("lagrange", {"masses": (1, 2, 3)}), ("euler_collinear", {"masses": (1, 2, 3)})):
            p, P = seed_problem(name, **kw)
            sol = newton_solve(p, P + 0.03)
            centroid = max(centroid, sol.centroid_defect)
        for space, G in ((FLAT2, planar_generator(0.7)), (S2, planar_generator(1.3, 3, (0, 2))),
                         (H2, planar_generator(0.9, 3)), (H2, boost_generator(0.6, 3))):
            g = validate_generator(G, space)
            s, t = rng.uniform(-2, 2, 2)
            A, B = group_element(g, s), group_element(g, t)
            glaw = max(glaw, np.abs(A @ B - group_element(g, s + t)).max(),
                       np.abs(A - expm(s * np.asarray(G))).max())
            eta = np.diag(space.metric) if space.curved else np.eye(space.dim)
            iso = max(iso, np.abs(A.T @ eta @ A - eta).max())
        notes.update(equivariance=f"{eq:.1e}", centroid=f"{centroid:.1e}", group_law=f"{glaw:.1e}",
                     isometry=f"{iso:.1e}", jacobian_fd=f"{jac:.1e}")
        assert eq < 1e-11 and centroid < 1e-9 and glaw < 1e-12 and iso < 1e-12 and jac < 1e-6
