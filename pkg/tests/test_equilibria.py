import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from equilibra import seeds
from equilibra.equilibria import (
    MASS,
    OMEGA,
    REProblem,
    RESolution,
    centroid_defect,
    choose_gauge,
    continue_family,
    jacobian,
    newton_solve,
    residual,
    side_lengths,
    simulate_solution,
    verify,
    _fd_jacobian,
)
from equilibra.errors import (
    AntipodalOrCoincidentSingularity,
    BranchLost,
    CollisionSingularity,
    EquilibraError,
    InvalidConfiguration,
    OffManifold,
)
from equilibra.forcelaw import ForceLaw
from equilibra.geometry import (
    SpaceForm,
    group_element,
    inner,
    planar_generator,
    project_to_manifold,
    random_point,
    validate_generator,
)

from conftest import FLAT2, H2, S2, seed_problem

NEWT = ForceLaw.newtonian()
# independent oracles (mpmath polyroots / closed forms), frozen
EULER_RATIO_123 = 1.28094792798948499899996715781177
SPHERE_OMEGA_05 = 1.75262981622187124
SPHERE_OMEGA_03 = 1.92810572812412487
HYPER_OMEGA_05 = 1.11006053283531086
LAGRANGE_SIDE_UNIT = 1.4422495703074083  # 3^(1/3)


def flat_problem(omega, masses, law=NEWT, dim=2):
    space = SpaceForm("flat", dim)
    gen = validate_generator(planar_generator(omega, dim), space, allow_degenerate=dim % 2 == 1)
    return REProblem(space, masses, gen, law)


def test_two_body_residual():
    m, d = 1.3, 0.9
    w = np.sqrt(2 * m / d**3)
    Q = np.array([[d / 2, 0], [-d / 2, 0]])
    assert np.linalg.norm(residual(Q, flat_problem(w, [m, m]))) < 1e-12


def test_triangle_residual():
    m, d = 0.8, 1.7
    w = np.sqrt(3 * m / d**3)
    ang = 2 * np.pi * np.arange(3) / 3
    Q = d / np.sqrt(3) * np.c_[np.cos(ang), np.sin(ang)]
    assert np.linalg.norm(residual(Q, flat_problem(w, [m] * 3))) < 1e-12
    bad = np.linalg.norm(residual(Q, flat_problem(w * np.sqrt(1.1), [m] * 3)))
    assert bad > 1e-3 * np.abs(Q).max()


def test_lagrange_side_oracle():
    assert seeds.lagrange_side(1.0, [1, 1, 1]) == pytest.approx(LAGRANGE_SIDE_UNIT, rel=1e-15)


@pytest.mark.parametrize("z0,omega", [(0.5, SPHERE_OMEGA_05), (0.3, SPHERE_OMEGA_03)])
def test_sphere_latitude_oracle(z0, omega):
    assert seeds.sphere_lagrange_omega(z0) == pytest.approx(omega, rel=1e-13)
    problem, P = seed_problem("sphere_lagrange", z0=z0)
    assert np.linalg.norm(residual(P, problem)) < 1e-10


def test_hyperbolic_pair_oracle():
    assert seeds.hyperbolic_pair_omega(0.5) == pytest.approx(HYPER_OMEGA_05, rel=1e-13)
    problem, P = seed_problem("hyperbolic_pair", rho=0.5)
    assert np.linalg.norm(residual(P, problem)) < 1e-10


def test_curved_singularities():
    problem, _ = seed_problem("sphere_lagrange")
    Q = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0]])
    with pytest.raises(AntipodalOrCoincidentSingularity):
        residual(Q, problem)
    with pytest.raises(OffManifold):
        residual(1.5 * Q, problem)


def test_flat_collision():
    problem, P = seed_problem("lagrange")
    P[1] = P[0]
    with pytest.raises(CollisionSingularity):
        residual(P, problem)
    with pytest.raises(CollisionSingularity):
        newton_solve(problem, P)


def test_jacobian_matches_fd(rng):
    for law in (NEWT, ForceLaw.quasi_homogeneous(1, 3, 0.5, 1.5), ForceLaw.paper_classical()):
        for n in (2, 3, 5):
            for dim in (2, 3):
                problem = flat_problem(1.1, rng.uniform(0.5, 2, n), law, dim=dim)
                Q = rng.uniform(-2, 2, (n, dim))
                J = jacobian(Q, problem)
                Jfd = _fd_jacobian(lambda x: residual(x, problem), Q.ravel())
                rel = np.abs(J - Jfd) / np.maximum(1.0, np.abs(J))
                assert rel.max() < 1e-6


def test_two_body_jacobian_null_direction():
    problem, P = seed_problem("two_body")
    J = jacobian(P, problem)
    sv = np.linalg.svd(J, compute_uv=False)
    assert np.sum(sv < 1e-10 * sv[0]) == 1
    # the null direction is the infinitesimal rotation GQ
    GQ = (P @ problem.gen.G.T).ravel()
    assert np.linalg.norm(J @ GQ) < 1e-12


def test_lagrange_from_scaled_seed():
    problem, P = seed_problem("lagrange")
    sol = newton_solve(problem, 1.05 * P)
    assert sol.residual_norm < 1e-10 and sol.newton_iterations <= 12
    d = side_lengths(sol.positions)
    assert np.ptp(d) < 1e-8
    assert d.mean() == pytest.approx((3.0 / problem.gen.omega**2) ** (1 / 3), abs=1e-8)


@pytest.mark.parametrize("masses,ratio", [((1, 1, 1), 1.0), ((1, 2, 3), EULER_RATIO_123)])
def test_euler_quintic(masses, ratio):
    problem, P = seed_problem("euler_collinear", masses=masses)
    sol = newton_solve(problem, P)
    x = np.sort(sol.positions[:, 0]) if masses == (1, 1, 1) else sol.positions[:, 0]
    assert np.abs(sol.positions[:, 1]).max() < 1e-12
    gaps = np.diff(x)
    assert gaps[1] / gaps[0] == pytest.approx(ratio, abs=1e-9)
    assert seeds.euler_ratio(masses) == pytest.approx(ratio, abs=1e-12)


def test_verify_reports():
    w = 1.0
    d = (2 / w**2) ** (1 / 3)
    problem, P = seed_problem("two_body")
    rep = verify(P, problem)
    assert rep.is_re and rep.min_separation == pytest.approx(d, rel=1e-14)
    T = group_element(problem.gen, 1.7)
    assert verify(P @ T.T, problem).is_re
    assert not verify(np.array([[0.3, 0.1], [-0.9, 0.4]]), problem).is_re
    coll = verify(np.zeros((2, 2)), problem)
    assert not coll.is_re and "Collision" in coll.diagnostic


def test_verify_curved_reports_inner_products():
    problem, P = seed_problem("sphere_lagrange")
    rep = verify(P, problem)
    assert rep.is_re and len(rep.inner_products) == 3


def test_two_body_continuation():
    problem, P = seed_problem("two_body", omega=0.5)
    grid = np.linspace(0.5, 2.0, 20)
    fam = continue_family(problem, newton_solve(problem, P), OMEGA, grid)
    assert fam.complete and len(fam) == 20
    for w, sol in zip(grid, fam.members):
        assert side_lengths(sol.positions)[0] == pytest.approx((2 / w**2) ** (1 / 3), abs=1e-8)
        assert sol.residual_norm < 1e-10


def test_lagrange_mass_continuation():
    problem, P = seed_problem("lagrange")
    grid = np.geomspace(1.0, 10.0, 12)
    fam = continue_family(problem, newton_solve(problem, P), MASS, grid, index=2)
    grid2 = np.geomspace(1.0, 0.1, 12)
    fam2 = continue_family(problem, newton_solve(problem, P), MASS, grid2, index=2)
    for f in (fam, fam2):
        for v, sol in zip(f.grid, f.members):
            pv = problem.with_masses([1, 1, v])
            assert verify(sol.positions, pv, tol=1e-9).is_re
            assert np.ptp(side_lengths(sol.positions)) < 1e-8
            assert centroid_defect(sol.positions, pv) < 1e-9


def test_single_point_family():
    problem, P = seed_problem("two_body")
    seed = newton_solve(problem, P)
    fam = continue_family(problem, seed, OMEGA, [1.0])
    assert len(fam) == 1
    np.testing.assert_array_equal(fam.members[0].positions, seed.positions)


def test_continuation_rejects_bad_seed():
    problem, P = seed_problem("two_body")
    seed = newton_solve(problem, P)
    with pytest.raises(InvalidConfiguration):
        continue_family(problem, seed, OMEGA, [1.5, 2.0])


def test_branch_lost_keeps_partial_family():
    problem, P = seed_problem("two_body")
    seed = newton_solve(problem, P)
    with pytest.raises(BranchLost) as info:
        continue_family(problem, seed, OMEGA, [1.0, 1.01, 50.0], trust_radius=1e-3)
    fam = info.value.family
    assert not fam.complete and len(fam) == 1


@given(st.floats(-np.pi, np.pi), st.integers(0, 1000))
def test_residual_equivariance(theta, seed):
    rng = np.random.default_rng(seed)
    problem = flat_problem(1.3, rng.uniform(0.5, 2, 4))
    Q = rng.uniform(-2, 2, (4, 2))
    c, s = np.cos(theta), np.sin(theta)
    S = np.array([[c, -s], [s, c]])
    R = residual(Q, problem).reshape(4, 2)
    R2 = residual(Q @ S.T, problem).reshape(4, 2)
    np.testing.assert_allclose(R2, R @ S.T, atol=1e-11 * max(1, np.abs(R).max()))


@pytest.mark.parametrize("space,omega", [(S2, 1.4), (H2, 0.9)])
def test_curved_residual_equivariance(space, omega, rng):
    gen = validate_generator(planar_generator(omega, 3), space)
    problem = REProblem(space, [1.0, 2.0, 0.5], gen)
    for _ in range(10):
        Q = np.array([random_point(rng, space, 1.0) for _ in range(3)])
        S = group_element(gen, rng.uniform(-3, 3))
        R = residual(Q, problem)[:9].reshape(3, 3)
        R2 = residual(Q @ S.T, problem)[:9].reshape(3, 3)
        np.testing.assert_allclose(R2, R @ S.T, atol=1e-11 * max(1, np.abs(R).max()))


@given(st.integers(2, 6), st.integers(0, 1000))
def test_summed_identity(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.2, 3, n)
    problem = flat_problem(0.9, m, ForceLaw.quasi_homogeneous(1, 2, 0.3, 3))
    Q = rng.uniform(-2, 2, (n, 2))
    R = residual(Q, problem).reshape(n, 2)
    scale = max(1.0, float(np.abs(R).max()), float(np.abs(m[:, None] * R).sum()))
    np.testing.assert_allclose(m @ R, problem.gen.A @ (m @ Q), atol=1e-12 * scale)


@pytest.mark.parametrize("name,kw", [
    ("two_body", {}), ("lagrange", {"masses": (1, 2, 3)}), ("euler_collinear", {"masses": (1, 2, 3)}),
])
def test_centroid_emerges(name, kw):
    problem, P = seed_problem(name, **kw)
    P = P + np.array([0.05, -0.03])  # seed off-centre; the solver must recentre
    sol = newton_solve(problem, P)
    assert sol.centroid_defect < 1e-9
    assert np.linalg.norm(problem.masses @ sol.positions) < 1e-9


@pytest.mark.parametrize("name,kw", [("sphere_lagrange", {"perturb": 0.01}), ("hyperbolic_pair", {"perturb": 0.01})])
def test_curved_solutions_on_manifold(name, kw):
    problem, P = seed_problem(name, **kw)
    sol = newton_solve(problem, P)
    sigma = problem.space.sigma
    assert np.abs(inner(sol.positions, sol.positions, problem.space) - sigma).max() <= 1e-10


def test_deterministic():
    problem, P = seed_problem("lagrange", masses=(1, 2, 3))
    a = newton_solve(problem, 1.2 * P)
    b = newton_solve(problem, 1.2 * P)
    assert a.newton_iterations == b.newton_iterations
    assert np.array_equal(a.positions, b.positions)


def test_solution_roundtrip():
    problem, P = seed_problem("lagrange")
    sol = newton_solve(problem, P)
    back = RESolution.from_dict(json.loads(json.dumps(sol.to_dict())))
    np.testing.assert_array_equal(back.positions, sol.positions)
    assert back.gauge == sol.gauge


def test_gauge_conflict():
    from equilibra.errors import GaugeConflict
    problem, _ = seed_problem("two_body")
    with pytest.raises(GaugeConflict):
        choose_gauge(np.zeros((2, 2)), problem.gen)


def test_tolerance_floor():
    problem, P = seed_problem("two_body")
    with pytest.raises(ValueError):
        newton_solve(problem, P, tol=1e-14)


def _plain_newton(problem, Q0, iters=50, tol=1e-10):
    """Undamped Gauss-Newton on the same gauge-fixed system; True on convergence."""
    b, k = choose_gauge(Q0, problem.gen)
    idx = b * problem.space.dim + k
    pin = Q0[b, k]
    x = Q0.ravel().copy()
    row = np.eye(x.size)[idx]
    for _ in range(iters):
        try:
            F = np.append(residual(x, problem), x[idx] - pin)
        except EquilibraError:
            return False
        if not np.all(np.isfinite(F)):
            return False
        if np.linalg.norm(F) < tol:
            return True
        x = x - np.linalg.lstsq(np.vstack([jacobian(x, problem), row]), F, rcond=None)[0]
    return False


def test_damping_beats_plain_newton_on_scaled_seeds():
    # 1.5x-scaled sphere seeds with shape noise: plain Newton leaves the
    # basin in a fraction of trials, the damped solver recovers every one
    problem, P = seed_problem("sphere_lagrange", z0=0.5)
    rng = np.random.default_rng(0)
    plain_fail = lm_fail = 0
    for _ in range(40):
        Q = project_to_manifold(1.5 * P + 0.2 * rng.standard_normal(P.shape), problem.space)
        plain_fail += not _plain_newton(problem, Q)
        try:
            newton_solve(problem, Q)
        except EquilibraError:
            lm_fail += 1
    assert plain_fail >= 3
    assert lm_fail == 0


@pytest.mark.parametrize("name,kw", [("two_body", {}), ("euler_collinear", {}), ("sphere_lagrange", {"z0": 0.3}),
                                     ("hyperbolic_pair", {})])
def test_simulated_rigidity_double(name, kw):
    problem, P = seed_problem(name, **kw)
    sol = newton_solve(problem, P)
    res = simulate_solution(problem, sol.positions, periods=10)
    assert res.passed()


@pytest.mark.slow
def test_simulated_rigidity_unstable_needs_precision():
    problem, P = seed_problem("lagrange")
    sol = newton_solve(problem, P)
    assert simulate_solution(problem, sol.positions, periods=10).drift > 1e-6
    assert simulate_solution(problem, sol.positions, periods=10, precision=70).passed()
