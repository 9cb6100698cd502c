"""Reduced relative-equilibrium equations, their solver and continuation.

Substituting ``q_i(t) = exp(tG) Q_i`` into the equations of motion leaves an
algebraic system in the constant shape vectors ``Q_i``:

* flat:   ``A Q_i + sum_j m_j (Q_j - Q_i) f(|Q_j - Q_i|) = 0`` with ``A = -G^2``
* curved: ``sum_j m_j (Q_j - sigma c_ij Q_i) / D_ij^(3/2) - G^2 Q_i
  - sigma ((G Q_i).(G Q_i)) Q_i = 0`` plus ``Q_i.Q_i = sigma``
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dynamics import (
    Configuration,
    PhaseState,
    Trajectory,
    constraint_drift,
    curved_interaction,
    integrate,
    rigidity_report,
    flat_interaction,
    min_separation,
    pairwise_distances,
)
from .errors import (
    AntipodalOrCoincidentSingularity,
    BranchLost,
    CollisionSingularity,
    EquilibraError,
    GaugeConflict,
    InvalidConfiguration,
    NoConvergence,
    OffManifold,
    SingularJacobian,
)
from .forcelaw import ForceLaw
from .geometry import RotationGenerator, SpaceForm, inner

log = logging.getLogger(__name__)

LAMBDA0 = 1e-3
LAMBDA_FLOOR = 1e-12
LAMBDA_CEIL = 1e16
OFF_MANIFOLD_TOL = 1e-1


@dataclass(frozen=True)
class REProblem:
    space: SpaceForm
    masses: np.ndarray
    gen: RotationGenerator
    law: Optional[ForceLaw] = None

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.ndim != 1 or m.size < 2 or np.any(~(m > 0)):
            raise InvalidConfiguration("need >= 2 strictly positive masses")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        if self.gen.space != self.space:
            raise InvalidConfiguration("generator validated against a different space")
        if not self.space.curved and self.law is None:
            raise InvalidConfiguration("flat problems need a force law")

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def shape(self) -> tuple:
        return (self.n, self.space.dim)

    def with_masses(self, masses) -> "REProblem":
        return replace(self, masses=np.asarray(masses, dtype=float))

    def with_gen(self, gen) -> "REProblem":
        return replace(self, gen=gen)

    def with_law(self, law) -> "REProblem":
        return replace(self, law=law)


def _as_positions(Q, problem: REProblem) -> np.ndarray:
    Q = np.asarray(Q, dtype=float).reshape(problem.shape)
    return Q


def residual_flat(Q, problem: REProblem) -> np.ndarray:
    """Stacked ``A Q_i + sum_j m_j (Q_j - Q_i) f(|Q_j - Q_i|)``.

    For generators accepted with a kernel, the kernel components of every
    ``Q_i`` are appended so solutions stay where ``A`` is definite.
    """
    Q = _as_positions(Q, problem)
    R = Q @ problem.gen.A.T + flat_interaction(Q, problem.masses, problem.law)
    out = R.ravel()
    if problem.gen.kernel.shape[1]:
        out = np.concatenate([out, (Q @ problem.gen.kernel).ravel()])
    return out


def rotation_terms(Q, gen: RotationGenerator) -> np.ndarray:
    """``G^2 Q_i + sigma ((G Q_i).(G Q_i)) Q_i`` for each body (curved only)."""
    space = gen.space
    GQ = Q @ gen.G.T
    return Q @ (gen.G @ gen.G).T + space.sigma * inner(GQ, GQ, space)[:, None] * Q


def residual_curved(Q, problem: REProblem) -> np.ndarray:
    """Stacked tangential residuals followed by the ``n`` constraint rows."""
    Q = _as_positions(Q, problem)
    space = problem.space
    drift = inner(Q, Q, space) - space.sigma
    if np.any(np.abs(drift) > OFF_MANIFOLD_TOL):
        raise OffManifold(f"iterate off the manifold by {np.abs(drift).max():.3g}")
    R = curved_interaction(Q, problem.masses, space) - rotation_terms(Q, problem.gen)
    return np.concatenate([R.ravel(), drift])


def residual(Q, problem: REProblem) -> np.ndarray:
    if problem.space.curved:
        return residual_curved(Q, problem)
    return residual_flat(Q, problem)


def _fd_jacobian(fun, x, h=None):
    x = np.asarray(x, dtype=float)
    if h is None:
        h = np.finfo(float).eps ** (1 / 3) * (1 + np.linalg.norm(x))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def jacobian_flat(Q, problem: REProblem) -> np.ndarray:
    Q = _as_positions(Q, problem)
    n, d = Q.shape
    law = problem.law
    m = problem.masses
    J = np.zeros((n * d, n * d))
    I = np.eye(d)
    for i in range(n):
        diag = problem.gen.A.copy()
        for j in range(n):
            if j == i:
                continue
            u = Q[j] - Q[i]
            r = np.linalg.norm(u)
            if r < 1e-14:
                raise CollisionSingularity(f"bodies {i} and {j} coincide")
            block = m[j] * (law.f(r) * I + law.xfprime(r) * np.outer(u, u) / r**2)
            J[i * d:(i + 1) * d, j * d:(j + 1) * d] = block
            diag -= block
        J[i * d:(i + 1) * d, i * d:(i + 1) * d] = diag
    K = problem.gen.kernel
    if K.shape[1]:
        rows = np.kron(np.eye(n), K.T)
        J = np.vstack([J, rows])
    return J


def jacobian(Q, problem: REProblem) -> np.ndarray:
    """Analytic Jacobian (flat) or central differences (curved)."""
    if problem.space.curved:
        return _fd_jacobian(lambda x: residual_curved(x, problem), np.ravel(Q))
    return jacobian_flat(Q, problem)


# ---------------------------------------------------------------- solving


@dataclass
class RESolution:
    positions: np.ndarray
    residual_norm: float
    newton_iterations: int
    gauge: dict
    condition: float
    centroid_defect: Optional[float] = None
    param_value: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "positions": np.asarray(self.positions).tolist(),
            "residual_norm": self.residual_norm,
            "newton_iterations": self.newton_iterations,
            "gauge": self.gauge,
            "condition": self.condition,
            "centroid_defect": self.centroid_defect,
            "param_value": self.param_value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RESolution":
        return cls(
            positions=np.asarray(d["positions"], dtype=float),
            residual_norm=d["residual_norm"],
            newton_iterations=d["newton_iterations"],
            gauge=d["gauge"],
            condition=d["condition"],
            centroid_defect=d.get("centroid_defect"),
            param_value=d.get("param_value"),
        )


def choose_gauge(Q, gen: RotationGenerator) -> tuple:
    """Pick (body, coordinate) whose value moves fastest under ``exp(sG)``.

    Pinning that coordinate removes the rotational null direction.  The first
    body with a non-negligible orbit velocity is used.
    """
    GQ = Q @ gen.G.T
    speeds = np.linalg.norm(GQ, axis=1)
    scale = max(1.0, np.abs(Q).max()) * max(np.abs(gen.G).max(), np.finfo(float).tiny)
    moving = np.flatnonzero(speeds > 1e-8 * scale)
    if moving.size == 0:
        raise GaugeConflict("no body moves under the generator; rotational phase cannot be pinned")
    b = int(moving[0])
    return b, int(np.argmax(np.abs(GQ[b])))


def centroid_defect(Q, problem: REProblem) -> Optional[float]:
    """``|A sum_i m_i Q_i|`` (flat only); vanishes at every flat RE."""
    if problem.space.curved:
        return None
    return float(np.linalg.norm(problem.gen.A @ (problem.masses @ Q)))


def newton_solve(
    problem: REProblem,
    Q0,
    tol: float = 1e-10,
    max_iter: int = 50,
    damping: float = LAMBDA0,
) -> RESolution:
    """Levenberg-Marquardt damped Newton on the gauge-fixed system.

    The damping starts at ``damping``, is divided by 10 after each accepted
    step (floor 1e-12) and multiplied by 10 after each rejected one.
    """
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    Q0 = _as_positions(Q0, problem).copy()
    b, k = choose_gauge(Q0, problem.gen)
    pin = Q0[b, k]
    idx = b * problem.space.dim + k
    gauge = {"body": b, "coordinate": k, "value": float(pin)}

    def F(x):
        return np.append(residual(x, problem), x[idx] - pin)

    def JF(x):
        J = jacobian(x, problem)
        row = np.zeros(x.size)
        row[idx] = 1.0
        return np.vstack([J, row])

    x = Q0.ravel()
    Fx = F(x)  # collisions in the seed propagate to the caller
    lam = damping
    it = 0
    while True:
        rnorm = float(np.linalg.norm(Fx[:-1]))
        if rnorm <= tol and abs(Fx[-1]) <= tol:
            break
        if it >= max_iter:
            raise NoConvergence(f"{max_iter} iterations, residual {rnorm:.3e}")
        it += 1
        J = JF(x)
        JtJ = J.T @ J
        g = J.T @ Fx
        scale = np.maximum(np.diag(JtJ), 1e-12 * max(1.0, np.diag(JtJ).max()))
        cost = Fx @ Fx
        while True:
            try:
                step = np.linalg.solve(JtJ + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobian(str(exc)) from exc
            if not np.all(np.isfinite(step)):
                raise SingularJacobian("non-finite Newton step")
            xn = x + step
            try:
                Fn = F(xn)
                ok = np.all(np.isfinite(Fn)) and Fn @ Fn < cost
            except (CollisionSingularity, AntipodalOrCoincidentSingularity, OffManifold):
                ok = False
            if ok:
                x, Fx = xn, Fn
                lam = max(lam / 10, LAMBDA_FLOOR)
                break
            lam *= 10
            if lam > LAMBDA_CEIL:
                raise SingularJacobian(f"damping exhausted at residual {rnorm:.3e}")
    J = JF(x)
    sv = np.linalg.svd(J, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    Q = x.reshape(problem.shape)
    log.debug("newton converged in %d iterations, residual %.3e", it, rnorm)
    return RESolution(
        positions=Q,
        residual_norm=rnorm,
        newton_iterations=it,
        gauge=gauge,
        condition=cond,
        centroid_defect=centroid_defect(Q, problem),
    )


@dataclass
class VerifyReport:
    is_re: bool
    residual_norm: float
    min_separation: float
    max_norm: float
    inner_products: Optional[list] = None
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify(Q, problem: REProblem, tol: float = 1e-8) -> VerifyReport:
    """Evaluate the residual and report separation diagnostics; never raises."""
    Q = _as_positions(Q, problem)
    sep = min_separation(Q)
    maxn = float(np.linalg.norm(Q, axis=1).max())
    ips = None
    if problem.space.curved:
        G = np.einsum("ik,jk,k->ij", Q, Q, problem.space.metric)
        ips = G[np.triu_indices(problem.n, 1)].tolist()
    try:
        rnorm = float(np.linalg.norm(residual(Q, problem)))
        diag = ""
    except EquilibraError as exc:
        rnorm, diag = float("inf"), f"{exc.code}: {exc}"
    return VerifyReport(rnorm <= tol, rnorm, sep, maxn, ips, diag)


# ---------------------------------------------------------------- continuation

OMEGA = "omega"
MASS = "mass"
EXPONENT = "exponent"


@dataclass
class ContinuationFamily:
    parameter: str
    index: Optional[int]
    grid: np.ndarray
    members: list
    diagnostics: list
    problem: REProblem = field(repr=False)
    complete: bool = True
    opts: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "index": self.index,
            "grid": np.asarray(self.grid).tolist(),
            "complete": self.complete,
            "members": [m.to_dict() for m in self.members],
            "diagnostics": self.diagnostics,
        }


def problem_at(problem: REProblem, parameter: str, value: float, index: Optional[int] = None) -> REProblem:
    """The problem with one parameter replaced by ``value``."""
    if parameter == OMEGA:
        return problem.with_gen(problem.gen.scaled(value / problem.gen.omega))
    if parameter == MASS:
        m = problem.masses.copy()
        m[index] = value
        return problem.with_masses(m)
    if parameter == EXPONENT:
        if problem.law is None:
            raise InvalidConfiguration("exponent continuation needs a flat law")
        return problem.with_law(problem.law.with_exponent(value))
    raise ValueError(f"unknown continuation parameter {parameter!r}")


def _diagnostics(sol: RESolution, value: float) -> dict:
    Q = sol.positions
    return {
        "param_value": float(value),
        "residual_norm": sol.residual_norm,
        "min_separation": min_separation(Q),
        "max_norm": float(np.linalg.norm(Q, axis=1).max()),
        "newton_iterations": sol.newton_iterations,
    }


def continue_family(
    problem: REProblem,
    seed: RESolution,
    parameter: str,
    grid,
    index: Optional[int] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    trust_radius: Optional[float] = None,
) -> ContinuationFamily:
    """Secant-predictor / Newton-corrector sweep of ``parameter`` over ``grid``.

    On a failed corrector or a jump larger than ``trust_radius`` the sweep
    stops and :class:`BranchLost` carries the partial family.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty continuation grid")
    p0 = problem_at(problem, parameter, grid[0], index)
    check = verify(seed.positions, p0, tol=max(tol, seed.residual_norm) * 10)
    if not check.is_re:
        raise InvalidConfiguration(
            f"seed does not verify at {parameter}={grid[0]} (residual {check.residual_norm:.3e})"
        )
    first = replace(seed, param_value=float(grid[0]))
    members = [first]
    diags = [_diagnostics(first, grid[0])]
    family = ContinuationFamily(parameter, index, grid, members, diags, problem,
                                opts={"tol": tol, "max_iter": max_iter, "trust_radius": trust_radius})
    for k in range(1, grid.size):
        prev = members[-1].positions
        if len(members) >= 2:
            dp = grid[k - 1] - grid[k - 2]
            pred = prev + (prev - members[-2].positions) * (grid[k] - grid[k - 1]) / dp
        else:
            pred = prev
        pk = problem_at(problem, parameter, grid[k], index)
        radius = trust_radius if trust_radius is not None else 0.5 * (1 + np.abs(prev).max())
        try:
            sol = newton_solve(pk, pred, tol=tol, max_iter=max_iter)
        except EquilibraError as exc:
            family.complete = False
            raise BranchLost(f"corrector failed at {parameter}={grid[k]}: {exc}", family) from exc
        jump = float(np.abs(sol.positions - prev).max())
        if jump > radius:
            family.complete = False
            raise BranchLost(
                f"jump {jump:.3g} exceeds trust radius {radius:.3g} at {parameter}={grid[k]}", family
            )
        sol.param_value = float(grid[k])
        members.append(sol)
        diags.append(_diagnostics(sol, grid[k]))
    return family


def side_lengths(Q) -> np.ndarray:
    r = pairwise_distances(Q)
    return r[np.triu_indices(len(r), 1)]


# ---------------------------------------------------------------- dynamic check


@dataclass
class RigidityResult:
    drift: float
    constraint_drift: Optional[float]
    periods: float
    t_end: float
    precision: object
    trajectory: Trajectory = field(repr=False)

    def passed(self, bound: float = 1e-6, constraint_bound: float = 1e-9) -> bool:
        ok = self.drift < bound
        if self.constraint_drift is not None:
            ok = ok and self.constraint_drift < constraint_bound
        return bool(ok)

    def to_dict(self) -> dict:
        return {
            "drift": self.drift,
            "constraint_drift": self.constraint_drift,
            "periods": self.periods,
            "t_end": self.t_end,
            "precision": self.precision,
            "diagnostics": self.trajectory.diagnostics,
        }


def simulate_solution(
    problem: REProblem,
    Q,
    periods: float = 10.0,
    rel_tol: float = 1e-10,
    n_samples: int = 41,
    precision: Optional[int] = None,
    masses=None,
    gauge: Optional[dict] = None,
) -> RigidityResult:
    """Integrate ``Q`` with velocities ``G Q_i`` and measure the shape drift.

    The horizon is ``periods`` characteristic periods ``2 pi / sqrt(c2)``.
    ``masses`` overrides the problem masses in the dynamics only (used to
    build pseudo-REs).  With ``precision`` (decimal digits) the positions are
    first polished in extended precision and the run uses the MPFR stepper;
    this keeps linearly unstable equilibria on their orbit long enough for
    the check to mean anything.
    """
    from . import hiprec

    Q = _as_positions(Q, problem)
    m = problem.masses if masses is None else np.asarray(masses, dtype=float)
    t_end = periods * problem.gen.period if periods > 0 else 0.0
    law = None if problem.space.curved else (problem.law or ForceLaw.newtonian())
    if precision is None:
        cfg = Configuration(problem.space, m, Q)
        state = PhaseState(cfg, Q @ problem.gen.G.T)
    else:
        if gauge is None:
            b, k = choose_gauge(Q, problem.gen)
            gauge = {"body": b, "coordinate": k}
        Qm, _ = hiprec.refine(problem, Q, gauge, dps=precision)
        Vm = hiprec.velocities(Qm, problem.gen.G, precision)
        state = hiprec.MPState(problem.space, m, Qm, Vm)
    traj = integrate(state, t_end, rel_tol=rel_tol, law=law, n_samples=n_samples, precision=precision)
    cd = constraint_drift(traj) if problem.space.curved else None
    return RigidityResult(rigidity_report(traj), cd, periods, t_end, precision or "double", traj)
