"""Equations of motion and a validating integrator.

Flat problem::

    q_i'' = sum_{j != i} m_j (q_j - q_i) f(|q_j - q_i|)

Curved problem (sphere ``sigma = 1``, hyperboloid ``sigma = -1``)::

    q_i'' = sum_{j != i} m_j (q_j - sigma (q_i.q_j) q_i) / (sigma - sigma (q_i.q_j)^2)^(3/2)
            - sigma (q_i'.q_i') q_i
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853

from .errors import (
    AntipodalOrCoincidentSingularity,
    CollisionSingularity,
    InvalidConfiguration,
    SingularityEncountered,
    ToleranceUnachievable,
)
from .forcelaw import ForceLaw
from .geometry import SpaceForm, gap_factor, inner, project_to_manifold, project_to_tangent, short_chord

log = logging.getLogger(__name__)

COLLISION_TOL = 1e-14
MANIFOLD_TOL = 1e-10


@dataclass(frozen=True)
class Configuration:
    space: SpaceForm
    masses: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        Q = np.array(self.positions, dtype=float)
        if m.ndim != 1 or m.size < 2:
            raise InvalidConfiguration("need at least two bodies")
        if np.any(~(m > 0)):
            raise InvalidConfiguration("masses must be strictly positive")
        if Q.shape != (m.size, self.space.dim):
            raise InvalidConfiguration(
                f"positions must have shape ({m.size}, {self.space.dim}), got {Q.shape}"
            )
        if self.space.curved:
            drift = np.abs(inner(Q, Q, self.space) - self.space.sigma)
            if np.any(drift > MANIFOLD_TOL):
                raise InvalidConfiguration(f"position off the manifold by {drift.max():.3g}")
        m.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "positions", Q)

    @property
    def n(self) -> int:
        return self.masses.size

    def with_positions(self, Q) -> "Configuration":
        return Configuration(self.space, self.masses, Q)


@dataclass(frozen=True)
class PhaseState:
    config: Configuration
    velocities: np.ndarray

    def __post_init__(self):
        V = np.array(self.velocities, dtype=float)
        if V.shape != self.config.positions.shape:
            raise InvalidConfiguration("velocities must match positions in shape")
        space = self.config.space
        if space.curved:
            tang = np.abs(inner(self.config.positions, V, space))
            if np.any(tang > MANIFOLD_TOL * (1 + np.abs(V).max())):
                raise InvalidConfiguration(f"velocity not tangent (|Q.V| = {tang.max():.3g})")
        V.setflags(write=False)
        object.__setattr__(self, "velocities", V)


def pairwise_distances(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    diff = Q[None, :, :] - Q[:, None, :]
    return np.linalg.norm(diff, axis=-1)


def min_separation(Q) -> float:
    r = pairwise_distances(Q)
    return float(r[~np.eye(len(r), dtype=bool)].min())


def flat_interaction(Q, masses, law: ForceLaw) -> np.ndarray:
    """``sum_j m_j (Q_j - Q_i) f(|Q_j - Q_i|)`` for every ``i``."""
    Q = np.asarray(Q, dtype=float)
    n = len(Q)
    diff = Q[None, :, :] - Q[:, None, :]  # diff[i, j] = Q_j - Q_i
    r = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(n, dtype=bool)
    if np.any(r[off] < COLLISION_TOL):
        i, j = np.argwhere((r < COLLISION_TOL) & off)[0]
        raise CollisionSingularity(f"bodies {i} and {j} coincide")
    fr = np.zeros_like(r)
    fr[off] = law.f(r[off])
    return np.einsum("j,ij,ijk->ik", masses, fr, diff)


def accel_flat(config: Configuration, law: ForceLaw) -> np.ndarray:
    if config.space.curved:
        raise InvalidConfiguration("accel_flat needs a flat configuration")
    return flat_interaction(config.positions, config.masses, law)


def curved_pair_terms(Q, space: SpaceForm, stable: bool = False) -> np.ndarray:
    """``T[i, j] = (Q_j - sigma (Q_i.Q_j) Q_i) / D_ij^(3/2)``, zero on the diagonal.

    ``D_ij = sigma - sigma (Q_i.Q_j)^2`` comes from :func:`gap_factor`.  With
    ``stable`` the numerator uses its on-manifold form
    ``v - sigma (Q_i.v) Q_i`` with ``v`` the short chord (``Q_j -+ Q_i``),
    which keeps relative accuracy for tightly clustered and nearly antipodal
    points but assumes ``Q_i.Q_i = sigma``.
    """
    Q = np.asarray(Q, dtype=float)
    n = len(Q)
    sigma = space.sigma
    Qi = Q[:, None, :]
    Qj = Q[None, :, :]
    D = gap_factor(Qi, Qj, space)
    off = ~np.eye(n, dtype=bool)
    bad = off & ~(D >= COLLISION_TOL)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise AntipodalOrCoincidentSingularity(f"bodies {i} and {j} are coincident or antipodal")
    if stable:
        v, _ = short_chord(Qi, Qj, space)
        num = v - sigma * inner(Qi, v, space)[..., None] * Qi
    else:
        c = inner(Qi, Qj, space)
        num = Qj - sigma * c[..., None] * Qi
    Dsafe = np.where(off, D, 1.0)
    T = num / Dsafe[..., None] ** 1.5
    T[~off] = 0.0
    return T


def curved_interaction(Q, masses, space: SpaceForm, stable: bool = False) -> np.ndarray:
    T = curved_pair_terms(Q, space, stable=stable)
    return np.einsum("j,ijk->ik", masses, T)


def accel_curved(state: PhaseState) -> np.ndarray:
    cfg = state.config
    space = cfg.space
    if not space.curved:
        raise InvalidConfiguration("accel_curved needs a curved configuration")
    Q = cfg.positions
    V = state.velocities
    vv = inner(V, V, space)
    return curved_interaction(Q, cfg.masses, space) - space.sigma * vv[:, None] * Q


# ---------------------------------------------------------------- integration


@dataclass
class Trajectory:
    space: SpaceForm
    masses: np.ndarray
    times: np.ndarray
    positions: np.ndarray  # (T, n, d)
    velocities: np.ndarray  # (T, n, d)
    diagnostics: dict = field(default_factory=dict)

    def state(self, idx: int) -> PhaseState:
        cfg = Configuration(self.space, self.masses, project_to_manifold(self.positions[idx], self.space))
        return PhaseState(cfg, project_to_tangent(cfg.positions, self.velocities[idx], self.space))


def _constraint_drift(Q, V, space):
    if not space.curved:
        return 0.0, 0.0
    pos = float(np.max(np.abs(inner(Q, Q, space) - space.sigma)))
    vel = float(np.max(np.abs(inner(Q, V, space))))
    return pos, vel


def _flat_rhs(law, masses, n, d):
    def rhs(t, y):
        Q = y[: n * d].reshape(n, d)
        V = y[n * d :]
        return np.concatenate([V, flat_interaction(Q, masses, law).ravel()])
    return rhs


def _curved_rhs(space, masses, n, d):
    sigma = space.sigma

    def rhs(t, y):
        Q = y[: n * d].reshape(n, d)
        V = y[n * d :].reshape(n, d)
        A = curved_interaction(Q, masses, space) - sigma * inner(V, V, space)[:, None] * Q
        return np.concatenate([V.ravel(), A.ravel()])
    return rhs


def _sample_times(t_end, t_eval, n_samples):
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, n_samples) if t_end > 0 else np.array([0.0])
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size == 0 or t_eval[0] != 0.0 or np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must start at 0 and increase strictly")
    return t_eval


def integrate(
    state0,
    t_end: float,
    rel_tol: float = 1e-10,
    law: ForceLaw | None = None,
    t_eval=None,
    n_samples: int = 201,
    precision: int | None = None,
) -> Trajectory:
    """Integrate the equations of motion from ``state0`` up to ``t_end``.

    Double precision uses the embedded Dormand-Prince 8(5,3) pair; steps land
    exactly on the sample times so no interpolant enters the samples.  With
    ``precision`` (decimal digits) the run switches to a Dormand-Prince 5(4)
    stepper in MPFR arithmetic (gmpy2); ``state0`` may then be an :class:`MPState`
    carrying extended-precision initial data.

    On curved spaces the state is pulled back onto the manifold (and
    velocities made tangent again) whenever the constraint drift at a step
    exceeds ``10 * rel_tol``; ``diagnostics["projections"]`` counts these.
    """
    if not 1e-13 <= rel_tol <= 1e-6:
        raise ToleranceUnachievable(f"rel_tol {rel_tol} outside [1e-13, 1e-6]")
    if precision is not None:
        from . import hiprec

        return hiprec.integrate_mp(state0, t_end, rel_tol, law, _sample_times(t_end, t_eval, n_samples), precision)
    cfg = state0.config
    space = cfg.space
    if not space.curved and law is None:
        raise InvalidConfiguration("flat integration needs a force law")
    n, d = cfg.positions.shape
    masses = cfg.masses
    t_eval = _sample_times(t_end, t_eval, n_samples)
    rhs = _curved_rhs(space, masses, n, d) if space.curved else _flat_rhs(law, masses, n, d)

    y = np.concatenate([cfg.positions.ravel(), state0.velocities.ravel()])
    out = np.empty((len(t_eval), y.size))
    out[0] = y
    atol = rel_tol * max(1.0, float(np.abs(y).max()))
    diag = {"rel_tol": rel_tol, "precision": "double", "projections": 0, "nfev": 0,
            "steps": 0, "max_position_drift": 0.0, "max_tangency_drift": 0.0}

    t, h = 0.0, None
    for k in range(1, len(t_eval)):
        span = t_eval[k] - t
        solver = DOP853(rhs, t, y, t_eval[k], rtol=rel_tol, atol=atol,
                        first_step=None if h is None else min(h, span))
        h_seg = 0.0
        while solver.status == "running":
            try:
                msg = solver.step()
            except (CollisionSingularity, AntipodalOrCoincidentSingularity) as exc:
                raise SingularityEncountered(f"at t={solver.t:.6g}: {exc}") from exc
            diag["steps"] += 1
            if solver.status == "failed":
                raise SingularityEncountered(f"step size collapse at t={solver.t:.6g}: {msg}")
            h_seg = max(h_seg, solver.step_size)
            if space.curved and solver.status == "running":
                Q = solver.y[: n * d].reshape(n, d)
                V = solver.y[n * d :].reshape(n, d)
                pdrift, vdrift = _constraint_drift(Q, V, space)
                diag["max_position_drift"] = max(diag["max_position_drift"], pdrift)
                diag["max_tangency_drift"] = max(diag["max_tangency_drift"], vdrift)
                if max(pdrift, vdrift) > 10 * rel_tol:
                    Q = project_to_manifold(Q, space)
                    V = project_to_tangent(Q, V, space)
                    diag["projections"] += 1
                    diag["nfev"] += solver.nfev
                    solver = DOP853(rhs, solver.t, np.concatenate([Q.ravel(), V.ravel()]),
                                    t_eval[k], rtol=rel_tol, atol=atol,
                                    first_step=min(h_seg, t_eval[k] - solver.t))
        diag["nfev"] += solver.nfev
        t, y = t_eval[k], solver.y.copy()
        out[k] = y
        if space.curved:
            Q = y[: n * d].reshape(n, d)
            V = y[n * d :].reshape(n, d)
            pdrift, vdrift = _constraint_drift(Q, V, space)
            diag["max_position_drift"] = max(diag["max_position_drift"], pdrift)
            diag["max_tangency_drift"] = max(diag["max_tangency_drift"], vdrift)
            if max(pdrift, vdrift) > 10 * rel_tol:
                Q = project_to_manifold(Q, space)
                y = np.concatenate([Q.ravel(), project_to_tangent(Q, V, space).ravel()])
                diag["projections"] += 1
        h = h_seg or None

    P = out[:, : n * d].reshape(-1, n, d)
    V = out[:, n * d :].reshape(-1, n, d)
    log.debug("integrated to t=%g in %d steps", t_end, diag["steps"])
    return Trajectory(space, masses, t_eval, P, V, diag)


def rigidity_report(traj: Trajectory) -> float:
    """Largest change of any pairwise distance (flat) or pairwise product (curved)."""
    if len(traj.times) < 1:
        raise ValueError("empty trajectory")
    P = traj.positions
    if traj.space.curved:
        g = np.einsum("tik,tjk,k->tij", P, P, traj.space.metric)
    else:
        g = np.linalg.norm(P[:, None, :, :] - P[:, :, None, :], axis=-1)
    return float(np.max(np.abs(g - g[0])))


def constraint_drift(traj: Trajectory) -> float:
    """``max |Q_i.Q_i - sigma|`` over all samples (0 for flat space)."""
    if not traj.space.curved:
        return 0.0
    P = traj.positions
    return float(np.max(np.abs(inner(P, P, traj.space) - traj.space.sigma)))
