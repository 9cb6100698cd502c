"""Extended-precision refinement and integration (gmpy2 / MPFR).

Linearly unstable relative equilibria amplify roundoff by ``exp(lambda t)``;
over ten periods the Euler collinear family reaches ~1e46.  Explicit
Runge-Kutta steps map the homographic (or symmetry-fixed) set of an
equilibrium into itself, so the only shape-breaking error left is arithmetic
roundoff, which enough mantissa bits push below the amplification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction as Fr

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import (
    AntipodalOrCoincidentSingularity,
    CollisionSingularity,
    InvalidConfiguration,
    NoConvergence,
    SingularityEncountered,
)
from .geometry import SpaceForm

# Dormand-Prince 5(4), exact rationals
_C = [Fr(0), Fr(1, 5), Fr(3, 10), Fr(4, 5), Fr(8, 9), Fr(1), Fr(1)]
_A = [
    [],
    [Fr(1, 5)],
    [Fr(3, 40), Fr(9, 40)],
    [Fr(44, 45), Fr(-56, 15), Fr(32, 9)],
    [Fr(19372, 6561), Fr(-25360, 2187), Fr(64448, 6561), Fr(-212, 729)],
    [Fr(9017, 3168), Fr(-355, 33), Fr(46732, 5247), Fr(49, 176), Fr(-5103, 18656)],
    [Fr(35, 384), Fr(0), Fr(500, 1113), Fr(125, 192), Fr(-2187, 6784), Fr(11, 84)],
]
_B = _A[6] + [Fr(0)]
_BHAT = [Fr(5179, 57600), Fr(0), Fr(7571, 16695), Fr(393, 640), Fr(-92097, 339200),
         Fr(187, 2100), Fr(1, 40)]


def bits(dps: int) -> int:
    return int(math.ceil(dps * math.log2(10))) + 8


def _ctx(dps: int):
    # gmpy2 >= 2.2 takes a base context in context(); older releases need local_context()
    try:
        return gmpy2.context(gmpy2.get_context(), precision=bits(dps))
    except TypeError:
        return gmpy2.local_context(gmpy2.get_context(), precision=bits(dps))


def _q(fr: Fr):
    return mpfr(fr.numerator) / fr.denominator


@dataclass
class MPState:
    """Positions and velocities as nested lists of ``mpfr``."""

    space: SpaceForm
    masses: np.ndarray
    positions: list
    velocities: list


def to_mp(a) -> list:
    """Nested lists of ``mpfr`` from an array (current context precision)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return [mpfr(float(v)) for v in a]
    return [to_mp(row) for row in a]


def to_float(a) -> np.ndarray:
    if a and isinstance(a[0], list):
        return np.array([[float(v) for v in row] for row in a])
    return np.array([float(v) for v in a])


def matvec(M, x):
    return [sum((mij * xj for mij, xj in zip(row, x)), mpfr(0)) for row in M]


def _law_terms(law):
    if law is None or not law.builtin:
        raise InvalidConfiguration("extended precision needs a builtin force law")
    return [(mpfr(law.a), mpfr(law.alpha)), (mpfr(law.b), mpfr(law.beta))]


def _f(terms, r):
    return sum((a * r ** (-e) for a, e in terms if a != 0), mpfr(0))


def flat_interaction(Q, masses, terms):
    n, d = len(Q), len(Q[0])
    acc = [[mpfr(0)] * d for _ in range(n)]
    tiny = mpfr(1e-28)
    for i in range(n):
        for j in range(i + 1, n):
            diff = [Q[j][k] - Q[i][k] for k in range(d)]
            r2 = sum((v * v for v in diff), mpfr(0))
            if r2 < tiny:
                raise CollisionSingularity(f"bodies {i} and {j} coincide")
            fr = _f(terms, gmpy2.sqrt(r2))
            wi, wj = masses[j] * fr, masses[i] * fr
            for k in range(d):
                acc[i][k] += wi * diff[k]
                acc[j][k] -= wj * diff[k]
    return acc


def _dot(x, y, eta):
    return sum((a * b * e for a, b, e in zip(x, y, eta)), mpfr(0))


def curved_interaction(Q, masses, space):
    n, d = len(Q), len(Q[0])
    sigma = space.sigma
    eta = space.metric.tolist()
    acc = [[mpfr(0)] * d for _ in range(n)]
    qq = [_dot(q, q, eta) for q in Q]
    for i in range(n):
        for j in range(i + 1, n):
            c = _dot(Q[i], Q[j], eta)
            D = sigma * (qq[i] * qq[j] - c * c)
            if not D >= 1e-14:
                raise AntipodalOrCoincidentSingularity(f"bodies {i} and {j} are coincident or antipodal")
            w = 1 / (D * gmpy2.sqrt(D))
            for k in range(d):
                acc[i][k] += masses[j] * w * (Q[j][k] - sigma * c * Q[i][k])
                acc[j][k] += masses[i] * w * (Q[i][k] - sigma * c * Q[j][k])
    return acc


# ---------------------------------------------------------------- refinement


def residual_mp(Q, problem):
    """Reduced-system residual in the current MPFR precision (flat list)."""
    space = problem.space
    m = [mpfr(float(v)) for v in problem.masses]
    G = to_mp(problem.gen.G)
    GQ = [matvec(G, q) for q in Q]
    GGQ = [matvec(G, v) for v in GQ]
    if space.curved:
        eta = space.metric.tolist()
        inter = curved_interaction(Q, m, space)
        out = []
        for q, gq, ggq, a in zip(Q, GQ, GGQ, inter):
            s = space.sigma * _dot(gq, gq, eta)
            out.extend(ai - gi - s * qi for ai, gi, qi in zip(a, ggq, q))
        out.extend(_dot(q, q, eta) - space.sigma for q in Q)
        return out
    inter = flat_interaction(Q, m, _law_terms(problem.law))
    out = [a - g for row_a, row_g in zip(inter, GGQ) for a, g in zip(row_a, row_g)]
    K = problem.gen.kernel
    if K.shape[1]:
        Kt = to_mp(K.T)
        out.extend(v for q in Q for v in matvec(Kt, q))
    return out


def refine(problem, Q, gauge: dict, dps: int = 40, max_iter: int = 20):
    """Polish a double-precision solution to about ``dps - 5`` digits.

    Iterative refinement: residuals in MPFR, corrections from the double
    Jacobian solved in least squares; the gauge coordinate stays pinned.
    Returns ``(positions as nested mpfr lists, final residual norm)``.
    """
    from .equilibria import jacobian

    n, d = problem.shape
    with _ctx(dps):
        x = to_mp(np.asarray(Q, dtype=float).ravel())
        idx = gauge["body"] * d + gauge["coordinate"]
        pin = x[idx]
        J = jacobian(np.asarray(Q, dtype=float), problem)
        row = np.zeros(J.shape[1])
        row[idx] = 1.0
        J = np.vstack([J, row])
        target = mpfr(10) ** (-(dps - 5))
        for _ in range(max_iter):
            Qm = [x[i * d:(i + 1) * d] for i in range(n)]
            F = residual_mp(Qm, problem) + [x[idx] - pin]
            norm = gmpy2.sqrt(sum((v * v for v in F), mpfr(0)))
            if norm <= target:
                return Qm, float(norm)
            step, *_ = np.linalg.lstsq(J, -to_float(F), rcond=None)
            x = [xi + mpfr(float(s)) for xi, s in zip(x, step)]
        raise NoConvergence(f"extended-precision refinement stalled at {float(norm):.3e}")


def velocities(Q, G, dps: int):
    """``G Q_i`` for every body at the requested precision."""
    with _ctx(dps):
        Gm = to_mp(G)
        return [matvec(Gm, q) for q in Q]


# ---------------------------------------------------------------- integration


def lift(state, dps: int) -> MPState:
    with _ctx(dps):
        return MPState(state.config.space, state.config.masses,
                       to_mp(state.config.positions), to_mp(state.velocities))


def integrate_mp(state0, t_end, rel_tol, law, t_eval, dps):
    """Adaptive Dormand-Prince 5(4) in ``dps``-digit arithmetic.

    Steps are clipped to land on every sample time; curved states are
    re-projected when the constraint drift exceeds ``10 * rel_tol``.  Returns
    a double :class:`~equilibra.dynamics.Trajectory` of the samples.
    """
    from .dynamics import Trajectory

    if not isinstance(state0, MPState):
        state0 = lift(state0, dps)
    space = state0.space
    masses_f = np.asarray(state0.masses, dtype=float)
    n, d = len(state0.positions), len(state0.positions[0])
    N = n * d
    sigma = space.sigma
    if not space.curved and law is None:
        raise InvalidConfiguration("flat integration needs a force law")

    with _ctx(dps):
        eta = space.metric.tolist()
        m = [mpfr(float(v)) for v in masses_f]
        terms = None if space.curved else _law_terms(law)
        A = [[_q(a) for a in row] for row in _A]
        B = [_q(b) for b in _B]
        E = [_q(b - bh) for b, bh in zip(_B, _BHAT)]

        def rhs(y):
            Q = [y[i * d:(i + 1) * d] for i in range(n)]
            V = [y[N + i * d:N + (i + 1) * d] for i in range(n)]
            if space.curved:
                acc = curved_interaction(Q, m, space)
                for a, q, v in zip(acc, Q, V):
                    s = sigma * _dot(v, v, eta)
                    for k in range(d):
                        a[k] -= s * q[k]
            else:
                acc = flat_interaction(Q, m, terms)
            return y[N:] + [v for row in acc for v in row]

        def combo(y, h, coeffs, ks):
            out = list(y)
            for c, kv in zip(coeffs, ks):
                if c != 0:
                    hc = h * c
                    out = [o + hc * v for o, v in zip(out, kv)]
            return out

        def project(y):
            Q = [y[i * d:(i + 1) * d] for i in range(n)]
            V = [y[N + i * d:N + (i + 1) * d] for i in range(n)]
            Qp, Vp = [], []
            for q, v in zip(Q, V):
                s = gmpy2.sqrt(sigma / _dot(q, q, eta))
                q = [s * x for x in q]
                c = sigma * _dot(v, q, eta)
                Qp.extend(q)
                Vp.extend(vi - c * qi for vi, qi in zip(v, q))
            return Qp + Vp

        def drift(y):
            Q = [y[i * d:(i + 1) * d] for i in range(n)]
            V = [y[N + i * d:N + (i + 1) * d] for i in range(n)]
            pd = max(abs(float(_dot(q, q, eta) - sigma)) for q in Q)
            vd = max(abs(float(_dot(q, v, eta))) for q, v in zip(Q, V))
            return pd, vd

        y = [x for row in state0.positions for x in row] + [v for row in state0.velocities for v in row]
        y = [mpfr(v) for v in y]
        atol = rel_tol * max(1.0, max(abs(float(v)) for v in y))
        out = np.empty((len(t_eval), 2 * N))
        out[0] = [float(v) for v in y]
        diag = {"rel_tol": rel_tol, "precision": dps, "projections": 0, "nfev": 1, "steps": 0,
                "rejected": 0, "max_position_drift": 0.0, "max_tangency_drift": 0.0}
        t = mpfr(0)
        h = float(t_end) / 1000 if t_end > 0 else 0.0
        try:
            k1 = rhs(y)
            for k in range(1, len(t_eval)):
                t_target = mpfr(float(t_eval[k]))
                while t < t_target:
                    remaining = t_target - t
                    clipped = remaining <= h
                    hh = remaining if clipped else mpfr(h)
                    if float(hh) < 1e-13 * max(1.0, float(t)):
                        raise SingularityEncountered(f"step size collapse at t={float(t):.6g}")
                    ks = [k1]
                    for s in range(1, 7):
                        ks.append(rhs(combo(y, hh, A[s], ks)))
                    diag["nfev"] += 6
                    y_new = combo(y, hh, B, ks)
                    errv = combo([mpfr(0)] * (2 * N), hh, E, ks)
                    err = math.sqrt(sum(
                        (float(e) / (atol + rel_tol * max(abs(float(a)), abs(float(b))))) ** 2
                        for e, a, b in zip(errv, y, y_new)
                    ) / (2 * N))
                    fac = 0.9 * err ** -0.2 if err > 0 else 5.0
                    if err <= 1.0:
                        t += hh
                        y, k1 = y_new, ks[6]
                        diag["steps"] += 1
                        if space.curved:
                            pd, vd = drift(y)
                            diag["max_position_drift"] = max(diag["max_position_drift"], pd)
                            diag["max_tangency_drift"] = max(diag["max_tangency_drift"], vd)
                            if max(pd, vd) > 10 * rel_tol:
                                y = project(y)
                                k1 = rhs(y)
                                diag["projections"] += 1
                        if not clipped:
                            h = h * min(5.0, fac)
                    else:
                        diag["rejected"] += 1
                        h = float(hh) * max(0.2, fac)
                out[k] = [float(v) for v in y]
        except (CollisionSingularity, AntipodalOrCoincidentSingularity) as exc:
            raise SingularityEncountered(f"at t={float(t):.6g}: {exc}") from exc
    P = out[:, :N].reshape(-1, n, d)
    V = out[:, N:].reshape(-1, n, d)
    return Trajectory(space, masses_f, np.asarray(t_eval, dtype=float), P, V, diag)
