"""Named starting configurations together with their closed-form or 1-D oracles.

Each seed returns ``(space, masses, generator_matrix, positions)``; the oracle
helpers compute the exact equilibrium independently of the Newton solver.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .geometry import FLAT, HYPERBOLOID, SPHERE, SpaceForm, planar_generator, project_to_manifold

SEED_NAMES = ("two_body", "lagrange", "euler_collinear", "sphere_lagrange", "hyperbolic_pair")


# ---------------------------------------------------------------- flat, Newtonian


def _gap_for_law(omega: float, M: float, law) -> float:
    """Root of ``M f(d) = omega^2`` (two-body circle and Lagrange triangle, any law)."""
    g = lambda d: M * law.f(d) - omega**2
    lo, hi = 1e-6, 1.0
    while g(hi) > 0 and hi < 1e12:
        hi *= 4
    while g(lo) < 0 and lo > 1e-300:
        lo /= 4
    if g(lo) * g(hi) > 0:
        raise ValueError("no separation solves M f(d) = omega^2 for this law")
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def two_body_separation(omega: float, masses=(1.0, 1.0), law=None) -> float:
    """Circular two-body separation: ``d^3 = (m1 + m2) / omega^2`` (Newtonian).

    Other laws solve ``(m1 + m2) f(d) = omega^2`` by bracketing.
    """
    if law is None:
        return (sum(masses) / omega**2) ** (1 / 3)
    return _gap_for_law(omega, float(sum(masses)), law)


def two_body_positions(omega: float, masses=(1.0, 1.0), law=None) -> np.ndarray:
    m1, m2 = masses
    d = two_body_separation(omega, masses, law)
    M = m1 + m2
    return np.array([[m2 / M * d, 0.0], [-m1 / M * d, 0.0]])


def lagrange_side(omega: float, masses, law=None) -> float:
    """Equilateral side: ``omega^2 = (m1 + m2 + m3) / d^3`` (Newtonian), else ``M f(d) = omega^2``."""
    if law is None:
        return (float(np.sum(masses)) / omega**2) ** (1 / 3)
    return _gap_for_law(omega, float(np.sum(masses)), law)


def lagrange_positions(omega: float, masses, scale: float = 1.0, law=None) -> np.ndarray:
    d = lagrange_side(omega, masses, law)
    ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    P = d / np.sqrt(3) * np.column_stack([np.cos(ang), np.sin(ang)])
    P -= np.asarray(masses) @ P / np.sum(masses)
    return scale * P


def euler_quintic(masses) -> np.ndarray:
    """Coefficients (highest first) of Euler's quintic in ``r = (x3 - x2)/(x2 - x1)``.

    Bodies ``m1, m2, m3`` sit in this order on the line.
    """
    m1, m2, m3 = masses
    return np.array([
        m1 + m2,
        3 * m1 + 2 * m2,
        3 * m1 + m2,
        -(m2 + 3 * m3),
        -(2 * m2 + 3 * m3),
        -(m2 + m3),
    ])


def euler_ratio(masses) -> float:
    """The unique positive root of Euler's quintic, bracketed with brentq."""
    c = euler_quintic(masses)
    p = np.poly1d(c)
    hi = 1.0
    while p(hi) <= 0:
        hi *= 2
    return brentq(p, 1e-12, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def euler_positions(omega: float, masses, ratio: float | None = None) -> np.ndarray:
    """Collinear configuration along the x-axis with the given spacing ratio.

    The overall scale is fixed by ``omega`` when ``ratio`` is the quintic root;
    other ratios give a guess at the same scale.
    """
    m = np.asarray(masses, dtype=float)
    r = euler_ratio(m) if ratio is None else ratio
    x = np.array([0.0, 1.0, 1.0 + r])
    x -= m @ x / m.sum()
    # Newtonian accelerations at unit spacing; a collinear CC has a_i = -lam x_i
    acc = np.array([
        sum(m[j] * np.sign(x[j] - x[i]) / (x[j] - x[i]) ** 2 for j in range(3) if j != i)
        for i in range(3)
    ])
    lam = -(m * acc) @ x / ((m * x) @ x)
    a = (lam / omega**2) ** (1 / 3)
    return np.column_stack([a * x, np.zeros(3)])


# ---------------------------------------------------------------- curved


def sphere_latitude_positions(z0: float, n: int = 3) -> np.ndarray:
    r = np.sqrt(1 - z0**2)
    ang = 2 * np.pi * np.arange(n) / n
    return np.column_stack([r * np.cos(ang), r * np.sin(ang), np.full(n, z0)])


def sphere_lagrange_omega(z0: float, m: float = 1.0) -> float:
    """Angular speed making the latitude triangle at height ``z0`` an RE.

    Root-finds the radial (horizontal) component of body 1's reduced equation
    in ``omega`` directly from the pair sums; independent of the solver.
    """
    Q = sphere_latitude_positions(z0)

    def horizontal(w):
        x = Q[0]
        force = np.zeros(3)
        for j in (1, 2):
            c = x @ Q[j]
            force += m * (Q[j] - c * x) / (1 - c**2) ** 1.5
        G = planar_generator(w, 3)
        GQ = G @ x
        rot = G @ G @ x + (GQ @ GQ) * x
        return (force - rot)[0]

    return brentq(horizontal, 1e-6, 1e3, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def hyperbolic_pair_positions(rho: float) -> np.ndarray:
    s, c = np.sinh(rho), np.cosh(rho)
    return np.array([[s, 0.0, c], [-s, 0.0, c]])


def hyperbolic_pair_omega(rho: float, m: float = 1.0) -> float:
    """Elliptic rotation speed for the symmetric pair at distance ``rho`` from the apex.

    Root-finds the first component of body 1's reduced equation.
    """
    Q = hyperbolic_pair_positions(rho)
    eta = np.array([1.0, 1.0, -1.0])

    def first(w):
        x, y = Q
        c = np.sum(x * y * eta)
        force = m * (y + c * x) / (c**2 - 1) ** 1.5
        G = planar_generator(w, 3)
        GQ = G @ x
        rot = G @ G @ x - np.sum(GQ * GQ * eta) * x
        return (force - rot)[0]

    return brentq(first, 1e-6, 1e3, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------- dispatcher


def named_seed(name: str, masses=None, omega: float | None = None, scale: float = 1.0,
               z0: float = 0.5, rho: float = 0.5, perturb: float = 0.0, rng_seed: int = 0, law=None):
    """Build a named seed.

    Returns ``(space, masses, G, positions)``.  ``scale`` multiplies flat seeds;
    ``perturb`` adds a deterministic Gaussian kick (re-projected on curved spaces).
    ``law`` sizes the two-body and Lagrange seeds for non-Newtonian laws.
    """
    rng = np.random.default_rng(rng_seed)
    if name == "two_body":
        m = np.asarray(masses if masses is not None else (1.0, 1.0), dtype=float)
        w = 1.0 if omega is None else omega
        space, P = SpaceForm(FLAT, 2), scale * two_body_positions(w, m, law)
    elif name == "lagrange":
        m = np.asarray(masses if masses is not None else (1.0, 1.0, 1.0), dtype=float)
        w = 1.0 if omega is None else omega
        space, P = SpaceForm(FLAT, 2), lagrange_positions(w, m, scale, law)
    elif name == "euler_collinear":
        m = np.asarray(masses if masses is not None else (1.0, 1.0, 1.0), dtype=float)
        w = 1.0 if omega is None else omega
        # evenly spaced guess at the equilibrium scale
        space, P = SpaceForm(FLAT, 2), scale * euler_positions(w, m, ratio=1.0)
    elif name == "sphere_lagrange":
        m = np.asarray(masses if masses is not None else (1.0, 1.0, 1.0), dtype=float)
        if not np.allclose(m, m[0]):
            raise ValueError("sphere_lagrange seed needs equal masses")
        w = sphere_lagrange_omega(z0, m[0]) if omega is None else omega
        space, P = SpaceForm(SPHERE, 2), sphere_latitude_positions(z0)
    elif name == "hyperbolic_pair":
        m = np.asarray(masses if masses is not None else (1.0, 1.0), dtype=float)
        if not np.allclose(m, m[0]):
            raise ValueError("hyperbolic_pair seed needs equal masses")
        w = hyperbolic_pair_omega(rho, m[0]) if omega is None else omega
        space, P = SpaceForm(HYPERBOLOID, 2), hyperbolic_pair_positions(rho)
    else:
        raise ValueError(f"unknown seed {name!r}; choose from {SEED_NAMES}")
    G = planar_generator(w, space.dim)
    if perturb:
        P = P + perturb * rng.standard_normal(P.shape)
        if space.curved:
            P = project_to_manifold(P, space)
    return space, m, G, P
