"""Numerical certificates for the separation, compactness and cluster arguments.

Existence-style bounds are reported as empirical extrema over sampled
families; the divergence probes evaluate, along synthetic shrinking paths,
the quantities whose blow-up drives the contradiction in each proof.
Nothing here claims universality.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import min_separation
from .equilibria import ContinuationFamily, continue_family, problem_at, verify
from .errors import (
    AntipodalGuardViolation,
    AntipodalOrCoincidentSingularity,
    BranchLost,
    HypothesisNotMet,
    InvalidConfiguration,
    PathViolation,
    UnverifiedMember,
)
from .forcelaw import ForceLaw
from .geometry import HYPERBOLOID, SPHERE, RotationGenerator, SpaceForm, gap_factor, inner, short_chord

log = logging.getLogger(__name__)

TRIANGLE_SLACK = 1e-12
SECANT_SWITCH = 1e-8
REMAINDER_BAND = 10.0
IDENTITY_TOL = 1e-12


def _pmap(fn, items, threads: int = 1) -> list:
    """Ordered map, optionally over a thread pool."""
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def fit_slope(s, y, decades: float = 1.0) -> float:
    """Least-squares slope of ``log|y|`` against ``log s`` over the smallest ``decades`` of ``s``."""
    s = np.asarray(s, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    sel = s <= s.min() * 10**decades
    if sel.sum() < 2:
        raise InvalidConfiguration("need at least two grid points in the fitting window")
    return float(np.polyfit(np.log(s[sel]), np.log(y[sel]), 1)[0])


def _check_grid(s_grid, s_min: float) -> np.ndarray:
    s = np.asarray(s_grid, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) >= 0):
        raise InvalidConfiguration("s-grid must be strictly decreasing with at least two points")
    if s[-1] < s_min or s[0] <= 0:
        raise InvalidConfiguration(f"s-grid must stay within [{s_min:g}, inf)")
    return s


# ---------------------------------------------------------------- family scans


def _verified(family: ContinuationFamily, tol: Optional[float]):
    if family is None or len(family) == 0:
        raise UnverifiedMember("empty family")
    tol = tol if tol is not None else 10 * family.opts.get("tol", 1e-10)
    for k, sol in enumerate(family.members):
        p = problem_at(family.problem, family.parameter, sol.param_value, family.index)
        rep = verify(sol.positions, p, tol=max(tol, 10 * sol.residual_norm))
        if not rep.is_re:
            raise UnverifiedMember(
                f"member {k} ({family.parameter}={sol.param_value}) residual {rep.residual_norm:.3e}"
            )
    return tol


@dataclass
class SeparationCertificate:
    parameter: str
    grid: list
    c_hat: float
    argmin: dict
    c_hat_refined: Optional[float]
    stability_ratio: Optional[float]
    members: int

    def to_dict(self) -> dict:
        return dict(self.__dict__, kind="separation")


def _refined(grid: np.ndarray) -> np.ndarray:
    mid = 0.5 * (grid[1:] + grid[:-1])
    out = np.empty(grid.size + mid.size)
    out[0::2] = grid
    out[1::2] = mid
    return out


def separation_scan(family: ContinuationFamily, tol: Optional[float] = None,
                    refine: bool = True) -> SeparationCertificate:
    """Empirical separation bound ``c_hat`` with a 2x grid-refinement check."""
    _verified(family, tol)
    seps = []
    for k, sol in enumerate(family.members):
        Q = sol.positions
        r = np.linalg.norm(Q[None] - Q[:, None], axis=-1)
        r[np.diag_indices(len(Q))] = np.inf
        i, j = np.unravel_index(np.argmin(r), r.shape)
        seps.append((float(r[i, j]), k, int(min(i, j)), int(max(i, j))))
    c_hat, k, i, j = min(seps)
    fine = ratio = None
    if refine and len(family.grid) > 1 and len(family) == len(family.grid):
        grid = _refined(np.asarray(family.grid, dtype=float))
        try:
            fam2 = continue_family(family.problem, family.members[0], family.parameter, grid,
                                   index=family.index, **family.opts)
        except BranchLost as exc:
            fam2 = exc.family
        fine = min(min_separation(s.positions) for s in fam2.members)
        ratio = fine / c_hat
    return SeparationCertificate(
        parameter=family.parameter,
        grid=np.asarray(family.grid).tolist(),
        c_hat=c_hat,
        argmin={"member": k, "param_value": family.members[k].param_value, "bodies": [i, j]},
        c_hat_refined=fine,
        stability_ratio=ratio,
        members=len(family),
    )


@dataclass
class BoundednessCertificate:
    parameter: str
    C_hat: float
    argmax: dict
    compactness_flag: bool
    law: dict
    members: int

    def to_dict(self) -> dict:
        return dict(self.__dict__, kind="boundedness")


def boundedness_scan(family: ContinuationFamily, law: Optional[ForceLaw] = None,
                     tol: Optional[float] = None) -> BoundednessCertificate:
    """Empirical norm bound ``C_hat``; refused unless ``x f(x)`` has the compactness property."""
    law = law if law is not None else (family.problem.law if family is not None else None)
    if law is None:
        raise HypothesisNotMet("boundedness needs a flat interaction law")
    if not law.compactness_flag:
        raise HypothesisNotMet(f"law {law.to_dict()}: x f(x) does not diverge at 0 with bounded tail")
    _verified(family, tol)
    norms = [(float(np.linalg.norm(s.positions, axis=1).max()), k) for k, s in enumerate(family.members)]
    C_hat, k = max(norms)
    body = int(np.argmax(np.linalg.norm(family.members[k].positions, axis=1)))
    return BoundednessCertificate(
        parameter=family.parameter,
        C_hat=C_hat,
        argmax={"member": k, "param_value": family.members[k].param_value, "body": body},
        compactness_flag=True,
        law=law.to_dict(),
        members=len(family),
    )


# ---------------------------------------------------------------- flat collision probe

# far bodies for the default path, chosen off the collision axis
_FAR = np.array([[0.3, 1.0], [-0.9, -0.6], [1.1, -0.4], [-0.5, 1.2], [0.8, 0.9], [-1.2, 0.2]])


def default_shrink_path(n: int, dim: int = 2) -> Callable:
    """Bodies 1, 2 at ``(+-s/2, 0, ...)``; bodies 3..n fixed at distinct off-axis points."""
    if n < 2 or n - 2 > len(_FAR):
        raise InvalidConfiguration(f"default path supports 2..{len(_FAR) + 2} bodies")
    far = np.zeros((n - 2, dim))
    far[:, :2] = _FAR[: n - 2]

    def path(s):
        Q = np.zeros((n, dim))
        Q[0, 0], Q[1, 0] = s / 2, -s / 2
        Q[2:] = far
        return Q

    return path


@dataclass
class DivergenceProbeResult:
    s: np.ndarray
    required_bound: np.ndarray
    remainder: np.ndarray
    triangle_ratio: np.ndarray
    identity_residual: np.ndarray
    slope: float
    triangle_ratio_max: float
    remainder_band: tuple
    c2: Optional[float] = None
    exceeds_c2_below: Optional[float] = None

    @property
    def remainder_bounded(self) -> bool:
        ref = abs(self.remainder[0])
        return bool(np.max(np.abs(self.remainder)) <= REMAINDER_BAND * ref) if ref > 0 else False

    @property
    def triangle_ok(self) -> bool:
        return bool(self.triangle_ratio_max <= 1 + TRIANGLE_SLACK)

    def slope_ok(self, expected: float, window: float = 0.05) -> bool:
        return bool(abs(self.slope - expected) <= window)

    def rows(self) -> list:
        return [
            {"s": float(s), "required_bound": float(b), "remainder": float(r), "triangle_ratio": float(t)}
            for s, b, r, t in zip(self.s, self.required_bound, self.remainder, self.triangle_ratio)
        ]

    def to_dict(self) -> dict:
        return {
            "kind": "divergence_flat",
            "slope": self.slope,
            "triangle_ratio_max": self.triangle_ratio_max,
            "triangle_ok": self.triangle_ok,
            "remainder_band": list(self.remainder_band),
            "remainder_bounded": self.remainder_bounded,
            "max_required_bound": float(np.max(self.required_bound)),
            "max_identity_residual": float(np.max(self.identity_residual)),
            "c2": self.c2,
            "exceeds_c2_below": self.exceeds_c2_below,
            "s_range": [float(self.s[0]), float(self.s[-1])],
        }


def _probe_point(Q, masses, law: ForceLaw):
    """Projection of the pairwise-difference equation onto ``(Q1 - Q2)/|Q1 - Q2|^2``."""
    m = masses
    delta = Q[0] - Q[1]
    s = float(np.linalg.norm(delta))
    u = delta / s
    lead = (m[0] + m[1]) * law.f(s)
    rem = 0.0
    tri = 0.0
    terms = [abs(lead)]
    for j in range(2, len(Q)):
        a, b = Q[0] - Q[j], Q[1] - Q[j]
        r1, r2 = float(np.linalg.norm(a)), float(np.linalg.norm(b))
        # r2 - r1 from the difference of squares keeps its relative accuracy
        dr = -float(delta @ (a + b)) / (r1 + r2)
        ratio = dr / s
        tri = max(tri, abs(ratio))
        if abs(dr) > SECANT_SWITCH * s:
            q = (law.f(r2) - law.f(r1)) / dr
        else:
            q = law.fprime(0.5 * (r1 + r2))
        B = q * ratio
        proj = float((Q[j] - Q[1]) @ u)
        fj = law.f(r1)
        rem += m[j] * fj + m[j] * proj * B
        terms += [abs(m[j] * fj), abs(m[j] * proj * B)]
    return lead + rem, rem, tri, sum(terms)


def collision_divergence_probe(
    masses,
    gen: RotationGenerator,
    law: ForceLaw,
    shrink_path: Optional[Callable] = None,
    s_grid=None,
    far_guard: Optional[float] = None,
    threads: int = 1,
) -> DivergenceProbeResult:
    """Evaluate the rotation bound an RE would need while bodies 1 and 2 collide.

    ``shrink_path(s)`` returns positions with ``|Q1 - Q2| = s``.  For every
    ``s`` the probe reports the required bound ``(m1 + m2) f(s) + remainder``
    and the remainder made of the far-body terms; the secant quotients use the
    derivative limit when the two far distances agree to ``1e-8 s``.  The
    required bound is cross-checked against the direct projection of the
    interaction difference.
    """
    from .dynamics import flat_interaction

    m = np.asarray(masses, dtype=float)
    n = m.size
    dim = gen.space.dim
    path = shrink_path or default_shrink_path(n, dim)
    s = _check_grid(s_grid if s_grid is not None else np.geomspace(1e-1, 1e-4, 31), 1e-8)
    Q0 = np.asarray(path(s[0]), dtype=float)
    if Q0.shape != (n, dim):
        raise InvalidConfiguration(f"path returns shape {Q0.shape}, expected {(n, dim)}")
    if far_guard is None:
        far_guard = 0.5 * min(
            (np.linalg.norm(Q0[j] - Q0[i]) for i in (0, 1) for j in range(2, n)), default=np.inf
        )

    def point(sv):
        Q = np.asarray(path(sv), dtype=float)
        gap = float(np.linalg.norm(Q[0] - Q[1]))
        if abs(gap - sv) > 1e-9 * sv:
            raise PathViolation(f"path gives |Q1 - Q2| = {gap:.6g} at s = {sv:.6g}")
        for j in range(2, n):
            for i in (0, 1):
                if np.linalg.norm(Q[j] - Q[i]) < far_guard:
                    raise PathViolation(f"body {j} enters the cluster neighbourhood at s = {sv:.3g}")
        req, rem, tri, scale = _probe_point(Q, m, law)
        F = flat_interaction(Q, m, law)
        delta = Q[0] - Q[1]
        direct = -float((F[0] - F[1]) @ delta) / float(delta @ delta)
        return req, rem, tri, abs(req - direct) / scale

    vals = np.array(_pmap(point, list(s), threads))
    req, rem, tri, ident = vals.T
    c2 = float(gen.c2)
    above = s[req > c2]
    return DivergenceProbeResult(
        s=s,
        required_bound=req,
        remainder=rem,
        triangle_ratio=tri,
        identity_residual=ident,
        slope=fit_slope(s, req),
        triangle_ratio_max=float(tri.max()),
        remainder_band=(float(rem.min()), float(rem.max())),
        c2=c2,
        exceeds_c2_below=float(above.max()) if above.size else None,
    )


# ---------------------------------------------------------------- curved cluster identity


def _pair_data(Q, space: SpaceForm):
    """Per-pair inner products, gap factors, numerators and ``sigma (1 + sigma c)``.

    Everything that vanishes at coincidence or antipodality is formed from the
    short chord, so both limits keep full relative accuracy.
    """
    sigma = space.sigma
    Qi, Qj = Q[:, None, :], Q[None, :, :]
    c = inner(Qi, Qj, space)
    D = gap_factor(Qi, Qj, space)
    v, s = short_chord(Qi, Qj, space)
    num = v - sigma * inner(Qi, v, space)[..., None] * Qi
    # sigma (1 + sigma c) = sigma + c, which equals (v.v)/2 on the antipodal side
    den = np.where(s < 0, 0.5 * inner(v, v, space), sigma + c)
    return c, D, num, den


def _check_pairs(D, idx):
    for a in idx:
        for b in idx:
            if a != b and not D[a, b] > 0:
                raise AntipodalOrCoincidentSingularity(f"bodies {a} and {b} are coincident or antipodal")


def double_sum_sides(Q, masses, space: SpaceForm, cluster: Sequence[int]):
    """Both sides of the cluster double-sum identity as ambient vectors.

    Returns ``(lhs, rhs_resolved, rhs_printed, scale)``: ``lhs`` is twice the
    ordered sum of ``m_i m_j (Q_j - sigma c_ij Q_i) / D_ij^(3/2)``, the right
    sides use ``(Q_i + Q_j) / (D_ij^(1/2) den)`` with ``den = sigma (1 + sigma c)``
    (resolved) or ``sigma (1 + c)`` (printed).  ``scale`` is the sum of term
    norms on the left.
    """
    Q = np.asarray(Q, dtype=float)
    m = np.asarray(masses, dtype=float)
    sigma = space.sigma
    idx = list(cluster)
    c, D, num, den = _pair_data(Q, space)
    _check_pairs(D, idx)
    dim = Q.shape[1]
    lhs = np.zeros(dim)
    res = np.zeros(dim)
    prn = np.zeros(dim)
    scale = 0.0
    for i in idx:
        for j in idx:
            if i == j:
                continue
            w = m[i] * m[j]
            t = w * num[i, j] / D[i, j] ** 1.5
            lhs += 2 * t
            scale += 2 * np.linalg.norm(t)
            base = w * (Q[i] + Q[j]) / np.sqrt(D[i, j])
            res += base / den[i, j]
            # for sigma = +1 both readings are the same expression
            printed = den[i, j] if sigma > 0 else sigma * (1 + c[i, j])
            with np.errstate(divide="ignore", invalid="ignore"):
                prn += base / printed
    return lhs, res, prn, scale


@dataclass
class ClusterProbeResult:
    cluster: list
    sigma: int
    identity_residual: float = 0.0
    identity_residual_printed: Optional[float] = None
    s: Optional[np.ndarray] = None
    rhs: Optional[np.ndarray] = None
    lhs: Optional[np.ndarray] = None
    path_identity_residual: Optional[np.ndarray] = None
    slope: Optional[float] = None
    lhs_band: Optional[tuple] = None
    extras: dict = field(default_factory=dict)

    @property
    def identity_ok(self) -> bool:
        ok = self.identity_residual <= IDENTITY_TOL
        if self.path_identity_residual is not None:
            ok = ok and bool(np.max(self.path_identity_residual) <= IDENTITY_TOL)
        return bool(ok)

    @property
    def lhs_bounded(self) -> bool:
        if self.lhs is None:
            return True
        ref = max(1.0, abs(self.lhs[0]))
        return bool(np.all(np.isfinite(self.lhs)) and np.max(np.abs(self.lhs)) <= REMAINDER_BAND * ref)

    def rhs_exceeds(self, threshold: float = 1e6, below: float = 1e-5) -> bool:
        if self.s is None:
            return False
        sel = self.s < below
        return bool(sel.any() and np.max(self.rhs[sel]) > threshold)

    def slope_ok(self, expected: float = -1.0, window: float = 0.1) -> bool:
        return self.slope is not None and abs(self.slope - expected) <= window

    def rows(self) -> list:
        if self.s is None:
            return []
        return [{"s": float(s), "lhs": float(a), "rhs": float(b)} for s, a, b in zip(self.s, self.lhs, self.rhs)]

    def to_dict(self) -> dict:
        d = {
            "cluster": self.cluster,
            "sigma": self.sigma,
            "identity_residual": self.identity_residual,
            "identity_residual_printed": self.identity_residual_printed,
            "denominator": "sigma*(1+sigma*c)",
        }
        if self.s is not None:
            d.update(
                kind="cluster_divergence",
                slope=self.slope,
                lhs_band=list(self.lhs_band),
                lhs_bounded=self.lhs_bounded,
                max_rhs=float(np.max(self.rhs)),
                max_path_identity_residual=float(np.max(self.path_identity_residual)),
                s_range=[float(self.s[0]), float(self.s[-1])],
            )
        else:
            d["kind"] = "cluster_identity"
        d.update(self.extras)
        return d


def _relative(diff, ref):
    nd = float(np.linalg.norm(diff))
    if nd == 0.0:
        return 0.0
    nr = float(np.linalg.norm(ref))
    return nd / nr if nr > 0 else float("inf")


def curved_cluster_identity(Q, masses, space: SpaceForm, cluster: Sequence[int]) -> ClusterProbeResult:
    """Relative residual of the double-sum identity under both denominator readings.

    The residual is ``|LHS - RHS| / |LHS|``; the resolved reading
    ``sigma (1 + sigma c)`` is exact in both curvatures, the printed
    ``sigma (1 + c)`` only for ``sigma = +1``.
    """
    if not space.curved:
        raise InvalidConfiguration("the cluster identity lives on a curved space")
    Q = np.asarray(Q, dtype=float)
    cluster = sorted(int(i) for i in cluster)
    lhs, res, prn, _ = double_sum_sides(Q, masses, space, cluster)
    return ClusterProbeResult(
        cluster=cluster,
        sigma=space.sigma,
        identity_residual=_relative(lhs - res, lhs),
        identity_residual_printed=_relative(lhs - prn, lhs),
    )


# ---------------------------------------------------------------- curved cluster divergence


def _geodesic_pair(p, u, s, sigma):
    """Two points at geodesic distance ``s`` symmetric about ``p`` along unit tangent ``u``."""
    if sigma > 0:
        a, b = np.cos(s / 2), np.sin(s / 2)
    else:
        a, b = np.cosh(s / 2), np.sinh(s / 2)
    return a * p + b * u, a * p - b * u


def default_cluster_path(space: SpaceForm, n: int = 3) -> Callable:
    """Bodies 1, 2 close along a geodesic; the rest fixed well away.

    Sphere: cluster centred at polar angle 0.6, far bodies spread around
    it without antipodal pairs.  Hyperboloid: cluster at distance 0.5 from
    the apex, far bodies within distance ~1.2, so the path stays in a bounded
    set.
    """
    if space.kind not in (SPHERE, HYPERBOLOID) or space.k != 2:
        raise InvalidConfiguration("default cluster paths are defined on S^2 and H^2")
    sigma = space.sigma
    if n < 2 or n > 6:
        raise InvalidConfiguration("default cluster path supports 2..6 bodies")
    if sigma > 0:
        th = 0.6
        p = np.array([np.sin(th), 0.0, np.cos(th)])
        u = np.array([np.cos(th), 0.0, -np.sin(th)])
        far = [(1.4, 1.6), (1.0, -1.5), (0.4, 2.6), (1.9, 0.3)]
        pts = [np.array([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)]) for a, b in far]
    else:
        rho = 0.5
        p = np.array([np.sinh(rho), 0.0, np.cosh(rho)])
        u = np.array([0.0, 1.0, 0.0])
        far = [(1.0, 2.0), (1.2, -2.2), (0.8, 3.1), (1.1, -1.0)]
        pts = [np.array([np.sinh(a) * np.cos(b), np.sinh(a) * np.sin(b), np.cosh(a)]) for a, b in far]
    far_pts = np.array(pts[: n - 2]).reshape(n - 2, 3)

    def path(s):
        q1, q2 = _geodesic_pair(p, u, s, sigma)
        return np.vstack([q1, q2, far_pts])

    return path


def curved_cluster_divergence(
    masses,
    gen: RotationGenerator,
    space: SpaceForm,
    cluster_path: Optional[Callable] = None,
    s_grid=None,
    epsilon: float = 0.1,
    cluster: Sequence[int] = (0, 1),
    far_guard: float = 0.1,
    threads: int = 1,
) -> ClusterProbeResult:
    """Track both sides of the projected cluster equation as the cluster shrinks.

    Right side: ``1/2 sum_{i != j in C} m_i m_j (Q_i + Q_j).Q_1 /
    (D_ij^(1/2) sigma (1 + sigma c_ij))``.  Left side:
    ``(sum_{i in C} m_i B_i - B_2).Q_1`` with ``B_i`` the rotation terms of
    ``gen`` and ``B_2`` the cluster/far cross sum.  An RE would force the two
    to agree; the right side diverges like ``1/s`` while the left stays in a
    band, which is the contradiction.  Every point is also checked against the
    double-sum identity built from the interaction terms.
    """
    from .equilibria import rotation_terms

    if not space.curved:
        raise InvalidConfiguration("cluster divergence needs a curved space")
    m = np.asarray(masses, dtype=float)
    n = m.size
    sigma = space.sigma
    C = sorted(int(i) for i in cluster)
    if len(C) < 2 or C[0] != 0:
        raise InvalidConfiguration("cluster must contain body 0 and at least one more body")
    far = [j for j in range(n) if j not in C]
    path = cluster_path or default_cluster_path(space, n)
    s = _check_grid(s_grid if s_grid is not None else np.geomspace(1e-1, 1e-7, 61), 1e-12)

    def point(sv):
        Q = np.asarray(path(sv), dtype=float)
        if Q.shape != (n, space.dim):
            raise InvalidConfiguration(f"path returns shape {Q.shape}, expected {(n, space.dim)}")
        if np.max(np.abs(inner(Q, Q, space) - sigma)) > 1e-10:
            raise PathViolation(f"path leaves the manifold at s = {sv:.3g}")
        c, D, num, den = _pair_data(Q, space)
        if sigma > 0:
            iu = np.triu_indices(n, 1)
            worst = float(c[iu].min())
            if not worst > -1 + epsilon:
                raise AntipodalGuardViolation(
                    f"pair product {worst:.6g} <= -1 + epsilon ({epsilon}) at s = {sv:.3g}"
                )
        for i in C:
            for j in far:
                if np.linalg.norm(Q[i] - Q[j]) < far_guard:
                    raise PathViolation(f"body {j} enters the cluster at s = {sv:.3g}")
        _check_pairs(D, range(n))
        q1 = Q[0]
        rhs = 0.0
        within = np.zeros(space.dim)
        scale = 0.0
        for i in C:
            for j in C:
                if i == j:
                    continue
                w = m[i] * m[j]
                rhs += 0.5 * w * inner(Q[i] + Q[j], q1, space) / (np.sqrt(D[i, j]) * den[i, j])
                t = w * num[i, j] / D[i, j] ** 1.5
                within += t
                scale += np.linalg.norm(t)
        B2 = np.zeros(space.dim)
        for i in C:
            for j in far:
                B2 += m[i] * m[j] * num[i, j] / D[i, j] ** 1.5
        rot = rotation_terms(Q[C], gen)
        lhs = inner(m[C] @ rot - B2, q1, space)
        # identity: interaction-side sum over the cluster equals the right side
        ident = abs(float(inner(within, q1, space)) - rhs) / (scale * np.linalg.norm(q1) + abs(rhs))
        return float(lhs), float(rhs), float(ident), float(np.linalg.norm(Q, axis=1).max())

    vals = np.array(_pmap(point, list(s), threads))
    lhs, rhs, ident, qmax = vals.T
    return ClusterProbeResult(
        cluster=C,
        sigma=sigma,
        s=s,
        rhs=rhs,
        lhs=lhs,
        path_identity_residual=ident,
        slope=fit_slope(s, rhs),
        lhs_band=(float(lhs.min()), float(lhs.max())),
        extras={"epsilon": epsilon, "max_position_norm": float(qmax.max())},
    )
