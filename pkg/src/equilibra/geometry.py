"""Ambient-space arithmetic for flat space, the unit sphere and the hyperboloid.

Curved spaces live in R^{k+1} as the level set ``x . x = sigma`` of the signed
product ``x . y = x_1 y_1 + ... + x_k y_k + sigma x_{k+1} y_{k+1}``.  Isometries
are realized as one-parameter groups ``T(t) = exp(tG)`` with ``G`` skew for the
relevant product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DegenerateRotation, DimensionMismatch, NotSkew

FLAT = "flat"
SPHERE = "sphere"
HYPERBOLOID = "hyperboloid"
_KINDS = (FLAT, SPHERE, HYPERBOLOID)

SKEW_TOL = 1e-12


@dataclass(frozen=True)
class SpaceForm:
    kind: str
    k: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if int(self.k) != self.k:
            raise ValueError("k must be an integer")
        if self.kind == FLAT and self.k < 1:
            raise ValueError("flat space needs k >= 1")
        if self.kind != FLAT and self.k < 2:
            raise ValueError("curved spaces need k >= 2")

    @property
    def curved(self) -> bool:
        return self.kind != FLAT

    @property
    def sigma(self) -> Optional[int]:
        return {FLAT: None, SPHERE: 1, HYPERBOLOID: -1}[self.kind]

    @property
    def dim(self) -> int:
        """Ambient dimension."""
        return self.k if self.kind == FLAT else self.k + 1

    @property
    def metric(self) -> np.ndarray:
        """Diagonal of the ambient bilinear form."""
        eta = np.ones(self.dim)
        if self.kind == HYPERBOLOID:
            eta[-1] = -1.0
        return eta

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k}

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceForm":
        return cls(d["kind"], int(d["k"]))


def _check_dim(x: np.ndarray, space: SpaceForm) -> None:
    if x.shape[-1] != space.dim:
        raise DimensionMismatch(
            f"expected ambient dimension {space.dim}, got {x.shape[-1]}"
        )


def inner(x, y, space: SpaceForm):
    """Euclidean dot product (flat) or the signed product (curved).

    Works on the last axis, so stacks of vectors broadcast.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dim(x, space)
    _check_dim(y, space)
    return np.sum(x * y * space.metric, axis=-1)


def on_manifold(x, space: SpaceForm, tol: float = 1e-12) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    _check_dim(x, space)
    if not space.curved:
        return True
    return bool(np.all(np.abs(inner(x, x, space) - space.sigma) <= tol))


def short_chord(x, y, space: SpaceForm):
    """``(v, s)`` with ``v = y - s x`` and ``s = sign(sigma (x . y))``.

    ``v`` is the short chord: the difference for nearby points and, on the
    sphere, the sum ``x + y`` for nearly antipodal ones.  Quantities that
    vanish at coincidence or antipodality are then computed from ``v``
    without cancellation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.where(space.sigma * inner(x, y, space) >= 0, 1.0, -1.0)
    return y - s[..., None] * x, s


def gap_factor(x, y, space: SpaceForm):
    """``sigma - sigma (x . y)**2`` evaluated without cancellation.

    The Gram determinant ``(x.x)(y.y) - (x.y)**2`` is unchanged by
    ``y -> y -+ x``, so it is formed from the short chord ``v`` of
    :func:`short_chord`; nearby and nearly antipodal points keep full
    relative accuracy.  Equal to the textbook expression whenever both points
    lie on the manifold.
    """
    x = np.asarray(x, dtype=float)
    v, _ = short_chord(x, y, space)
    xx = inner(x, x, space)
    vv = inner(v, v, space)
    xv = inner(x, v, space)
    return space.sigma * (xx * vv - xv * xv)


def project_to_manifold(x, space: SpaceForm) -> np.ndarray:
    """Radially rescale ``x`` onto the manifold (identity for flat space)."""
    x = np.asarray(x, dtype=float)
    if not space.curved:
        return x.copy()
    q = np.asarray(inner(x, x, space))
    return x * np.sqrt(space.sigma / q)[..., None]


def project_to_tangent(x, v, space: SpaceForm) -> np.ndarray:
    """Remove the normal component of ``v`` at the manifold point ``x``."""
    v = np.asarray(v, dtype=float)
    if not space.curved:
        return v.copy()
    c = np.asarray(space.sigma * inner(v, x, space))
    return v - c[..., None] * x


def random_point(rng: np.random.Generator, space: SpaceForm, radius: float = 1.0) -> np.ndarray:
    """Sample a point on the manifold (flat: in a ball-ish Gaussian cloud).

    On the hyperboloid ``radius`` bounds the spread of the spatial part, which
    keeps the coordinates moderate.
    """
    if space.kind == FLAT:
        return radius * rng.standard_normal(space.dim)
    if space.kind == SPHERE:
        v = rng.standard_normal(space.dim)
        return v / np.linalg.norm(v)
    spatial = radius * rng.uniform(-1.0, 1.0, space.k)
    return np.append(spatial, np.sqrt(1.0 + spatial @ spatial))


@dataclass(frozen=True)
class RotationGenerator:
    """Validated infinitesimal isometry ``G`` with ``A = -G^2`` and its bounds.

    ``kernel`` is non-empty only for flat generators accepted through the
    degenerate override; it spans the directions where ``A`` vanishes and
    configurations are then confined to its orthogonal complement.
    """

    G: np.ndarray
    space: SpaceForm
    A: np.ndarray = field(repr=False)
    c1: float
    c2: float
    kernel: np.ndarray = field(repr=False)

    @property
    def omega(self) -> float:
        """Characteristic angular speed ``sqrt(c2)``."""
        return float(np.sqrt(self.c2))

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    def scaled(self, factor: float) -> "RotationGenerator":
        return validate_generator(
            factor * self.G, self.space, allow_degenerate=self.kernel.shape[1] > 0
        )

    def to_list(self) -> list:
        return self.G.tolist()


def is_skew(G: np.ndarray, space: SpaceForm, tol: float = SKEW_TOL) -> bool:
    J = np.diag(space.metric)
    S = J @ G + G.T @ J
    return bool(np.max(np.abs(S)) <= tol * (1.0 + np.max(np.abs(G))))


def validate_generator(G, space: SpaceForm, allow_degenerate: bool = False) -> RotationGenerator:
    """Check ``G`` generates isometries of ``space`` and derive ``A = -G^2``.

    Flat generators whose ``A`` is singular are rejected unless
    ``allow_degenerate`` is set, in which case ``c1`` is taken over the range
    of ``A`` and the kernel is recorded.
    """
    G = np.array(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch("generator must be a square matrix")
    if G.shape[0] != space.dim:
        raise DimensionMismatch(f"generator is {G.shape[0]}x{G.shape[0]}, space needs {space.dim}")
    if not is_skew(G, space):
        raise NotSkew("generator does not preserve the space's inner product")
    G.setflags(write=False)
    A = -G @ G
    A.setflags(write=False)
    sv = np.linalg.svd(A, compute_uv=False)
    c2 = float(sv[0])
    scale = max(c2, np.finfo(float).tiny)
    null = sv <= 1e-12 * scale if c2 > 0 else np.ones_like(sv, dtype=bool)
    kernel = np.zeros((space.dim, 0))
    if space.curved:
        c1 = float(sv[-1])
    elif not null.any():
        c1 = float(sv[-1])
    else:
        if not allow_degenerate or null.all():
            raise DegenerateRotation("A = -G^2 is singular; no positive lower bound c1")
        c1 = float(sv[~null][-1])
        # A is symmetric for flat skew G, so eigenvectors give the kernel
        w, V = np.linalg.eigh((A + A.T) / 2)
        kernel = V[:, np.abs(w) <= 1e-12 * scale]
    kernel.setflags(write=False)
    return RotationGenerator(G=G, space=space, A=A, c1=c1, c2=c2, kernel=kernel)


def group_element(gen: RotationGenerator, t: float) -> np.ndarray:
    """``exp(tG)`` via scaling and squaring (scipy's Pade-based expm)."""
    return scipy.linalg.expm(t * gen.G)


def planar_generator(omega: float, dim: int = 2, plane: tuple = (0, 1)) -> np.ndarray:
    """Rotation generator with angular speed ``omega`` in one coordinate plane."""
    G = np.zeros((dim, dim))
    i, j = plane
    G[i, j] = -omega
    G[j, i] = omega
    return G


def boost_generator(rapidity_rate: float, dim: int, axis: int = 0) -> np.ndarray:
    """Hyperbolic generator mixing ``axis`` with the last (timelike) coordinate."""
    G = np.zeros((dim, dim))
    G[axis, -1] = rapidity_rate
    G[-1, axis] = rapidity_rate
    return G
