"""Interaction functions ``f`` for the generalized quasi-homogeneous problem.

Bodies attract through ``m_j (q_j - q_i) f(|q_j - q_i|)``.  Builtin laws are
two-power sums ``a x**-alpha + b x**-beta``; anything else can be plugged in
as a custom law supplying ``f`` and, optionally, ``x f'(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AdmissibilityFailure, NonPositiveDistance

QUASI_HOMOGENEOUS = "quasi_homogeneous"
NEWTONIAN = "newtonian"
PAPER_CLASSICAL = "paper_classical"
CUSTOM = "custom"

# Defaults for the numerical admissibility surrogate; all are overridable.
DEFAULT_DELTA = 1e-3
DEFAULT_X_MAX = 1e3
DEFAULT_GRID_SIZE = 200
DEFAULT_X_SMALL = 1e-8
DEFAULT_DIVERGENCE_THRESHOLD = 1e3
# |x f(x)| counts as bounded far out if its log-log slope over the last decade is below this
TAIL_SLOPE_TOL = 1e-2


@dataclass(frozen=True)
class ForceLaw:
    kind: str
    a: float = 0.0
    alpha: float = 1.0
    b: float = 0.0
    beta: float = 1.0
    f_custom: Optional[Callable] = field(default=None, repr=False, compare=False)
    xfprime_custom: Optional[Callable] = field(default=None, repr=False, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind in (QUASI_HOMOGENEOUS, NEWTONIAN, PAPER_CLASSICAL):
            if self.alpha <= 0 or self.beta <= 0:
                raise ValueError("exponents must be positive")
        elif self.kind == CUSTOM:
            if self.f_custom is None:
                raise ValueError("custom law needs a callable f")
        else:
            raise ValueError(f"unknown law kind {self.kind!r}")

    # constructors -----------------------------------------------------

    @classmethod
    def newtonian(cls) -> "ForceLaw":
        return cls(NEWTONIAN, a=1.0, alpha=3.0)

    @classmethod
    def paper_classical(cls) -> "ForceLaw":
        return cls(PAPER_CLASSICAL, a=1.0, alpha=1.5)

    @classmethod
    def quasi_homogeneous(cls, a, alpha, b=0.0, beta=1.0) -> "ForceLaw":
        return cls(QUASI_HOMOGENEOUS, a=float(a), alpha=float(alpha), b=float(b), beta=float(beta))

    @classmethod
    def custom(cls, f, xfprime=None, name="custom") -> "ForceLaw":
        return cls(CUSTOM, f_custom=f, xfprime_custom=xfprime, name=name)

    def with_exponent(self, alpha: float) -> "ForceLaw":
        """Same law with the leading exponent replaced (used by continuation)."""
        if self.kind == CUSTOM:
            raise ValueError("custom laws have no exponent parameter")
        return ForceLaw.quasi_homogeneous(self.a, alpha, self.b, self.beta)

    # evaluation -------------------------------------------------------

    @property
    def builtin(self) -> bool:
        return self.kind != CUSTOM

    def f(self, x):
        x = _positive(x)
        if self.kind == CUSTOM:
            return self.f_custom(x)
        return self.a * x ** -self.alpha + self.b * x ** -self.beta

    def xfprime(self, x):
        x = _positive(x)
        if self.kind == CUSTOM:
            if self.xfprime_custom is not None:
                return self.xfprime_custom(x)
            h = 1e-6 * x
            return x * (self.f_custom(x + h) - self.f_custom(x - h)) / (2 * h)
        return -self.a * self.alpha * x ** -self.alpha - self.b * self.beta * x ** -self.beta

    def fprime(self, x):
        x = _positive(x)
        return self.xfprime(x) / x

    # metadata ---------------------------------------------------------

    def _dominant(self):
        """(exponent, coefficient) of the most singular nonzero term."""
        terms = {}
        for c, e in ((self.a, self.alpha), (self.b, self.beta)):
            terms[e] = terms.get(e, 0.0) + c
        live = [(e, c) for e, c in terms.items() if c != 0.0]
        if not live:
            return None
        return max(live)

    @property
    def limit_sign(self) -> int:
        """Sign of ``f`` as ``x -> 0+`` (+1 or -1)."""
        if self.kind == CUSTOM:
            return admissibility_check(self, raise_on_failure=False).limit_sign
        dom = self._dominant()
        if dom is None:
            raise AdmissibilityFailure("divergence", "identically zero law")
        return 1 if dom[1] > 0 else -1

    @property
    def compactness_flag(self) -> bool:
        """Whether ``x f(x)`` diverges at 0 and stays bounded away from 0."""
        if self.kind == CUSTOM:
            return admissibility_check(self, raise_on_failure=False).compactness_flag
        dom = self._dominant()
        if dom is None or dom[0] <= 1:
            return False
        # x f(x) bounded for large x needs every live exponent >= 1
        live = [e for c, e in ((self.a, self.alpha), (self.b, self.beta)) if c != 0.0]
        return min(live) >= 1

    def to_dict(self) -> dict:
        if self.kind == CUSTOM:
            return {"kind": CUSTOM, "name": self.name}
        d = {"kind": self.kind}
        if self.kind == QUASI_HOMOGENEOUS:
            d.update(a=self.a, alpha=self.alpha, b=self.b, beta=self.beta)
        return d


def _positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise NonPositiveDistance("interaction law evaluated at a non-positive distance")
    return x if x.ndim else float(x)


def evaluate(law: ForceLaw, x):
    """``f(x)``."""
    return law.f(x)


def eval_xfprime(law: ForceLaw, x):
    """``x f'(x)``."""
    return law.xfprime(x)


@dataclass
class AdmissibilityReport:
    law: dict
    conditions: dict
    limit_sign: int
    compactness_flag: bool
    samples: dict = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def failed(self) -> list:
        return [k for k, v in self.conditions.items() if not v]

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "passed": self.passed,
            "conditions": dict(self.conditions),
            "limit_sign": "+inf" if self.limit_sign > 0 else "-inf",
            "compactness_flag": self.compactness_flag,
            "samples": self.samples,
        }


def admissibility_check(
    law: ForceLaw,
    delta: float = DEFAULT_DELTA,
    x_max: float = DEFAULT_X_MAX,
    grid_size: int = DEFAULT_GRID_SIZE,
    x_small: float = DEFAULT_X_SMALL,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
    raise_on_failure: bool = True,
) -> AdmissibilityReport:
    """Sample the admissibility conditions on finite grids.

    ``f`` and ``x f'`` must be finite on a log grid over ``[delta, x_max]``.
    Towards zero ``f`` is sampled at ``10**-1, ..., x_small``; it must keep one
    sign, grow strictly in magnitude and reach ``divergence_threshold`` times
    ``max(1, |f(1)|)``.  The compactness flag asks that ``|x f(x)|`` grow
    strictly along the same sequence and have log-log slope below
    ``TAIL_SLOPE_TOL`` over the last decade of the far grid.
    """
    if not 0 < delta < x_max:
        raise ValueError("need 0 < delta < x_max")
    grid = np.geomspace(delta, x_max, grid_size)
    with np.errstate(all="ignore"):
        fv = np.asarray(law.f(grid), dtype=float)
        xfp = np.asarray(law.xfprime(grid), dtype=float)
        n_small = int(round(-np.log10(x_small)))
        seq = 10.0 ** -np.arange(1, n_small + 1)
        fs = np.asarray(law.f(seq), dtype=float)
        f1 = float(law.f(1.0))

    conditions = {
        "f_finite_away_from_zero": bool(np.all(np.isfinite(fv))),
        "xfprime_finite_away_from_zero": bool(np.all(np.isfinite(xfp))),
    }
    signs = np.sign(fs)
    one_sign = bool(np.all(np.isfinite(fs)) and np.all(signs == signs[-1]) and signs[-1] != 0)
    growing = bool(np.all(np.diff(np.abs(fs)) > 0))
    big = bool(np.abs(fs[-1]) >= divergence_threshold * max(1.0, abs(f1)))
    conditions["divergence"] = one_sign and growing and big
    limit_sign = int(signs[-1]) if one_sign else 0

    xf_small = np.abs(seq * fs)
    sel = grid >= x_max / 10
    tail = np.abs(grid * fv)[sel]
    tail_slope = float("inf")
    if tail.size > 1 and np.all(tail > 0) and np.all(np.isfinite(tail)):
        tail_slope = float(np.polyfit(np.log(grid[sel]), np.log(tail), 1)[0])
    elif tail.size > 1 and np.all(tail == 0):
        tail_slope = 0.0
    compactness = bool(
        conditions["divergence"]
        and np.all(np.diff(xf_small) > 0)
        and tail_slope <= TAIL_SLOPE_TOL
    )
    report = AdmissibilityReport(
        law=law.to_dict(),
        conditions=conditions,
        limit_sign=limit_sign,
        compactness_flag=compactness,
        samples={
            "delta": delta,
            "x_max": x_max,
            "grid_size": grid_size,
            "x_small": x_small,
            "divergence_threshold": divergence_threshold,
            "f_toward_zero": [float(v) for v in fs],
            "xf_toward_zero": [float(v) for v in seq * fs],
            "xf_tail_slope": tail_slope,
        },
    )
    if raise_on_failure and not report.passed:
        raise AdmissibilityFailure(report.failed()[0], f"law {law.to_dict()} fails on the sampling grid")
    return report
