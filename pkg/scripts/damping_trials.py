"""Undamped Newton against the Levenberg-Marquardt solver from 1.5x seeds.

Seeds are scaled by ``scale`` and perturbed by Gaussian noise of relative
size ``noise`` (curved seeds are projected back to the manifold).
"""

from dataclasses import dataclass, field

import numpy as np

from equilibra import seeds
from equilibra.equilibria import REProblem, choose_gauge, jacobian, newton_solve, residual
from equilibra.errors import EquilibraError
from equilibra.forcelaw import ForceLaw
from equilibra.geometry import project_to_manifold, validate_generator

from _common import parse_config, save


@dataclass
class Config:
    scale: float = 1.5
    noises: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3])
    trials: int = 40
    rng_seed: int = 0
    cases: list = field(default_factory=lambda: [
        ["lagrange", {}], ["lagrange", {"masses": [1, 2, 3]}], ["euler_collinear", {"masses": [1, 2, 3]}],
        ["sphere_lagrange", {"z0": 0.5}], ["hyperbolic_pair", {}],
    ])
    out: str = "equilibra_out/damping_trials"


def plain_newton(problem, Q0, iters=50, tol=1e-10):
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


def main():
    cfg = parse_config(Config, __doc__)
    rng = np.random.default_rng(cfg.rng_seed)
    rows = []
    for name, kw in cfg.cases:
        space, m, G, P = seeds.named_seed(name, **kw)
        problem = REProblem(space, m, validate_generator(G, space),
                            None if space.curved else ForceLaw.newtonian())
        for noise in cfg.noises:
            plain = lm = skipped = 0
            for _ in range(cfg.trials):
                Q = cfg.scale * P + noise * np.abs(P).max() * rng.standard_normal(P.shape)
                if space.curved:
                    with np.errstate(invalid="ignore"):
                        Q = project_to_manifold(Q, space)
                if not np.all(np.isfinite(Q)):
                    skipped += 1  # fell outside the hyperboloid's projection domain
                    continue
                plain += not plain_newton(problem, Q)
                try:
                    newton_solve(problem, Q)
                except EquilibraError:
                    lm += 1
            rows.append({"case": name, "kw": kw, "noise": noise, "plain_failures": plain,
                         "damped_failures": lm, "skipped": skipped, "trials": cfg.trials})
            print(f"{name:16s} {str(kw):22s} noise {noise:.1f}: plain {plain:2d}  damped {lm:2d}  "
                  f"skipped {skipped:2d} / {cfg.trials}")
    save(cfg.out, "damping_trials.json", {"config": cfg.__dict__, "rows": rows})


if __name__ == "__main__":
    main()
