"""Two-body separation and norm bounds along a Newtonian-to-weak exponent sweep.

Continues the two-body RE of ``f(x) = x^-alpha`` in ``alpha`` and reports
the empirical separation bound; the boundedness certificate is requested
only where ``x f(x)`` diverges at 0 (``alpha > 1``).
"""

from dataclasses import dataclass

import numpy as np

from equilibra import seeds
from equilibra.certify import boundedness_scan, separation_scan
from equilibra.equilibria import EXPONENT, REProblem, continue_family, newton_solve
from equilibra.errors import HypothesisNotMet
from equilibra.forcelaw import ForceLaw
from equilibra.geometry import validate_generator

from _common import parse_config, save


@dataclass
class Config:
    alpha_start: float = 3.0
    alpha_stop: float = 1.5
    num: int = 16
    omega: float = 1.0
    out: str = "equilibra_out/exponent_sweep"


def main():
    cfg = parse_config(Config, __doc__)
    law = ForceLaw.quasi_homogeneous(1.0, cfg.alpha_start)
    space, m, G, P = seeds.named_seed("two_body", omega=cfg.omega, law=law)
    problem = REProblem(space, m, validate_generator(G, space), law)
    grid = np.linspace(cfg.alpha_start, cfg.alpha_stop, cfg.num)
    fam = continue_family(problem, newton_solve(problem, P), EXPONENT, grid)
    sep = separation_scan(fam)
    print(f"c_hat = {sep.c_hat:.10f} (refined ratio {sep.stability_ratio})")
    for a, d in zip(grid, fam.diagnostics):
        print(f"alpha {a:.3f}  d = {d['min_separation']:.10f}  closed form {(2.0 / cfg.omega**2) ** (1 / a):.10f}")
    try:
        bnd = boundedness_scan(fam, law=ForceLaw.quasi_homogeneous(1.0, cfg.alpha_stop)).to_dict()
    except HypothesisNotMet as exc:
        bnd = {"refused": str(exc)}
    save(cfg.out, "exponent_sweep.json", {"config": cfg.__dict__, "separation": sep.to_dict(),
                                          "boundedness": bnd, "family": fam.to_dict()})


if __name__ == "__main__":
    main()
