"""Command-line front end.

    equilibra <command> --config <path> [--out <dir>] [--threads N]

Commands: validate-law, find, sweep, certify, simulate.  Exit codes: 0
success, 1 usage or configuration error, 2 mathematical or convergence
failure.  ``EQUILIBRA_LOG`` in {error, info, debug} sets the log level.
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import certify, report, seeds
from .equilibria import (
    EXPONENT,
    MASS,
    OMEGA,
    REProblem,
    RESolution,
    continue_family,
    newton_solve,
    problem_at,
    side_lengths,
    simulate_solution,
    verify,
)
from .errors import (
    AdmissibilityFailure,
    BranchLost,
    DegenerateRotation,
    DimensionMismatch,
    EquilibraError,
    HypothesisNotMet,
    InvalidConfiguration,
    NotSkew,
)
from .forcelaw import CUSTOM, NEWTONIAN, PAPER_CLASSICAL, QUASI_HOMOGENEOUS, ForceLaw, admissibility_check
from .geometry import FLAT, HYPERBOLOID, SPHERE, SpaceForm, planar_generator, random_point, validate_generator

log = logging.getLogger("equilibra")

EXIT_OK, EXIT_CONFIG, EXIT_MATH = 0, 1, 2
COMMANDS = ("validate-law", "find", "sweep", "certify", "simulate")
DEFAULT_OUT = "equilibra_out"

# errors that mean the input itself was unusable
CONFIG_ERRORS = (InvalidConfiguration, DimensionMismatch, NotSkew, DegenerateRotation)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- schema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_grid = {
    "oneOf": [
        {"type": "array", "items": _num, "minItems": 1},
        _obj({"start": _num, "stop": _num, "num": {"type": "integer", "minimum": 1},
              "spacing": {"enum": ["linear", "log"]}}, ["start", "stop", "num"]),
    ]
}

SCHEMA = _obj({
    "space": _obj({"kind": {"enum": [FLAT, SPHERE, HYPERBOLOID]}, "k": {"type": "integer", "minimum": 1}},
                  ["kind", "k"]),
    "law": _obj({
        "kind": {"enum": [QUASI_HOMOGENEOUS, NEWTONIAN, PAPER_CLASSICAL, CUSTOM]},
        "a": _num, "alpha": _pos, "b": _num, "beta": _pos,
        "expression": {"type": "string"}, "xfprime_expression": {"type": "string"},
        "name": {"type": "string"},
    }, ["kind"]),
    "masses": {"type": "array", "items": _pos, "minItems": 2},
    "generator": _mat,
    "omega": _pos,
    "allow_degenerate": {"type": "boolean"},
    "positions": _mat,
    "seed": _obj({
        "name": {"enum": list(seeds.SEED_NAMES)},
        "scale": _pos, "z0": _num, "rho": _pos, "perturb": {"type": "number", "minimum": 0},
        "rng_seed": {"type": "integer"},
    }, ["name"]),
    "solution": {"type": "string"},
    "solver": _obj({"tol": _pos, "max_iter": {"type": "integer", "minimum": 1}, "damping": _pos}),
    "admissibility": _obj({"delta": _pos, "x_max": _pos, "grid_size": {"type": "integer", "minimum": 2},
                           "x_small": _pos, "divergence_threshold": _pos}),
    "sweep": _obj({
        "parameter": {"enum": [OMEGA, MASS, EXPONENT]},
        "index": {"type": "integer", "minimum": 0},
        "grid": _grid,
        "boundedness": {"type": "boolean"},
        "refine": {"type": "boolean"},
        "trust_radius": _pos,
    }, ["parameter", "grid"]),
    "probe": _obj({
        "kind": {"enum": ["divergence_flat", "cluster_identity", "cluster_divergence"]},
        "s_grid": _grid,
        "far_points": _mat,
        "expected_slope": _num,
        "slope_window": _pos,
        "samples": {"type": "integer", "minimum": 1},
        "n_max": {"type": "integer", "minimum": 2},
        "radius": _pos,
        "rng_seed": {"type": "integer"},
        "epsilon": _pos,
        "threshold": _pos,
        "gap_below": _pos,
        "cluster": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    }, ["kind"]),
    "simulate": _obj({
        "periods": {"type": "number", "minimum": 0},
        "rel_tol": _pos,
        "n_samples": {"type": "integer", "minimum": 2},
        "precision": {"type": ["integer", "null"], "minimum": 20},
        "drift_bound": _pos,
        "constraint_bound": _pos,
        "dynamics_masses": {"type": "array", "items": _pos, "minItems": 2},
    }),
})

REQUIRED = {
    "validate-law": ["law"],
    "find": [],
    "sweep": ["sweep"],
    "certify": ["probe"],
    "simulate": [],
}


def load_config(path, command: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    missing = [k for k in REQUIRED[command] if k not in cfg]
    if missing:
        raise ConfigError(f"command {command!r} needs key(s) {missing}")
    cfg["_base"] = str(Path(path).resolve().parent)
    return cfg


# ---------------------------------------------------------------- law expressions

_FUNCS = {name: getattr(np, name) for name in
          ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sinh", "cosh", "tanh", "arctan")}
_CONSTS = {"pi": np.pi, "e": np.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def compile_expression(expr: str):
    """Vectorised ``f(x)`` from an arithmetic expression in ``x``.

    Only numbers, ``x``, ``pi``, ``e``, the operators ``+ - * / **`` and a
    small set of numpy functions are accepted.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad law expression {expr!r}: {exc.msg}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"disallowed syntax {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS and node.id != "x":
            raise ConfigError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError(f"only {sorted(_FUNCS)} may be called")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError(f"non-numeric constant in {expr!r}")
    code = compile(tree, "<law>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def fn(x):
        with np.errstate(all="ignore"):
            return eval(code, env, {"x": np.asarray(x, dtype=float)})

    return fn


def build_law(d: dict | None) -> ForceLaw:
    if d is None:
        return ForceLaw.newtonian()
    kind = d["kind"]
    if kind == NEWTONIAN:
        return ForceLaw.newtonian()
    if kind == PAPER_CLASSICAL:
        return ForceLaw.paper_classical()
    if kind == QUASI_HOMOGENEOUS:
        if "a" not in d or "alpha" not in d:
            raise ConfigError("quasi_homogeneous law needs 'a' and 'alpha'")
        return ForceLaw.quasi_homogeneous(d["a"], d["alpha"], d.get("b", 0.0), d.get("beta", 1.0))
    if "expression" not in d:
        raise ConfigError("custom law needs an 'expression' in x")
    xfp = compile_expression(d["xfprime_expression"]) if "xfprime_expression" in d else None
    return ForceLaw.custom(compile_expression(d["expression"]), xfp, name=d.get("name", d["expression"]))


# ---------------------------------------------------------------- problem assembly


def _grid(g) -> np.ndarray:
    if isinstance(g, list):
        return np.asarray(g, dtype=float)
    if g.get("spacing", "linear") == "log":
        if g["start"] <= 0 or g["stop"] <= 0:
            raise ConfigError("log grid needs positive endpoints")
        return np.geomspace(g["start"], g["stop"], g["num"])
    return np.linspace(g["start"], g["stop"], g["num"])


def _load_solution(cfg) -> dict:
    path = Path(cfg["solution"])
    if not path.is_absolute():
        path = Path(cfg["_base"]) / path
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load solution file: {exc}") from exc


def build_problem(cfg, omega=None, masses=None):
    """``(problem, initial positions, seed info)`` from a config.

    ``omega`` / ``masses`` override the config (used to start sweeps at the
    first grid value).
    """
    if "solution" in cfg:
        sol = _load_solution(cfg)
        space = SpaceForm.from_dict(sol["space"])
        G = np.asarray(sol["generator"], dtype=float)
        m = np.asarray(sol["masses"], dtype=float)
        Q0 = np.asarray(sol["solution"]["positions"], dtype=float)
        law = build_law(sol.get("law")) if not space.curved else None
        gen = validate_generator(G, space, allow_degenerate=sol.get("allow_degenerate", False))
        return REProblem(space, m, gen, law), Q0, {"solution": cfg["solution"]}

    seed_info = None
    if "seed" in cfg:
        s = cfg["seed"]
        if "positions" in cfg:
            raise ConfigError("give either 'seed' or 'positions', not both")
        w = omega if omega is not None else cfg.get("omega")
        m_in = masses if masses is not None else cfg.get("masses")
        law_in = build_law(cfg["law"]) if "law" in cfg else None
        if law_in is not None and law_in.kind == NEWTONIAN:
            law_in = None
        try:
            space, m, G, Q0 = seeds.named_seed(
                s["name"], masses=m_in, omega=w, scale=s.get("scale", 1.0), z0=s.get("z0", 0.5),
                rho=s.get("rho", 0.5), perturb=s.get("perturb", 0.0), rng_seed=s.get("rng_seed", 0),
                law=law_in,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if "space" in cfg and SpaceForm.from_dict(cfg["space"]) != space:
            raise ConfigError(f"seed {s['name']!r} lives on {space.to_dict()}, config says {cfg['space']}")
        if "generator" in cfg:
            G = np.asarray(cfg["generator"], dtype=float)
        seed_info = dict(s)
    else:
        if "positions" not in cfg or "space" not in cfg or "masses" not in cfg:
            raise ConfigError("need 'seed', or 'space' + 'masses' + 'positions', or 'solution'")
        space = SpaceForm.from_dict(cfg["space"])
        m = np.asarray(masses if masses is not None else cfg["masses"], dtype=float)
        Q0 = np.asarray(cfg["positions"], dtype=float)
        if "generator" in cfg:
            G = np.asarray(cfg["generator"], dtype=float)
        elif "omega" in cfg or omega is not None:
            G = planar_generator(omega if omega is not None else cfg["omega"], space.dim)
        else:
            raise ConfigError("need 'generator' or 'omega'")
        if omega is not None and "generator" in cfg:
            G = G * omega / np.sqrt(np.linalg.svd(G @ G, compute_uv=False)[0])
    if Q0.shape != (len(m), space.dim):
        raise ConfigError(f"positions have shape {Q0.shape}, expected {(len(m), space.dim)}")
    gen = validate_generator(G, space, allow_degenerate=cfg.get("allow_degenerate", False))
    law = None if space.curved else build_law(cfg.get("law"))
    return REProblem(space, m, gen, law), Q0, seed_info


def problem_dict(problem: REProblem, allow_degenerate=False) -> dict:
    d = {
        "space": problem.space.to_dict(),
        "masses": problem.masses.tolist(),
        "generator": problem.gen.to_list(),
        "allow_degenerate": allow_degenerate,
    }
    if problem.law is not None:
        d["law"] = problem.law.to_dict()
    return d


def _solver_opts(cfg) -> dict:
    s = cfg.get("solver", {})
    return {"tol": s.get("tol", 1e-10), "max_iter": s.get("max_iter", 50), "damping": s.get("damping", 1e-3)}


def _failure(exc) -> dict:
    return {"status": "failed", "error": getattr(exc, "code", type(exc).__name__), "message": str(exc)}


# ---------------------------------------------------------------- commands


def cmd_validate_law(cfg, out: Path, threads: int = 1):
    law = build_law(cfg["law"])
    rep = admissibility_check(law, raise_on_failure=False, **cfg.get("admissibility", {}))
    body = rep.to_dict()
    body["status"] = "pass" if rep.passed else "fail"
    if not rep.passed:
        body["error"] = AdmissibilityFailure.code
        body["failed_conditions"] = rep.failed()
    report.write_json(out / "admissibility.json", body)
    return (EXIT_OK if rep.passed else EXIT_MATH), body


def cmd_find(cfg, out: Path, threads: int = 1):
    problem, Q0, seed_info = build_problem(cfg)
    opts = _solver_opts(cfg)
    try:
        sol = newton_solve(problem, Q0, **opts)
    except EquilibraError as exc:
        if isinstance(exc, CONFIG_ERRORS):
            raise
        body = _failure(exc)
        report.write_json(out / "solution.json", body)
        return EXIT_MATH, body
    ver = verify(sol.positions, problem, tol=max(opts["tol"], sol.residual_norm) * 10)
    body = {
        "status": "converged",
        **problem_dict(problem, cfg.get("allow_degenerate", False)),
        "seed": seed_info,
        "solution": sol.to_dict(),
        "verify": ver.to_dict(),
        "side_lengths": side_lengths(sol.positions).tolist(),
        "omega": problem.gen.omega,
    }
    report.write_json(out / "solution.json", body)
    return EXIT_OK, body


def cmd_sweep(cfg, out: Path, threads: int = 1):
    sw = cfg["sweep"]
    grid = _grid(sw["grid"])
    param = sw["parameter"]
    index = sw.get("index")
    if param == MASS and index is None:
        raise ConfigError("mass sweeps need 'index'")
    overrides = {}
    if param == OMEGA:
        overrides["omega"] = float(grid[0])
    elif param == MASS and "seed" in cfg:
        base_m = cfg.get("masses")
        if base_m is None:
            base_m = seeds.named_seed(cfg["seed"]["name"])[1].tolist()
        base_m = list(base_m)
        if index >= len(base_m):
            raise ConfigError("mass index out of range")
        base_m[index] = float(grid[0])
        overrides["masses"] = base_m
    problem, Q0, _ = build_problem(cfg, **overrides)
    opts = _solver_opts(cfg)
    p0 = problem_at(problem, param, grid[0], index)
    body = {"parameter": param, "index": index, "grid": grid.tolist(), **problem_dict(problem)}
    code = EXIT_OK
    certs = {}
    if sw.get("boundedness", False) and (problem.law is None or not problem.law.compactness_flag):
        # compactness hypothesis fails: refuse up front, still trace the family
        certs["boundedness"] = {"status": "refused", **_failure(
            HypothesisNotMet("law lacks the compactness property (x f(x) -> inf at 0, bounded tail)"))}
        code = EXIT_MATH
    try:
        seed = newton_solve(p0, Q0, **opts)
    except EquilibraError as exc:
        if isinstance(exc, CONFIG_ERRORS):
            raise
        body.update(_failure(exc))
        report.write_json(out / "sweep.json", body)
        return EXIT_MATH, body
    try:
        family = continue_family(problem, seed, param, grid, index=index, tol=opts["tol"],
                                 max_iter=opts["max_iter"], trust_radius=sw.get("trust_radius"))
    except BranchLost as exc:
        family = exc.family
        body.update(_failure(exc))
        code = EXIT_MATH
    report.write_csv(out / "sweep.csv", report.SWEEP_COLUMNS, report.sweep_rows(family))
    body["family"] = family.to_dict()
    if family.complete:
        try:
            certs["separation"] = certify.separation_scan(family, refine=sw.get("refine", True)).to_dict()
        except EquilibraError as exc:
            certs["separation"] = _failure(exc)
            code = EXIT_MATH
        if sw.get("boundedness", False) and "boundedness" not in certs:
            try:
                certs["boundedness"] = certify.boundedness_scan(family, problem.law).to_dict()
            except EquilibraError as exc:
                certs["boundedness"] = {"status": "refused", **_failure(exc)}
                code = EXIT_MATH
    body["certificates"] = certs
    cert_errors = [c["error"] for c in certs.values() if isinstance(c, dict) and c.get("error")]
    if cert_errors:
        # a refused certificate is the headline reason; a lost branch stays recorded
        if "error" in body:
            body["branch_error"] = body["error"]
        body.update(status="failed", error=cert_errors[0])
    body.setdefault("status", "ok")
    report.write_json(out / "certificates.json", certs)
    report.write_json(out / "sweep.json", body)
    return code, body


def _probe_generator(cfg, space: SpaceForm):
    if "generator" in cfg:
        return validate_generator(np.asarray(cfg["generator"], dtype=float), space,
                                  allow_degenerate=cfg.get("allow_degenerate", False))
    return validate_generator(planar_generator(cfg.get("omega", 1.0), space.dim), space)


def cmd_certify(cfg, out: Path, threads: int = 1):
    pr = cfg["probe"]
    kind = pr["kind"]
    if kind == "divergence_flat":
        space = SpaceForm.from_dict(cfg.get("space", {"kind": FLAT, "k": 2}))
        if space.curved:
            raise ConfigError("divergence_flat needs a flat space")
        law = build_law(cfg.get("law"))
        m = cfg.get("masses", [1.0, 1.0, 1.0])
        gen = _probe_generator(cfg, space)
        path = None
        if "far_points" in pr:
            far = np.asarray(pr["far_points"], dtype=float)
            if far.shape != (len(m) - 2, space.dim):
                raise ConfigError(f"far_points must have shape {(len(m) - 2, space.dim)}")

            def path(s, far=far):
                Q = np.zeros((len(m), space.dim))
                Q[0, 0], Q[1, 0] = s / 2, -s / 2
                Q[2:] = far
                return Q
        s_grid = _grid(pr["s_grid"]) if "s_grid" in pr else None
        try:
            res = certify.collision_divergence_probe(m, gen, law, path, s_grid, threads=threads)
        except EquilibraError as exc:
            if isinstance(exc, CONFIG_ERRORS):
                raise
            return EXIT_MATH, _failure(exc)
        if "expected_slope" in pr:
            expected = pr["expected_slope"]
        elif law.builtin:
            expected = -max(e for c, e in ((law.a, law.alpha), (law.b, law.beta)) if c != 0)
        else:
            raise ConfigError("custom laws need 'expected_slope'")
        window = pr.get("slope_window", 0.05)
        checks = {"slope": res.slope_ok(expected, window), "triangle": res.triangle_ok,
                  "remainder_bounded": res.remainder_bounded}
        body = {**res.to_dict(), "expected_slope": expected, "slope_window": window, "checks": checks}
        report.write_csv(out / "probe.csv", report.DIVERGENCE_COLUMNS, res.rows())
    elif kind == "cluster_identity":
        space = SpaceForm.from_dict(cfg.get("space", {"kind": SPHERE, "k": 2}))
        if not space.curved:
            raise ConfigError("cluster_identity needs a curved space")
        seed = pr.get("rng_seed", 0)
        rng = np.random.default_rng(seed)
        samples, n_max, radius = pr.get("samples", 100), pr.get("n_max", 6), pr.get("radius", 1.5)
        configs = []
        for _ in range(samples):
            n = int(rng.integers(2, n_max + 1))
            Q = np.array([random_point(rng, space, radius) for _ in range(n)])
            configs.append((Q, rng.uniform(0.5, 2.0, n)))

        def one(item):
            Q, m = item
            return certify.curved_cluster_identity(Q, m, space, range(len(m)))

        try:
            results = certify._pmap(one, configs, threads)
        except EquilibraError as exc:
            return EXIT_MATH, _failure(exc)
        rows = [{"sample": k, "n": len(c[1]), "residual": r.identity_residual,
                 "residual_printed": r.identity_residual_printed} for k, (c, r) in enumerate(zip(configs, results))]
        worst = max(r.identity_residual for r in results)
        worst_p = max(r.identity_residual_printed for r in results)
        checks = {"identity": worst <= certify.IDENTITY_TOL}
        body = {"kind": kind, "space": space.to_dict(), "rng_seed": seed, "samples": samples,
                "max_residual": worst, "max_residual_printed": worst_p,
                "printed_reading_exact": worst_p <= certify.IDENTITY_TOL,
                "denominator": "sigma*(1+sigma*c)", "checks": checks}
        report.write_csv(out / "probe.csv", report.IDENTITY_COLUMNS, rows)
    else:
        space = SpaceForm.from_dict(cfg.get("space", {"kind": SPHERE, "k": 2}))
        if not space.curved:
            raise ConfigError("cluster_divergence needs a curved space")
        m = cfg.get("masses", [1.0, 1.0, 1.0])
        gen = _probe_generator(cfg, space)
        path = None
        if "far_points" in pr:
            far = np.asarray(pr["far_points"], dtype=float)
            if far.shape != (len(m) - 2, space.dim):
                raise ConfigError(f"far_points must have shape {(len(m) - 2, space.dim)}")
            base = certify.default_cluster_path(space, 2)

            def path(s, far=far, base=base):
                from .geometry import project_to_manifold
                return np.vstack([base(s), project_to_manifold(far, space)])
        s_grid = _grid(pr["s_grid"]) if "s_grid" in pr else None
        try:
            res = certify.curved_cluster_divergence(
                m, gen, space, path, s_grid, epsilon=pr.get("epsilon", 0.1),
                cluster=pr.get("cluster", [0, 1]), threads=threads,
            )
        except EquilibraError as exc:
            if isinstance(exc, CONFIG_ERRORS):
                raise
            return EXIT_MATH, _failure(exc)
        expected = pr.get("expected_slope", -1.0)
        window = pr.get("slope_window", 0.1)
        threshold, below = pr.get("threshold", 1e6), pr.get("gap_below", 1e-5)
        checks = {"slope": res.slope_ok(expected, window), "rhs_diverges": res.rhs_exceeds(threshold, below),
                  "lhs_bounded": res.lhs_bounded, "identity": res.identity_ok}
        body = {**res.to_dict(), "expected_slope": expected, "threshold": threshold,
                "gap_below": below, "checks": checks}
        report.write_csv(out / "probe.csv", report.CLUSTER_COLUMNS, res.rows())
    ok = all(body["checks"].values())
    body["status"] = "pass" if ok else "fail"
    report.write_json(out / "probe.json", body)
    return (EXIT_OK if ok else EXIT_MATH), body


def cmd_simulate(cfg, out: Path, threads: int = 1):
    sim = cfg.get("simulate", {})
    problem, Q0, seed_info = build_problem(cfg)
    body = {**problem_dict(problem), "seed": seed_info}
    if "solution" in cfg:
        Q = Q0
    else:
        try:
            Q = newton_solve(problem, Q0, **_solver_opts(cfg)).positions
        except EquilibraError as exc:
            if isinstance(exc, CONFIG_ERRORS):
                raise
            body.update(_failure(exc))
            return EXIT_MATH, body
    dm = sim.get("dynamics_masses")
    if dm is not None and len(dm) != problem.n:
        raise ConfigError("dynamics_masses must have one entry per body")
    bound = sim.get("drift_bound", 1e-6)
    cbound = sim.get("constraint_bound", 1e-9)
    try:
        res = simulate_solution(problem, Q, periods=sim.get("periods", 10.0), rel_tol=sim.get("rel_tol", 1e-10),
                                n_samples=sim.get("n_samples", 41), precision=sim.get("precision"), masses=dm)
    except EquilibraError as exc:
        if isinstance(exc, CONFIG_ERRORS):
            raise
        body.update(_failure(exc))
        report.write_json(out / "trajectory.json", body)
        return EXIT_MATH, body
    cols, rows = report.trajectory_rows(res.trajectory)
    report.write_csv(out / "trajectory.csv", cols, rows)
    ok = res.passed(bound, cbound)
    body.update(res.to_dict(), drift_bound=bound, constraint_bound=cbound,
                dynamics_masses=dm, status="rigid" if ok else "drift_exceeded",
                samples=len(res.trajectory.times))
    if not ok:
        body["error"] = "DriftExceeded"
    report.write_json(out / "trajectory.json", body)
    return (EXIT_OK if ok else EXIT_MATH), body


HANDLERS = {
    "validate-law": cmd_validate_law,
    "find": cmd_find,
    "sweep": cmd_sweep,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------- entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _setup_logging():
    level = os.environ.get("EQUILIBRA_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level not in levels:
        log.error("EQUILIBRA_LOG=%s not recognised; using 'error'", level)


def main(argv=None) -> int:
    _setup_logging()
    parser = _Parser(prog="equilibra", description="Relative equilibria solver and certifier")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=DEFAULT_OUT)
    parser.add_argument("--threads", type=int, default=1)
    try:
        args = parser.parse_args(argv)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        code, body = HANDLERS[args.command](cfg, out, args.threads)
    except (ConfigError, *CONFIG_ERRORS, ValueError) as exc:
        body = {"status": "config_error", "error": getattr(exc, "code", "ConfigError"), "message": str(exc)}
        print(report.dumps(body))
        return EXIT_CONFIG
    except EquilibraError as exc:
        print(report.dumps(_failure(exc)))
        return EXIT_MATH
    print(report.dumps(_summary(body)))
    return code


def _summary(body: dict) -> dict:
    """Stdout summary: drop bulky arrays."""
    return {k: v for k, v in body.items() if k not in ("family", "samples_detail")}


if __name__ == "__main__":
    sys.exit(main())
