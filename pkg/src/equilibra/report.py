"""CSV / JSON writers with frozen column orders."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

SWEEP_COLUMNS = ("step", "param_value", "residual_norm", "min_separation", "max_norm", "newton_iterations")
DIVERGENCE_COLUMNS = ("s", "required_bound", "remainder", "triangle_ratio")
CLUSTER_COLUMNS = ("s", "lhs", "rhs")
IDENTITY_COLUMNS = ("sample", "n", "residual", "residual_printed")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n", encoding="utf-8")
    return path


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(row[c])) if isinstance(row[c], (float, np.floating)) else row[c]
                        for c in columns])
    return path


def read_csv(path) -> list:
    """Rows as dicts of floats (ints where the column is integral)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (int(v) if v.lstrip("-").isdigit() else float(v)) for k, v in r.items()})
    return out


def sweep_rows(family) -> list:
    return [dict(step=k, **{c: d[c] for c in SWEEP_COLUMNS[1:]}) for k, d in enumerate(family.diagnostics)]


def trajectory_rows(traj) -> tuple:
    T, n, d = traj.positions.shape
    cols = ["t", "body"] + [f"q{k}" for k in range(d)] + [f"v{k}" for k in range(d)]
    rows = []
    for a in range(T):
        for i in range(n):
            row = {"t": float(traj.times[a]), "body": i}
            row.update({f"q{k}": float(traj.positions[a, i, k]) for k in range(d)})
            row.update({f"v{k}": float(traj.velocities[a, i, k]) for k in range(d)})
            rows.append(row)
    return cols, rows
