"""Shared helper: dataclass experiment configs with command-line overrides."""

import argparse
import dataclasses
import json
from pathlib import Path


def parse_config(cls, description=""):
    """Build ``cls`` from its defaults, overridden by ``--field value`` flags."""
    p = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        kind = type(default)
        if kind is bool:
            p.add_argument(f"--{f.name}", type=lambda s: s.lower() in ("1", "true", "yes"), default=default)
        elif kind in (int, float, str):
            p.add_argument(f"--{f.name}", type=kind, default=default)
        else:
            p.add_argument(f"--{f.name}", type=json.loads, default=default, help="JSON value")
    return cls(**vars(p.parse_args()))


def save(out, name, obj):
    from equilibra.report import write_json

    path = write_json(Path(out) / name, obj)
    print(f"wrote {path}")
