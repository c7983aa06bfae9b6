"""Result containers and JSON report serialization.

Reports are plain data: every numerical experiment returns one of these
containers, and the CLI writes them with sorted keys and no timestamps so
that a fixed configuration and seed reproduce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConstantReport", "SCHEMA_VERSION", "jsonify", "write_report", "read_report"]

SCHEMA_VERSION = 1


def jsonify(obj):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(obj, dict):
        return {str(k): jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


@dataclass(frozen=True)
class ConstantReport:
    """A numerically estimated best constant with its provenance.

    `method` is "power-iteration" or "ensemble-max"; `history` holds the
    Rayleigh-quotient sequence (power) and per-trial ratios (ensemble);
    `ladder` collects one entry per refinement rung when a sweep ran.
    """

    constant: float
    method: str
    history: dict
    resolution: dict
    ensemble_max: float = 0.0
    converged: bool = True
    ladder: tuple = ()
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonify(
            {
                "constant": self.constant,
                "method": self.method,
                "history": self.history,
                "resolution": self.resolution,
                "ensemble_max": self.ensemble_max,
                "converged": self.converged,
                "ladder": list(self.ladder),
                "flags": self.flags,
            }
        )


def write_report(path, payload: dict) -> None:
    body = dict(payload)
    body.setdefault("schema", SCHEMA_VERSION)
    with open(path, "w") as fh:
        json.dump(jsonify(body), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
