"""Experiment configuration: JSON schema, defaults, and validation.

A configuration is a flat JSON object with a `schema` version, an
`experiment` kind, a `name`, and kind-specific parameters.  Validation is
strict in both directions: unknown keys are errors, and every violated
precondition raises a ConfigError naming the offending field so the CLI
can emit a machine-readable error record.
"""

from __future__ import annotations

import json

__all__ = [
    "CONFIG_SCHEMA_VERSION",
    "EXPERIMENT_KINDS",
    "ConfigError",
    "error_record",
    "load_config",
    "validate_config",
]

CONFIG_SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "model-estimate",
    "homogeneous",
    "inhomogeneous",
    "time-local",
    "reduction",
    "kernel",
    "identity-suite",
    "combined",
)


class ConfigError(ValueError):
    """A configuration field failed validation.

    Carries the dotted field name so callers can report which entry to fix
    without parsing the message.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"config field '{field}': {message}")


def error_record(exc: ConfigError) -> dict:
    """Machine-readable record for a validation failure."""
    return {"error": "config-validation", "field": exc.field, "message": exc.message}


def _int(field, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return value


def _float(field, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    return float(value)


def _positive(field, value):
    value = _float(field, value)
    if value <= 0:
        raise ConfigError(field, f"must be positive, got {value}")
    return value


def _positive_int(field, value):
    value = _int(field, value)
    if value <= 0:
        raise ConfigError(field, f"must be positive, got {value}")
    return value


def _str(field, value):
    if not isinstance(value, str):
        raise ConfigError(field, f"expected a string, got {value!r}")
    return value


def _bool(field, value):
    if not isinstance(value, bool):
        raise ConfigError(field, f"expected true or false, got {value!r}")
    return value


def _weight_exponent(field, value):
    value = _float(field, value)
    if value <= 0.5:
        raise ConfigError(field, f"weight exponent must exceed 1/2, got {value}")
    return value


def _band(field, value):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(field, f"expected [lo, hi], got {value!r}")
    lo = _float(f"{field}[0]", value[0])
    hi = _float(f"{field}[1]", value[1])
    if lo < 0 or hi <= lo:
        raise ConfigError(field, f"band needs 0 <= lo < hi, got [{lo}, {hi}]")
    return (lo, hi)


def _float_list(field, value):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(field, f"expected a nonempty list of numbers, got {value!r}")
    return tuple(_float(f"{field}[{i}]", v) for i, v in enumerate(value))


def _direction(field, value):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(field, f"expected a direction vector, got {value!r}")
    return tuple(_float(f"{field}[{i}]", v) for i, v in enumerate(value))


def _choice(options):
    def check(field, value):
        value = _str(field, value)
        if value not in options:
            raise ConfigError(field, f"expected one of {sorted(options)}, got {value!r}")
        return value

    return check


def _optional(inner):
    def check(field, value):
        if value is None:
            return None
        return inner(field, value)

    return check


def _nonnegative_int(field, value):
    value = _int(field, value)
    if value < 0:
        raise ConfigError(field, f"must be nonnegative, got {value}")
    return value


_GRID_FIELDS = {
    "points": (1024, _positive_int),
    "length": (128.0, _positive),
    "dt": (0.125, _positive),
}

_LADDER_FIELDS = {
    "ladder": (3, _positive_int),
    "trials": (32, _positive_int),
    "method": ("auto", _choice(("auto", "power-iteration", "ensemble-max"))),
    "rtol": (1e-4, _positive),
    "max_iterations": (50, _positive_int),
    "stability_threshold": (0.10, _positive),
}

_DATA_FIELDS = {
    "bump_width": (0.15, _positive),
    "x_spread": (3.0, _positive),
    "axis_clearance": (0.25, _positive),
}

_ESTIMATE_CHECKS = {
    "ladder_stable": (True, _bool),
    "converged": (False, _bool),
    "max_constant": (None, _optional(_positive)),
}

# Parameter tables: field -> (default, validator).  A default of a bare
# `...` marks the field as required.
_FIELDS = {
    "homogeneous": {
        "symbol": (..., _str),
        "dimension": (1, _positive_int),
        "smoothing": ("abs:0.5", _str),
        "s": (0.6, _weight_exponent),
        "horizon": (4.0, _positive),
        "band": ((0.4, 2.0), _band),
        "weight_axis": (None, _optional(_nonnegative_int)),
        **_GRID_FIELDS,
        **_LADDER_FIELDS,
        **_DATA_FIELDS,
    },
    "inhomogeneous": {
        "symbol": (..., _str),
        "dimension": (1, _positive_int),
        "smoothing": ("abs:0.5", _str),
        "input_multiplier": (None, _optional(_str)),
        "s": (0.6, _weight_exponent),
        "horizon": (4.0, _positive),
        "band": ((0.4, 2.0), _band),
        "weight_axis": (None, _optional(_nonnegative_int)),
        "source_span": (None, _optional(_positive)),
        **_GRID_FIELDS,
        **_LADDER_FIELDS,
        **_DATA_FIELDS,
    },
    "time-local": {
        "symbol": (..., _str),
        "dimension": (1, _positive_int),
        "smoothing": ("abs:0.5", _str),
        "forcing": (False, _bool),
        "input_multiplier": (None, _optional(_str)),
        "s": (0.6, _weight_exponent),
        "horizon": (4.0, _positive),
        "band": ((0.4, 2.0), _band),
        "weight_axis": (None, _optional(_nonnegative_int)),
        "source_span": (None, _optional(_positive)),
        **_GRID_FIELDS,
        **_LADDER_FIELDS,
        **_DATA_FIELDS,
    },
    "model-estimate": {
        "form": (
            ...,
            _choice(
                (
                    "elliptic-homogeneous",
                    "nonelliptic-homogeneous",
                    "line-source",
                    "plane-source",
                )
            ),
        ),
        "m": (2.0, _positive),
        "dimension": (1, _positive_int),
        "symbol": (None, _optional(_str)),
        "s": (0.6, _weight_exponent),
        "horizon": (4.0, _positive),
        "band": ((0.4, 2.0), _band),
        "source_span": (None, _optional(_positive)),
        "points": (1024, _positive_int),
        "length": (128.0, _positive),
        "dt": (0.125, _positive),
        "ladder": (3, _positive_int),
        "trials": (32, _positive_int),
        "seed_shift": (0, _nonnegative_int),
        "stability_threshold": (0.10, _positive),
        "bump_width": (0.15, _positive),
        "x_spread": (3.0, _positive),
    },
    "reduction": {
        "symbol": (..., _str),
        "dimension": (2, _positive_int),
        "kind": (
            "time-local-homogeneous",
            _choice(("homogeneous", "time-local-homogeneous")),
        ),
        "smoothing": ("abs:0.5", _str),
        "s": (0.6, _weight_exponent),
        "horizon": (2.0, _positive),
        "band": ((0.4, 1.4), _band),
        "direction_count": (None, _optional(_positive_int)),
        "halfangle": (None, _optional(_positive)),
        "low_radius": (None, _optional(_positive)),
        "ladder": (1, _positive_int),
        "trials": (8, _positive_int),
        "cert_trials": (8, _positive_int),
        "model_trials": (3, _positive_int),
        "model_points": (None, _optional(_positive_int)),
        "model_length": (None, _optional(_positive)),
        "ratio_tol": (0.01, _positive),
        "method": ("auto", _choice(("auto", "power-iteration", "ensemble-max"))),
        "rtol": (1e-4, _positive),
        "max_iterations": (50, _positive_int),
        **_GRID_FIELDS,
        **_DATA_FIELDS,
    },
    "kernel": {
        "symbol": (..., _str),
        "shifts": ((-1.0, 0.0, 1.0), _float_list),
        "epsilons": ((1e-2, 5e-3, 2.5e-3), _float_list),
        "points": (2**18, _positive_int),
        "length": (512.0, _positive),
        "pieces": (True, _bool),
    },
    "identity-suite": {
        "symbol": (..., _str),
        "dimension": (2, _positive_int),
        "direction": (None, _optional(_direction)),
        "band": ((0.5, 8.0), _band),
        "halfangle": (None, _optional(_positive)),
        "points": (256, _positive_int),
        "length": (80.0, _positive),
        "fields": (16, _positive_int),
        "bump_width": (0.8, _positive),
        "x_spread": (0.5, _positive),
        "multiplier": ("abs:0.5", _str),
        "order": (8, _positive_int),
    },
    "combined": {
        "symbol": (..., _str),
        "dimension": (1, _positive_int),
        "smoothing": ("abs:0.5", _str),
        "input_multiplier": ("abs:-0.5", _str),
        "s": (0.6, _weight_exponent),
        "horizon": (4.0, _positive),
        "band": ((0.4, 2.0), _band),
        "source_span": (None, _optional(_positive)),
        "trials": (8, _positive_int),
        "rtol": (1e-4, _positive),
        "max_iterations": (50, _positive_int),
        "slack": (5e-3, _positive),
        **_GRID_FIELDS,
        **_DATA_FIELDS,
    },
}

# Pass/fail criteria the runner evaluates after the computation.  Unknown
# keys are rejected like any other field.
_CHECK_FIELDS = {
    "homogeneous": _ESTIMATE_CHECKS,
    "inhomogeneous": _ESTIMATE_CHECKS,
    "time-local": _ESTIMATE_CHECKS,
    "model-estimate": _ESTIMATE_CHECKS,
    "reduction": {
        "bound_dominates": (True, _bool),
        "min_ratio": (None, _optional(_positive)),
        "ladder_stable": (False, _bool),
    },
    "kernel": {
        "max_drift": (0.05, _positive),
    },
    "identity-suite": {
        "max_residual": (1e-6, _positive),
    },
    "combined": {
        "dominated": (True, _bool),
    },
}


def _apply_table(table, raw, prefix=""):
    out = {}
    for key, value in raw.items():
        if key not in table:
            raise ConfigError(f"{prefix}{key}", "unknown key")
    for key, (default, check) in table.items():
        if key in raw:
            out[key] = check(f"{prefix}{key}", raw[key])
        elif default is ...:
            raise ConfigError(f"{prefix}{key}", "required field is missing")
        else:
            out[key] = default
    return out


def validate_config(raw: dict) -> dict:
    """Validate a raw configuration dict and fill in defaults.

    Returns a normalized dict with every kind-specific field present.
    Raises ConfigError naming the first offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config", f"expected a JSON object, got {type(raw).__name__}")
    if "schema" not in raw:
        raise ConfigError("schema", "required field is missing")
    schema = _int("schema", raw["schema"])
    if schema != CONFIG_SCHEMA_VERSION:
        raise ConfigError(
            "schema", f"unsupported version {schema}, expected {CONFIG_SCHEMA_VERSION}"
        )
    if "experiment" not in raw:
        raise ConfigError("experiment", "required field is missing")
    experiment = _str("experiment", raw["experiment"])
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(
            "experiment",
            f"unknown kind {experiment!r}, expected one of {list(EXPERIMENT_KINDS)}",
        )
    if "name" not in raw:
        raise ConfigError("name", "required field is missing")
    name = _str("name", raw["name"])
    if not name or any(ch in name for ch in "/\\ "):
        raise ConfigError("name", f"must be a nonempty token without separators, got {name!r}")

    body = {
        k: v
        for k, v in raw.items()
        if k not in ("schema", "experiment", "name", "seed", "checks", "notes")
    }
    params = _apply_table(_FIELDS[experiment], body)
    raw_checks = raw.get("checks", {})
    if raw_checks is None:
        raw_checks = {}
    if not isinstance(raw_checks, dict):
        raise ConfigError("checks", f"expected an object, got {raw_checks!r}")
    checks = _apply_table(_CHECK_FIELDS[experiment], raw_checks, prefix="checks.")

    seed = _nonnegative_int("seed", raw.get("seed", 0))
    notes = _str("notes", raw.get("notes", "")) if "notes" in raw else ""
    return {
        "schema": schema,
        "experiment": experiment,
        "name": name,
        "seed": seed,
        "notes": notes,
        "params": params,
        "checks": checks,
    }


def load_config(path) -> dict:
    """Read and validate a JSON configuration file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    return validate_config(raw)
