"""Configuration schema validation."""

import pytest

from smoothlab.config import (
    CONFIG_SCHEMA_VERSION,
    ConfigError,
    error_record,
    load_config,
    validate_config,
)


def _minimal(**extra):
    raw = {
        "schema": CONFIG_SCHEMA_VERSION,
        "experiment": "homogeneous",
        "name": "probe",
        "symbol": "schrodinger",
    }
    raw.update(extra)
    return raw


def test_defaults_are_filled():
    cfg = validate_config(_minimal())
    assert cfg["name"] == "probe"
    assert cfg["seed"] == 0
    params = cfg["params"]
    assert params["symbol"] == "schrodinger"
    assert params["dimension"] == 1
    assert params["s"] == 0.6
    assert params["band"] == (0.4, 2.0)
    assert params["points"] == 1024
    assert params["trials"] == 32
    assert params["bump_width"] == 0.15
    checks = cfg["checks"]
    assert checks["ladder_stable"] is True
    assert checks["max_constant"] is None


def test_required_fields():
    for missing in ("schema", "experiment", "name"):
        raw = _minimal()
        del raw[missing]
        with pytest.raises(ConfigError, match="required field is missing") as err:
            validate_config(raw)
        assert err.value.field == missing
    raw = _minimal()
    del raw["symbol"]
    with pytest.raises(ConfigError, match="required field is missing"):
        validate_config(raw)


def test_schema_version_is_pinned():
    with pytest.raises(ConfigError, match="unsupported version"):
        validate_config(_minimal(schema=99))


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as err:
        validate_config(_minimal(bandz=[0.5, 2.0]))
    assert err.value.field == "bandz"
    assert "unknown key" in err.value.message
    with pytest.raises(ConfigError) as err:
        validate_config(_minimal(checks={"max_residual": 1.0}))
    assert err.value.field == "checks.max_residual"


def test_field_type_errors_name_the_field():
    cases = {
        "points": 12.5,          # must be an integer
        "horizon": "-",          # must be a number
        "band": [2.0, 1.0],      # must be increasing
        "s": 0.5,                # must exceed 1/2
        "trials": 0,             # must be positive
        "method": "newton",      # not an allowed choice
    }
    for field, bad in cases.items():
        with pytest.raises(ConfigError) as err:
            validate_config(_minimal(**{field: bad}))
        assert err.value.field.startswith(field)


def test_booleans_are_not_integers():
    with pytest.raises(ConfigError, match="expected an integer"):
        validate_config(_minimal(points=True))
    cfg = validate_config(_minimal(checks={"converged": True}))
    assert cfg["checks"]["converged"] is True
    with pytest.raises(ConfigError, match="expected true or false"):
        validate_config(_minimal(checks={"converged": 1}))


def test_name_token_rule():
    for bad in ("", "a b", "a/b", "a\\b"):
        with pytest.raises(ConfigError, match="nonempty token"):
            validate_config(_minimal(name=bad))
    assert validate_config(_minimal(name="ok-name_2"))["name"] == "ok-name_2"


def test_experiment_kind_tables():
    kernel = validate_config(
        {
            "schema": 1,
            "experiment": "kernel",
            "name": "k",
            "symbol": "kdv",
            "shifts": [-1, 0, 1],
        }
    )
    assert kernel["params"]["epsilons"] == (1e-2, 5e-3, 2.5e-3)
    assert kernel["checks"]["max_drift"] == 0.05
    with pytest.raises(ConfigError) as err:
        validate_config(
            {"schema": 1, "experiment": "kernel", "name": "k", "symbol": "kdv", "s": 0.6}
        )
    assert err.value.field == "s"  # estimate-only field, unknown for kernel

    ident = validate_config(
        {"schema": 1, "experiment": "identity-suite", "name": "i", "symbol": "schrodinger"}
    )
    assert ident["params"]["fields"] == 16
    assert ident["params"]["band"] == (0.5, 8.0)

    with pytest.raises(ConfigError, match="unknown kind"):
        validate_config({"schema": 1, "experiment": "spectra", "name": "x"})


def test_error_record_is_machine_readable():
    try:
        validate_config(_minimal(points=0))
    except ConfigError as exc:
        record = error_record(exc)
    assert record["error"] == "config-validation"
    assert record["field"] == "points"
    assert "positive" in record["message"]


def test_load_config_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path)
    good = tmp_path / "good.json"
    good.write_text(
        '{"schema": 1, "experiment": "homogeneous", "name": "n", "symbol": "kdv"}'
    )
    assert load_config(good)["params"]["symbol"] == "kdv"
