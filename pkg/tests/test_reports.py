"""Report containers and deterministic JSON serialization."""

import json

import numpy as np

from smoothlab.reports import (
    SCHEMA_VERSION,
    ConstantReport,
    jsonify,
    read_report,
    write_report,
)


def test_jsonify_handles_numpy_types():
    out = jsonify(
        {
            "arr": np.arange(3.0),
            "scalar": np.float64(1.5),
            "int": np.int32(7),
            "flag": np.bool_(True),
            "nested": [np.float32(2.0), (np.int64(1),)],
            "inf": float("inf"),
        }
    )
    assert out["arr"] == [0.0, 1.0, 2.0]
    assert out["scalar"] == 1.5 and isinstance(out["scalar"], float)
    assert out["int"] == 7 and isinstance(out["int"], int)
    assert out["flag"] is True
    assert out["nested"] == [2.0, [1]]
    assert out["inf"] == "inf"
    json.dumps(out)  # round-trips through the stdlib encoder


def test_constant_report_to_dict():
    report = ConstantReport(
        constant=np.float64(1.25),
        method="power-iteration",
        history={"rayleigh": [np.float64(1.0), np.float64(1.25)]},
        resolution={"points": 256},
        ensemble_max=1.1,
        ladder=({"rung": 0, "constant": 1.25},),
        flags={"ladder_stable": np.bool_(True)},
    )
    d = report.to_dict()
    assert d["constant"] == 1.25
    assert d["ladder"] == [{"rung": 0, "constant": 1.25}]
    assert d["flags"]["ladder_stable"] is True
    json.dumps(d)


def test_write_report_schema_and_roundtrip(tmp_path):
    path = tmp_path / "out.json"
    write_report(path, {"b": np.float64(2.0), "a": 1})
    body = read_report(path)
    assert body["schema"] == SCHEMA_VERSION
    assert body["a"] == 1 and body["b"] == 2.0
    # an explicit schema value wins over the default
    write_report(path, {"schema": 9})
    assert read_report(path)["schema"] == 9


def test_write_report_is_byte_stable(tmp_path):
    payload = {"z": [1, 2, 3], "a": {"y": 2.5, "b": True}}
    p1, p2 = tmp_path / "r1.json", tmp_path / "r2.json"
    write_report(p1, payload)
    write_report(p2, dict(reversed(list(payload.items()))))
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"schema"') < text.index('"z"')
