"""Symbol presets, the descriptor grammar, and dispersiveness grading."""

import numpy as np
import pytest

from smoothlab.symbols import (
    classify,
    compose_linear,
    make_symbol,
    model_symbol,
    shift_symbol,
    symbol_checks,
)


def test_schrodinger_values_and_gradient():
    a = make_symbol("schrodinger", 2)
    assert a(3.0, 4.0) == pytest.approx(25.0)
    gx, gy = a.gradient(3.0, 4.0)
    assert (gx, gy) == (6.0, 8.0)
    assert a.homogeneous and a.order == 2.0


def test_poly_symbol_and_gradient():
    a = make_symbol("poly:0,1,0,1", 1)  # xi^3 + xi
    xi = np.linspace(-2.0, 2.0, 7)
    assert np.allclose(a(xi), xi**3 + xi)
    assert np.allclose(a.gradient(xi)[0], 3.0 * xi**2 + 1.0)
    assert np.allclose(a.principal(xi), xi**3)


def test_kdv_is_one_dimensional():
    a = make_symbol("kdv", 1)
    assert a(2.0) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        make_symbol("kdv", 2)


def test_unknown_descriptor_reports_grammar():
    with pytest.raises(ValueError, match="schrodinger | power:m"):
        make_symbol("heat", 1)
    with pytest.raises(ValueError, match="bad symbol descriptor"):
        make_symbol("power:zero", 1)


def test_model_symbols():
    ell = model_symbol("elliptic", 2.0, 2)
    assert ell(1.0, 2.0) == pytest.approx(4.0)  # |xi_n|^m
    non = model_symbol("nonelliptic", 2.0, 2)
    assert non(3.0, 2.0) == pytest.approx(6.0)  # xi_1 |xi_n|^{m-1}
    assert non.singular_axes == () or 1 in non.singular_axes
    with pytest.raises(ValueError):
        model_symbol("parabolic", 2.0, 2)


def test_shift_and_rotation_wrappers():
    a = make_symbol("schrodinger", 2)
    shifted = shift_symbol(a, 1.5)
    assert shifted(1.0, 1.0) == pytest.approx(3.5)
    assert not shifted.homogeneous
    c, s = np.cos(0.4), np.sin(0.4)
    Q = np.array([[c, -s], [s, c]])
    rot = compose_linear(a, Q)
    assert rot(1.0, 2.0) == pytest.approx(a(1.0, 2.0))  # radial symbol
    with pytest.raises(ValueError):
        compose_linear(a, np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_classification_grades():
    # |xi|^2: principal gradient bounded below on the sphere -> H
    assert classify(make_symbol("schrodinger", 1)).tag == "H"
    # xi^3 + xi: principal gradient vanishes nowhere but full gradient
    # is only bounded below at infinity -> at least L
    assert classify(make_symbol("poly:0,1,0,1", 1)).tag in ("H", "L")
    # xi^3 - xi has interior critical points: HL at best
    tag = classify(make_symbol("poly:0,-1,0,1", 1)).tag
    assert tag == "HL"


def test_classification_witnesses_are_recorded():
    rep = classify(make_symbol("poly:0,-1,0,1", 1))
    assert "sphere_min" in rep.witnesses or len(rep.witnesses) > 0


def test_symbol_checks_sanity():
    out = symbol_checks(make_symbol("schrodinger", 2))
    assert out["gradient_fd"] <= 1e-5
    assert out["homogeneity"] <= 1e-10
    assert out["euler"] <= 1e-10
