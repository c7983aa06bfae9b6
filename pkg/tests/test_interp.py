"""Local polynomial resampling of spectra at off-grid frequencies."""

import numpy as np
import pytest

from smoothlab.grids import UniformGrid
from smoothlab.interp import interpolable_margin, warp_adjoint, warp_spectrum


def _gaussian_spectrum(grid, center):
    meshes = grid.xi_mesh()
    r2 = sum((m - c) ** 2 for m, c in zip(meshes, np.atleast_1d(center)))
    return np.exp(-0.5 * r2).astype(complex)


def test_on_grid_targets_reproduce_spectrum():
    grid = UniformGrid((64,), (16.0,))
    spec = _gaussian_spectrum(grid, 1.0)
    xi = grid.xi_mesh()[0]
    interior = np.abs(xi) <= np.pi * 64 / 16.0 - interpolable_margin(grid)
    vals, ok = warp_spectrum(grid, spec, xi[interior].reshape(-1, 1))
    assert ok.all()
    assert np.max(np.abs(vals - spec[interior])) <= 1e-12


def test_off_grid_accuracy_improves_with_order():
    grid = UniformGrid((128,), (32.0,))
    spec = _gaussian_spectrum(grid, 0.0)
    targets = np.linspace(-3.0, 3.0, 211).reshape(-1, 1)
    exact = np.exp(-0.5 * targets.ravel() ** 2)
    errs = []
    for order in (2, 4, 8):
        vals, ok = warp_spectrum(grid, spec, targets, order=order)
        assert ok.all()
        errs.append(np.max(np.abs(vals - exact)))
    assert errs[0] > 10.0 * errs[1] > 100.0 * errs[2]
    assert errs[2] <= 1e-6


def test_targets_outside_interior_are_flagged():
    grid = UniformGrid((32,), (8.0,))
    spec = _gaussian_spectrum(grid, 0.0)
    nyq = np.pi * 32 / 8.0
    vals, ok = warp_spectrum(grid, spec, np.array([[0.0], [nyq + 1.0]]))
    assert ok[0] and not ok[1]
    assert vals[1] == 0.0


def test_margin_scales_with_order_and_mesh():
    grid = UniformGrid((64,), (16.0,))
    dxi = 2.0 * np.pi / 16.0
    assert interpolable_margin(grid, order=6) == pytest.approx(4 * dxi)
    assert interpolable_margin(grid, order=8) > interpolable_margin(grid, order=4)


def test_two_dimensional_warp():
    grid = UniformGrid((128, 128), (40.0, 40.0))
    spec = _gaussian_spectrum(grid, (0.5, -0.25))
    rng = np.random.default_rng(1)
    targets = rng.uniform(-2.0, 2.0, size=(300, 2))
    vals, ok = warp_spectrum(grid, spec, targets, order=8)
    exact = np.exp(-0.5 * np.sum((targets - [0.5, -0.25]) ** 2, axis=1))
    assert ok.all()
    assert np.max(np.abs(vals - exact)) <= 1e-5


def test_adjoint_pairing_is_exact():
    grid = UniformGrid((64,), (16.0,))
    rng = np.random.default_rng(2)
    spec = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    targets = rng.uniform(-10.0, 10.0, size=(50, 1))
    coeffs = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    vals, _ = warp_spectrum(grid, spec, targets, order=6)
    lhs = np.sum(vals * np.conj(coeffs))
    rhs = np.sum(spec * np.conj(warp_adjoint(grid, coeffs, targets, order=6)))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_target_shape_validation():
    grid = UniformGrid((32, 32), (8.0, 8.0))
    spec = _gaussian_spectrum(grid, (0.0, 0.0))
    with pytest.raises(ValueError):
        warp_spectrum(grid, spec, np.zeros((5, 3)))
