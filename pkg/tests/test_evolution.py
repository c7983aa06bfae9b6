"""Propagators, Duhamel integration, the resolvent path, and kernel bounds."""

import numpy as np
import pytest

from smoothlab.evolution import (
    DomainTooSmallError,
    SupportViolationError,
    TimeSupportError,
    TimeWindow,
    check_anti_wrap,
    duhamel_adjoint,
    duhamel_solve,
    kernel_k,
    propagate,
    resolvent_solve,
)
from smoothlab.fields import gaussian_field, random_band_ensemble, random_source
from smoothlab.grids import SpaceTimeField, UniformGrid, trapezoid_weights
from smoothlab.symbols import make_symbol


def _st_inner(grid, window, a, b):
    w = trapezoid_weights(window.count)
    total = 0.0 + 0.0j
    for k in range(window.count):
        total += w[k] * window.dt * np.sum(a.values[k] * np.conj(b.values[k]))
    return total * grid.cell_measure


def test_time_window_validation():
    with pytest.raises(ValueError):
        TimeWindow(0.0, 1.0, -0.1)
    with pytest.raises(ValueError):
        TimeWindow(1.0, 0.5, 0.1)
    with pytest.raises(ValueError):
        TimeWindow(0.5, 1.0, 0.25)  # window must contain t = 0
    with pytest.raises(ValueError):
        TimeWindow(0.0, 1.0, 0.3)  # endpoints off the step lattice
    win = TimeWindow(-1.0, 2.0, 0.5)
    assert win.count == 7
    assert win.zero_index == 2
    assert np.allclose(win.times, np.arange(-1.0, 2.5, 0.5))


def test_free_flow_gaussian_closed_form():
    # the flow multiplies spectra by exp(i t a), so Gaussian data with
    # a(xi) = xi^2 stays Gaussian with complex width parameter 1 - 2 i t
    grid = UniformGrid((512,), (80.0,))
    x = grid.x_mesh()[0]
    phi = gaussian_field(grid, sigma_x=1.0)
    amp = phi.values[np.argmin(np.abs(x))]
    window = TimeWindow(0.0, 2.0, 0.5)
    out = propagate(make_symbol("schrodinger", 1), phi, window)
    for k, t in enumerate(window.times):
        z = 1.0 - 2.0j * t
        exact = amp / np.sqrt(z) * np.exp(-x * x / (2.0 * z))
        assert np.max(np.abs(out.values[k] - exact)) <= 1e-10


def test_flow_is_unitary_and_a_group():
    grid = UniformGrid((256,), (40.0,))
    phi = gaussian_field(grid, sigma_x=1.5, center_xi=2.0)
    a = make_symbol("poly:0,1,0,1", 1)
    w1 = TimeWindow(0.0, 1.5, 0.75)
    first = propagate(a, phi, w1)
    assert abs(first.slice(2).norm() - 1.0) <= 1e-12
    second = propagate(a, first.slice(2), TimeWindow(0.0, 0.5, 0.25))
    direct = propagate(a, phi, TimeWindow(0.0, 2.0, 0.25))
    assert np.max(np.abs(second.values[-1] - direct.values[-1])) <= 1e-11


def test_anti_wrap_rule():
    grid = UniformGrid((256,), (20.0,))
    a = make_symbol("schrodinger", 1)
    window = TimeWindow(0.0, 4.0, 0.5)
    # band max 3 -> group velocity 6 -> needs L >= 48
    with pytest.raises(DomainTooSmallError):
        check_anti_wrap(a, (0.5, 3.0), window, grid)
    big = UniformGrid((256,), (64.0,))
    req = check_anti_wrap(a, (0.5, 3.0), window, big)
    assert req[0] == pytest.approx(48.0)


def test_duhamel_matches_documented_recursion():
    # pin the quadrature: each forward step is a half-step source kick,
    # a free flight, and another half-step kick, and rows before the
    # source window never populate
    grid = UniformGrid((64,), (32.0,))
    rng = np.random.default_rng(0)
    window = TimeWindow(-0.5, 2.0, 0.125, t_source=2.0)
    mix = random_source(1, (0.5, 2.5), (0.25, 1.75), rng, terms=2, count=4, sigma=0.2)
    f = mix.sample(grid, window.times)
    a = make_symbol("poly:0,1,0,1", 1)
    u = duhamel_solve(a, f, window)
    phase = np.exp(1j * window.dt * a(*grid.xi_mesh()))
    spectra = np.stack([grid.forward(row) for row in f.values])
    hat = np.zeros(grid.shape, dtype=complex)
    for k in range(window.zero_index, window.count - 1):
        hat = phase * (hat - 0.5j * window.dt * spectra[k])
        hat -= 0.5j * window.dt * spectra[k + 1]
        assert np.max(np.abs(grid.forward(u.values[k + 1]) - hat)) <= 1e-12
    assert np.max(np.abs(u.values[: window.zero_index])) <= 1e-12


def test_duhamel_is_causal():
    grid = UniformGrid((64,), (32.0,))
    rng = np.random.default_rng(1)
    window = TimeWindow(0.0, 4.0, 0.25, t_source=4.0)
    mix = random_source(1, (0.5, 2.5), (2.0, 3.5), rng, terms=1, count=4, sigma=0.2)
    f = mix.sample(grid, window.times)
    u = duhamel_solve(make_symbol("schrodinger", 1), f, window)
    quiet = window.times < 2.0 - 1e-9
    assert np.max(np.abs(u.values[quiet])) <= 1e-12 * np.max(np.abs(u.values))


def test_duhamel_rejects_unsupported_source():
    grid = UniformGrid((64,), (32.0,))
    rng = np.random.default_rng(2)
    window = TimeWindow(0.0, 2.0, 0.25, t_source=1.0)
    mix = random_source(1, (0.5, 2.5), (1.25, 1.875), rng, terms=1, count=4, sigma=0.2)
    f = mix.sample(grid, window.times)
    with pytest.raises(SupportViolationError):
        duhamel_solve(make_symbol("schrodinger", 1), f, window)


def test_duhamel_adjoint_pairing():
    grid = UniformGrid((64,), (32.0,))
    rng = np.random.default_rng(3)
    window = TimeWindow(0.0, 2.0, 0.25, t_source=2.0)
    a = make_symbol("schrodinger", 1)
    f = random_source(1, (0.5, 2.5), (0.25, 1.75), rng, count=4, sigma=0.2).sample(
        grid, window.times
    )
    vals = rng.standard_normal((window.count,) + grid.shape) + 1j * rng.standard_normal(
        (window.count,) + grid.shape
    )
    v = SpaceTimeField(grid, window.times, vals)
    lhs = _st_inner(grid, window, duhamel_solve(a, f, window), v)
    rhs = _st_inner(grid, window, f, duhamel_adjoint(a, v, window))
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_resolvent_matches_duhamel():
    # the damped resolvent path loses a factor 1 - exp(-eps (t - tau))
    # against Duhamel, so the gap is O(eps) and shrinks as eps halves
    grid = UniformGrid((128,), (64.0,))
    rng = np.random.default_rng(4)
    window = TimeWindow(-0.5, 0.75, 0.015625, t_source=0.4)
    a = make_symbol("schrodinger", 1)
    g = random_band_ensemble(1, (0.5, 2.5), rng, count=4, sigma=0.2).field(grid)
    profile = np.exp(-0.5 * ((window.times - 0.2) / 0.05) ** 2)
    profile[np.abs(window.times - 0.2) > 0.19] = 0.0
    f = SpaceTimeField(grid, window.times, profile[:, None] * g.values[None, :])
    u = duhamel_solve(a, f, window)
    den = np.sqrt(np.sum(np.abs(u.values) ** 2))
    gaps = []
    for eps in (1e-2, 5e-3):
        v = resolvent_solve(a, f, eps=eps)
        gaps.append(np.sqrt(np.sum(np.abs(u.values - v.values) ** 2)) / den)
    assert gaps[0] <= 5e-3
    assert gaps[1] < gaps[0]


def test_resolvent_requires_boundary_decay():
    grid = UniformGrid((64,), (32.0,))
    times = np.linspace(0.0, 2.0, 9)
    vals = np.ones((9,) + grid.shape, dtype=complex)
    f = SpaceTimeField(grid, times, vals)
    with pytest.raises(TimeSupportError):
        resolvent_solve(make_symbol("schrodinger", 1), f, eps=1e-2)


def test_kernel_diagnostics_structure():
    grid = UniformGrid((2**14,), (1024.0,))
    out = kernel_k(make_symbol("kdv", 1), 1.0, 1e-2, grid)
    assert out["roots"] == pytest.approx([1.0])
    for sign in ("+", "-"):
        entry = out[sign]
        assert entry["sup_abs"] > 0.0
        total = (
            entry["sup_abs_origin"]
            + entry["sup_abs_resonance"]
            + entry["sup_abs_tail"]
        )
        # the three disjoint pieces reassemble the kernel up to sup subadditivity
        assert entry["sup_abs"] <= total + 1e-12
    negative = kernel_k(make_symbol("kdv", 1), -8.0, 1e-2, grid)
    assert negative["roots"] == pytest.approx([-2.0])


def test_kernel_sup_is_stable_in_eps():
    grid = UniformGrid((2**16,), (4096.0,))
    sups = [
        max(kernel_k(make_symbol("kdv", 1), 1.0, e, grid, pieces=False)[s]["sup_abs"]
            for s in ("+", "-"))
        for e in (2e-2, 1e-2)
    ]
    assert abs(sups[1] - sups[0]) <= 0.1 * sups[0]
