"""Random band-limited data: the probes every estimate is measured with."""

import numpy as np
import pytest

from smoothlab.fields import (
    dilate_dyadic,
    gaussian_field,
    random_band_ensemble,
    random_source,
    time_bump,
)
from smoothlab.grids import UniformGrid


def test_draws_are_grid_free():
    # the same seed must describe the same continuum field on any grid
    rng_a = np.random.default_rng(42)
    rng_b = np.random.default_rng(42)
    ens_a = random_band_ensemble(1, (0.5, 3.0), rng_a, count=6, sigma=0.2)
    ens_b = random_band_ensemble(1, (0.5, 3.0), rng_b, count=6, sigma=0.2)
    assert np.array_equal(ens_a.centers, ens_b.centers)
    coarse = UniformGrid((256,), (64.0,))
    fine = UniformGrid((512,), (64.0,))
    u = ens_a.field(coarse).values
    v = ens_b.field(fine).values[::2]
    assert np.max(np.abs(u - v)) <= 1e-6 * np.max(np.abs(u))


def test_spectral_mass_stays_in_band():
    rng = np.random.default_rng(3)
    ens = random_band_ensemble(2, (1.0, 4.0), rng, count=10, sigma=0.25)
    grid = UniformGrid((128, 128), (40.0, 40.0))
    spec = np.abs(ens.spectrum(grid))
    r = np.sqrt(sum(m * m for m in grid.xi_mesh()))
    outside = (r < 1.0 - 0.5) | (r > 4.0 + 0.5)
    assert spec[outside].max() <= 1e-3 * spec.max()
    lo, hi = ens.radial_support()
    assert lo >= 1.0 - 1e-12 and hi <= 4.0 + 1e-12


def test_unit_spectral_norm():
    rng = np.random.default_rng(4)
    ens = random_band_ensemble(1, (0.5, 3.0), rng, count=4, sigma=0.2)
    grid = UniformGrid((512,), (80.0,))
    assert ens.field(grid).norm() == pytest.approx(1.0, abs=1e-9)


def test_band_too_narrow_raises():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="too narrow"):
        random_band_ensemble(1, (1.0, 1.5), rng, sigma=0.25)


def test_axis_clearance_is_respected():
    rng = np.random.default_rng(9)
    ens = random_band_ensemble(
        2, (0.5, 5.0), rng, count=32, sigma=0.2, axis_clearance={0: 0.4}
    )
    assert np.min(np.abs(ens.centers[:, 0])) >= 0.4 + 4.5 * 0.2 - 1e-12


def test_gaussian_field_normalised_and_modulated():
    grid = UniformGrid((256,), (40.0,))
    u = gaussian_field(grid, sigma_x=1.5, center_xi=2.0)
    assert u.norm() == pytest.approx(1.0, abs=1e-12)
    spec = np.abs(u.spectrum())
    xi = grid.xi_mesh()[0]
    assert abs(xi[np.argmax(spec)] - 2.0) <= 0.2


def test_time_bump_support_and_peak():
    t = np.linspace(-2.0, 2.0, 401)
    b = time_bump(t, 0.5, 0.75)
    assert b[np.abs(t - 0.5) >= 0.75].max() == 0.0
    assert b[np.argmin(np.abs(t - 0.5))] == pytest.approx(1.0)
    assert b.min() >= 0.0


def test_random_source_vanishes_at_window_ends():
    rng = np.random.default_rng(11)
    mix = random_source(1, (0.5, 2.5), (0.0, 2.0), rng, terms=2, count=4, sigma=0.2)
    grid = UniformGrid((128,), (64.0,))
    stf = mix.sample(grid, np.linspace(-1.0, 3.0, 33))
    peak = np.max(np.abs(stf.values))
    assert np.max(np.abs(stf.values[0])) <= 1e-12 * peak
    assert np.max(np.abs(stf.values[-1])) <= 1e-12 * peak


def test_dilation_preserves_norm_and_halves_frequency():
    grid = UniformGrid((512,), (128.0,))
    u = gaussian_field(grid, sigma_x=1.0, center_xi=4.0)
    v = dilate_dyadic(u, 1)
    assert v.norm() == pytest.approx(u.norm(), rel=1e-12)
    xi = grid.xi_mesh()[0]
    spec = np.abs(v.spectrum())
    assert abs(xi[np.argmax(spec)] - 2.0) <= 0.2
    with pytest.raises(ValueError):
        dilate_dyadic(u, -1)
