"""Frequency-warping transforms, cutoffs, partitions and reduction plans."""

import numpy as np
import pytest

from smoothlab.canonical import (
    CoverageError,
    Cutoff,
    Diffeomorphism,
    WarpOutOfBandError,
    analytic_cone_cutoff,
    ball_cutoff,
    build_partition,
    build_reduction,
    conic_cutoff,
    identity_diffeomorphism,
    operator_norm_weighted,
    transform_adjoint_apply,
    transform_apply,
    transform_inverse_apply,
)
from smoothlab.estimates import default_directions
from smoothlab.fields import gaussian_field, random_band_ensemble
from smoothlab.grids import Field, UniformGrid, Weight, multiplier_apply
from smoothlab.symbols import make_symbol


def _dilation(n: int, factor: float = 2.0) -> Diffeomorphism:
    return Diffeomorphism(
        f"dilation-{factor:g}",
        n,
        lambda pts: factor * np.asarray(pts, dtype=float),
        lambda pts: (
            np.asarray(pts, dtype=float) / factor,
            np.ones(np.atleast_2d(pts).shape[0], bool),
        ),
        lambda pts: np.full(np.atleast_2d(pts).shape[0], factor**n),
        homogeneous=True,
        domain={"kind": "all"},
    )


def test_dilation_transform_closed_form():
    # u^(xi) = exp(-xi^2/2), so gamma=1 gives F^{-1}[u^(2 xi)] = exp(-x^2/8)/2
    grid = UniformGrid((256,), (40.0,))
    x = grid.x_mesh()[0]
    u = Field(grid, np.exp(-0.5 * x * x).astype(complex))
    out = transform_apply(_dilation(1), ball_cutoff(6.0), u)
    expected = 0.5 * np.exp(-x * x / 8.0)
    assert np.max(np.abs(out.values - expected)) <= 1e-9


def test_identity_warp_equals_multiplier():
    grid = UniformGrid((128,), (32.0,))
    rng = np.random.default_rng(0)
    u = random_band_ensemble(1, (0.5, 3.0), rng, count=6, sigma=0.2).field(grid)
    gamma = ball_cutoff(2.0)
    warped = transform_apply(identity_diffeomorphism(1), gamma, u)
    direct = multiplier_apply(u, lambda xi: gamma(xi))
    assert np.max(np.abs(warped.values - direct.values)) <= 1e-12


def test_inverse_after_forward_is_cutoff_squared():
    grid = UniformGrid((256,), (48.0,))
    rng = np.random.default_rng(1)
    u = random_band_ensemble(1, (0.6, 2.4), rng, count=5, sigma=0.15).field(grid)
    dil = _dilation(1)
    gamma = ball_cutoff(3.0)
    roundtrip = transform_apply(dil, gamma, transform_inverse_apply(dil, gamma, u))
    squared = multiplier_apply(u, lambda xi: gamma(xi) ** 2)
    assert (roundtrip - squared).norm() <= 1e-8 * u.norm()


def test_conjugation_identity_for_dilation():
    # with a(xi) = sigma(2 xi), a(D) I = I sigma(D)
    grid = UniformGrid((256,), (48.0,))
    rng = np.random.default_rng(2)
    u = random_band_ensemble(1, (0.6, 2.4), rng, count=5, sigma=0.15).field(grid)
    dil = _dilation(1)
    gamma = ball_cutoff(3.0)
    sigma = lambda eta: eta**3
    a = lambda xi: (2.0 * xi) ** 3
    lhs = multiplier_apply(transform_apply(dil, gamma, u), a)
    rhs = transform_apply(dil, gamma, multiplier_apply(u, sigma))
    assert (lhs - rhs).norm() <= 1e-8 * max(lhs.norm(), 1e-30)


def test_absorbing_a_multiplier_into_the_cutoff():
    # I_{psi, gamma (nu o psi)} u = I_{psi, gamma} nu(D) u
    grid = UniformGrid((256,), (48.0,))
    rng = np.random.default_rng(3)
    u = random_band_ensemble(1, (0.6, 2.4), rng, count=5, sigma=0.15).field(grid)
    dil = _dilation(1)
    gamma = ball_cutoff(3.0)
    nu = lambda xi: np.exp(-0.1 * xi * xi)
    merged = Cutoff(
        lambda *c: gamma(*c) * nu(2.0 * c[0]),
        "compact", "cutoff times warped multiplier", gamma.width,
        dict(gamma.support),
    )
    lhs = transform_apply(dil, merged, u)
    rhs = transform_apply(dil, gamma, multiplier_apply(u, nu))
    assert (lhs - rhs).norm() <= 1e-10 * max(rhs.norm(), 1e-30)


def test_adjoint_pairing():
    grid = UniformGrid((128,), (32.0,))
    rng = np.random.default_rng(4)
    u = random_band_ensemble(1, (0.5, 2.5), rng, count=4, sigma=0.15).field(grid)
    v = random_band_ensemble(1, (0.5, 2.5), rng, count=4, sigma=0.15).field(grid)
    dil = _dilation(1)
    gamma = ball_cutoff(3.0)
    lhs = grid.inner(transform_apply(dil, gamma, u).values, v.values)
    rhs = grid.inner(u.values, transform_adjoint_apply(dil, gamma, v).values)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1e-30)


def test_warp_guard_fires_for_reachable_targets():
    # doubling the frequencies of data near the edge pushes populated modes
    # past the interpolable interior
    grid = UniformGrid((32,), (16.0,))
    u = gaussian_field(grid, sigma_x=2.0, center_xi=2.5)
    with pytest.raises(WarpOutOfBandError):
        transform_apply(_dilation(1), ball_cutoff(4.0), u)


def test_warp_guard_ignores_unpopulated_targets():
    # same warp, but the data sits low enough that escaping targets carry
    # no spectral mass
    grid = UniformGrid((256,), (40.0,))
    u = gaussian_field(grid, sigma_x=2.0, center_xi=1.0)
    out = transform_apply(_dilation(1), ball_cutoff(30.0), u)
    assert np.isfinite(out.values).all()


def test_partition_squares_sum_to_one():
    directions = default_directions(2, 8)
    chi, cones = build_partition(directions, 0.3)
    rng = np.random.default_rng(5)
    pts = rng.standard_normal((500, 2))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    total = sum(c.at(pts) ** 2 for c in cones)
    assert np.max(np.abs(total - 1.0)) <= 1e-12
    for c in cones:
        vals = c.at(pts)
        assert vals.min() >= 0.0 and vals.max() <= 1.0 + 1e-12
    assert chi.at(np.array([[0.1, 0.0]]))[0] == pytest.approx(1.0)
    assert chi.at(np.array([[0.7, 0.0]]))[0] == pytest.approx(0.0)


def test_partition_one_dimensional():
    chi, cones = build_partition([np.array([1.0]), np.array([-1.0])], 0.5)
    pts = np.array([[2.0], [-2.0], [0.25]])
    total = sum(c.at(pts) ** 2 for c in cones)
    assert np.allclose(total[:2], 1.0)
    assert chi.at(pts)[2] == pytest.approx(1.0)


def test_partition_coverage_error():
    with pytest.raises(CoverageError):
        build_partition([np.array([1.0, 0.0])], 0.3, halfangle=0.2)


def test_conic_cutoff_geometry():
    cone = conic_cutoff(np.array([0.0, 1.0]), 0.6)
    assert cone.at(np.array([[0.0, 2.0]]))[0] == pytest.approx(1.0)
    beyond = 0.7
    p = np.array([[2.0 * np.sin(beyond), 2.0 * np.cos(beyond)]])
    assert cone.at(p)[0] == 0.0
    assert cone.support["halfangle"] == pytest.approx(0.6)
    with pytest.raises(ValueError):
        conic_cutoff(np.array([1.0, 0.0]), 3.5)


def test_analytic_cone_cutoff_validation_and_shape():
    with pytest.raises(ValueError):
        analytic_cone_cutoff(np.array([0.0, 1.0]), width=-1.0)
    with pytest.raises(ValueError):
        analytic_cone_cutoff(np.array([0.0, 1.0]), floor=0.0)
    with pytest.raises(ValueError, match="underflow"):
        analytic_cone_cutoff(np.array([0.0, 1.0]), width=0.5, floor=0.03)
    cut = analytic_cone_cutoff(np.array([0.0, 1.0]), radial_onset=1.0)
    on_axis = cut.at(np.array([[0.0, 4.0]]))[0]
    assert on_axis == pytest.approx(np.exp(-1.0 / 16.0))
    tiny_radius = cut.at(np.array([[0.0, 0.05]]))[0]
    assert tiny_radius <= 1e-100
    sideways = cut.at(np.array([[4.0, 0.1]]))[0]
    assert sideways == 0.0


def test_reduction_plan_certificate_for_quadratic():
    plan = build_reduction(
        make_symbol("schrodinger", 2), np.array([0.0, 1.0]),
        halfangle=0.5, band=(0.4, 2.0),
    )
    cert = plan.certificate
    assert cert["conjugation_residual"] <= 1e-8
    assert cert["inverse_residual"] <= 1e-8
    assert cert["det_range"][0] > 0.0
    # elliptic symbol reduces to the elliptic normal form
    assert "elliptic" in plan.sigma.name


def test_reduction_rejects_degenerate_cone():
    # xi^3 - xi has gradient zeros at |xi| = 1/sqrt(3), inside the band
    with pytest.raises(ValueError):
        build_reduction(
            make_symbol("poly:0,-1,0,1", 1), np.array([1.0]),
            halfangle=0.5 * np.pi, band=(0.4, 2.0),
        )


def test_weighted_norm_of_identity_is_one():
    grid = UniformGrid((128,), (32.0,))
    report = operator_norm_weighted(
        lambda u: u, Weight("bracket", -0.7), grid, (0.5, 2.5),
        adjoint=lambda v: v, trials=8, seed=0, sigma=0.15,
    )
    assert report.constant == pytest.approx(1.0, abs=1e-9)
    assert report.ensemble_max == pytest.approx(1.0, abs=1e-9)


def test_weighted_norm_checks_linearity_and_adjoint():
    grid = UniformGrid((64,), (16.0,))
    shift = Field(grid, np.ones(grid.shape, dtype=complex))
    with pytest.raises(ValueError, match="linearity"):
        operator_norm_weighted(
            lambda u: u + shift, Weight("bracket", -0.7), grid, (0.5, 2.5),
            trials=8, seed=0, sigma=0.15,
        )
    with pytest.raises(ValueError, match="pairing"):
        operator_norm_weighted(
            lambda u: u, Weight("bracket", -0.7), grid, (0.5, 2.5),
            adjoint=lambda v: 2.0 * v, trials=8, seed=0, sigma=0.15,
        )
