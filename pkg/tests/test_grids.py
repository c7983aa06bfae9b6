"""Grid, transform and norm conventions that everything else leans on."""

import numpy as np
import pytest

from smoothlab.grids import (
    Field,
    SingularMultiplierError,
    SpaceTimeField,
    UniformGrid,
    Weight,
    multiplier_apply,
    rotate,
    trapezoid_weights,
    weighted_spacetime_norm,
)


def _random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, vals)


def test_grid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        UniformGrid((100,), (10.0,))
    with pytest.raises(ValueError):
        UniformGrid((64, 64), (10.0,))
    with pytest.raises(ValueError):
        UniformGrid((8, 8, 8, 8), (1.0, 1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        UniformGrid((64,), (-2.0,))


def test_plancherel_identity():
    grid = UniformGrid((128, 64), (20.0, 12.0))
    u = _random_field(grid)
    assert abs(grid.spectral_norm(u.spectrum()) - u.norm()) <= 1e-12 * u.norm()


def test_roundtrip_is_identity():
    grid = UniformGrid((256,), (30.0,))
    u = _random_field(grid, seed=3)
    back = grid.inverse(grid.forward(u.values))
    assert np.max(np.abs(back - u.values)) <= 1e-12


def test_forward_matches_continuum_gaussian():
    # unitary convention: the transform of exp(-x^2/2) is exp(-xi^2/2)
    grid = UniformGrid((256,), (40.0,))
    x = grid.x_mesh()[0]
    spec = grid.forward(np.exp(-0.5 * x * x).astype(complex))
    xi = grid.xi_mesh()[0]
    assert np.max(np.abs(spec - np.exp(-0.5 * xi * xi))) <= 1e-12


def test_derivative_multiplier_on_gaussian():
    grid = UniformGrid((256,), (40.0,))
    x = grid.x_mesh()[0]
    u = Field(grid, np.exp(-0.5 * x * x).astype(complex))
    du = multiplier_apply(u, lambda xi: 1j * xi)
    assert np.max(np.abs(du.values - (-x) * u.values)) <= 1e-10


def test_multiplier_array_form_and_shape_check():
    grid = UniformGrid((64,), (10.0,))
    u = _random_field(grid, seed=5)
    xi = grid.xi_mesh()[0]
    by_callable = multiplier_apply(u, lambda z: z**2)
    by_array = multiplier_apply(u, (xi**2).astype(complex))
    assert np.allclose(by_callable.values, by_array.values)
    with pytest.raises(ValueError):
        multiplier_apply(u, np.ones(32, dtype=complex))


def test_singular_multiplier_raises_only_on_populated_modes():
    grid = UniformGrid((128,), (40.0,))
    x = grid.x_mesh()[0]
    # spectrum centered at the origin: 1/|xi| must refuse
    flat = Field(grid, np.exp(-0.5 * x * x).astype(complex))
    with pytest.raises(SingularMultiplierError):
        multiplier_apply(flat, lambda xi: 1.0 / np.abs(xi))
    # modulated far from zero frequency: the origin mode is unpopulated
    mod = Field(grid, flat.values * np.exp(6j * x))
    out = multiplier_apply(mod, lambda xi: 1.0 / np.abs(xi))
    assert np.isfinite(out.values).all()


def test_inverse_partial_parseval():
    grid = UniformGrid((32, 64), (8.0, 16.0))
    u = _random_field(grid, seed=7)
    spec = u.spectrum()
    for axes in ((0,), (1,), (0, 1)):
        mixed = grid.inverse_partial(spec, axes)
        total = grid.partial_measure(axes) * np.sum(np.abs(mixed) ** 2)
        assert abs(np.sqrt(total) - u.norm()) <= 1e-6 * u.norm()


def test_trapezoid_weights():
    assert np.allclose(trapezoid_weights(1), [1.0])
    assert np.allclose(trapezoid_weights(4), [0.5, 1.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        trapezoid_weights(0)


def test_weighted_spacetime_norm_constant_stack():
    grid = UniformGrid((64,), (20.0,))
    u = _random_field(grid, seed=11)
    times = np.linspace(0.0, 2.0, 9)
    stack = SpaceTimeField(grid, times, np.broadcast_to(u.values, (9,) + grid.shape))
    w = Weight("bracket", -0.8)
    expected = np.sqrt(2.0) * grid.norm(w.evaluate(grid) * u.values)
    assert abs(weighted_spacetime_norm(stack, w) - expected) <= 1e-12 * expected
    unweighted = weighted_spacetime_norm(stack, None)
    assert abs(unweighted - np.sqrt(2.0) * u.norm()) <= 1e-12


def test_weight_values():
    grid = UniformGrid((8,), (8.0,))
    x = grid.x_mesh()[0]
    bracket = Weight("bracket", -1.0).evaluate(grid)
    assert np.allclose(bracket, 1.0 / np.sqrt(1.0 + x * x))
    homog = Weight("homogeneous", -0.5).evaluate(grid)
    origin = np.argmin(np.abs(x))
    assert homog[origin] == 0.0
    assert np.isfinite(homog).all()
    with pytest.raises(ValueError):
        Weight("unknown", 1.0)


def test_weight_axis_form():
    grid = UniformGrid((8, 8), (4.0, 4.0))
    w = Weight("bracket", -2.0, axis=1).evaluate(grid)
    y = grid.x_mesh()[1]
    assert np.allclose(w, 1.0 / (1.0 + y * y))
    with pytest.raises(ValueError):
        Weight("bracket", -2.0, axis=5).evaluate(grid)


def test_field_validation():
    grid = UniformGrid((16,), (4.0,))
    with pytest.raises(ValueError):
        Field(grid, np.zeros(8, dtype=complex))
    bad = np.zeros(16, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(ValueError):
        Field(grid, bad)
    other = UniformGrid((16,), (8.0,))
    with pytest.raises(ValueError):
        Field(grid, np.zeros(16)) + Field(other, np.zeros(16))


def test_rotate_signed_permutation_exact():
    grid = UniformGrid((64, 64), (16.0, 16.0))
    x, y = grid.x_mesh()
    u = Field(grid, (np.exp(-(x**2) - 0.25 * y**2) * np.exp(1j * x)).astype(complex))
    Q = np.array([[0.0, -1.0], [1.0, 0.0]])  # maps e1 to e2
    v = rotate(u, Q)
    # v(x) = u(Q^T x) = u(y, -x)
    expected = np.exp(-(y**2) - 0.25 * x**2) * np.exp(1j * y)
    assert np.max(np.abs(v.values - expected)) <= 1e-12


def test_rotate_general_angle_on_radial_field():
    grid = UniformGrid((128, 128), (24.0, 24.0))
    x, y = grid.x_mesh()
    u = Field(grid, np.exp(-0.5 * (x**2 + y**2)).astype(complex))
    c, s = np.cos(0.3), np.sin(0.3)
    v = rotate(u, np.array([[c, -s], [s, c]]), order=8)
    assert np.max(np.abs(v.values - u.values)) <= 1e-6
    with pytest.raises(ValueError):
        rotate(u, np.array([[1.0, 1.0], [0.0, 1.0]]))
