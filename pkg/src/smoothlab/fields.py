"""Random band-limited data and deterministic field constructions.

Estimate sweeps compare norms across a ladder of boxes, so the random data
must be a function of continuum parameters only: a fixed draw of Gaussian
spectral bumps (center frequency, amplitude, spatial offset) that any grid
can then sample.  Two grids fine enough to resolve the bumps see the same
underlying field up to discretisation error, which is what makes constants
comparable between ladder rungs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Field, SpaceTimeField, UniformGrid

__all__ = [
    "BumpEnsemble",
    "SourceMixture",
    "random_band_ensemble",
    "random_source",
    "gaussian_field",
    "dilate_dyadic",
    "time_bump",
]


def _unit_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    if dim == 1:
        return rng.choice([-1.0, 1.0], size=(count, 1))
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class BumpEnsemble:
    """A grid-free field: complex Gaussian bumps in frequency, offset in space.

    ``spectrum(grid)`` evaluates  sum_j  c_j exp(-|xi - k_j|^2 / 2 sigma^2)
    exp(-i x_j . xi)  on the grid's frequency mesh and normalises to unit
    spectral norm there.
    """

    centers: np.ndarray  # (count, dim)
    amplitudes: np.ndarray  # (count,) complex
    offsets: np.ndarray  # (count, dim)
    sigma: float

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def radial_support(self, clearance: float = 4.5) -> tuple[float, float]:
        r = np.linalg.norm(self.centers, axis=1)
        pad = clearance * self.sigma
        return max(float(r.min()) - pad, 0.0), float(r.max()) + pad

    def max_offset(self) -> float:
        return float(np.abs(self.offsets).max())

    def spectrum(self, grid: UniformGrid, dtype=np.complex128) -> np.ndarray:
        if grid.ndim != self.dim:
            raise ValueError("grid dimension does not match ensemble")
        axes = [grid.xi_axis(j) for j in range(grid.ndim)]
        out = np.zeros(grid.shape, dtype=dtype)
        inv = 1.0 / (2.0 * self.sigma**2)
        for c, k, x0 in zip(self.amplitudes, self.centers, self.offsets):
            factors = [
                np.exp(-((ax - k[j]) ** 2) * inv - 1j * x0[j] * ax).astype(dtype)
                for j, ax in enumerate(axes)
            ]
            term = factors[0]
            for f in factors[1:]:
                term = np.multiply.outer(term, f)
            out += (c * term).astype(dtype)
        nrm = np.sqrt(grid.spectral_measure) * np.linalg.norm(out.ravel())
        if nrm > 0:
            out /= nrm.astype(dtype) if hasattr(nrm, "astype") else nrm
        return out

    def field(self, grid: UniformGrid) -> Field:
        return Field.from_spectrum(grid, self.spectrum(grid))


def random_band_ensemble(
    dim: int,
    band: tuple[float, float],
    rng: np.random.Generator,
    count: int = 24,
    sigma: float = 0.25,
    x_spread: float = 4.0,
    axis_clearance: dict[int, float] | None = None,
) -> BumpEnsemble:
    """Draw a bump ensemble whose spectral mass stays inside the annulus
    ``band[0] <= |xi| <= band[1]`` (up to Gaussian tails at 4.5 sigma).

    `axis_clearance` optionally keeps every bump center a given distance away
    from a coordinate hyperplane, e.g. ``{1: 0.3}`` keeps |k_2| >= 0.3 + tails.
    Draw order is fixed so a seed fully determines the continuum field.
    """
    lo, hi = band
    pad = 4.5 * sigma
    if hi - pad <= max(lo, 0.0) + pad:
        raise ValueError(
            f"band {band} too narrow for bump width sigma={sigma}"
        )
    rlo, rhi = max(lo, 0.0) + pad, hi - pad
    clearance = dict(axis_clearance or {})
    centers = np.empty((count, dim))
    for i in range(count):
        for _ in range(200):
            direction = _unit_directions(rng, 1, dim)[0]
            radius = rng.uniform(rlo, rhi)
            k = direction * radius
            if all(abs(k[ax]) >= c + pad for ax, c in clearance.items()):
                centers[i] = k
                break
        else:
            raise ValueError("could not place bump respecting axis clearance")
    amplitudes = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    offsets = rng.uniform(-x_spread, x_spread, size=(count, dim))
    return BumpEnsemble(centers, amplitudes, offsets, sigma)


def time_bump(t: np.ndarray, center: float, halfwidth: float) -> np.ndarray:
    """Compactly supported C^2 bump in time, equal to 1 at the center."""
    s = 1.0 - np.abs((np.asarray(t, dtype=float) - center) / halfwidth)
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True)
class SourceMixture:
    """Separable space-time source  f(t, x) = sum_j b_j(t) g_j(x)."""

    parts: tuple[BumpEnsemble, ...]
    time_centers: np.ndarray
    time_halfwidths: np.ndarray

    def slice_spectrum(self, grid: UniformGrid, t: float) -> np.ndarray:
        out = np.zeros(grid.shape, dtype=np.complex128)
        for part, c, w in zip(self.parts, self.time_centers, self.time_halfwidths):
            amp = float(time_bump(np.array(t), c, w))
            if amp != 0.0:
                out += amp * part.spectrum(grid)
        return out

    def sample(self, grid: UniformGrid, times: np.ndarray) -> SpaceTimeField:
        specs = [part.spectrum(grid) for part in self.parts]
        values = np.zeros((len(times),) + tuple(grid.shape), dtype=np.complex128)
        for k, t in enumerate(times):
            acc = np.zeros(grid.shape, dtype=np.complex128)
            for spec, c, w in zip(specs, self.time_centers, self.time_halfwidths):
                amp = float(time_bump(np.array(t), c, w))
                if amp != 0.0:
                    acc += amp * spec
            values[k] = grid.inverse(acc)
        return SpaceTimeField(grid, np.asarray(times, dtype=float), values)


def random_source(
    dim: int,
    band: tuple[float, float],
    t_window: tuple[float, float],
    rng: np.random.Generator,
    terms: int = 3,
    count: int = 12,
    sigma: float = 0.25,
    x_spread: float = 3.0,
    axis_clearance: dict[int, float] | None = None,
) -> SourceMixture:
    """Sum of `terms` separable pieces with C^2 time bumps inside `t_window`."""
    t0, t1 = t_window
    span = t1 - t0
    parts = tuple(
        random_band_ensemble(
            dim, band, rng, count=count, sigma=sigma,
            x_spread=x_spread, axis_clearance=axis_clearance,
        )
        for _ in range(terms)
    )
    centers = rng.uniform(t0 + 0.25 * span, t1 - 0.25 * span, size=terms)
    halfwidths = rng.uniform(0.15 * span, 0.25 * span, size=terms)
    return SourceMixture(parts, centers, halfwidths)


def gaussian_field(grid: UniformGrid, sigma_x: float = 1.0,
                   center_xi: np.ndarray | None = None) -> Field:
    """Unit-norm Gaussian wave packet, optionally modulated to `center_xi`."""
    xs = grid.x_mesh()
    r2 = sum(x**2 for x in xs)
    values = np.exp(-r2 / (2.0 * sigma_x**2)).astype(np.complex128)
    if center_xi is not None:
        phase = sum(float(k) * x for k, x in zip(np.atleast_1d(center_xi), xs))
        values = values * np.exp(1j * phase)
    f = Field(grid, values)
    return f * (1.0 / f.norm())


def dilate_dyadic(field: Field, k: int) -> Field:
    """L^2-normalised dyadic dilation  u(x) -> 2^{-kn/2} u(2^{-k} x), exact on
    the grid: the spectrum contracts by index striding, no interpolation."""
    if k < 0:
        raise ValueError("dilation exponent must be >= 0")
    grid = field.grid
    spec = field.spectrum()
    for _ in range(k):
        cur = np.fft.fftshift(spec)
        for j in range(grid.ndim):
            N = grid.shape[j]
            dst = np.arange(N // 4, 3 * N // 4)  # modes with 2*xi still on the grid
            sel = [slice(None)] * grid.ndim
            sel[j] = dst
            take = [slice(None)] * grid.ndim
            take[j] = 2 * dst - N // 2
            nxt = np.zeros_like(cur)
            nxt[tuple(sel)] = cur[tuple(take)]
            cur = nxt
        spec = np.fft.ifftshift(cur) * 2.0 ** (grid.ndim / 2.0)
    return Field.from_spectrum(grid, spec)
