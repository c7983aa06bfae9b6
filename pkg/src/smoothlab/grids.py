"""Uniform periodic grids and the discrete unitary Fourier calculus on them.

Everything downstream (multipliers, propagators, canonical transforms) is
built on one convention: the box is centered at the origin, the forward
transform approximates the symmetric unitary Fourier integral, and discrete
L2 norms carry the cell measure, so Plancherel holds to rounding error.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

__all__ = [
    "UniformGrid",
    "Field",
    "SpaceTimeField",
    "Weight",
    "SingularMultiplierError",
    "multiplier_apply",
    "weighted_spacetime_norm",
    "trapezoid_weights",
    "rotate",
    "save_field",
    "load_field",
    "save_field_csv",
    "load_field_csv",
]

_TWO_PI = 2.0 * np.pi
_SQRT_TWO_PI = np.sqrt(2.0 * np.pi)

# Relative spectral amplitude below which a mode is treated as unpopulated
# by validation passes (singular multipliers, warp range checks, anti-wrap).
POPULATED_RTOL = 1e-4


class SingularMultiplierError(ValueError):
    """A frequency multiplier is non-finite at a populated mode."""

    def __init__(self, mode, value):
        self.mode = tuple(float(c) for c in np.atleast_1d(mode))
        super().__init__(
            f"multiplier is non-finite ({value}) at populated mode xi={self.mode}"
        )


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class UniformGrid:
    """Uniform periodic grid on a box [-L_j/2, L_j/2) in n <= 3 dimensions.

    Parameters
    ----------
    shape : tuple of int
        Points per axis, each a power of two.
    lengths : tuple of float
        Box side lengths L_j.

    Attributes
    ----------
    steps : tuple of float
        Mesh widths h_j = L_j / N_j.
    """

    shape: tuple
    lengths: tuple

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        lengths = tuple(float(L) for L in np.atleast_1d(self.lengths))
        if len(shape) != len(lengths):
            raise ValueError("shape and lengths must have matching dimension")
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(shape)}")
        for n in shape:
            if not _is_power_of_two(n):
                raise ValueError(f"points per axis must be a power of two, got {n}")
        for L in lengths:
            if not L > 0:
                raise ValueError(f"box lengths must be positive, got {L}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def steps(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def cell_measure(self) -> float:
        out = 1.0
        for h in self.steps:
            out *= h
        return out

    @property
    def spectral_measure(self) -> float:
        out = 1.0
        for L in self.lengths:
            out *= _TWO_PI / L
        return out

    @property
    def nyquist(self) -> tuple:
        """Per-axis dual radius pi/h_j."""
        return tuple(np.pi / h for h in self.steps)

    @property
    def dealias_radius(self) -> float:
        """Largest radius of a frequency ball kept clear of the band edge."""
        return 0.4 * min(self.nyquist)

    def axis(self, j: int) -> np.ndarray:
        n, h, L = self.shape[j], self.steps[j], self.lengths[j]
        return -0.5 * L + h * np.arange(n)

    def xi_axis(self, j: int) -> np.ndarray:
        """Dual frequencies of axis j in FFT layout."""
        return _TWO_PI * np.fft.fftfreq(self.shape[j], d=self.steps[j])

    def x_mesh(self):
        return _x_mesh(self)

    def xi_mesh(self):
        return _xi_mesh(self)

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Discrete unitary Fourier transform; output samples the continuum
        transform of the box-supported function at the FFT-layout modes."""
        spec = _fft.fftn(values)
        scale = 1.0
        for j in range(self.ndim):
            spec *= _phase_shape(self._fwd_phase(j), j, self.ndim)
            scale *= self.steps[j] / _SQRT_TWO_PI
        return spec * scale

    def inverse(self, spectrum: np.ndarray) -> np.ndarray:
        work = np.asarray(spectrum).copy()
        scale = 1.0
        for j in range(self.ndim):
            work *= _phase_shape(np.conj(self._fwd_phase(j)), j, self.ndim)
            scale *= _SQRT_TWO_PI / self.steps[j]
        return _fft.ifftn(work) * scale

    def inverse_partial(self, spectrum: np.ndarray, axes: tuple) -> np.ndarray:
        """Invert the transform along ``axes`` only, leaving the others dual.

        The result is physical along the chosen axes and spectral along the
        rest; squared sums against :meth:`partial_measure` reproduce the full
        L2 norm exactly, which lets weighted norms stream one cheap transform
        at a time when the weight depends on a single coordinate.
        """
        axes = tuple(sorted(set(int(a) for a in axes)))
        work = np.asarray(spectrum).astype(np.result_type(spectrum, np.complex64))
        scale = 1.0
        for j in axes:
            work = work * _phase_shape(
                np.conj(self._fwd_phase(j)).astype(work.dtype), j, self.ndim
            )
            scale *= _SQRT_TWO_PI / self.steps[j]
        return _fft.ifftn(work, axes=axes) * work.dtype.type(scale)

    def partial_measure(self, axes: tuple) -> float:
        """Cell measure matching :meth:`inverse_partial`: h_j on the inverted
        axes, 2 pi / L_j on the axes still left in frequency."""
        axes = set(int(a) for a in axes)
        out = 1.0
        for j in range(self.ndim):
            out *= self.steps[j] if j in axes else _TWO_PI / self.lengths[j]
        return out

    def _fwd_phase(self, j: int) -> np.ndarray:
        # exp(-i x0 xi) aligns the DFT with the box-centered coordinates
        return _fwd_phase_cached(self, j)

    def norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(self.cell_measure * np.sum(np.abs(values) ** 2)))

    def spectral_norm(self, spectrum: np.ndarray) -> float:
        return float(np.sqrt(self.spectral_measure * np.sum(np.abs(spectrum) ** 2)))

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        return complex(self.cell_measure * np.sum(u * np.conj(v)))


@lru_cache(maxsize=16)
def _fwd_phase_cached(grid: UniformGrid, j: int) -> np.ndarray:
    x0 = -0.5 * grid.lengths[j]
    return np.exp(-1j * x0 * grid.xi_axis(j))


def _phase_shape(phase: np.ndarray, j: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[j] = len(phase)
    return phase.reshape(shape)


@lru_cache(maxsize=4)
def _xi_mesh(grid: UniformGrid):
    axes = [grid.xi_axis(j) for j in range(grid.ndim)]
    return tuple(np.meshgrid(*axes, indexing="ij")) if grid.ndim > 1 else (axes[0],)


@lru_cache(maxsize=4)
def _x_mesh(grid: UniformGrid):
    axes = [grid.axis(j) for j in range(grid.ndim)]
    return tuple(np.meshgrid(*axes, indexing="ij")) if grid.ndim > 1 else (axes[0],)


@dataclass(frozen=True)
class Field:
    """Complex scalar field sampled on a :class:`UniformGrid`."""

    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_spectrum(cls, grid: UniformGrid, spectrum: np.ndarray) -> "Field":
        return cls(grid, grid.inverse(spectrum))

    def spectrum(self) -> np.ndarray:
        return self.grid.forward(self.values)

    def norm(self) -> float:
        return self.grid.norm(self.values)

    def __add__(self, other: "Field") -> "Field":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "Field":
        return Field(self.grid, self.values * complex(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class SpaceTimeField:
    """Time-indexed stack of field slices on a fixed spatial grid."""

    grid: UniformGrid
    times: np.ndarray
    values: np.ndarray  # shape (len(times), *grid.shape)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.complex128)
        if times.ndim != 1 or len(times) < 1:
            raise ValueError("times must be a nonempty 1D array")
        if values.shape != (len(times),) + self.grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"({len(times)},)+{self.grid.shape}"
            )
        if len(times) > 1:
            dt = np.diff(times)
            if not np.allclose(dt, dt[0], rtol=1e-12, atol=1e-12):
                raise ValueError("time samples must be uniformly spaced")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def slice(self, k: int) -> Field:
        return Field(self.grid, self.values[k])

    def norm(self) -> float:
        return weighted_spacetime_norm(self, None)


@dataclass(frozen=True)
class Weight:
    """Spatial weight: bracket <x>^k or homogeneous |x|^k, radial or per-axis.

    Homogeneous weights of negative exponent are assigned the value 0 at the
    origin; the flag :attr:`singular_at_origin` records that the convention
    was used.
    """

    kind: str = "bracket"
    exponent: float = -1.0
    axis: int | None = None

    def __post_init__(self):
        if self.kind not in ("bracket", "homogeneous"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @property
    def singular_at_origin(self) -> bool:
        return self.kind == "homogeneous" and self.exponent < 0

    def evaluate(self, grid: UniformGrid) -> np.ndarray:
        mesh = grid.x_mesh()
        if self.axis is None:
            r2 = sum(x * x for x in mesh)
        else:
            if not 0 <= self.axis < grid.ndim:
                raise ValueError(f"weight axis {self.axis} out of range")
            x = mesh[self.axis]
            r2 = x * x
        if self.kind == "bracket":
            return (1.0 + r2) ** (0.5 * self.exponent)
        with np.errstate(divide="ignore"):
            out = r2 ** (0.5 * self.exponent)
        if self.exponent < 0:
            out = np.where(r2 == 0.0, 0.0, out)
        return out


def multiplier_apply(field: Field, m, name: str = "multiplier") -> Field:
    """Apply a Fourier multiplier m(xi) to a field.

    ``m`` is either a callable taking the frequency meshes or a precomputed
    array in FFT layout.  A non-finite multiplier value at a populated mode
    raises :class:`SingularMultiplierError`; at unpopulated modes the product
    is set to zero, which implements the zero-frequency convention for
    multipliers of negative homogeneity.
    """
    spec = field.spectrum()
    marr = _evaluate_multiplier(field.grid, m)
    bad = ~np.isfinite(marr)
    if bad.any():
        populated = np.abs(spec) > POPULATED_RTOL * np.abs(spec).max()
        hot = bad & populated
        if hot.any():
            idx = np.unravel_index(np.argmax(hot), spec.shape)
            mode = [field.grid.xi_axis(j)[idx[j]] for j in range(field.grid.ndim)]
            raise SingularMultiplierError(mode, f"{name} value")
        marr = np.where(bad, 0.0, marr)
    return Field.from_spectrum(field.grid, marr * spec)


def _evaluate_multiplier(grid: UniformGrid, m) -> np.ndarray:
    if callable(m):
        with np.errstate(all="ignore"):
            out = np.asarray(m(*grid.xi_mesh()), dtype=np.complex128)
        return np.broadcast_to(out, grid.shape)
    out = np.asarray(m)
    if out.shape != grid.shape:
        raise ValueError(f"multiplier array shape {out.shape} != grid {grid.shape}")
    return out


def trapezoid_weights(count: int) -> np.ndarray:
    """Composite trapezoid weights for `count` uniform samples (no dt factor)."""
    if count < 1:
        raise ValueError("need at least one time sample")
    if count == 1:
        return np.ones(1)
    w = np.ones(count)
    w[0] = w[-1] = 0.5
    return w


def weighted_spacetime_norm(stf: SpaceTimeField, weight) -> float:
    """Trapezoid-in-time, exact-in-space discrete L2 norm of w(x) u(t,x).

    ``weight`` may be a :class:`Weight`, a precomputed spatial array, or None
    for the unweighted norm.
    """
    if isinstance(weight, Weight):
        warr = weight.evaluate(stf.grid)
    elif weight is None:
        warr = None
    else:
        warr = np.asarray(weight)
    theta = trapezoid_weights(len(stf.times))
    dt = stf.dt if len(stf.times) > 1 else 1.0
    total = 0.0
    for k in range(len(stf.times)):
        sl = stf.values[k]
        if warr is not None:
            sl = warr * sl
        total += theta[k] * dt * np.sum(np.abs(sl) ** 2)
    return float(np.sqrt(stf.grid.cell_measure * total))


# ---------------------------------------------------------------------------
# rotations


def _signed_permutation(Q: np.ndarray):
    """Return (perm, signs) if Q is a signed permutation matrix, else None."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if Q.shape != (n, n) or not np.allclose(np.abs(Q) @ np.abs(Q.T), np.eye(n)):
        return None
    if not np.all(np.isin(np.round(Q, 12), (-1.0, 0.0, 1.0))) or not np.allclose(
        Q, np.round(Q)
    ):
        return None
    perm = np.argmax(np.abs(Q), axis=1)
    signs = Q[np.arange(n), perm]
    return perm, signs


def rotate(field: Field, Q: np.ndarray, order: int = 6) -> Field:
    """Rotate a field: returns u(Q^T x).

    Signed permutation matrices are applied exactly by reindexing; general
    orthogonal matrices go through spectral interpolation of the given local
    polynomial order, so they carry the documented interpolation error and
    zero-fill outside the rotated frequency box.
    """
    Q = np.asarray(Q, dtype=float)
    n = field.grid.ndim
    if Q.shape != (n, n):
        raise ValueError(f"rotation must be {n}x{n}, got {Q.shape}")
    if not np.allclose(Q @ Q.T, np.eye(n), atol=1e-12):
        raise ValueError("rotation matrix is not orthogonal")
    sp = _signed_permutation(Q)
    if sp is not None:
        return _rotate_exact(field, *sp)
    if len(set(field.grid.shape)) != 1 or len(set(field.grid.lengths)) != 1:
        raise ValueError("general rotations need identical axes")
    from .interp import warp_spectrum  # local import to avoid a cycle

    xi = np.stack([c.ravel() for c in field.grid.xi_mesh()], axis=-1)
    targets = xi @ Q  # row i: Q^T xi_i
    vals, _ = warp_spectrum(field.grid, field.spectrum(), targets, order=order)
    return Field.from_spectrum(field.grid, vals.reshape(field.grid.shape))


def _rotate_exact(field: Field, perm: np.ndarray, signs: np.ndarray) -> Field:
    # v(x) = u(Q^T x); with y = Q^T x one has y_{perm[i]} = signs[i] * x_i,
    # so axis perm[i] of u is read along axis i of v, flipped when sign < 0.
    for i, p in enumerate(perm):
        if field.grid.shape[p] != field.grid.shape[i] or not np.isclose(
            field.grid.lengths[p], field.grid.lengths[i]
        ):
            raise ValueError("permuted axes must have identical extent")
    vals = np.transpose(field.values, axes=np.argsort(perm))
    # after transpose, axis i of vals carries original axis perm[i]
    for i in range(len(perm)):
        if signs[i] < 0:
            # periodic point reflection about the origin: k -> (N - k) mod N
            vals = np.roll(np.flip(vals, axis=i), 1, axis=i)
    return Field(field.grid, vals)


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"SMLB"


def save_field(field: Field, path) -> None:
    """Write a field as flat binary: JSON header line, then interleaved
    float64 (re, im) pairs in row-major order."""
    header = {
        "dimension": field.grid.ndim,
        "shape": list(field.grid.shape),
        "lengths": list(field.grid.lengths),
        "layout": "row-major interleaved float64",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        inter = np.empty(field.values.size * 2, dtype="<f8")
        inter[0::2] = field.values.real.ravel()
        inter[1::2] = field.values.imag.ravel()
        fh.write(inter.tobytes())


def load_field(path) -> Field:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a field file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        grid = UniformGrid(tuple(header["shape"]), tuple(header["lengths"]))
        inter = np.frombuffer(fh.read(), dtype="<f8")
    values = (inter[0::2] + 1j * inter[1::2]).reshape(grid.shape)
    return Field(grid, values)


def save_field_csv(field: Field, path) -> None:
    """CSV with a small header (dimension, shape, lengths) and one row per
    grid point in row-major order, real and imaginary parts as columns."""
    with open(path, "w") as fh:
        fh.write(f"# dimension,{field.grid.ndim}\n")
        fh.write("# shape," + ",".join(str(n) for n in field.grid.shape) + "\n")
        fh.write("# lengths," + ",".join(repr(L) for L in field.grid.lengths) + "\n")
        fh.write("re,im\n")
        flat = field.values.ravel()
        buf = io.StringIO()
        np.savetxt(buf, np.column_stack([flat.real, flat.imag]), delimiter=",")
        fh.write(buf.getvalue())


def load_field_csv(path) -> Field:
    with open(path) as fh:
        dim_line = fh.readline().strip().split(",")
        shape_line = fh.readline().strip().split(",")
        len_line = fh.readline().strip().split(",")
        if dim_line[0] != "# dimension":
            raise ValueError(f"{path}: missing CSV field header")
        ndim = int(dim_line[1])
        shape = tuple(int(v) for v in shape_line[1 : 1 + ndim])
        lengths = tuple(float(v) for v in len_line[1 : 1 + ndim])
        fh.readline()  # column names
        data = np.loadtxt(fh, delimiter=",")
    grid = UniformGrid(shape, lengths)
    values = (data[:, 0] + 1j * data[:, 1]).reshape(shape)
    return Field(grid, values)
