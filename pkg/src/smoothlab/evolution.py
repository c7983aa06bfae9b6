"""Propagators and solvers for i u_t + a(D) u = f.

The homogeneous flow is exact per mode.  The inhomogeneous problem is
solved two ways: a trapezoid Duhamel recursion with exact inter-step
propagation (second order in the time step), and a limiting-absorption
path that multiplies by the regularised resolvent in time frequency.  The
two must agree as the regularisation vanishes, which is one of the
package's acceptance checks.

Wrap control: the periodic box must outrun the group velocity
(L >= 2 T max|grad a| + data width), and the resolvent path pads its time
axis so the exponentially damped kernel wraps below a declared tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .grids import Field, SpaceTimeField, UniformGrid, trapezoid_weights
from .symbols import Symbol, sphere_points

__all__ = [
    "TimeWindow",
    "ResolventQuery",
    "DomainTooSmallError",
    "SupportViolationError",
    "TimeSupportError",
    "group_velocity_bound",
    "check_anti_wrap",
    "propagate",
    "propagate_slices",
    "duhamel_solve",
    "duhamel_adjoint",
    "duhamel_spectral",
    "duhamel_adjoint_spectral",
    "resolvent_apply",
    "resolvent_solve",
    "kernel_k",
]


class DomainTooSmallError(ValueError):
    """The box cannot contain the solution for the requested window."""

    def __init__(self, required, lengths):
        self.required = tuple(required)
        super().__init__(
            f"anti-wrap rule needs box lengths >= {np.round(required, 3).tolist()}, "
            f"got {list(lengths)}"
        )


class SupportViolationError(ValueError):
    """Source values appear outside the declared time support."""


class TimeSupportError(ValueError):
    """Source support touches the window boundary."""


@dataclass(frozen=True)
class TimeWindow:
    """Uniform time samples t_min + k dt, with the source confined to
    [0, t_source]."""

    t_min: float
    t_max: float
    dt: float
    t_source: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("time step must be positive")
        if self.t_max <= self.t_min:
            raise ValueError("empty time window")
        for name, value in (("t_min", self.t_min), ("t_max", self.t_max)):
            steps = value / self.dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, abs(steps)):
                raise ValueError(f"{name} must be an integer multiple of dt")
        if not self.t_min <= 0.0 <= self.t_max:
            raise ValueError("the window must contain t = 0")
        if not 0.0 <= self.t_source <= self.t_max:
            raise ValueError("source support [0, t_source] must fit in the window")

    @property
    def count(self) -> int:
        return int(round((self.t_max - self.t_min) / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.t_min + self.dt * np.arange(self.count)

    @property
    def zero_index(self) -> int:
        return int(round(-self.t_min / self.dt))


def group_velocity_bound(symbol: Symbol, band: tuple[float, float]) -> np.ndarray:
    """Per-axis maximum of |d_j a| over the frequency annulus `band`."""
    n = symbol.dimension
    dirs = sphere_points(n, 256 if n > 1 else 2)
    if symbol.singular_axes:
        keep = np.ones(len(dirs), bool)
        for ax in symbol.singular_axes:
            keep &= np.abs(dirs[:, ax]) > 1e-9
        dirs = dirs[keep]
    radii = np.linspace(band[0], band[1], 65)
    pts = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, n)
    g = np.abs(symbol.gradient_at(pts))
    return np.max(g, axis=0)


def check_anti_wrap(
    symbol: Symbol,
    band: tuple[float, float],
    window: TimeWindow,
    grid: UniformGrid,
    support_width=0.0,
) -> np.ndarray:
    """Raise DomainTooSmallError unless L_j >= 2 T Vmax_j + width_j."""
    v = group_velocity_bound(symbol, band)
    horizon = max(abs(window.t_min), abs(window.t_max))
    width = np.broadcast_to(np.asarray(support_width, dtype=float), (grid.ndim,))
    required = 2.0 * horizon * v + width
    if np.any(required > np.asarray(grid.lengths) + 1e-12):
        raise DomainTooSmallError(required, grid.lengths)
    return required


def _symbol_values(grid: UniformGrid, symbol: Symbol) -> np.ndarray:
    vals = np.asarray(symbol(*grid.xi_mesh()), dtype=float)
    return np.broadcast_to(vals, grid.shape)


def propagate_slices(symbol: Symbol, phi: Field, window: TimeWindow):
    """Yield (t_k, physical values of e^{i t_k a(D)} phi) one slice at a time."""
    grid = phi.grid
    a = _symbol_values(grid, symbol)
    spec0 = phi.spectrum()
    for t in window.times:
        yield t, grid.inverse(np.exp(1j * t * a) * spec0)


def propagate(
    symbol: Symbol,
    phi: Field,
    window: TimeWindow,
    band: tuple[float, float] | None = None,
    support_width=0.0,
) -> SpaceTimeField:
    """Sample the homogeneous flow on the window (exact per mode).

    When `band` is given, the anti-wrap rule is enforced first and its
    violation raises with the required box size.
    """
    grid = phi.grid
    if band is not None:
        check_anti_wrap(symbol, band, window, grid, support_width)
    values = np.empty((window.count,) + tuple(grid.shape), dtype=np.complex128)
    for k, (_, sl) in enumerate(propagate_slices(symbol, phi, window)):
        values[k] = sl
    return SpaceTimeField(grid, window.times, values)


def _source_spectra(f: SpaceTimeField) -> np.ndarray:
    out = np.empty_like(f.values)
    for k in range(len(f.times)):
        out[k] = f.grid.forward(f.values[k])
    return out


def _check_source_support(f: SpaceTimeField, window: TimeWindow) -> None:
    peak = np.max(np.abs(f.values))
    if peak == 0.0:
        return
    outside = (f.times < -1e-12) | (f.times > window.t_source + 1e-12)
    if outside.any():
        worst = np.max(np.abs(f.values[outside]))
        if worst > 1e-12 * peak:
            k = int(np.argmax(np.max(np.abs(f.values), axis=tuple(range(1, f.values.ndim))) * outside))
            raise SupportViolationError(
                f"source magnitude {worst:.3g} at t = {f.times[k]:.6g} lies outside "
                f"[0, {window.t_source:.6g}]"
            )


def duhamel_spectral(a: np.ndarray, fs: np.ndarray, window: TimeWindow) -> np.ndarray:
    """Trapezoid Duhamel recursion on a stack of source spectra.

    Exact propagation between nodes, forward from t = 0 and backward for
    the negative-time nodes; returns the stack of solution spectra.
    """
    dt = window.dt
    E = np.exp(1j * dt * a).astype(fs.dtype)
    half = fs.dtype.type(0.5j * dt)
    k0 = window.zero_index
    M = window.count - 1
    us = np.zeros_like(fs)
    for k in range(k0, M):
        us[k + 1] = E * (us[k] - half * fs[k]) - half * fs[k + 1]
    Einv = np.conj(E)
    for k in range(k0, 0, -1):
        us[k - 1] = Einv * (us[k] + half * fs[k]) + half * fs[k - 1]
    return us


def duhamel_adjoint_spectral(a: np.ndarray, vs: np.ndarray, window: TimeWindow) -> np.ndarray:
    """Exact transpose of :func:`duhamel_spectral` in the trapezoid-weighted
    space-time inner product sum_k w_k dt <f_k, g_k>."""
    dt = window.dt
    E = np.exp(1j * dt * a).astype(vs.dtype)
    Einv = np.conj(E)
    k0 = window.zero_index
    M = window.count - 1
    w = trapezoid_weights(window.count)
    out = np.zeros_like(vs)

    # suffix sweep: S_j = sum_{k > j} w_k E^{j-k} v_k
    S = np.zeros(vs.shape[1:], dtype=vs.dtype)
    suffix = np.zeros_like(vs)
    for j in range(M - 1, k0 - 1, -1):
        S = Einv * (vs.dtype.type(w[j + 1]) * vs[j + 1] + S)
        suffix[j] = S
    # prefix sweep: P_j = sum_{k < j} w_k E^{j-k} v_k
    P = np.zeros(vs.shape[1:], dtype=vs.dtype)
    prefix = np.zeros_like(vs)
    for j in range(1, k0 + 1):
        P = E * (P + vs.dtype.type(w[j - 1]) * vs[j - 1])
        prefix[j] = P

    for j in range(window.count):
        if j > k0:
            out[j] = 1j * dt * (0.5 * w[j] * vs[j] + suffix[j]) / w[j]
        elif j < k0:
            out[j] = -1j * dt * (0.5 * w[j] * vs[j] + prefix[j]) / w[j]
        else:
            out[j] = (0.5j * dt * (suffix[j] - prefix[j])) / w[j]
    return out


def duhamel_solve(symbol: Symbol, f: SpaceTimeField, window: TimeWindow) -> SpaceTimeField:
    """-i int_0^t e^{i(t-s)a(D)} f(s) ds on the window's nodes.

    Trapezoid in the source, exact propagation between nodes; integrates
    forward from t = 0 and backward for the negative-time nodes.
    """
    if not np.allclose(f.times, window.times, rtol=0, atol=1e-9 * window.dt):
        raise ValueError("source samples must match the window nodes")
    _check_source_support(f, window)
    grid = f.grid
    a = _symbol_values(grid, symbol)
    us = duhamel_spectral(a, _source_spectra(f), window)
    values = np.empty_like(us)
    for k in range(window.count):
        values[k] = grid.inverse(us[k])
    return SpaceTimeField(grid, window.times, values)


def duhamel_adjoint(symbol: Symbol, v: SpaceTimeField, window: TimeWindow) -> SpaceTimeField:
    """Exact transpose of :func:`duhamel_solve` in the trapezoid-weighted
    space-time inner product sum_k w_k dt <f_k, g_k>."""
    grid = v.grid
    a = _symbol_values(grid, symbol)
    out = duhamel_adjoint_spectral(a, _source_spectra(v), window)
    values = np.empty_like(out)
    for j in range(window.count):
        values[j] = grid.inverse(out[j])
    return SpaceTimeField(grid, window.times, values)


# ---------------------------------------------------------------------------
# resolvent


@dataclass(frozen=True)
class ResolventQuery:
    """R(s + sign * i eps) for the symbol's multiplier."""

    symbol: Symbol
    s: float
    eps: float
    sign: str = "+"

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("regularisation eps must be >= 0")
        if self.sign not in ("+", "-"):
            raise ValueError("sign must be '+' or '-'")

    def multiplier(self, *comps):
        z = self.s + (1j * self.eps if self.sign == "+" else -1j * self.eps)
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1.0 / (np.asarray(self.symbol(*comps), dtype=complex) - z)


def resolvent_apply(query: ResolventQuery, g: Field) -> Field:
    """(a(D) - (s +- i eps))^{-1} g; raises on a populated singular mode."""
    from .grids import multiplier_apply

    return multiplier_apply(g, query.multiplier, name=f"resolvent at s={query.s}")


def resolvent_solve(
    symbol: Symbol,
    f: SpaceTimeField,
    eps: float,
    wrap_tol: float = 1e-6,
) -> SpaceTimeField:
    """Solve via the limiting-absorption representation at finite eps:
    split f by the sign of t, multiply by R(tau -+ i eps) in time frequency,
    and sum the branches.

    The damped kernel decays like e^{-eps |t|}, so the internal time axis is
    zero-padded by log(1/wrap_tol)/eps before the FFT to push the periodic
    wrap below `wrap_tol`.
    """
    if eps <= 0:
        raise ValueError("resolvent_solve needs eps > 0")
    grid = f.grid
    times = f.times
    dt = float(times[1] - times[0])
    peak = np.max(np.abs(f.values))
    if peak > 0 and (
        np.max(np.abs(f.values[0])) > 1e-12 * peak
        or np.max(np.abs(f.values[-1])) > 1e-12 * peak
    ):
        raise TimeSupportError("source must vanish at the window boundary")

    spectra = _source_spectra(f)
    count = len(times)
    pad = int(np.ceil(np.log(1.0 / wrap_tol) / (eps * dt)))
    total = _fft.next_fast_len(count + 2 * pad)
    a_flat = _symbol_values(grid, symbol).ravel()
    tau = 2.0 * np.pi * np.fft.fftfreq(total, dt)

    out = np.zeros_like(spectra)
    flat = spectra.reshape(count, -1)
    out_flat = out.reshape(count, -1)
    cols = flat.shape[1]
    chunk = max(1, 4_000_000 // total)
    plus_rows = times >= 0.0
    offset = pad

    for sign, rows in (("-", plus_rows), ("+", ~plus_rows)):
        if not rows.any():
            continue
        z = 1j * eps if sign == "+" else -1j * eps
        for lo in range(0, cols, chunk):
            hi = min(lo + chunk, cols)
            buf = np.zeros((total, hi - lo), dtype=np.complex128)
            buf[offset : offset + count][rows] = flat[rows, lo:hi]
            buf = _fft.fft(buf, axis=0)
            buf *= 1.0 / (a_flat[None, lo:hi] - (tau[:, None] + z))
            buf = _fft.ifft(buf, axis=0)
            out_flat[:, lo:hi] += buf[offset : offset + count]

    values = np.empty_like(out)
    for k in range(count):
        values[k] = grid.inverse(out[k])
    return SpaceTimeField(grid, times, values)


# ---------------------------------------------------------------------------
# 1D kernel diagnostics


def _bump(x, center, halfwidth):
    from .fields import time_bump

    return time_bump(x, center, halfwidth)


def kernel_k(
    symbol: Symbol,
    s: float,
    eps: float,
    grid: UniformGrid,
    pieces: bool = True,
) -> dict:
    """Sample k(s, x) = F^{-1}[ a'(xi) / (a(xi) - (s +- i eps)) ] for both
    resolvent signs on a 1D grid, with sup_x |k| and an optional three-piece
    frequency decomposition (origin / resonance / tail) for diagnosis.
    """
    if grid.ndim != 1:
        raise ValueError("kernel diagnostics are one-dimensional")
    if symbol.order <= 0:
        raise ValueError("symbol order must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    xi = grid.xi_mesh()[0]
    a = np.asarray(symbol(xi), dtype=float)
    da = np.asarray(symbol.grad_fn(xi)[0], dtype=float)

    # resonance set {a(xi) = s} located per half-line via the homogeneous form
    roots = []
    a_pos = float(symbol.at(np.array([[1.0]]))[0])
    a_neg = float(symbol.at(np.array([[-1.0]]))[0])
    for base, val in ((1.0, a_pos), (-1.0, a_neg)):
        if val != 0.0 and s / val > 0.0:
            roots.append(base * (s / val) ** (1.0 / symbol.order))

    out = {"s": s, "eps": eps, "roots": roots}
    # grid.inverse is exactly the trapezoid quadrature of the continuum
    # inverse transform (the sqrt(2 pi)/L factors coincide), so the sampled
    # kernel needs no rescaling.
    for sign, z in (("+", s + 1j * eps), ("-", s - 1j * eps)):
        multiplier = da / (a - z)
        kernel = grid.inverse(multiplier.astype(np.complex128))
        entry = {
            "kernel": kernel,
            "sup_abs": float(np.max(np.abs(kernel))),
        }
        if pieces:
            phi1 = _bump(xi, 0.0, 0.5)
            phi2 = np.zeros_like(xi)
            for r in roots:
                phi2 = np.maximum(phi2, _bump(xi, r, 0.3))
            phi2 = np.where(phi1 > 0, 0.0, phi2)  # keep the pieces disjoint
            phi3 = 1.0 - phi1 - phi2
            for tag, cut in (("origin", phi1), ("resonance", phi2), ("tail", phi3)):
                piece = grid.inverse((multiplier * cut).astype(np.complex128))
                entry[f"sup_abs_{tag}"] = float(np.max(np.abs(piece)))
        out[sign] = entry
    return out
