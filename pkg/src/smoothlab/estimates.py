"""Smoothing-estimate specifications and their best-constant machinery.

An estimate spec pins down one global or time-local smoothing inequality
for i u_t + a(D) u = f: which solution map, which smoothing multiplier,
which spatial weight, and which class of band-limited data.  The discrete
map built from a spec is linear with an exact adjoint in the trapezoid
space-time inner product, so its best constant is a largest singular
value; power iteration on the normal operator measures it, warm-started
at the best random draw so the ensemble maximum is always a certified
lower bound.

Mixed-norm model forms (a supremum over one coordinate against a
coordinate-integrated source norm) are not quadratic and are measured by
ensemble maxima only, reported under that method name.

On grids too large for materialised space-time stacks the ratio
evaluators stream one slice at a time in single precision, and when the
output weight depends on a single coordinate they invert the transform
along that axis only, using Plancherel on the remaining axes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .canonical import (
    Cutoff,
    ball_cutoff,
    build_partition,
    build_reduction,
    cone_samples,
    operator_norm_weighted,
    transform_adjoint_apply,
    transform_apply,
    transform_inverse_adjoint_apply,
    transform_inverse_apply,
)
from .evolution import (
    TimeWindow,
    check_anti_wrap,
    duhamel_adjoint_spectral,
    duhamel_spectral,
)
from .fields import random_band_ensemble, random_source, time_bump
from .grids import Field, UniformGrid, Weight, multiplier_apply, trapezoid_weights
from .reports import ConstantReport
from .symbols import (
    Symbol,
    classify,
    make_symbol,
    model_symbol,
    shift_symbol,
    sphere_points,
)

__all__ = [
    "EstimateSpec",
    "Resolution",
    "SpectralMultiplier",
    "MULTIPLIER_GRAMMAR",
    "resolve_multiplier",
    "build_window",
    "HomogeneousMap",
    "InhomogeneousMap",
    "PointwiseMap",
    "JointMap",
    "power_iterate",
    "estimate_constant",
    "default_directions",
    "verify_model",
    "verify_via_reduction",
    "combined_estimate",
    "low_high_split",
    "obstruction_report",
]

KINDS = (
    "homogeneous",
    "inhomogeneous",
    "time-local-homogeneous",
    "time-local-inhomogeneous",
)

MULTIPLIER_GRAMMAR = (
    "one | abs:p | bracket:p | axis-abs:j:p | derivative"
)

# Largest mode count for which the power-iteration path materialises full
# fields; larger grids fall back to streamed single-precision ensembles.
_POWER_MODE_CAP = 2**21
_STACK_CELL_CAP = 2**23
_STREAM_MODE_FLOOR = 2**22


@dataclass(frozen=True)
class SpectralMultiplier:
    """A frequency multiplier from the config grammar, ready to evaluate
    on mesh components."""

    name: str
    fn: callable
    homogeneity: float | None
    singular_at_origin: bool

    def __call__(self, *comps):
        return self.fn(*comps)


def resolve_multiplier(descriptor: str, symbol: Symbol | None = None) -> SpectralMultiplier:
    """Parse a multiplier descriptor.

    Grammar: ``one`` (identity), ``abs:p`` for |xi|^p, ``bracket:p`` for
    <xi>^p, ``axis-abs:j:p`` for |xi_j|^p, and ``derivative`` for the
    signed a'(xi) of a one-dimensional symbol.
    """
    text = descriptor.strip().lower()
    head, _, arg = text.partition(":")
    try:
        if head == "one":
            return SpectralMultiplier(
                "one", lambda *c: np.ones_like(c[0] + 0.0), 0.0, False
            )
        if head == "abs":
            p = float(arg)

            def fn(*c, _p=p):
                r2 = sum(x * x for x in c)
                with np.errstate(divide="ignore"):
                    out = r2 ** (0.5 * _p)
                return np.where(r2 == 0.0, 0.0, out) if _p < 0 else out

            return SpectralMultiplier(f"abs:{p:g}", fn, p, p < 0)
        if head == "bracket":
            p = float(arg)

            def fn(*c, _p=p):
                r2 = sum(x * x for x in c)
                return (1.0 + r2) ** (0.5 * _p)

            return SpectralMultiplier(f"bracket:{p:g}", fn, None, False)
        if head == "axis-abs":
            j_text, _, p_text = arg.partition(":")
            j, p = int(j_text), float(p_text)

            def fn(*c, _j=j, _p=p):
                z = np.abs(c[_j])
                with np.errstate(divide="ignore"):
                    out = z**_p
                return np.where(z == 0.0, 0.0, out) if _p < 0 else out

            return SpectralMultiplier(f"axis-abs:{j}:{p:g}", fn, p, p < 0)
        if head == "derivative":
            if symbol is None:
                raise ValueError("'derivative' needs a symbol")
            if symbol.dimension != 1:
                raise ValueError("'derivative' is one-dimensional")

            def fn(*c, _sym=symbol):
                return _sym.grad_fn(*c)[0]

            return SpectralMultiplier(
                f"derivative[{symbol.name}]", fn, symbol.order - 1.0, False
            )
    except (TypeError, ValueError) as exc:
        raise ValueError(
            f"bad multiplier descriptor {descriptor!r}: {exc}"
        ) from exc
    raise ValueError(
        f"unknown multiplier {descriptor!r}; valid grammar: {MULTIPLIER_GRAMMAR}"
    )


@dataclass(frozen=True)
class EstimateSpec:
    """One smoothing inequality to measure.

    kind selects the solution map (free flow or source integral, global or
    on [0, T]); `smoothing` is the multiplier applied to the solution;
    the output weight is <x>^{-s} (radial, or along `weight_axis`); the
    inhomogeneous kinds weigh the source by <x>^{+s} and optionally apply
    `input_multiplier` to it.  `band` confines the data spectra, and the
    bump parameters shape the random draws used to probe the constant.
    """

    kind: str
    symbol: Symbol
    smoothing: str
    s: float
    horizon: float
    band: tuple
    input_multiplier: str | None = None
    weight_axis: int | None = None
    source_span: float | None = None
    bump_width: float = 0.15
    x_spread: float = 3.0
    axis_clearance: float = 0.25

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.s > 0.5:
            raise ValueError(f"weight exponent s must exceed 1/2, got s={self.s}")
        if self.horizon <= 0:
            raise ValueError("time horizon must be positive")
        lo, hi = (float(self.band[0]), float(self.band[1]))
        if not 0.0 <= lo < hi:
            raise ValueError(f"band must satisfy 0 <= r_min < r_max, got {self.band}")
        object.__setattr__(self, "band", (lo, hi))
        rho = resolve_multiplier(self.smoothing, self.symbol)
        mu = (
            resolve_multiplier(self.input_multiplier, self.symbol)
            if self.input_multiplier is not None
            else None
        )
        if (rho.singular_at_origin or (mu is not None and mu.singular_at_origin)) and lo <= 0.0:
            raise ValueError(
                "negative-order multipliers need a band bounded away from zero"
            )
        if self.input_multiplier is not None and not self.is_inhomogeneous:
            raise ValueError("input_multiplier applies to inhomogeneous kinds only")
        if self.weight_axis is not None and not (
            0 <= self.weight_axis < self.symbol.dimension
        ):
            raise ValueError("weight_axis out of range")
        if self.is_inhomogeneous:
            span = self.horizon / 2.0 if self.source_span is None else float(self.source_span)
            if not 0.0 < span <= self.horizon:
                raise ValueError("source span must lie in (0, horizon]")
            object.__setattr__(self, "source_span", span)

    @property
    def dimension(self) -> int:
        return self.symbol.dimension

    @property
    def is_inhomogeneous(self) -> bool:
        return "inhomogeneous" in self.kind

    @property
    def is_time_local(self) -> bool:
        return self.kind.startswith("time-local")

    def clearance_map(self) -> dict:
        return {ax: self.axis_clearance for ax in self.symbol.singular_axes}

    def data_width(self) -> float:
        """Spatial extent of the random draws, for the anti-wrap rule."""
        return 2.0 * (self.x_spread + 4.5 / self.bump_width)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "symbol": self.symbol.name,
            "smoothing": self.smoothing,
            "s": self.s,
            "horizon": self.horizon,
            "band": [self.band[0], self.band[1]],
            "input_multiplier": self.input_multiplier,
            "weight_axis": self.weight_axis,
            "source_span": self.source_span,
        }


@dataclass(frozen=True)
class Resolution:
    """Grid and time-step parameters for one rung of a refinement ladder."""

    points: int
    length: float
    dt: float

    def __post_init__(self):
        if self.points < 2 or self.length <= 0 or self.dt <= 0:
            raise ValueError("resolution parameters must be positive")

    def refine(self, k: int) -> "Resolution":
        """Double the point count and the box together k times; the mesh
        width and the time step stay fixed so quadrature error is matched
        across rungs."""
        return replace(self, points=self.points * 2**k, length=self.length * 2**k)

    def grid(self, dimension: int) -> UniformGrid:
        return UniformGrid((self.points,) * dimension, (self.length,) * dimension)


def build_window(spec: EstimateSpec, horizon: float | None = None, dt: float = 0.125) -> TimeWindow:
    """The sampling window the spec's kind calls for: [-T, T] for the global
    kinds, [0, T] for the time-local ones."""
    T = spec.horizon if horizon is None else float(horizon)
    span = spec.source_span if spec.is_inhomogeneous else 0.0
    if spec.is_time_local:
        return TimeWindow(0.0, T, dt, t_source=span)
    return TimeWindow(-T, T, dt, t_source=span)


# ---------------------------------------------------------------------------
# array helpers


def _band_mask(grid: UniformGrid, band: tuple) -> np.ndarray:
    r2 = sum(x * x for x in grid.xi_mesh())
    r2 = np.broadcast_to(r2, grid.shape)
    return (r2 >= band[0] ** 2) & (r2 <= band[1] ** 2)


def _symbol_array(grid: UniformGrid, symbol: Symbol) -> np.ndarray:
    return np.broadcast_to(
        np.asarray(symbol(*grid.xi_mesh()), dtype=float), grid.shape
    ).copy()


def _multiplier_array(grid: UniformGrid, mult: SpectralMultiplier, mask) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(mult(*grid.xi_mesh()), dtype=float)
    vals = np.broadcast_to(vals, grid.shape)
    return np.where(mask, vals, 0.0)


def _axis_weight_profile(grid: UniformGrid, axis: int, exponent: float) -> np.ndarray:
    """<x_axis>^exponent shaped for broadcasting over the grid."""
    ax = grid.axis(axis)
    prof = (1.0 + ax * ax) ** (0.5 * exponent)
    shape = [1] * grid.ndim
    shape[axis] = len(ax)
    return prof.reshape(shape)


def _output_weight(spec: EstimateSpec, grid: UniformGrid) -> np.ndarray:
    if spec.weight_axis is None:
        return Weight("bracket", -spec.s).evaluate(grid)
    return _axis_weight_profile(grid, spec.weight_axis, -spec.s)


def _sumsq_except(values: np.ndarray, axis: int) -> np.ndarray:
    """Sum of |values|^2 over every axis except `axis`, accumulated in
    double precision."""
    mag2 = values.real * values.real + values.imag * values.imag
    other = tuple(j for j in range(values.ndim) if j != axis)
    if other:
        return np.sum(mag2, axis=other, dtype=np.float64)
    return mag2.astype(np.float64)


def _stack_norm(grid: UniformGrid, theta: np.ndarray, dt: float, stack: np.ndarray) -> float:
    total = 0.0
    for k in range(stack.shape[0]):
        total += theta[k] * dt * np.sum(np.abs(stack[k]) ** 2)
    return float(np.sqrt(grid.cell_measure * total))


def _vscale(v, c):
    if isinstance(v, tuple):
        return tuple(x * c for x in v)
    return v * c


# ---------------------------------------------------------------------------
# the discrete smoothing maps


class HomogeneousMap:
    """phi |-> w(x) rho(D) e^{i t a(D)} phi sampled on a time window.

    The input is a spectrum on the grid (projected onto the band annulus),
    the output a stack of weighted physical slices; `normal_apply` streams
    B*B without materialising the stack.
    """

    def __init__(self, spec: EstimateSpec, grid: UniformGrid, window: TimeWindow,
                 support_width: float | None = None):
        if spec.is_inhomogeneous:
            raise ValueError("spec kind is source-driven; use InhomogeneousMap")
        width = spec.data_width() if support_width is None else support_width
        check_anti_wrap(spec.symbol, spec.band, window, grid, width)
        self.spec = spec
        self.grid = grid
        self.window = window
        self.a = _symbol_array(grid, spec.symbol)
        self.mask = _band_mask(grid, spec.band)
        rho = resolve_multiplier(spec.smoothing, spec.symbol)
        self.rho = _multiplier_array(grid, rho, self.mask)
        self.weight = _output_weight(spec, grid)
        self.theta = trapezoid_weights(window.count)
        self._stream = int(np.prod(grid.shape)) >= _STREAM_MODE_FLOOR

    # -- vector-space plumbing for power iteration
    def input_norm(self, phi_spec: np.ndarray) -> float:
        return self.grid.spectral_norm(phi_spec)

    def out_norm(self, stack: np.ndarray) -> float:
        return _stack_norm(self.grid, self.theta, self.window.dt, stack)

    def input_from_ensemble(self, ens) -> np.ndarray:
        return ens.spectrum(self.grid) * self.mask

    def forward(self, phi_spec: np.ndarray) -> np.ndarray:
        grid, window = self.grid, self.window
        out = np.empty((window.count,) + tuple(grid.shape), dtype=np.complex128)
        base = self.rho * (phi_spec * self.mask)
        for k, t in enumerate(window.times):
            out[k] = self.weight * grid.inverse(np.exp(1j * t * self.a) * base)
        return out

    def adjoint(self, stack: np.ndarray) -> np.ndarray:
        grid, window = self.grid, self.window
        acc = np.zeros(grid.shape, dtype=np.complex128)
        for k, t in enumerate(window.times):
            z = grid.forward(self.weight * stack[k])
            acc += self.theta[k] * window.dt * np.exp(-1j * t * self.a) * z
        return np.conj(self.rho) * acc * self.mask

    def _sweep(self, phi_spec: np.ndarray, want_normal: bool):
        """One pass over the window: the output norm and, when asked, the
        normal-operator image B*B phi, without a space-time stack."""
        grid, window = self.grid, self.window
        dt = window.dt
        base = self.rho * (phi_spec * self.mask)
        phase = np.exp(1j * window.t_min * self.a)
        step = np.exp(1j * dt * self.a)
        w2 = self.weight * self.weight
        acc = np.zeros(grid.shape, dtype=np.complex128) if want_normal else None
        out2 = 0.0
        for k in range(window.count):
            u = grid.inverse(phase * base)
            out2 += self.theta[k] * dt * float(
                np.sum(w2 * (u.real * u.real + u.imag * u.imag), dtype=np.float64)
            )
            if want_normal:
                acc += self.theta[k] * dt * np.conj(phase) * grid.forward(w2 * u)
            phase = phase * step
        lam = float(np.sqrt(grid.cell_measure * out2))
        if want_normal:
            return lam, np.conj(self.rho) * acc * self.mask
        return lam, None

    def normal_apply(self, phi_spec: np.ndarray):
        """Return (||B phi||, B*B phi) in one streamed pass."""
        return self._sweep(phi_spec, True)

    def ratio(self, ens) -> float:
        if self._stream:
            return self._ratio_streaming(ens)
        phi = self.input_from_ensemble(ens)
        denom = self.input_norm(phi)
        if denom == 0.0:
            return 0.0
        lam, _ = self._sweep(phi * (1.0 / denom), False)
        return lam

    def _ratio_streaming(self, ens) -> float:
        """Single-precision slice streaming for large grids; when the weight
        is along one axis, only that axis is inverted and Plancherel covers
        the rest."""
        grid, window = self.grid, self.window
        dt = window.dt
        phi = ens.spectrum(grid, dtype=np.complex64)
        phi *= self.mask
        denom = self.grid.spectral_norm(phi)
        if denom == 0.0:
            return 0.0
        base = self.rho.astype(np.float32) * phi
        phase = np.exp(1j * window.t_min * self.a).astype(np.complex64)
        step = np.exp(1j * dt * self.a).astype(np.complex64)
        axis = self.spec.weight_axis
        out2 = 0.0
        if axis is None:
            w2 = (self.weight * self.weight).astype(np.float32)
            for k in range(window.count):
                u = grid.inverse(phase * base)
                out2 += self.theta[k] * dt * float(
                    np.sum(w2 * (u.real * u.real + u.imag * u.imag),
                           dtype=np.float64)
                )
                phase = phase * step
            return float(np.sqrt(grid.cell_measure * out2)) / denom
        meas = grid.partial_measure((axis,))
        wax2 = np.ravel(_axis_weight_profile(grid, axis, -2.0 * self.spec.s))
        for k in range(window.count):
            g = grid.inverse_partial(phase * base, (axis,))
            out2 += self.theta[k] * dt * float(np.dot(_sumsq_except(g, axis), wax2))
            phase = phase * step
        return float(np.sqrt(meas * out2)) / denom


class InhomogeneousMap:
    """g |-> w(x) rho(D) L[f] with the substitution g = <x>^{s} mu(D) f.

    L is the trapezoid Duhamel map.  Working in the substituted variable g
    makes both sides plain space-time L2 norms, so the constant is a
    singular value; the input is a stack of spectra confined to the band
    and to the source nodes.
    """

    def __init__(self, spec: EstimateSpec, grid: UniformGrid, window: TimeWindow,
                 support_width: float | None = None):
        if not spec.is_inhomogeneous:
            raise ValueError("spec kind is data-driven; use HomogeneousMap")
        width = spec.data_width() if support_width is None else support_width
        check_anti_wrap(spec.symbol, spec.band, window, grid, width)
        self.spec = spec
        self.grid = grid
        self.window = window
        self.a = _symbol_array(grid, spec.symbol)
        self.mask = _band_mask(grid, spec.band)
        rho = resolve_multiplier(spec.smoothing, spec.symbol)
        self.rho = _multiplier_array(grid, rho, self.mask)
        self.weight = _output_weight(spec, grid)
        self.w_in = Weight("bracket", spec.s).evaluate(grid)
        if spec.input_multiplier is None:
            self.mu = None
            self.mu_inv = None
        else:
            mult = resolve_multiplier(spec.input_multiplier, spec.symbol)
            self.mu = _multiplier_array(grid, mult, self.mask)
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / self.mu
            self.mu_inv = np.where(self.mask & (self.mu != 0.0), inv, 0.0)
        self.theta = trapezoid_weights(window.count)
        self.source_nodes = (window.times >= -1e-12) & (
            window.times <= window.t_source + 1e-12
        )
        self._stream = int(np.prod(grid.shape)) * window.count > _STACK_CELL_CAP

    def input_norm(self, g_stack: np.ndarray) -> float:
        total = 0.0
        for k in range(g_stack.shape[0]):
            total += self.theta[k] * self.window.dt * np.sum(np.abs(g_stack[k]) ** 2)
        return float(np.sqrt(self.grid.spectral_measure * total))

    def out_norm(self, stack: np.ndarray) -> float:
        return _stack_norm(self.grid, self.theta, self.window.dt, stack)

    def _to_source(self, g_stack: np.ndarray) -> np.ndarray:
        grid = self.grid
        fs = np.zeros_like(g_stack)
        for k in np.flatnonzero(self.source_nodes):
            g = grid.inverse(g_stack[k])
            fk = grid.forward(g / self.w_in)
            fk *= self.mask
            if self.mu_inv is not None:
                fk *= self.mu_inv
            fs[k] = fk
        return fs

    def input_from_source(self, mixture) -> np.ndarray:
        """The substituted vector g for a separable source mixture."""
        grid, window = self.grid, self.window
        specs = [p.spectrum(grid) for p in mixture.parts]
        out = np.zeros((window.count,) + tuple(grid.shape), dtype=np.complex128)
        for k in np.flatnonzero(self.source_nodes):
            fk = _mixture_slice(specs, mixture, window.times[k])
            if fk is None:
                continue
            fk = fk * self.mask
            if self.mu is not None:
                fk = fk * self.mu
            out[k] = grid.forward(self.w_in * grid.inverse(fk))
        return out

    def forward(self, g_stack: np.ndarray) -> np.ndarray:
        grid, window = self.grid, self.window
        fs = self._to_source(g_stack)
        us = duhamel_spectral(self.a, fs, window)
        out = np.empty_like(us)
        for k in range(window.count):
            out[k] = self.weight * grid.inverse(self.rho * us[k])
        return out

    def adjoint(self, stack: np.ndarray) -> np.ndarray:
        grid, window = self.grid, self.window
        vs = np.empty_like(stack)
        for k in range(window.count):
            vs[k] = np.conj(self.rho) * grid.forward(self.weight * stack[k])
        fadj = duhamel_adjoint_spectral(self.a, vs, window)
        out = np.zeros_like(stack)
        for k in np.flatnonzero(self.source_nodes):
            z = fadj[k] * self.mask
            if self.mu_inv is not None:
                z = z * np.conj(self.mu_inv)
            out[k] = grid.forward(grid.inverse(z) / self.w_in)
        return out

    def normal_apply(self, g_stack: np.ndarray):
        out = self.forward(g_stack)
        return self.out_norm(out), self.adjoint(out)

    def ratio(self, mixture) -> float:
        if self._stream:
            return self._ratio_streaming(mixture)
        g = self.input_from_source(mixture)
        denom = self.input_norm(g)
        if denom == 0.0:
            return 0.0
        return self.out_norm(self.forward(g)) / denom

    def _ratio_streaming(self, mixture) -> float:
        """||w rho(D) L f|| / ||<x>^s mu(D) f|| slice by slice, single
        precision, never materialising a space-time stack."""
        grid, window = self.grid, self.window
        dt = window.dt
        dtype = np.complex64
        specs = [
            (p.spectrum(grid, dtype=dtype) * self.mask).astype(dtype)
            for p in mixture.parts
        ]
        amps = np.stack(
            [
                time_bump(window.times, c, w)
                for c, w in zip(mixture.time_centers, mixture.time_halfwidths)
            ]
        )
        if self.mu is not None:
            mu32 = self.mu.astype(np.float32)

        def f_slice(k):
            acc = None
            for j in range(len(specs)):
                aj = amps[j, k]
                if aj != 0.0:
                    term = dtype(aj) * specs[j]
                    acc = term if acc is None else acc + term
            return acc

        # input norm from the Gram matrix of the separable parts
        gram_t = (amps * (self.theta * dt)) @ amps.T
        in2 = 0.0
        win2 = (self.w_in * self.w_in).astype(np.float32)
        phys = []
        for j, sp in enumerate(specs):
            z = sp if self.mu is None else mu32 * sp
            phys.append(grid.inverse(z))
        for j in range(len(phys)):
            for l in range(len(phys)):
                if gram_t[j, l] != 0.0:
                    in2 += gram_t[j, l] * float(
                        np.sum((phys[j] * np.conj(phys[l])).real * win2,
                               dtype=np.float64)
                    )
        denom = float(np.sqrt(grid.cell_measure * max(in2, 0.0)))
        if denom == 0.0:
            return 0.0
        del phys

        E = np.exp(1j * dt * self.a).astype(dtype)
        half = dtype(0.5j * dt)
        rho32 = self.rho.astype(np.float32)
        axis = self.spec.weight_axis
        out2 = 0.0
        if axis is None:
            w2 = (self.weight * self.weight).astype(np.float32)
        else:
            meas = grid.partial_measure((axis,))
            wax2 = np.ravel(_axis_weight_profile(grid, axis, -2.0 * self.spec.s))

        def add_slice(k, cur):
            nonlocal out2
            if axis is None:
                u = grid.inverse(rho32 * cur)
                out2 += self.theta[k] * dt * float(
                    np.sum(w2 * (u.real * u.real + u.imag * u.imag),
                           dtype=np.float64)
                )
            else:
                g = grid.inverse_partial(rho32 * cur, (axis,))
                out2 += self.theta[k] * dt * float(np.dot(_sumsq_except(g, axis), wax2))

        k0 = window.zero_index
        cur = np.zeros(grid.shape, dtype=dtype)
        fk = f_slice(k0)
        for k in range(k0, window.count - 1):
            fn1 = f_slice(k + 1)
            upd = cur if fk is None else cur - half * fk
            cur = E * upd
            if fn1 is not None:
                cur = cur - half * fn1
            fk = fn1
            add_slice(k + 1, cur)
        if k0 > 0:
            Einv = np.conj(E)
            cur = np.zeros(grid.shape, dtype=dtype)
            fk = f_slice(k0)
            for k in range(k0, 0, -1):
                fn1 = f_slice(k - 1)
                upd = cur if fk is None else cur + half * fk
                cur = Einv * upd
                if fn1 is not None:
                    cur = cur + half * fn1
                fk = fn1
                add_slice(k - 1, cur)
        scale = grid.cell_measure if axis is None else meas
        return float(np.sqrt(scale * out2)) / denom


def _mixture_slice(specs, mixture, t):
    acc = None
    for spec, c, w in zip(specs, mixture.time_centers, mixture.time_halfwidths):
        amp = float(time_bump(np.array(t), c, w))
        if amp != 0.0:
            term = amp * spec
            acc = term if acc is None else acc + term
    return acc


class PointwiseMap:
    """sup over one coordinate of an L2(t, rest) norm, against the source
    norm integrated along that coordinate.

    These mixed norms are not quadratic forms, so the map only offers
    per-trial ratios; constants are reported as ensemble maxima.
    """

    def __init__(self, symbol: Symbol, smoothing: str, mixed_axis: int,
                 grid: UniformGrid, window: TimeWindow, band: tuple,
                 support_width: float = 0.0):
        check_anti_wrap(symbol, band, window, grid, support_width)
        if not 0 <= mixed_axis < grid.ndim:
            raise ValueError("mixed_axis out of range")
        self.symbol = symbol
        self.grid = grid
        self.window = window
        self.band = (float(band[0]), float(band[1]))
        self.mixed_axis = mixed_axis
        self.a = _symbol_array(grid, symbol)
        self.mask = _band_mask(grid, self.band)
        self.rho = _multiplier_array(
            grid, resolve_multiplier(smoothing, symbol), self.mask
        )
        self.theta = trapezoid_weights(window.count)
        self._big = int(np.prod(grid.shape)) >= _STREAM_MODE_FLOOR

    def trial_ratio(self, mixture) -> float:
        grid, window = self.grid, self.window
        m = self.mixed_axis
        dt = window.dt
        dtype = np.complex64 if self._big else np.complex128
        rho = self.rho.astype(np.float32 if self._big else np.float64)
        specs = [
            (p.spectrum(grid, dtype=dtype) * self.mask).astype(dtype)
            for p in mixture.parts
        ]
        amps = np.stack(
            [
                time_bump(window.times, c, w)
                for c, w in zip(mixture.time_centers, mixture.time_halfwidths)
            ]
        )
        h_m = grid.steps[m]
        meas_rest = grid.partial_measure((m,)) / h_m

        # denominator: integral over x_m of the L2(t, rest) source norm,
        # exact through the Gram matrix of the separable parts
        gram_t = (amps * (self.theta * dt)) @ amps.T
        tilded = [grid.inverse_partial(sp, (m,)) for sp in specs]
        other = tuple(j for j in range(grid.ndim) if j != m)
        prof = np.zeros(grid.shape[m])
        for j in range(len(tilded)):
            for l in range(len(tilded)):
                if gram_t[j, l] != 0.0:
                    cross = tilded[j] * np.conj(tilded[l])
                    if other:
                        cross = np.sum(cross, axis=other, dtype=np.complex128)
                    prof += gram_t[j, l] * cross.real
        rhs = float(h_m * np.sum(np.sqrt(np.clip(meas_rest * prof, 0.0, None))))
        if rhs == 0.0:
            return 0.0
        del tilded

        # numerator: stream the Duhamel recursion forward from t = 0
        def f_slice(k):
            acc = None
            for j in range(len(specs)):
                aj = amps[j, k]
                if aj != 0.0:
                    term = dtype(aj) * specs[j]
                    acc = term if acc is None else acc + term
            return acc

        E = np.exp(1j * dt * self.a).astype(dtype)
        half = dtype(0.5j * dt)
        accum = np.zeros(grid.shape[m])
        cur = np.zeros(grid.shape, dtype=dtype)
        fk = f_slice(window.zero_index)
        for k in range(window.zero_index, window.count - 1):
            fn1 = f_slice(k + 1)
            upd = cur if fk is None else cur - half * fk
            cur = E * upd
            if fn1 is not None:
                cur = cur - half * fn1
            fk = fn1
            g = grid.inverse_partial(rho * cur, (m,))
            accum += self.theta[k + 1] * dt * meas_rest * _sumsq_except(g, m)
        lhs = float(np.sqrt(np.max(accum)))
        return lhs / rhs


class JointMap:
    """(phi, g) |-> B_hom phi + B_inhom g on a shared grid and window, with
    the direct-sum input norm sqrt(||phi||^2 + ||g||^2)."""

    def __init__(self, hom: HomogeneousMap, inhom: InhomogeneousMap):
        if hom.grid is not inhom.grid and hom.grid != inhom.grid:
            raise ValueError("joint map needs a shared grid")
        if hom.window != inhom.window:
            raise ValueError("joint map needs a shared time window")
        self.hom = hom
        self.inhom = inhom
        self.grid = hom.grid
        self.window = hom.window

    def input_norm(self, pair) -> float:
        phi, g = pair
        return float(np.hypot(self.hom.input_norm(phi), self.inhom.input_norm(g)))

    def out_norm(self, stack: np.ndarray) -> float:
        return self.hom.out_norm(stack)

    def forward(self, pair) -> np.ndarray:
        phi, g = pair
        return self.hom.forward(phi) + self.inhom.forward(g)

    def adjoint(self, stack: np.ndarray):
        return (self.hom.adjoint(stack), self.inhom.adjoint(stack))

    def normal_apply(self, pair):
        out = self.forward(pair)
        return self.out_norm(out), self.adjoint(out)


# ---------------------------------------------------------------------------
# constant estimation


def power_iterate(map_, v0, rtol: float = 1e-4, max_iterations: int = 50):
    """Power iteration on the normal operator, started at v0.

    Returns (constant, history, converged).  The Rayleigh value is the
    output norm of the normalised iterate, so a start at the best random
    draw reproduces that draw's ratio at iteration zero and the sequence
    is monotone from there.
    """
    nrm = map_.input_norm(v0)
    if nrm == 0.0:
        return 0.0, [0.0], True
    v = _vscale(v0, 1.0 / nrm)
    history = []
    lam = 0.0
    for _ in range(max_iterations):
        lam, z = map_.normal_apply(v)
        history.append(float(lam))
        zn = map_.input_norm(z)
        if zn == 0.0:
            return float(lam), history, True
        v = _vscale(z, 1.0 / zn)
        if len(history) >= 2 and abs(history[-1] - history[-2]) <= rtol * history[-1]:
            return float(lam), history, True
    return float(lam), history, False


def _resolve_method(requested: str, spec: EstimateSpec, grid: UniformGrid,
                    window: TimeWindow) -> str:
    if requested not in ("auto", "power-iteration", "ensemble-max"):
        raise ValueError(
            "method must be auto | power-iteration | ensemble-max, "
            f"got {requested!r}"
        )
    if requested != "auto":
        return requested
    modes = int(np.prod(grid.shape))
    if modes > _POWER_MODE_CAP:
        return "ensemble-max"
    if spec.is_inhomogeneous and modes * window.count > _STACK_CELL_CAP:
        return "ensemble-max"
    return "power-iteration"


def _draws(spec: EstimateSpec, rng, trials: int):
    clearance = spec.clearance_map() or None
    if spec.is_inhomogeneous:
        return [
            random_source(
                spec.dimension, spec.band, (0.0, spec.source_span), rng,
                sigma=spec.bump_width, x_spread=spec.x_spread,
                axis_clearance=clearance,
            )
            for _ in range(trials)
        ]
    return [
        random_band_ensemble(
            spec.dimension, spec.band, rng,
            sigma=spec.bump_width, x_spread=spec.x_spread,
            axis_clearance=clearance,
        )
        for _ in range(trials)
    ]


def build_map(spec: EstimateSpec, grid: UniformGrid, window: TimeWindow):
    if spec.is_inhomogeneous:
        return InhomogeneousMap(spec, grid, window)
    return HomogeneousMap(spec, grid, window)


def estimate_constant(
    spec: EstimateSpec,
    resolution: Resolution,
    ladder: int = 3,
    trials: int = 8,
    seed: int = 0,
    method: str = "auto",
    rtol: float = 1e-4,
    max_iterations: int = 50,
    stability_threshold: float = 0.10,
) -> ConstantReport:
    """Measure the spec's best constant across a refinement ladder.

    Each rung doubles the box, the point count and the horizon together,
    holding the mesh width and the time step fixed; the random draws are
    grid-free and reuse the same seed, so rungs probe the same continuum
    data.  Non-convergence is flagged in the report, never raised.
    """
    if ladder < 1:
        raise ValueError("ladder needs at least one rung")
    if trials < 2:
        raise ValueError("need at least two trials")
    entries = []
    flags = {}
    constant = 0.0
    last_method = method
    last_history: dict = {}
    last_converged = True
    last_ensemble = 0.0
    for rung in range(ladder):
        res = resolution.refine(rung)
        horizon = spec.horizon * 2**rung
        grid = res.grid(spec.dimension)
        window = build_window(spec, horizon, res.dt)
        rung_method = _resolve_method(method, spec, grid, window)
        if rung_method == "ensemble-max" and trials < 8:
            raise ValueError("ensemble-max needs at least 8 trials")
        smap = build_map(spec, grid, window)
        rng = np.random.default_rng(seed)
        draws = _draws(spec, rng, trials)
        ratios = [smap.ratio(d) for d in draws]
        best = int(np.argmax(ratios))
        ensemble_max = float(ratios[best])
        converged = True
        history: dict = {"trial_ratios": [float(r) for r in ratios]}
        if rung_method == "power-iteration":
            if spec.is_inhomogeneous:
                v0 = smap.input_from_source(draws[best])
            else:
                v0 = smap.input_from_ensemble(draws[best])
            value, rayleigh, converged = power_iterate(
                smap, v0, rtol=rtol, max_iterations=max_iterations
            )
            history["rayleigh"] = rayleigh
            if not converged:
                flags.setdefault("non_converged_rungs", []).append(rung)
        else:
            value = ensemble_max
        entries.append(
            {
                "rung": rung,
                "points": res.points,
                "length": res.length,
                "horizon": horizon,
                "dt": res.dt,
                "trials": trials,
                "method": rung_method,
                "constant": float(value),
                "ensemble_max": ensemble_max,
                "converged": bool(converged),
            }
        )
        constant = float(value)
        last_method = rung_method
        last_history = history
        last_converged = bool(converged)
        last_ensemble = ensemble_max
    values = [e["constant"] for e in entries]
    lo, hi = min(values), max(values)
    variation = (hi - lo) / lo if lo > 0 else np.inf
    flags["ladder_variation"] = float(variation)
    flags["ladder_stable"] = bool(variation <= stability_threshold)
    flags["stability_threshold"] = float(stability_threshold)
    if "non_converged_rungs" in flags:
        flags["non_converged"] = True
    return ConstantReport(
        constant,
        last_method,
        last_history,
        {
            "points": resolution.points,
            "length": resolution.length,
            "dt": resolution.dt,
            "ladder": ladder,
            "trials": trials,
            "seed": seed,
            "spec": spec.describe(),
        },
        ensemble_max=last_ensemble,
        converged=last_converged,
        ladder=tuple(entries),
        flags=flags,
    )


# ---------------------------------------------------------------------------
# model estimates


def _ladder_summary(entries, threshold):
    values = [e["constant"] for e in entries]
    lo, hi = min(values), max(values)
    variation = (hi - lo) / lo if lo > 0 else np.inf
    return {
        "ladder": entries,
        "variation": float(variation),
        "stable": bool(variation <= threshold),
        "stability_threshold": float(threshold),
    }


def verify_model(
    form: str,
    resolution: Resolution,
    horizon: float,
    band: tuple,
    m: float = 2.0,
    dimension: int = 1,
    s: float = 0.6,
    symbol: Symbol | None = None,
    source_span: float | None = None,
    trials: int = 8,
    seed: int = 0,
    ladder: int = 3,
    stability_threshold: float = 0.10,
    bump_width: float = 0.25,
    x_spread: float = 3.0,
) -> dict:
    """Measure one of the four model smoothing forms across a ladder.

    `elliptic-homogeneous` and `nonelliptic-homogeneous` are the weighted
    L2 estimates for the two normal forms; `line-source` and
    `plane-source` are the pointwise-in-one-coordinate source estimates
    (sup over that coordinate of the L2(t, rest) norm against the source
    norm integrated along it).
    """
    if form in ("elliptic-homogeneous", "nonelliptic-homogeneous"):
        if form == "elliptic-homogeneous":
            sym = model_symbol("elliptic", m, dimension)
            weight_axis = dimension - 1
        else:
            sym = model_symbol("nonelliptic", m, dimension)
            weight_axis = 0
        spec = EstimateSpec(
            "homogeneous", sym, f"axis-abs:{dimension - 1}:{0.5 * (m - 1.0):g}",
            s, horizon, band, weight_axis=weight_axis,
            bump_width=bump_width, x_spread=x_spread,
        )
        report = estimate_constant(
            spec, resolution, ladder=ladder, trials=trials, seed=seed,
            stability_threshold=stability_threshold,
        )
        out = {"form": form, "constant": report.constant}
        out.update(_ladder_summary(list(report.ladder), stability_threshold))
        out["report"] = report.to_dict()
        return out

    if form == "line-source":
        sym = symbol
        if sym is None:
            raise ValueError("line-source needs an explicit one-dimensional symbol")
        if sym.dimension != 1:
            raise ValueError("line-source is one-dimensional")
        smoothing = "derivative"
        mixed_axis = 0
    elif form == "plane-source":
        sym = model_symbol("nonelliptic", m, 2)
        smoothing = f"axis-abs:1:{m - 1.0:g}"
        mixed_axis = 1
    else:
        raise ValueError(
            "form must be elliptic-homogeneous | nonelliptic-homogeneous | "
            f"line-source | plane-source, got {form!r}"
        )

    if trials < 8:
        raise ValueError("ensemble-max needs at least 8 trials")
    span = horizon / 2.0 if source_span is None else float(source_span)
    clearance = {ax: 0.25 for ax in sym.singular_axes} or None
    width = 2.0 * (x_spread + 4.5 / bump_width)
    entries = []
    for rung in range(ladder):
        res = resolution.refine(rung)
        T = horizon * 2**rung
        grid = res.grid(sym.dimension)
        window = TimeWindow(0.0, T, res.dt, t_source=span)
        pmap = PointwiseMap(
            sym, smoothing, mixed_axis, grid, window, band, support_width=width
        )
        rng = np.random.default_rng(seed)
        ratios = [
            pmap.trial_ratio(
                random_source(
                    sym.dimension, band, (0.0, span), rng,
                    sigma=bump_width, x_spread=x_spread, axis_clearance=clearance,
                )
            )
            for _ in range(trials)
        ]
        entries.append(
            {
                "rung": rung,
                "points": res.points,
                "length": res.length,
                "horizon": T,
                "dt": res.dt,
                "trials": trials,
                "method": "ensemble-max",
                "constant": float(np.max(ratios)),
                "trial_ratios": [float(r) for r in ratios],
            }
        )
    out = {"form": form, "symbol": sym.name, "constant": entries[-1]["constant"]}
    out.update(_ladder_summary(entries, stability_threshold))
    return out


# ---------------------------------------------------------------------------
# reduction-based verification


def default_directions(dimension: int, count: int = 8):
    if dimension == 1:
        return [np.array([1.0]), np.array([-1.0])]
    if dimension == 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        return [np.array([np.cos(t), np.sin(t)]) for t in angles]
    return [p for p in sphere_points(dimension, count)]


def _ball_min(symbol: Symbol, radius: float) -> float:
    dirs = sphere_points(symbol.dimension, 64 if symbol.dimension > 1 else 2)
    if symbol.singular_axes:
        keep = np.ones(len(dirs), bool)
        for ax in symbol.singular_axes:
            keep &= np.abs(dirs[:, ax]) > 1e-6
        dirs = dirs[keep]
    radii = np.linspace(radius * 1e-3, radius, 33)
    pts = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, symbol.dimension)
    return float(np.min(symbol.at(pts)))


def _rotated_cutoff(cone: Cutoff, rotation: np.ndarray) -> Cutoff:
    """The cutoff xi -> cone(Q xi), which moves a partition piece into the
    frame where its axis is the last coordinate."""
    Q = np.asarray(rotation, dtype=float)

    def fn(*comps):
        arrs = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in comps])
        pts = np.stack([a.ravel() for a in arrs], axis=-1)
        return np.asarray(cone.at(pts @ Q.T)).reshape(arrs[0].shape)

    support = dict(cone.support)
    if "direction" in support:
        support["direction"] = Q.T @ np.asarray(support["direction"], dtype=float)
    return Cutoff(fn, cone.kind, "rotated " + cone.description, cone.width, support)


def _cone_quotient(gamma: Cutoff, zeta_fn, rho_fn, diffeo):
    """gamma * zeta / (rho o psi) as a mesh-component callable, exactly zero
    off the cone so no undefined warp value reaches an active mode."""

    def fn(*comps):
        arrs = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in comps])
        pts = np.stack([a.ravel() for a in arrs], axis=-1)
        gam = np.asarray(gamma.at(pts), dtype=float)
        out = np.zeros(pts.shape[0])
        live = gam > 0.0
        if live.any():
            inside = pts[live]
            zet = zeta_fn(*(inside[:, j] for j in range(inside.shape[1])))
            fwd = diffeo.forward(inside)
            down = rho_fn(*(fwd[:, j] for j in range(fwd.shape[1])))
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = gam[live] * zet / down
            out[live] = np.where(np.isfinite(vals), vals, 0.0)
        return out.reshape(arrs[0].shape)

    return fn


def verify_via_reduction(
    spec: EstimateSpec,
    resolution: Resolution,
    directions=None,
    low_radius: float | None = None,
    halfangle: float | None = None,
    ladder: int = 1,
    trials: int = 8,
    seed: int = 0,
    cert_trials: int = 8,
    model_trials: int = 3,
    model_resolution: Resolution | None = None,
    ratio_tol: float = 0.01,
    method: str = "auto",
    rtol: float = 1e-4,
    max_iterations: int = 50,
) -> dict:
    """Bound the spec's constant through its conic normal-form reductions
    and compare with the directly measured constant.

    The data splits as phi = chi(D) phi + sum_j gamma_j(D)^2 (1-chi(D)) phi
    with a squared partition of unity on cones.  On each cone the exact
    factorisation  zeta(D) e^{ita} gamma^2(D) =
    I_{psi,q} rho(D) e^{it sigma} I^{-1}_{psi,gamma}  turns the smoothing
    norm into a certified product of three measured factors: the weighted
    norm of the transform with amplitude q = gamma zeta / (rho o psi), the
    model constant for the normal form sigma, and the plain norm of the
    inverse transform.  Cones sharing a normal form share one model run on
    the union of their image bands.  The composite bound (sum over cones
    plus a low-frequency piece) must dominate the direct constant, so the
    reported ratio composite / direct stays above one up to `ratio_tol`.

    Rotating to each cone frame is an isometry only for radial weights and
    radial smoothing multipliers, so those are required here.
    """
    symbol = spec.symbol
    n = spec.dimension
    if spec.is_inhomogeneous:
        raise ValueError("reduction verification covers the data-driven kinds")
    if spec.weight_axis is not None:
        raise ValueError(
            "reduction verification uses the radial weight; leave weight_axis unset"
        )
    rho_mult = resolve_multiplier(spec.smoothing, symbol)
    if rho_mult.name.partition(":")[0] not in ("one", "abs", "bracket"):
        raise ValueError(
            "reduction verification needs a radial smoothing multiplier"
        )
    grade = classify(symbol)
    if grade.tag == "none":
        raise ValueError(
            f"symbol {symbol.name} shows no dispersiveness grade; "
            "no reduction applies"
        )

    direct = estimate_constant(
        spec, resolution, ladder=ladder, trials=trials, seed=seed,
        method=method, rtol=rtol, max_iterations=max_iterations,
    )
    top_horizon = spec.horizon * 2 ** (ladder - 1)

    if directions is None:
        directions = default_directions(n)
    R = spec.band[0] / 2.0 if low_radius is None else float(low_radius)
    chi, cones = build_partition(directions, R, halfangle)
    plan_band = (max(spec.band[0], R), spec.band[1])
    weight = Weight("bracket", -spec.s)
    cert_grid = resolution.grid(n)
    clearance = spec.clearance_map() or None

    cone_entries = []
    groups: dict = {}
    for j, (direction, cone) in enumerate(zip(directions, cones)):
        label = (
            f"cone {j} toward "
            f"{np.round(np.asarray(direction, dtype=float), 4).tolist()}"
        )
        angle = cone.support.get("halfangle", np.pi / 2)
        try:
            plan = build_reduction(
                symbol, direction, halfangle=angle, band=plan_band,
                zeta=rho_mult.fn,
            )
        except ValueError as exc:
            raise ValueError(f"{label}: normal-form hypothesis failed: {exc}") from exc

        gamma = _rotated_cutoff(cone, plan.rotation)
        q_fn = _cone_quotient(gamma, rho_mult.fn, plan.rho, plan.diffeo)
        band_model = _image_band(plan, plan_band)
        try:
            transform_norm = operator_norm_weighted(
                lambda u: transform_apply(plan.diffeo, q_fn, u),
                weight, cert_grid, band_model,
                adjoint=lambda v: transform_adjoint_apply(plan.diffeo, q_fn, v),
                trials=cert_trials, seed=seed + 11 * j + 1,
                sigma=spec.bump_width,
            )
        except ValueError as exc:
            raise ValueError(
                f"{label}: weighted transform-norm hypothesis failed: {exc}"
            ) from exc
        try:
            inverse_norm = operator_norm_weighted(
                lambda u: transform_inverse_apply(plan.diffeo, gamma, u),
                Weight("bracket", 0.0), cert_grid, plan_band,
                adjoint=lambda v: transform_inverse_adjoint_apply(
                    plan.diffeo, gamma, v
                ),
                trials=cert_trials, seed=seed + 11 * j + 2,
                sigma=spec.bump_width, axis_clearance=clearance,
            )
        except ValueError as exc:
            raise ValueError(
                f"{label}: inverse-transform norm hypothesis failed: {exc}"
            ) from exc

        key = plan.sigma.name
        if key in groups:
            glo, ghi = groups[key]["band"]
            groups[key]["band"] = (
                min(glo, band_model[0]), max(ghi, band_model[1])
            )
        else:
            groups[key] = {"sigma": plan.sigma, "band": band_model}
        cone_entries.append(
            {
                "label": label,
                "plan": plan.report(),
                "normal_form": key,
                "transform_norm": transform_norm.constant,
                "transform_norm_ensemble": transform_norm.ensemble_max,
                "inverse_norm": inverse_norm.constant,
                "model_band": [band_model[0], band_model[1]],
            }
        )

    m = symbol.order
    model_reports = {}
    for key, group in groups.items():
        band_g = group["band"]
        sigma_width = min(spec.bump_width, (band_g[1] - band_g[0]) / 10.0)
        model_spec = EstimateSpec(
            "time-local-homogeneous" if spec.is_time_local else "homogeneous",
            group["sigma"], f"axis-abs:{n - 1}:{0.5 * (m - 1.0):g}",
            spec.s, top_horizon, band_g,
            bump_width=sigma_width, x_spread=spec.x_spread,
            axis_clearance=spec.axis_clearance,
        )
        model_reports[key] = estimate_constant(
            model_spec, model_resolution or resolution, ladder=1,
            trials=model_trials, seed=seed + 5, method=method,
            rtol=rtol, max_iterations=max_iterations,
        )

    composite = 0.0
    for entry in cone_entries:
        model = model_reports[entry["normal_form"]]
        entry["model_constant"] = model.constant
        entry["product"] = (
            entry["transform_norm"] * model.constant * entry["inverse_norm"]
        )
        composite += entry["product"]

    low = _low_piece(
        spec, resolution, R, rho_mult, top_horizon, trials, seed, method,
        rtol, max_iterations,
    )
    composite += low["constant"]

    ratio = composite / direct.constant if direct.constant > 0 else np.inf
    return {
        "spec": spec.describe(),
        "grade": grade.tag,
        "direct": direct.to_dict(),
        "cones": cone_entries,
        "models": {k: r.to_dict() for k, r in model_reports.items()},
        "low": low,
        "composite": float(composite),
        "ratio": float(ratio),
        "flags": {
            "bound_dominates": bool(ratio >= 1.0 - ratio_tol),
            "ratio_tolerance": float(ratio_tol),
        },
    }


def _image_band(plan, band) -> tuple:
    n = plan.symbol.dimension
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    samples = cone_samples(
        e_n if n > 1 else np.array([1.0]),
        plan.certificate["halfangle"], band,
    )
    img = plan.diffeo.forward(samples)
    img = img[np.all(np.isfinite(img), axis=1)]
    radii = np.linalg.norm(img, axis=1)
    return (0.95 * float(radii.min()), 1.05 * float(radii.max()))


def _low_piece(spec, resolution, R, rho_mult, top_horizon, trials, seed, method,
               rtol, max_iterations) -> dict:
    """The low-frequency contribution to the composite bound."""
    if spec.band[0] >= 2.0 * R - 1e-12:
        return {
            "mode": "outside-data-band",
            "radius": float(R),
            "constant": 0.0,
        }
    symbol = spec.symbol
    dirs = sphere_points(symbol.dimension, 64 if symbol.dimension > 1 else 2)
    radii = np.linspace(1e-3 * R, 2.0 * R, 33)
    pts = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, symbol.dimension)
    zeta_sup = float(np.max(np.abs(rho_mult(*[pts[:, j] for j in range(pts.shape[1])]))))

    if spec.is_time_local:
        constant = float(np.sqrt(top_horizon)) * zeta_sup
        return {
            "mode": "horizon-bound",
            "radius": float(R),
            "zeta_sup": zeta_sup,
            "constant": constant,
        }

    # global kind: shift the symbol until it is positive on the low ball;
    # the propagator only gains a time phase, so the norm is unchanged,
    # and the constant is measured on the shifted low-frequency problem.
    amin = _ball_min(symbol, 2.0 * R)
    c = 0.0 if amin > 0.0 else 1.1 * abs(amin)
    shifted = shift_symbol(symbol, 2.0 * c) if c > 0.0 else symbol
    band_low = (spec.band[0], 2.0 * R)
    width = min(spec.bump_width, (band_low[1] - band_low[0]) / 10.0)
    low_spec = EstimateSpec(
        spec.kind, shifted, spec.smoothing, spec.s, top_horizon, band_low,
        weight_axis=spec.weight_axis, bump_width=width,
        x_spread=spec.x_spread, axis_clearance=spec.axis_clearance,
    )
    report = estimate_constant(
        low_spec, resolution, ladder=1, trials=trials, seed=seed + 7,
        method=method, rtol=rtol, max_iterations=max_iterations,
    )

    # machine check that the shift really is a pure phase in every norm
    shift_residual = 0.0
    if c > 0.0:
        grid = resolution.grid(spec.dimension)
        window = build_window(low_spec, top_horizon, resolution.dt)
        probe_spec = EstimateSpec(
            spec.kind, symbol, spec.smoothing, spec.s, top_horizon, band_low,
            weight_axis=spec.weight_axis, bump_width=width,
            x_spread=spec.x_spread, axis_clearance=spec.axis_clearance,
        )
        rng = np.random.default_rng(seed + 8)
        draw = _draws(probe_spec, rng, 1)[0]
        n1 = HomogeneousMap(probe_spec, grid, window).ratio(draw)
        n2 = HomogeneousMap(low_spec, grid, window).ratio(draw)
        shift_residual = abs(n1 - n2) / max(n1, 1e-30)

    return {
        "mode": "shifted-symbol",
        "radius": float(R),
        "shift": float(2.0 * c),
        "shift_norm_residual": float(shift_residual),
        "constant": float(report.constant),
        "report": report.to_dict(),
    }


# ---------------------------------------------------------------------------
# combined data + source estimates


def combined_estimate(
    spec_hom: EstimateSpec,
    spec_inhom: EstimateSpec,
    resolution: Resolution,
    trials: int = 8,
    seed: int = 0,
    rtol: float = 1e-4,
    max_iterations: int = 50,
    slack: float = 5e-3,
) -> dict:
    """Best constant for the joint map (phi, f) |-> weighted smoothed u
    with u = e^{ita} phi + L f, against sqrt(||phi||^2 + ||source norm||^2).

    The joint constant can never exceed the quadratic sum of the separate
    constants, hence not the plain sum either; the report records both
    checks with a quadrature slack.
    """
    if spec_hom.is_inhomogeneous or not spec_inhom.is_inhomogeneous:
        raise ValueError("combined_estimate takes one data and one source spec")
    if spec_hom.symbol.name != spec_inhom.symbol.name:
        raise ValueError("the two specs must share one symbol")
    if spec_hom.is_time_local != spec_inhom.is_time_local:
        raise ValueError("the two specs must share the window kind")
    if spec_hom.horizon != spec_inhom.horizon or spec_hom.band != spec_inhom.band:
        raise ValueError("the two specs must share horizon and band")

    grid = resolution.grid(spec_hom.dimension)
    window = build_window(spec_inhom, spec_inhom.horizon, resolution.dt)
    hom = HomogeneousMap(spec_hom, grid, window)
    inhom = InhomogeneousMap(spec_inhom, grid, window)
    joint = JointMap(hom, inhom)

    rng = np.random.default_rng(seed)
    phi_draws = _draws(spec_hom, rng, trials)
    src_draws = _draws(spec_inhom, rng, trials)

    phi_ratios = [hom.ratio(d) for d in phi_draws]
    src_ratios = [inhom.ratio(d) for d in src_draws]
    best_phi = hom.input_from_ensemble(phi_draws[int(np.argmax(phi_ratios))])
    best_src = inhom.input_from_source(src_draws[int(np.argmax(src_ratios))])

    c_hom, hist_h, conv_h = power_iterate(hom, best_phi, rtol, max_iterations)
    c_inhom, hist_i, conv_i = power_iterate(inhom, best_src, rtol, max_iterations)
    c_joint, hist_j, conv_j = power_iterate(
        joint, (best_phi, best_src), rtol, max_iterations
    )

    quadratic = float(np.hypot(c_hom, c_inhom))
    total = float(c_hom + c_inhom)
    return {
        "joint": c_joint,
        "homogeneous": c_hom,
        "inhomogeneous": c_inhom,
        "quadratic_sum": quadratic,
        "sum_of_parts": total,
        "slack": float(slack),
        "dominated": bool(c_joint <= total * (1.0 + slack)),
        "dominated_quadratic": bool(c_joint <= quadratic * (1.0 + slack)),
        "converged": bool(conv_h and conv_i and conv_j),
        "history": {
            "joint": hist_j,
            "homogeneous": hist_h,
            "inhomogeneous": hist_i,
        },
        "resolution": {
            "points": resolution.points,
            "length": resolution.length,
            "dt": resolution.dt,
            "trials": trials,
            "seed": seed,
        },
    }


# ---------------------------------------------------------------------------
# frequency splitting and the sign obstruction


def low_high_split(field: Field, radius: float):
    """Split into low and high pieces with a radial cutoff that is one on
    |xi| <= radius and zero on |xi| >= 2 radius; the two pieces sum back
    to the field exactly."""
    chi = ball_cutoff(radius)
    low = multiplier_apply(field, chi, name="low-frequency cutoff")
    high = Field(field.grid, field.values - low.values)
    return low, high


def obstruction_report(
    resolution: Resolution,
    horizon: float,
    band: tuple = (0.4, 2.0),
    s: float = 0.6,
    trials: int = 8,
    seed: int = 0,
    ladder: int = 2,
    symbol: Symbol | None = None,
) -> dict:
    """Compare the signed derivative multiplier a'(D) against its modulus
    |a'|(D) on a sign-mixed band for the source estimate.

    For a = xi^2/2 the two have equal magnitude pointwise, so any gap in
    the measured constants is carried purely by the sign structure across
    the two half-lines.  Comparative output only; nothing is asserted.
    """
    sym = symbol if symbol is not None else make_symbol("poly:[0,0,0.5]", 1)
    if sym.dimension != 1:
        raise ValueError("the sign obstruction experiment is one-dimensional")
    kwargs = dict(ladder=ladder, trials=trials, seed=seed)
    signed = estimate_constant(
        EstimateSpec("inhomogeneous", sym, "derivative", s, horizon, band),
        resolution, **kwargs,
    )
    modulus = estimate_constant(
        EstimateSpec(
            "inhomogeneous", sym, f"abs:{sym.order - 1.0:g}", s, horizon, band
        ),
        resolution, **kwargs,
    )
    return {
        "symbol": sym.name,
        "signed": signed.to_dict(),
        "modulus": modulus.to_dict(),
        "note": (
            "comparative report: the multipliers share one modulus, so any "
            "gap reflects the sign structure across the half-lines"
        ),
    }
