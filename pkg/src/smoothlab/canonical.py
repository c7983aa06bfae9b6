"""Canonical transforms: frequency warps, conic cutoffs, reduction plans.

The central object is the operator  u -> F^{-1}[ gamma(xi) u^(psi(xi)) ]
built from a diffeomorphism psi of a frequency cone and a cutoff gamma
supported there.  It conjugates the multiplier a(D) into a normal form
sigma(D) whenever a = sigma o psi, which is how smoothing estimates for
general dispersion relations are reduced to the two model forms.

Cutoffs are always evaluated analytically on the grid; only the warped
spectrum values are interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import random_band_ensemble
from .grids import Field, POPULATED_RTOL, Weight
from .interp import interpolable_margin, warp_adjoint, warp_spectrum
from .reports import ConstantReport
from .symbols import Symbol, compose_linear, model_symbol, rotation_to_axis, sphere_points

__all__ = [
    "Cutoff",
    "Diffeomorphism",
    "ReductionPlan",
    "CoverageError",
    "WarpOutOfBandError",
    "NonDispersiveDirectionError",
    "QuotientUnboundedError",
    "smoothstep",
    "conic_cutoff",
    "analytic_cone_cutoff",
    "ball_cutoff",
    "build_partition",
    "cone_samples",
    "identity_diffeomorphism",
    "build_reduction",
    "transform_apply",
    "transform_inverse_apply",
    "transform_adjoint_apply",
    "transform_inverse_adjoint_apply",
    "operator_norm_weighted",
]


class CoverageError(ValueError):
    """Cone directions fail to cover the sphere at the given half-angle."""


class WarpOutOfBandError(ValueError):
    """A warp target carrying data falls outside the interpolable interior."""


class NonDispersiveDirectionError(ValueError):
    """The principal gradient vanishes along the requested direction."""


class QuotientUnboundedError(ValueError):
    """The reduction quotient gamma*zeta/(rho o psi) exceeds its cap."""


def smoothstep(t):
    """Quintic ramp: 0 for t <= 0, 1 for t >= 1, C^2 in between."""
    s = np.clip(t, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


# ---------------------------------------------------------------------------
# cutoffs


@dataclass(frozen=True)
class Cutoff:
    """A frequency cutoff with values in [0, 1].

    kind "conic": zero-homogeneous, a function of xi/|xi| only (zero at the
    origin by convention).  kind "compact": supported in a ball.
    """

    fn: callable
    kind: str
    description: str
    width: float
    support: dict = dc_field(default_factory=dict)

    def __call__(self, *comps):
        return self.fn(*comps)

    def at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return self.fn(*(pts[:, j] for j in range(pts.shape[1])))


def _cos_angle(direction, comps):
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    r = np.sqrt(sum(x * x for x in comps))
    dot = sum(dj * x for dj, x in zip(d, comps))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(r > 0.0, dot / np.where(r > 0.0, r, 1.0), -1.0)
    return c, r


def conic_cutoff(direction, halfangle: float, inner: float | None = None) -> Cutoff:
    """Zero-homogeneous bump around `direction`: 1 inside the inner cone,
    0 outside the half-angle, quintic in the cosine in between."""
    if not 0.0 < halfangle < np.pi:
        raise ValueError("halfangle must lie in (0, pi)")
    inner = halfangle / 2.0 if inner is None else inner
    if not 0.0 <= inner < halfangle:
        raise ValueError("inner plateau angle must be smaller than halfangle")
    c_out, c_in = np.cos(halfangle), np.cos(inner)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    if d.size == 1:
        sign = float(np.sign(d[0]))

        def fn(*comps):
            return np.where(sign * comps[0] > 0.0, 1.0, 0.0)

    else:

        def fn(*comps):
            c, r = _cos_angle(d, comps)
            return np.where(r > 0.0, smoothstep((c - c_out) / (c_in - c_out)), 0.0)

    return Cutoff(
        fn,
        "conic",
        f"cone around {np.round(d, 6).tolist()}, halfangle {halfangle:.6g}",
        float(halfangle - inner),
        {"direction": d, "halfangle": float(halfangle), "inner": float(inner)},
    )


def analytic_cone_cutoff(
    direction, width: float = 0.16, floor: float = 0.03, radial_onset: float = 0.0
) -> Cutoff:
    """Gaussian-in-the-cosine bump around `direction`, for identity checks.

    The quintic conic bump is only C^2, and its third-derivative jump
    limits spectral resampling accuracy no matter the stencil order.  This
    profile is analytic where it is positive, and `floor` truncates it at
    a cosine where the value is already below machine precision, keeping
    the support strictly inside the half-space where the normal-form warp
    is injective.  A positive `radial_onset` multiplies in
    exp(-(onset/r)^2), suppressing the small radii where a cone's angular
    transition spans too few grid modes to resample accurately.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    if not 0.0 < floor < 1.0:
        raise ValueError("cosine floor must lie in (0, 1)")
    if radial_onset < 0:
        raise ValueError("radial onset must be nonnegative")
    edge = np.exp(-(((1.0 - floor) / width) ** 2))
    if edge > 1e-15:
        raise ValueError(
            f"profile does not underflow at the support edge (value {edge:.2g}); "
            "decrease width or raise floor"
        )
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    onset2 = radial_onset * radial_onset

    if d.size == 1:
        sign = float(np.sign(d[0]))

        def fn(*comps):
            r = np.abs(comps[0])
            ramp = np.exp(-onset2 / np.where(r > 0.0, r * r, 1.0)) if onset2 else 1.0
            return np.where(sign * comps[0] > 0.0, ramp, 0.0)

    else:

        def fn(*comps):
            c, r = _cos_angle(d, comps)
            arg = ((1.0 - c) / width) ** 2
            if onset2:
                arg = arg + onset2 / np.where(r > 0.0, r * r, 1.0)
            return np.where((r > 0.0) & (c > floor), np.exp(-arg), 0.0)

    halfangle = float(np.arccos(floor))
    return Cutoff(
        fn,
        "conic",
        f"analytic cone bump around {np.round(d, 6).tolist()}, width {width:.6g}",
        float(width),
        {"direction": d, "halfangle": halfangle, "inner": 0.0},
    )


def ball_cutoff(radius: float) -> Cutoff:
    """Radial low-frequency cutoff: 1 on |xi| <= R, 0 on |xi| >= 2R."""
    if radius <= 0:
        raise ValueError("radius must be positive")

    def fn(*comps):
        r = np.sqrt(sum(x * x for x in comps))
        return 1.0 - smoothstep(r / radius - 1.0)

    return Cutoff(
        fn, "compact", f"low-frequency ball, radius {radius:.6g}", radius,
        {"radius": float(radius)},
    )


def build_partition(directions, low_radius: float, halfangle: float | None = None):
    """Low cutoff chi plus conic cutoffs with sum of squares equal to one.

    The conic pieces are normalised squared bumps, gamma_j = b_j / sqrt(sum
    b_k^2), which keeps each one supported in its own cone while making
    sum_j gamma_j^2 == 1 away from the origin.  Raises CoverageError when
    the bumps leave part of the sphere uncovered.
    """
    directions = [np.asarray(d, dtype=float) for d in directions]
    n = directions[0].size
    if halfangle is None:
        # one-dimensional cones are exact half-lines, so any interior
        # angle works; conic_cutoff needs a value strictly inside (0, pi)
        halfangle = 0.5 * np.pi if n == 1 else _default_halfangle(directions)
    bumps = [conic_cutoff(d, halfangle) for d in directions]

    sph = sphere_points(n, 512 if n > 1 else 2)
    comps = tuple(sph[:, j] for j in range(n))
    total = sum(b(*comps) ** 2 for b in bumps)
    if np.min(total) < 1e-3:
        worst = sph[int(np.argmin(total))]
        raise CoverageError(
            f"directions leave the sphere uncovered near {np.round(worst, 4).tolist()}"
            f" at halfangle {halfangle:.4g}"
        )

    def make_fn(bump):
        def fn(*comps):
            denom = sum(b(*comps) ** 2 for b in bumps)
            r = np.sqrt(sum(x * x for x in comps))
            safe = np.where(denom > 0.0, denom, 1.0)
            return np.where(r > 0.0, bump(*comps) / np.sqrt(safe), 0.0)

        return fn

    cones = tuple(
        Cutoff(
            make_fn(b), "conic",
            "partition piece, " + b.description, b.width, dict(b.support),
        )
        for b in bumps
    )
    return ball_cutoff(low_radius), cones


def _default_halfangle(directions) -> float:
    n = directions[0].size
    sph = sphere_points(n, 512)
    gaps = []
    for p in sph:
        best = max(float(p @ (d / np.linalg.norm(d))) for d in directions)
        gaps.append(np.arccos(np.clip(best, -1.0, 1.0)))
    return min(2.2 * max(gaps) + 0.05, 0.45 * np.pi)


# ---------------------------------------------------------------------------
# cone sampling


def cone_samples(
    direction,
    halfangle: float,
    band: tuple[float, float],
    radial: int = 9,
    angular: int = 12,
    azimuthal: int = 16,
) -> np.ndarray:
    """Deterministic point cloud in the solid cone around `direction` with
    radii spanning `band` (endpoints included)."""
    d = np.asarray(direction, dtype=float)
    n = d.size
    d = d / np.linalg.norm(d)
    radii = np.linspace(band[0], band[1], radial)
    if n == 1:
        return (d[0] * radii)[:, None]
    Q = rotation_to_axis(d)
    thetas = np.linspace(0.0, halfangle, angular)
    dirs = [np.zeros(n)]
    dirs[0][-1] = 1.0
    ring = sphere_points(n - 1, azimuthal) if n > 2 else np.array([[1.0], [-1.0]])
    for th in thetas[1:]:
        for v in ring:
            u = np.zeros(n)
            u[: n - 1] = v * np.sin(th)
            u[-1] = np.cos(th)
            dirs.append(u)
    dirs = np.asarray(dirs) @ Q.T
    pts = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, n)
    return pts


# ---------------------------------------------------------------------------
# diffeomorphisms


@dataclass(frozen=True)
class Diffeomorphism:
    """A frequency-cone diffeomorphism with coded inverse and Jacobian.

    `forward`/`det` take and return point arrays (P, n); `inverse` returns
    ``(points, ok)`` where `ok` flags targets the Newton solve resolved to
    a genuine preimage.
    """

    name: str
    dimension: int
    forward: callable
    inverse: callable
    det: callable
    homogeneous: bool
    domain: dict

    def certify(self, samples: np.ndarray) -> dict:
        psi = self.forward(samples)
        back, ok = self.inverse(psi)
        scale = np.maximum(np.linalg.norm(samples, axis=1), 1.0)
        inv_res = float(np.max(np.linalg.norm(back - samples, axis=1) / scale))
        dets = np.abs(self.det(samples))
        cert = {
            "inverse_ok": bool(np.all(ok)),
            "inverse_residual": inv_res,
            "det_min": float(np.min(dets)),
            "det_max": float(np.max(dets)),
        }
        if self.homogeneous:
            two = self.forward(2.0 * samples)
            ref = np.maximum(np.linalg.norm(two, axis=1), 1e-30)
            cert["homogeneity_residual"] = float(
                np.max(np.linalg.norm(two - 2.0 * psi, axis=1) / ref)
            )
        return cert


def identity_diffeomorphism(n: int) -> Diffeomorphism:
    return Diffeomorphism(
        "identity",
        n,
        lambda pts: np.array(pts, dtype=float, copy=True),
        lambda pts: (np.array(pts, dtype=float, copy=True), np.ones(len(pts), bool)),
        lambda pts: np.ones(len(pts)),
        homogeneous=True,
        domain={"kind": "all"},
    )


def _newton_scalar(g, dg, x0, target, iters=60, rtol=1e-13):
    """Solve g(x) = target componentwise by damped Newton; x0 array start."""
    x = np.array(x0, dtype=float)
    scale = np.maximum(np.abs(target), 1.0)
    ok = np.ones_like(x, dtype=bool)
    for _ in range(iters):
        f = g(x) - target
        if np.all(np.abs(f) <= rtol * scale):
            break
        d = dg(x)
        bad = np.abs(d) < 1e-14
        ok &= ~bad
        step = f / np.where(bad, 1.0, d)
        step = np.clip(step, -0.5 * scale ** (1.0), 0.5 * scale)
        x = x - np.where(bad, 0.0, step)
    ok &= np.abs(g(x) - target) <= 1e3 * rtol * scale
    return x, ok


def case_i_diffeomorphism(symbol: Symbol, sign: float, domain: dict) -> Diffeomorphism:
    """psi(xi) = (xi', (sign * a(xi))^{1/m}) on a cone where sign*a > 0."""
    n, m = symbol.dimension, symbol.order
    inv_m = 1.0 / m

    def forward(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        comps = tuple(pts[:, j] for j in range(n))
        val = sign * symbol.fn(*comps)
        out = pts.copy()
        out[:, -1] = np.where(val > 0.0, val, np.nan) ** inv_m
        return out

    a_axis = float(
        symbol.at(np.eye(n)[-1][None, :])[0]
    )
    axis_scale = (sign * a_axis) ** inv_m if sign * a_axis > 0 else 1.0

    def inverse(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        eta_n = pts[:, -1]
        feasible = eta_n > 0.0
        target = np.where(feasible, eta_n, 1.0) ** m
        fixed = tuple(pts[:, j] for j in range(n - 1))

        def g(x):
            return sign * symbol.fn(*fixed, x)

        def dg(x):
            return sign * symbol.grad_fn(*fixed, x)[-1]

        x0 = eta_n / axis_scale
        x, ok = _newton_scalar(g, dg, x0, target)
        out = pts.copy()
        out[:, -1] = x
        return out, ok & feasible

    def det(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        comps = tuple(pts[:, j] for j in range(n))
        val = sign * symbol.fn(*comps)
        dn = sign * symbol.grad_fn(*comps)[-1]
        return inv_m * val ** (inv_m - 1.0) * dn

    return Diffeomorphism(
        f"case-i[{symbol.name}]", n, forward, inverse, det,
        homogeneous=symbol.homogeneous, domain=domain,
    )


def case_ii_diffeomorphism(symbol: Symbol, domain: dict) -> Diffeomorphism:
    """psi(xi) = (a(xi) |xi_n|^{1-m}, xi_2, ..., xi_n) on a cone off the
    hyperplane xi_n = 0, for symbols with d_1 a != 0 there."""
    n, m = symbol.dimension, symbol.order
    if n < 2:
        raise ValueError("the nonelliptic normal form needs dimension >= 2")

    def forward(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        comps = tuple(pts[:, j] for j in range(n))
        out = pts.copy()
        out[:, 0] = symbol.fn(*comps) * np.abs(pts[:, -1]) ** (1.0 - m)
        return out

    def inverse(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        target = pts[:, 0] * np.abs(pts[:, -1]) ** (m - 1.0)
        rest = tuple(pts[:, j] for j in range(1, n))

        def g(x):
            return symbol.fn(x, *rest)

        def dg(x):
            return symbol.grad_fn(x, *rest)[0]

        x, ok = _newton_scalar(g, dg, pts[:, 0], target)
        out = pts.copy()
        out[:, 0] = x
        return out, ok

    def det(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        comps = tuple(pts[:, j] for j in range(n))
        return symbol.grad_fn(*comps)[0] * np.abs(pts[:, -1]) ** (1.0 - m)

    return Diffeomorphism(
        f"case-ii[{symbol.name}]", n, forward, inverse, det,
        homogeneous=symbol.homogeneous, domain=domain,
    )


# ---------------------------------------------------------------------------
# applying the transforms


def _data_radius(grid, spectrum) -> float:
    mags = np.abs(spectrum)
    populated = mags > POPULATED_RTOL * mags.max()
    if not populated.any():
        return 0.0
    r2 = sum(x * x for x in grid.xi_mesh())
    return float(np.sqrt(np.max(np.where(populated, r2, 0.0))))


def _gather_warped(grid, spectrum, cut_vals, targets, order):
    vals, ok = warp_spectrum(grid, spectrum, targets, order=order)
    margin = interpolable_margin(grid, order)
    reach = _data_radius(grid, spectrum) + margin
    carrying = np.linalg.norm(targets, axis=1) <= reach
    offenders = (~ok) & carrying & (cut_vals > 1e-12)
    if offenders.any():
        k = int(np.argmax(offenders))
        raise WarpOutOfBandError(
            f"{int(offenders.sum())} warp targets with active cutoff leave the "
            f"interpolable interior, e.g. {np.round(targets[k], 4).tolist()}"
        )
    return vals


def transform_apply(diffeo: Diffeomorphism, cutoff, u: Field, order: int = 6) -> Field:
    """F^{-1}[ gamma(xi) u^(psi(xi)) ] with analytically evaluated gamma."""
    grid = u.grid
    spec = u.spectrum()
    gamma = _cutoff_array(grid, cutoff)
    active = np.flatnonzero(gamma.ravel() != 0.0)
    out = np.zeros_like(spec).ravel()
    if active.size:
        pts = _mode_points(grid, active)
        targets = diffeo.forward(pts)
        finite = np.all(np.isfinite(targets), axis=1)
        gv = gamma.ravel()[active]
        if (~finite & (gv > 1e-12)).any():
            raise WarpOutOfBandError("warp map undefined where the cutoff is active")
        targets[~finite] = 0.0
        vals = _gather_warped(grid, spec, gv, targets, order)
        vals[~finite] = 0.0
        out[active] = gv * vals
    return Field.from_spectrum(grid, out.reshape(grid.shape))


def transform_inverse_apply(
    diffeo: Diffeomorphism, cutoff, u: Field, order: int = 6
) -> Field:
    """F^{-1}[ gamma~(xi) u^(psi^{-1}(xi)) ] with gamma~ = gamma o psi^{-1},
    evaluated by resolving psi^{-1} on candidate modes with Newton."""
    grid = u.grid
    spec = u.spectrum()
    candidates = _image_candidates(grid, diffeo, cutoff)
    out = np.zeros_like(spec).ravel()
    if candidates.size:
        eta = _mode_points(grid, candidates)
        back, ok = diffeo.inverse(eta)
        back[~ok] = 0.0
        gval = cutoff.at(back) * ok
        live = gval > 0.0
        if live.any():
            idx = candidates[live]
            vals = _gather_warped(grid, spec, gval[live], back[live], order)
            out[idx] = gval[live] * vals
    return Field.from_spectrum(grid, out.reshape(grid.shape))


def transform_adjoint_apply(
    diffeo: Diffeomorphism, cutoff, v: Field, order: int = 6
) -> Field:
    """Exact adjoint of :func:`transform_apply` on the discrete grid."""
    grid = v.grid
    spec = v.spectrum()
    gamma = _cutoff_array(grid, cutoff)
    active = np.flatnonzero(gamma.ravel() != 0.0)
    if not active.size:
        return Field.from_spectrum(grid, np.zeros_like(spec))
    pts = _mode_points(grid, active)
    targets = diffeo.forward(pts)
    finite = np.all(np.isfinite(targets), axis=1)
    targets[~finite] = 0.0
    coeffs = gamma.ravel()[active] * spec.ravel()[active]
    coeffs[~finite] = 0.0
    adj = warp_adjoint(grid, coeffs, targets, order=order)
    return Field.from_spectrum(grid, adj)


def transform_inverse_adjoint_apply(
    diffeo: Diffeomorphism, cutoff, v: Field, order: int = 6
) -> Field:
    """Exact adjoint of :func:`transform_inverse_apply` on the discrete grid."""
    grid = v.grid
    spec = v.spectrum()
    candidates = _image_candidates(grid, diffeo, cutoff)
    if not candidates.size:
        return Field.from_spectrum(grid, np.zeros_like(spec))
    eta = _mode_points(grid, candidates)
    back, ok = diffeo.inverse(eta)
    back[~ok] = 0.0
    gval = cutoff.at(back) * ok
    live = gval > 0.0
    if not live.any():
        return Field.from_spectrum(grid, np.zeros_like(spec))
    coeffs = gval[live] * spec.ravel()[candidates[live]]
    adj = warp_adjoint(grid, coeffs, back[live], order=order)
    return Field.from_spectrum(grid, adj)


def _cutoff_array(grid, cutoff) -> np.ndarray:
    vals = np.asarray(cutoff(*grid.xi_mesh()), dtype=float)
    return np.broadcast_to(vals, grid.shape)


def _mode_points(grid, flat_idx) -> np.ndarray:
    unraveled = np.unravel_index(flat_idx, grid.shape)
    return np.stack(
        [grid.xi_axis(j)[unraveled[j]] for j in range(grid.ndim)], axis=-1
    )


def _image_candidates(grid, diffeo, cutoff) -> np.ndarray:
    """Flat mode indices inside a bounding box of psi(supp gamma)."""
    sup = cutoff.support
    if "direction" in sup:
        nyq = min(grid.nyquist)
        pts = cone_samples(
            sup["direction"], sup["halfangle"], (nyq * 1e-3, nyq), radial=17
        )
    else:
        nyq = min(grid.nyquist)
        r = min(2.0 * sup.get("radius", nyq), nyq)
        pts = cone_samples(
            np.eye(grid.ndim)[-1], np.pi * 0.999, (r * 1e-3, r), radial=17
        ) if grid.ndim > 1 else np.linspace(-r, r, 65)[:, None]
    keep = cutoff.at(pts) > 0.0
    pts = pts[keep]
    img = diffeo.forward(pts)
    img = img[np.all(np.isfinite(img), axis=1)]
    margin = interpolable_margin(grid)
    lo = img.min(axis=0) - margin
    hi = img.max(axis=0) + margin
    mesh = grid.xi_mesh()
    inside = np.ones(grid.shape, dtype=bool)
    for j in range(grid.ndim):
        inside &= (mesh[j] >= lo[j]) & (mesh[j] <= hi[j])
    return np.flatnonzero(inside.ravel())


# ---------------------------------------------------------------------------
# reduction plans


@dataclass(frozen=True)
class ReductionPlan:
    """Everything needed to move one conic piece onto a model problem."""

    case: str  # "i" or "ii"
    symbol: Symbol
    rotated_symbol: Symbol
    rotation: np.ndarray
    sign: float
    diffeo: Diffeomorphism
    cutoff: Cutoff
    sigma: Symbol
    rho: callable
    zeta: callable
    quotient: callable
    certificate: dict

    def report(self) -> dict:
        return dict(self.certificate)

    def apply(self, u: Field) -> Field:
        """I_{psi,gamma} u in the rotated frame."""
        return transform_apply(self.diffeo, self.cutoff, u)

    def apply_inverse(self, u: Field) -> Field:
        return transform_inverse_apply(self.diffeo, self.cutoff, u)


def build_reduction(
    symbol: Symbol,
    direction,
    halfangle: float = np.pi / 6.0,
    band: tuple[float, float] = (0.25, 8.0),
    zeta=None,
    quotient_cap: float = 1e6,
    tol: float = 1e-8,
) -> ReductionPlan:
    """Rotate `direction` to the last axis and build the case (i)/(ii)
    normal-form plan on a cone there, certifying its hypotheses by sampling.

    zeta defaults to |xi|^{(m-1)/2}, the smoothing multiplier of the global
    theorems; the model-side rho is always |eta_n|^{(m-1)/2}.
    """
    n = symbol.dimension
    omega = np.asarray(direction, dtype=float)
    omega = omega / np.linalg.norm(omega)
    g_omega = symbol.principal_gradient_at(omega[None, :])[0]
    scale = float(np.linalg.norm(g_omega))
    sphere_scale = float(
        np.max(np.linalg.norm(symbol.principal_gradient_at(sphere_points(n, 64)), axis=1))
    )
    if scale <= tol * max(sphere_scale, 1e-30):
        raise NonDispersiveDirectionError(
            f"principal gradient vanishes along {omega.tolist()}"
        )

    Q = rotation_to_axis(omega) if n > 1 else np.array([[omega[0]]])
    rotated = compose_linear(symbol, Q) if n > 1 else (
        symbol if omega[0] > 0 else compose_linear(symbol, Q)
    )
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    g = rotated.principal_gradient_at(e_n[None, :])[0]

    if abs(g[-1]) > tol * scale:
        case = "i"
    else:
        case = "ii"
        j = int(np.argmax(np.abs(g[:-1])))
        if j != 0:
            P = np.eye(n)
            P[[0, j], [0, j]] = 0.0
            P[0, j] = P[j, 0] = 1.0
            Q = Q @ P
            rotated = compose_linear(symbol, Q)

    m = symbol.order
    cutoff = conic_cutoff(e_n if n > 1 else np.array([1.0]), halfangle)
    samples = cone_samples(e_n if n > 1 else np.array([1.0]), halfangle, band)
    comps = tuple(samples[:, j] for j in range(n))
    a_vals = rotated.fn(*comps)
    domain = {
        "direction": omega.tolist(),
        "halfangle": float(halfangle),
        "band": [float(band[0]), float(band[1])],
    }

    if case == "i":
        sign = 1.0 if float(rotated.at(e_n[None, :])[0]) > 0.0 else -1.0
        floor = float(np.min(sign * a_vals))
        if floor <= 0.0:
            raise ValueError(
                "symbol changes sign on the cone; shrink the half-angle"
            )
        diffeo = case_i_diffeomorphism(rotated, sign, domain)
        base = model_symbol("elliptic", m, n)
        if sign > 0:
            sigma = base
        else:
            sigma = Symbol(
                f"-{base.name}", n, m,
                lambda *c: -base.fn(*c),
                lambda *c: tuple(-gg for gg in base.grad_fn(*c)),
                lambda *c: -base.principal_fn(*c),
                lambda *c: tuple(-gg for gg in base.principal_grad_fn(*c)),
                homogeneous=base.homogeneous,
                singular_axes=base.singular_axes,
            )
    else:
        sign = 1.0
        floor = float(np.min(np.abs(rotated.grad_fn(*comps)[0])))
        if floor <= tol * scale:
            raise NonDispersiveDirectionError(
                "transverse derivative vanishes on the cone in case (ii)"
            )
        diffeo = case_ii_diffeomorphism(rotated, domain)
        sigma = model_symbol("nonelliptic", m, n)

    expo = 0.5 * (m - 1.0)

    def rho(*c):
        return np.abs(c[-1]) ** expo

    if zeta is None:

        def zeta(*c):  # noqa: F811 - deliberate default binding
            r2 = sum(x * x for x in c)
            return r2 ** (0.5 * expo)

    def quotient(pts):
        pts = np.atleast_2d(pts)
        comps = tuple(pts[:, j] for j in range(n))
        gam = cutoff(*comps)
        zet = zeta(*comps)
        down = rho(*(diffeo.forward(pts)[:, j] for j in range(n)))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = gam * zet / down
        return np.where(gam > 0.0, q, 0.0)

    cert = diffeo.certify(samples)
    sig_vals = sigma.fn(*(diffeo.forward(samples)[:, j] for j in range(n)))
    a_scale = float(np.max(np.abs(a_vals))) + 1e-30
    conj_residual = float(np.max(np.abs(a_vals - sig_vals)) / a_scale)
    q_vals = quotient(samples)
    q_sup = float(np.max(np.abs(q_vals)))
    if not np.isfinite(q_sup) or q_sup > quotient_cap:
        raise QuotientUnboundedError(
            f"quotient reaches {q_sup:.3g} on cone samples (cap {quotient_cap:.3g})"
        )

    certificate = {
        "case": case,
        "direction": omega.tolist(),
        "sign": sign,
        "halfangle": float(halfangle),
        "band": [float(band[0]), float(band[1])],
        "symbol": symbol.name,
        "normal_form": sigma.name,
        "conjugation_residual": conj_residual,
        "quotient_sup": q_sup,
        "det_range": [cert["det_min"], cert["det_max"]],
        "inverse_residual": cert["inverse_residual"],
        "value_floor_on_cone": floor,
        **(
            {"homogeneity_residual": cert["homogeneity_residual"]}
            if "homogeneity_residual" in cert
            else {}
        ),
    }
    if conj_residual > tol:
        raise ValueError(
            f"normal form mismatch: relative residual {conj_residual:.3g}"
        )

    return ReductionPlan(
        case, symbol, rotated, Q, sign, diffeo, cutoff, sigma,
        rho, zeta, quotient, certificate,
    )


# ---------------------------------------------------------------------------
# weighted operator norms


def operator_norm_weighted(
    op,
    weight,
    grid,
    band: tuple[float, float],
    adjoint=None,
    trials: int = 8,
    seed: int = 0,
    max_iterations: int = 50,
    rtol: float = 1e-4,
    sigma: float = 0.25,
    axis_clearance: dict | None = None,
) -> ConstantReport:
    """Estimate  sup ||w * op(u)|| / ||w * u||  over band-limited data.

    Always reports the ensemble maximum over random draws; when `adjoint`
    is supplied, sharpens it by a power ascent that re-projects every
    iterate onto the band annulus, so the operator only ever acts on
    members of the certified class.  The returned constant is the largest
    weighted Rayleigh quotient observed at a band-limited field, which
    keeps it a certified lower bound for the class norm and keeps the
    warm-start ensemble value as a floor.
    """
    if trials < 8:
        raise ValueError("trials must be at least 8")
    w = weight.evaluate(grid) if isinstance(weight, Weight) else np.asarray(weight)
    rng = np.random.default_rng(seed)

    def wnorm(values):
        return grid.norm(w * values)

    fields = [
        random_band_ensemble(
            grid.ndim, band, rng, sigma=sigma, axis_clearance=axis_clearance
        ).field(grid)
        for _ in range(trials)
    ]

    ua, ub = fields[0], fields[1]
    lhs = op(Field(grid, ua.values + 2.0 * ub.values))
    rhs = op(ua).values + 2.0 * op(ub).values
    lin = grid.norm(lhs.values - rhs) / max(grid.norm(rhs), 1e-30)
    if lin > 1e-8:
        raise ValueError(f"operator fails the linearity check ({lin:.3g})")

    ratios = []
    for f in fields:
        denom = wnorm(f.values)
        ratios.append(wnorm(op(f).values) / denom if denom > 0 else 0.0)
    ratios = np.asarray(ratios)
    best = int(np.argmax(ratios))
    ensemble_max = float(ratios[best])

    resolution = {
        "shape": list(grid.shape),
        "lengths": list(grid.lengths),
        "band": [float(band[0]), float(band[1])],
        "trials": trials,
        "seed": seed,
    }

    if adjoint is None:
        return ConstantReport(
            ensemble_max, "ensemble-max",
            {"trial_ratios": ratios.tolist()},
            resolution, ensemble_max=ensemble_max,
        )

    pa = adjoint(op(ua))
    pair = abs(
        complex(grid.inner(op(ua).values, ub.values))
        - complex(grid.inner(ua.values, adjoint(ub).values))
    )
    pair_scale = max(grid.norm(pa.values) * grid.norm(ub.values), 1e-30)
    if pair / pair_scale > 1e-8:
        raise ValueError(f"adjoint fails the pairing check ({pair / pair_scale:.3g})")

    r = np.sqrt(sum(x * x for x in grid.xi_mesh()))
    band_mask = (r >= band[0]) & (r <= band[1])

    def project(values):
        return grid.inverse(grid.forward(values) * band_mask)

    v = project(fields[best].values)
    history = []
    lam_best = ensemble_max
    lam_prev = 0.0
    converged = False
    for _ in range(max_iterations):
        denom = wnorm(v)
        if denom == 0.0:
            converged = True
            break
        y = op(Field(grid, v))
        lam = wnorm(y.values) / denom
        history.append(float(lam))
        lam_best = max(lam_best, lam)
        z = adjoint(Field(grid, (w * w) * y.values))
        v_next = project(z.values)
        nrm = grid.norm(v_next)
        if nrm == 0.0:
            converged = True
            break
        v = v_next / nrm
        if abs(lam - lam_prev) <= rtol * max(lam, 1e-30):
            converged = True
            break
        lam_prev = lam
    constant = lam_best
    return ConstantReport(
        float(constant), "power-iteration",
        {"rayleigh": history, "trial_ratios": ratios.tolist()},
        resolution, ensemble_max=ensemble_max, converged=converged,
        flags={} if converged else {"non_converged": True},
    )
