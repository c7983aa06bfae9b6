"""Local polynomial interpolation of spectra at warped frequency targets.

The canonical-transform machinery reads a spectrum at off-grid points
psi(xi).  We evaluate with a tensor-product Lagrange stencil of fixed order
(six points per axis by default) on the monotone (fftshifted) layout.
Targets whose full stencil does not fit inside the frequency box are
assigned zero; callers decide whether that is an error.

The scatter counterpart `warp_adjoint` is the exact transpose of the gather
and is what power iteration on warp operators uses.
"""

from __future__ import annotations

import numpy as np

__all__ = ["warp_spectrum", "warp_adjoint", "interpolable_margin"]

_CHUNK = {1: 1 << 18, 2: 1 << 16, 3: 1 << 13}


def _axis_geometry(grid, j):
    n = grid.shape[j]
    dxi = 2.0 * np.pi / grid.lengths[j]
    lo = -0.5 * n * dxi  # first frequency in shifted layout
    return n, dxi, lo


def interpolable_margin(grid, order: int = 6) -> float:
    """Distance from the frequency-box edge inside which targets resolve."""
    return (order / 2 + 1) * max(
        2.0 * np.pi / L for L in grid.lengths
    )


def _stencil_weights(u: np.ndarray, order: int) -> np.ndarray:
    """Lagrange basis on nodes 0..order-1 evaluated at fractional u, (P, order)."""
    P = u.shape[0]
    w = np.empty((P, order))
    for i in range(order):
        num = np.ones(P)
        den = 1.0
        for k in range(order):
            if k == i:
                continue
            num *= u - k
            den *= i - k
        w[:, i] = num / den
    return w


def _prepare(grid, targets, order):
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    n = grid.ndim
    if targets.shape[1] != n:
        raise ValueError(f"targets must be (P, {n}), got {targets.shape}")
    half = order // 2
    bases, weights, ok = [], [], np.ones(targets.shape[0], dtype=bool)
    for j in range(n):
        N, dxi, lo = _axis_geometry(grid, j)
        t = (targets[:, j] - lo) / dxi
        b = np.floor(t).astype(np.int64) - (half - 1)
        good = (b >= 0) & (b + order - 1 <= N - 1)
        ok &= good
        b = np.clip(b, 0, max(N - order, 0))
        bases.append(b)
        weights.append(_stencil_weights(t - b, order))
    return bases, weights, ok


def warp_spectrum(grid, spectrum, targets, order: int = 6):
    """Sample `spectrum` (FFT layout) at arbitrary frequency targets.

    Returns ``(values, in_range)`` where `values[p]` is zero whenever
    ``in_range[p]`` is False.
    """
    n = grid.ndim
    bases, weights, ok = _prepare(grid, targets, order)
    shifted = np.fft.fftshift(np.asarray(spectrum))
    flat = shifted.ravel()
    P = bases[0].shape[0]
    out = np.zeros(P, dtype=flat.dtype if np.iscomplexobj(flat) else np.complex128)
    offs = np.arange(order, dtype=np.int64)
    chunk = _CHUNK[n]
    for lo in range(0, P, chunk):
        sl = slice(lo, min(lo + chunk, P))
        if n == 1:
            idx = bases[0][sl, None] + offs[None, :]
            out[sl] = np.einsum("pi,pi->p", weights[0][sl], flat[idx])
        elif n == 2:
            N1 = grid.shape[1]
            idx = (
                (bases[0][sl, None, None] + offs[None, :, None]) * N1
                + bases[1][sl, None, None]
                + offs[None, None, :]
            )
            out[sl] = np.einsum(
                "pi,pj,pij->p", weights[0][sl], weights[1][sl], flat[idx]
            )
        else:
            N1, N2 = grid.shape[1], grid.shape[2]
            idx = (
                (bases[0][sl, None, None, None] + offs[None, :, None, None]) * N1
                + bases[1][sl, None, None, None]
                + offs[None, None, :, None]
            ) * N2 + (bases[2][sl, None, None, None] + offs[None, None, None, :])
            out[sl] = np.einsum(
                "pi,pj,pk,pijk->p",
                weights[0][sl],
                weights[1][sl],
                weights[2][sl],
                flat[idx],
            )
    out[~ok] = 0.0
    return out, ok


def warp_adjoint(grid, coeffs, targets, order: int = 6) -> np.ndarray:
    """Exact transpose of :func:`warp_spectrum`: scatter-add coefficients
    back onto the grid.  Returns a spectrum-shaped array in FFT layout."""
    n = grid.ndim
    bases, weights, ok = _prepare(grid, targets, order)
    coeffs = np.where(ok, np.asarray(coeffs), 0.0)
    flat = np.zeros(int(np.prod(grid.shape)), dtype=np.complex128)
    offs = np.arange(order, dtype=np.int64)
    P = bases[0].shape[0]
    chunk = _CHUNK[n]
    for lo in range(0, P, chunk):
        sl = slice(lo, min(lo + chunk, P))
        if n == 1:
            idx = bases[0][sl, None] + offs[None, :]
            np.add.at(flat, idx.ravel(), (weights[0][sl] * coeffs[sl, None]).ravel())
        elif n == 2:
            N1 = grid.shape[1]
            idx = (
                (bases[0][sl, None, None] + offs[None, :, None]) * N1
                + bases[1][sl, None, None]
                + offs[None, None, :]
            )
            contrib = np.einsum("pi,pj,p->pij", weights[0][sl], weights[1][sl], coeffs[sl])
            np.add.at(flat, idx.ravel(), contrib.ravel())
        else:
            N1, N2 = grid.shape[1], grid.shape[2]
            idx = (
                (bases[0][sl, None, None, None] + offs[None, :, None, None]) * N1
                + bases[1][sl, None, None, None]
                + offs[None, None, :, None]
            ) * N2 + (bases[2][sl, None, None, None] + offs[None, None, None, :])
            contrib = np.einsum(
                "pi,pj,pk,p->pijk",
                weights[0][sl],
                weights[1][sl],
                weights[2][sl],
                coeffs[sl],
            )
            np.add.at(flat, idx.ravel(), contrib.ravel())
    return np.fft.ifftshift(flat.reshape(grid.shape))
