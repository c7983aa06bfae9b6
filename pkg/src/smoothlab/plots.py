"""Figure rendering for experiment reports.

Every function takes the JSON payload a runner wrote and renders png
figures next to the delimited output.  The Agg backend is forced so the
CLI works headless; nothing here recomputes, it only draws what the
report already contains.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_figures"]


def _save(fig, out_dir, base, suffix) -> str:
    path = os.path.join(out_dir, f"{base}_{suffix}.png")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _ladder_rows(payload):
    ladder = payload.get("ladder")
    if ladder is None:
        ladder = payload.get("report", {}).get("ladder", [])
    return list(ladder or [])


def _plot_ladder(payload, out_dir, base):
    rows = _ladder_rows(payload)
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    if rows:
        horizons = [r["horizon"] for r in rows]
        constants = [r["constant"] for r in rows]
        ax.plot(horizons, constants, "o-", color="tab:blue")
        for r, x, y in zip(rows, horizons, constants):
            ax.annotate(f"N={r['points']}", (x, y), textcoords="offset points",
                        xytext=(4, 4), fontsize=8)
        ax.set_xscale("log", base=2)
    ax.set_xlabel("window half-length T")
    ax.set_ylabel("estimated constant")
    title = payload.get("name", "ladder")
    variation = payload.get("report", {}).get("flags", {}).get("ladder_variation")
    if variation is None:
        variation = payload.get("variation")
    if variation is not None:
        title = f"{title}  (variation {100.0 * variation:.1f}%)"
    ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    return [_save(fig, out_dir, base, "ladder")]


def _plot_kernel(payload, out_dir, base):
    rows = payload.get("rows", [])
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    shifts = sorted({r["s"] for r in rows})
    for s in shifts:
        eps = [r["epsilon"] for r in rows if r["s"] == s]
        sups = [r["sup_abs_k"] for r in rows if r["s"] == s]
        order = sorted(range(len(eps)), key=lambda i: eps[i])
        ax.plot([eps[i] for i in order], [sups[i] for i in order], "o-",
                label=f"s = {s:g}")
    ax.set_xscale("log")
    ax.set_xlabel("resolvent regularization")
    ax.set_ylabel("sup |k|")
    ax.set_title(payload.get("name", "kernel"), fontsize=10)
    if shifts:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return [_save(fig, out_dir, base, "kernel")]


def _plot_identity(payload, out_dir, base):
    rows = payload.get("rows", [])
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for key, marker in (("cut", "o"), ("id", "s"), ("cnon", "^")):
        ax.semilogy([r["field"] for r in rows], [max(r[key], 1e-18) for r in rows],
                    marker, label=key, markersize=4)
    ax.set_xlabel("trial field")
    ax.set_ylabel("relative residual")
    ax.set_title(payload.get("name", "identities"), fontsize=10)
    if rows:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return [_save(fig, out_dir, base, "residuals")]


def _plot_reduction(payload, out_dir, base):
    paths = _plot_ladder({"ladder": payload.get("direct", {}).get("ladder", []),
                          "name": payload.get("name", "reduction")},
                         out_dir, base)
    cones = payload.get("cones", [])
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    if cones:
        products = [c["product"] for c in cones]
        ax.bar(range(len(products)), products, color="tab:orange",
               label="per-cone bound")
    direct = payload.get("direct", {}).get("constant")
    composite = payload.get("composite")
    if direct is not None:
        ax.axhline(direct, color="tab:blue", linestyle="--", label="direct")
    if composite is not None:
        ax.axhline(composite, color="tab:red", linestyle=":", label="composite")
    ax.set_xlabel("cone")
    ax.set_ylabel("constant")
    ax.set_title(payload.get("name", "reduction"), fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3, axis="y")
    paths.append(_save(fig, out_dir, base, "cones"))
    return paths


def _plot_combined(payload, out_dir, base):
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    labels = ["joint", "quadrature sum", "sum of parts"]
    values = [payload.get("joint"), payload.get("quadratic_sum"),
              payload.get("sum_of_parts")]
    pairs = [(l, v) for l, v in zip(labels, values) if v is not None]
    if pairs:
        ax.bar([p[0] for p in pairs], [p[1] for p in pairs],
               color=["tab:blue", "tab:orange", "tab:green"][: len(pairs)])
    ax.set_ylabel("estimated constant")
    ax.set_title(payload.get("name", "combined"), fontsize=10)
    ax.grid(True, alpha=0.3, axis="y")
    return [_save(fig, out_dir, base, "combined")]


def render_figures(payload: dict, out_dir, base=None) -> list:
    """Render the figures for one report payload; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    if base is None:
        base = payload.get("name", "report")
    experiment = payload.get("experiment", "")
    if experiment == "kernel":
        return _plot_kernel(payload, out_dir, base)
    if experiment == "identity-suite":
        return _plot_identity(payload, out_dir, base)
    if experiment == "reduction":
        return _plot_reduction(payload, out_dir, base)
    if experiment == "combined":
        return _plot_combined(payload, out_dir, base)
    return _plot_ladder(payload, out_dir, base)
