"""Config-driven experiment runners.

Each experiment kind maps a validated configuration to one numerical
routine, evaluates the configured pass/fail checks on the result, and
writes a JSON report plus delimited plot data.  Runners are deterministic:
a fixed configuration and seed reproduce byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .canonical import (
    analytic_cone_cutoff,
    build_reduction,
    transform_apply,
    transform_inverse_apply,
)
from .estimates import (
    EstimateSpec,
    Resolution,
    SpectralMultiplier,
    combined_estimate,
    default_directions,
    estimate_constant,
    resolve_multiplier,
    verify_model,
    verify_via_reduction,
)
from .evolution import kernel_k
from .fields import random_band_ensemble
from .grids import Field, UniformGrid, multiplier_apply
from .reports import write_report
from .symbols import make_symbol

__all__ = ["ExperimentResult", "run_experiment"]


@dataclass(frozen=True)
class ExperimentResult:
    """Outcome of one configured experiment.

    `passed` reflects the configured checks only; `flags` carries
    computation warnings (non-convergence, ladder instability) that do not
    fail the run unless the caller promotes them.
    """

    name: str
    experiment: str
    passed: bool
    checks: tuple
    flags: dict
    report_path: str
    payload: dict

    @property
    def flagged(self) -> bool:
        return any(bool(v) for v in self.flags.values())


def _check(name, passed, observed) -> dict:
    return {"check": name, "passed": bool(passed), "observed": observed}


def _estimate_checks(checks, constant, stable, converged):
    results = []
    if checks.get("ladder_stable"):
        results.append(_check("ladder_stable", stable, stable))
    if checks.get("converged"):
        results.append(_check("converged", converged, converged))
    if checks.get("max_constant") is not None:
        cap = checks["max_constant"]
        results.append(_check("max_constant", constant <= cap, constant))
    return results


def _build_estimate_spec(experiment, p):
    sym = make_symbol(p["symbol"], p["dimension"])
    if experiment == "homogeneous":
        kind = "homogeneous"
    elif experiment == "inhomogeneous":
        kind = "inhomogeneous"
    else:
        kind = "time-local-inhomogeneous" if p["forcing"] else "time-local-homogeneous"
    inhom = kind in ("inhomogeneous", "time-local-inhomogeneous")
    return EstimateSpec(
        kind,
        sym,
        p["smoothing"],
        p["s"],
        p["horizon"],
        p["band"],
        input_multiplier=p.get("input_multiplier") if inhom else None,
        weight_axis=p["weight_axis"],
        source_span=p.get("source_span") if inhom else None,
        bump_width=p["bump_width"],
        x_spread=p["x_spread"],
        axis_clearance=p["axis_clearance"],
    )


def _run_estimate(experiment, p, checks, seed):
    spec = _build_estimate_spec(experiment, p)
    resolution = Resolution(p["points"], p["length"], p["dt"])
    report = estimate_constant(
        spec,
        resolution,
        ladder=p["ladder"],
        trials=p["trials"],
        seed=seed,
        method=p["method"],
        rtol=p["rtol"],
        max_iterations=p["max_iterations"],
        stability_threshold=p["stability_threshold"],
    )
    payload = {
        "constant": report.constant,
        "report": report.to_dict(),
        "ladder": [dict(e) for e in report.ladder],
    }
    stable = bool(report.flags.get("ladder_stable", True))
    results = _estimate_checks(checks, report.constant, stable, report.converged)
    flags = {
        "non_converged": not report.converged,
        "ladder_unstable": not stable,
    }
    return payload, results, flags


def _run_model(p, checks, seed):
    sym = make_symbol(p["symbol"], 1) if p["symbol"] else None
    out = verify_model(
        p["form"],
        Resolution(p["points"], p["length"], p["dt"]),
        p["horizon"],
        p["band"],
        m=p["m"],
        dimension=p["dimension"],
        s=p["s"],
        symbol=sym,
        source_span=p["source_span"],
        trials=p["trials"],
        seed=seed + p["seed_shift"],
        ladder=p["ladder"],
        stability_threshold=p["stability_threshold"],
        bump_width=p["bump_width"],
        x_spread=p["x_spread"],
    )
    converged = bool(out.get("report", {}).get("converged", True))
    results = _estimate_checks(checks, out["constant"], out["stable"], converged)
    flags = {"non_converged": not converged, "ladder_unstable": not out["stable"]}
    return out, results, flags


def _run_reduction(p, checks, seed):
    sym = make_symbol(p["symbol"], p["dimension"])
    spec = EstimateSpec(
        p["kind"],
        sym,
        p["smoothing"],
        p["s"],
        p["horizon"],
        p["band"],
        bump_width=p["bump_width"],
        x_spread=p["x_spread"],
        axis_clearance=p["axis_clearance"],
    )
    model_resolution = None
    if p["model_points"] is not None or p["model_length"] is not None:
        model_resolution = Resolution(
            p["model_points"] or p["points"],
            p["model_length"] or p["length"],
            p["dt"],
        )
    directions = None
    if p["direction_count"] is not None:
        directions = default_directions(p["dimension"], p["direction_count"])
    out = verify_via_reduction(
        spec,
        Resolution(p["points"], p["length"], p["dt"]),
        directions=directions,
        low_radius=p["low_radius"],
        halfangle=p["halfangle"],
        ladder=p["ladder"],
        trials=p["trials"],
        seed=seed,
        cert_trials=p["cert_trials"],
        model_trials=p["model_trials"],
        model_resolution=model_resolution,
        ratio_tol=p["ratio_tol"],
        method=p["method"],
        rtol=p["rtol"],
        max_iterations=p["max_iterations"],
    )
    results = []
    if checks.get("bound_dominates"):
        ok = out["flags"]["bound_dominates"]
        results.append(_check("bound_dominates", ok, out["ratio"]))
    if checks.get("min_ratio") is not None:
        results.append(
            _check("min_ratio", out["ratio"] >= checks["min_ratio"], out["ratio"])
        )
    direct_stable = bool(out["direct"]["flags"].get("ladder_stable", True))
    if checks.get("ladder_stable"):
        results.append(_check("ladder_stable", direct_stable, direct_stable))
    flags = {
        "ladder_unstable": not direct_stable,
        "bound_fails": not out["flags"]["bound_dominates"],
    }
    return out, results, flags


def _run_kernel(p, checks, seed):
    sym = make_symbol(p["symbol"], 1)
    grid = UniformGrid((p["points"],), (p["length"],))
    rows = []
    for s in p["shifts"]:
        for eps in p["epsilons"]:
            out = kernel_k(sym, s, eps, grid, pieces=p["pieces"])
            sup = max(out["+"]["sup_abs"], out["-"]["sup_abs"])
            row = {"epsilon": eps, "s": s, "sup_abs_k": sup}
            if p["pieces"]:
                for tag in ("origin", "resonance", "tail"):
                    row[f"sup_abs_{tag}"] = max(
                        out["+"][f"sup_abs_{tag}"], out["-"][f"sup_abs_{tag}"]
                    )
            rows.append(row)
    drift = 0.0
    for s in p["shifts"]:
        sups = [r["sup_abs_k"] for r in rows if r["s"] == s]
        for prev, cur in zip(sups, sups[1:]):
            drift = max(drift, abs(cur - prev) / max(abs(prev), 1e-300))
    payload = {
        "symbol": sym.name,
        "rows": rows,
        "max_drift": drift,
        "grid": {"points": p["points"], "length": p["length"]},
    }
    results = []
    if checks.get("max_drift") is not None:
        results.append(_check("max_drift", drift <= checks["max_drift"], drift))
    return payload, results, {}


def _symbol_multiplier(sym) -> SpectralMultiplier:
    return SpectralMultiplier(
        name=sym.name,
        fn=lambda *comps: sym(*comps),
        homogeneity=float(sym.order) if sym.homogeneous else None,
        singular_at_origin=False,
    )


def _relative_residual(lhs: Field, rhs: Field) -> float:
    scale = max(lhs.norm(), rhs.norm(), 1e-300)
    return float((lhs - rhs).norm() / scale)


def _run_identity_suite(p, checks, seed):
    sym = make_symbol(p["symbol"], p["dimension"])
    n = p["dimension"]
    direction = np.array(p["direction"]) if p["direction"] else None
    if direction is None:
        direction = np.zeros(n)
        direction[-1] = 1.0
    kwargs = {"band": p["band"]}
    if p["halfangle"] is not None:
        kwargs["halfangle"] = p["halfangle"]
    plan = build_reduction(sym, direction, **kwargs)
    grid = UniformGrid((p["points"],) * n, (p["length"],) * n)

    # the identities hold for any amplitude; an analytic profile keeps the
    # resampling error at the stencil-order rate, where the C^2 partition
    # bump would cap it at its third-derivative jump
    axis = np.zeros(n)
    axis[-1] = 1.0
    gamma = analytic_cone_cutoff(axis, radial_onset=p["band"][0] + 0.5)
    diffeo = plan.diffeo
    nu = resolve_multiplier(p["multiplier"], symbol=sym)
    # the warp lives in the rotated frame, so it conjugates the rotated
    # symbol (identical to the original when the direction is the last axis)
    a_mult = _symbol_multiplier(plan.rotated_symbol)
    sigma_mult = _symbol_multiplier(plan.sigma)

    def warped_nu(*comps):
        comps = np.broadcast_arrays(*comps)
        flat = np.stack(comps, axis=-1).reshape(-1, n)
        gam = np.asarray(gamma(*[flat[:, j] for j in range(n)]), dtype=float)
        out = np.zeros(flat.shape[0])
        live = gam > 0
        if np.any(live):
            image = diffeo.forward(flat[live])
            out[live] = nu(*[image[:, j] for j in range(n)])
        return (gam * out).reshape(comps[0].shape)

    gamma_sq = SpectralMultiplier(
        name="amplitude-squared",
        fn=lambda *comps: np.asarray(gamma(*comps)) ** 2,
        homogeneity=None,
        singular_at_origin=False,
    )

    rng = np.random.default_rng(seed)
    rows = []
    for index in range(p["fields"]):
        draw = random_band_ensemble(
            n,
            p["band"],
            rng,
            count=12,
            sigma=p["bump_width"],
            x_spread=p["x_spread"],
        )
        u = Field.from_spectrum(grid, draw.spectrum(grid))
        order = p["order"]
        # amplitude-versus-multiplier commutation: warping after applying
        # the multiplier equals folding the warped multiplier into the
        # amplitude
        lhs_cut = transform_apply(diffeo, warped_nu, u, order=order)
        rhs_cut = transform_apply(
            diffeo, gamma, multiplier_apply(u, nu, name="cut"), order=order
        )
        # transform times coded inverse collapses to the squared amplitude
        lhs_id = transform_apply(
            diffeo, gamma,
            transform_inverse_apply(diffeo, gamma, u, order=order),
            order=order,
        )
        rhs_id = multiplier_apply(u, gamma_sq, name="id")
        # conjugation carries the original symbol to its normal form
        lhs_cnon = multiplier_apply(
            transform_apply(diffeo, gamma, u, order=order), a_mult, name="cnon"
        )
        rhs_cnon = transform_apply(
            diffeo, gamma, multiplier_apply(u, sigma_mult, name="cnon"), order=order
        )
        rows.append(
            {
                "field": index,
                "cut": _relative_residual(lhs_cut, rhs_cut),
                "id": _relative_residual(lhs_id, rhs_id),
                "cnon": _relative_residual(lhs_cnon, rhs_cnon),
            }
        )
    worst = max(max(r["cut"], r["id"], r["cnon"]) for r in rows)
    payload = {
        "symbol": sym.name,
        "plan": plan.report(),
        "rows": rows,
        "max_residual": worst,
        "fields": p["fields"],
    }
    results = []
    if checks.get("max_residual") is not None:
        tol = checks["max_residual"]
        results.append(_check("max_residual", worst <= tol, worst))
    return payload, results, {}


def _run_combined(p, checks, seed):
    sym = make_symbol(p["symbol"], p["dimension"])
    common = dict(
        s=p["s"],
        horizon=p["horizon"],
        band=p["band"],
        bump_width=p["bump_width"],
        x_spread=p["x_spread"],
        axis_clearance=p["axis_clearance"],
    )
    spec_hom = EstimateSpec("homogeneous", sym, p["smoothing"], **common)
    spec_inhom = EstimateSpec(
        "inhomogeneous",
        sym,
        p["smoothing"],
        input_multiplier=p["input_multiplier"],
        source_span=p["source_span"],
        **common,
    )
    out = combined_estimate(
        spec_hom,
        spec_inhom,
        Resolution(p["points"], p["length"], p["dt"]),
        trials=p["trials"],
        seed=seed,
        rtol=p["rtol"],
        max_iterations=p["max_iterations"],
        slack=p["slack"],
    )
    results = []
    if checks.get("dominated"):
        results.append(_check("dominated", out["dominated"], out["joint"]))
    flags = {"non_converged": not out["converged"]}
    return out, results, flags


def _ladder_rows(payload) -> list:
    ladder = payload.get("ladder")
    if ladder is None:
        ladder = payload.get("report", {}).get("ladder", [])
    return list(ladder or [])


def write_plot_data(payload: dict, out_dir, base: str) -> list:
    """Write tidy CSV files for a report payload; returns the paths.

    Ladder-bearing reports produce `<base>_ladder.csv` with one row per
    rung; kernel reports produce `<base>_kernel.csv` with one row per
    (epsilon, shift) pair.  A report with no rows still produces the
    header, so downstream tooling never special-cases an empty run.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    experiment = payload.get("experiment", "")
    if experiment == "kernel":
        path = os.path.join(out_dir, f"{base}_kernel.csv")
        with open(path, "w") as fh:
            fh.write("epsilon,s,sup_abs_k\n")
            for row in payload.get("rows", []):
                fh.write(f"{row['epsilon']:.12g},{row['s']:.12g},{row['sup_abs_k']:.12g}\n")
        paths.append(path)
        return paths
    if experiment == "identity-suite":
        path = os.path.join(out_dir, f"{base}_residuals.csv")
        with open(path, "w") as fh:
            fh.write("field,cut,id,cnon\n")
            for row in payload.get("rows", []):
                fh.write(
                    f"{row['field']},{row['cut']:.12g},{row['id']:.12g},{row['cnon']:.12g}\n"
                )
        paths.append(path)
        return paths

    path = os.path.join(out_dir, f"{base}_ladder.csv")
    with open(path, "w") as fh:
        fh.write("N,L,T,constant,method\n")
        for row in _ladder_rows(payload):
            fh.write(
                f"{row['points']},{row['length']:.12g},{row['horizon']:.12g},"
                f"{row['constant']:.12g},{row['method']}\n"
            )
    paths.append(path)
    return paths


def run_experiment(config: dict, out_dir, seed=None) -> ExperimentResult:
    """Execute one validated configuration and write its artifacts.

    `config` is the normalized dict from validate_config.  `seed`
    overrides the configured seed when given.  Returns the result with
    configured-check outcomes; computation flags are data, not failures.
    """
    experiment = config["experiment"]
    name = config["name"]
    p = config["params"]
    checks = config["checks"]
    effective_seed = config["seed"] if seed is None else int(seed)

    if experiment in ("homogeneous", "inhomogeneous", "time-local"):
        payload, results, flags = _run_estimate(experiment, p, checks, effective_seed)
    elif experiment == "model-estimate":
        payload, results, flags = _run_model(p, checks, effective_seed)
    elif experiment == "reduction":
        payload, results, flags = _run_reduction(p, checks, effective_seed)
    elif experiment == "kernel":
        payload, results, flags = _run_kernel(p, checks, effective_seed)
    elif experiment == "identity-suite":
        payload, results, flags = _run_identity_suite(p, checks, effective_seed)
    elif experiment == "combined":
        payload, results, flags = _run_combined(p, checks, effective_seed)
    else:
        raise ValueError(f"no runner for experiment kind {experiment!r}")

    passed = all(r["passed"] for r in results)
    body = {
        "experiment": experiment,
        "name": name,
        "seed": effective_seed,
        "config": {"params": _echo_params(p), "checks": checks},
        "checks": results,
        "passed": passed,
        "run_flags": flags,
    }
    body.update(payload)

    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, f"{name}.json")
    write_report(report_path, body)
    write_plot_data(body, out_dir, name)
    return ExperimentResult(
        name=name,
        experiment=experiment,
        passed=passed,
        checks=tuple(results),
        flags=flags,
        report_path=report_path,
        payload=body,
    )


def _echo_params(p: dict) -> dict:
    out = {}
    for key, value in p.items():
        if isinstance(value, tuple):
            out[key] = list(value)
        else:
            out[key] = value
    return out
