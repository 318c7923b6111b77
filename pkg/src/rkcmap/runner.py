"""Experiment drivers shared by the command line and the acceptance suite.

Each ``run_*`` function takes a validated scenario, writes ``report.json``,
``fields.csv`` and ``trace.jsonl`` into the output directory and returns
``(exit_code, report)``.  Reports carry no timestamps or timings so that two
runs of one scenario produce identical bytes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .certify import certify, decreasing_with_slack, epsilon_sweep, self_noise_floor
from .energy import EnergyParams, derived_fields
from .errors import ChartExitError, ContinuationError, NoConvergenceError, SolverError
from .geometry import (
    ball_convexity_check,
    exp_map,
    geodesic_distance,
    increasing_distance_check,
    lipschitz_quotients,
    log_map,
    make_geodesic_ball,
    tangent_geodesic_check,
)
from .grid import build_disc_grid, dump_fields_csv
from .homotopy import continuation_run, uniform_bounds_report
from .solver import SolveConfig, caccioppoli_ratio, radial_blend, solve_dirichlet

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_CONTINUATION = 4


# ------------------------------------------------------------------ output


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class Output:
    directory: str

    def __post_init__(self):
        os.makedirs(self.directory, exist_ok=True)

    def path(self, name):
        return os.path.join(self.directory, name)

    def report(self, report: dict):
        with open(self.path("report.json"), "w") as fh:
            fh.write(dumps(report))

    def trace(self, records):
        with open(self.path("trace.jsonl"), "w") as fh:
            for rec in records:
                fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")

    def fields(self, field, params, sigma, rho):
        extra = derived_fields(field, params, sigma, rho).columns() if params is not None else {}
        dump_fields_csv(self.path("fields.csv"), field, extra)


# ------------------------------------------------------------------ pieces


def _setup(sc):
    grid = build_disc_grid(sc.n)
    sigma, rho = sc.sigma.build(), sc.rho.build()
    _, loop = sc.loops(grid)
    config = SolveConfig(max_iters=sc.max_iters, rel_grad_tol=sc.rel_grad_tol)
    return grid, sigma, rho, loop, config


def _header(sc, command):
    return {"scenario": sc.name, "command": command, "n": sc.n, "p": sc.p, "eps": sc.eps,
            "sigma": sc.sigma.preset, "rho": sc.rho.preset, "target": sc.target_kind}


def _solve_or_fail(sc, out, report, grid, sigma, rho, params, loop, config):
    """Solve; on breakdown write the partial artifacts and return None."""
    try:
        return solve_dirichlet(grid, sigma, rho, params, loop, config)
    except SolverError as exc:
        report.update(error=str(exc), status="solver failure")
        if exc.last_iterate is not None:
            out.fields(exc.last_iterate, params, sigma, rho)
        out.report(report)
        out.trace([])
        return None


# ------------------------------------------------------------------ runs


def run_solve(sc, out: Output):
    grid, sigma, rho, loop, config = _setup(sc)
    params = EnergyParams(sc.p, sc.eps)
    report = _header(sc, "solve")
    res = _solve_or_fail(sc, out, report, grid, sigma, rho, params, loop, config)
    if res is None:
        return EXIT_SOLVER, report
    d = derived_fields(res.field, params, sigma, rho)
    inner = grid.kind == 0
    report.update(
        solve=res.summary(),
        minInteriorJ=float(d.jacobian[inner].min()),
        maxImageSignedDistance=float(np.max(sc.build_target().signed_distance(res.field.values))),
        status="converged" if res.converged else "not converged",
    )
    out.fields(res.field, params, sigma, rho)
    out.trace({"iteration": k, "energy": e} for k, e in enumerate(res.energy_history))
    out.report(report)
    return (EXIT_OK if res.converged else EXIT_SOLVER), report


def run_certify(sc, out: Output):
    grid, sigma, rho, loop, config = _setup(sc)
    params = EnergyParams(sc.p, sc.eps)
    report = _header(sc, "certify")
    res = _solve_or_fail(sc, out, report, grid, sigma, rho, params, loop, config)
    if res is None:
        return EXIT_SOLVER, report
    cert = certify(res.field, params, sigma, rho, sc.build_target(), sc.n_exp, sc.levels)
    report.update(solve=res.summary(), certificate=cert.to_dict())
    out.fields(res.field, params, sigma, rho)
    out.trace([{"check": k, "passed": v} for k, v in sorted(cert.passed.items())])
    if not res.converged:
        report["status"] = "not converged"
        out.report(report)
        return EXIT_SOLVER, report
    report["status"] = "all passed" if cert.all_passed else "certificate failed"
    out.report(report)
    return (EXIT_OK if cert.all_passed else EXIT_FAILED_CHECK), report


def sweep_report(sc, jobs: int = 1):
    """The eps sweep with convergence, Caccioppoli and noise floor summaries.

    Returns ``(report, sweep)`` where ``sweep`` still holds the solve results.
    """
    grid, sigma, rho, loop, config = _setup(sc)
    sw = epsilon_sweep(grid, sigma, rho, sc.p, loop, sc.eps_list, config, jobs=jobs)
    comparison = radial_blend(grid, loop.points)
    for entry in sw["entries"]:
        field = sw["results"][entry["eps"]].field
        lhs, rhs, ratio = caccioppoli_ratio(field, EnergyParams(sc.p, entry["eps"]), sigma, rho, comparison)
        entry["caccioppoli"] = {"lhs": lhs, "rhs": rhs, "ratio": ratio}
    ref = sw["results"][0.0].field
    lhs, rhs, ratio = caccioppoli_ratio(ref, EnergyParams(sc.p, 0.0), sigma, rho, comparison)
    sw["reference"]["caccioppoli"] = {"lhs": lhs, "rhs": rhs, "ratio": ratio}
    lp = [e["lpDistance"] for e in sw["entries"]]
    jv = [e["jvSup"] for e in sw["entries"]]
    report = _header(sc, "sweep-eps")
    report.update(
        entries=sw["entries"],
        reference=sw["reference"],
        allConverged=sw["allConverged"],
        lpDecreasing=decreasing_with_slack(lp),
        jvDecreasing=decreasing_with_slack(jv),
        caccioppoliMax=max([e["caccioppoli"]["ratio"] for e in sw["entries"]] + [ratio]),
    )
    if sc.noise_floor:
        def boundary_fn(g):
            return sc.loops(g)[1]

        floor = self_noise_floor(grid, build_disc_grid(2 * sc.n), sigma, rho, sc.p, boundary_fn, config)
        report["noiseFloor"] = floor
        report["finalWithinFloor"] = bool(lp[-1] <= 3 * floor) if lp else None
    return report, sw


def run_sweep(sc, out: Output, jobs: int = 1):
    report, sw = sweep_report(sc, jobs)
    ref = sw["results"][0.0].field
    out.fields(ref, EnergyParams(sc.p, 0.0), sc.sigma.build(), sc.rho.build())
    out.trace(sw["entries"])
    checks = [report["allConverged"], report["lpDecreasing"], report["jvDecreasing"],
              math.isfinite(report["caccioppoliMax"])]
    if sc.noise_floor:
        checks.append(report["finalWithinFloor"])
    report["status"] = "all passed" if all(checks) else "check failed"
    out.report(report)
    if not report["allConverged"]:
        return EXIT_SOLVER, report
    return (EXIT_OK if all(checks) else EXIT_FAILED_CHECK), report


def run_homotopy(sc, out: Output):
    grid, sigma, rho, _, config = _setup(sc)
    start, end = sc.loops(grid)
    report = _header(sc, "homotopy")
    report.update(steps=sc.steps, bisectionCap=sc.bisection_cap, exponentOnly=sc.exponent_only)
    records = []
    try:
        states = continuation_run(grid, sigma, rho, sc.p, sc.eps, start, end, sc.steps, config,
                                  sc.bisection_cap, sc.exponent_only, seed=sc.seed,
                                  on_state=lambda s: records.append(s.trace_record()))
    except ContinuationError as exc:
        report.update(error=str(exc), failedAt=exc.t, accepted=len(records), status="continuation failure")
        out.trace(records)
        out.report(report)
        return EXIT_CONTINUATION, report
    except SolverError as exc:
        report.update(error=str(exc), accepted=len(records), status="solver failure")
        out.trace(records)
        out.report(report)
        return EXIT_SOLVER, report
    last = states[-1]
    report.update(bounds=uniform_bounds_report(states), accepted=len(states),
                  allPositive=all(s.min_interior_j > 0 for s in states), status="completed")
    out.trace(records)
    out.fields(last.solution.field, EnergyParams(last.p_t, sc.eps), sigma, rho)
    out.report(report)
    return EXIT_OK, report


# ------------------------------------------------------------------ geodesics


def _guarded(fn):
    """Run one geometric check; shooting failures become a failed entry."""
    try:
        return fn()
    except (ChartExitError, NoConvergenceError, ValueError) as exc:
        return {"error": str(exc), "passed": False}


def geodesic_suite(metric, center=0.1 + 0.05j, seed: int = 0, pairs: int = 1000) -> dict:
    """Distance, exp/log, small-triangle, contraction and monotone-distance checks."""
    rng = np.random.default_rng(seed)
    out = {}

    def distance01():
        # reference distance between 0 and 1 where the chart reaches that far
        if not metric.in_chart(1 + 0j):
            return {"value": None, "passed": None}
        return {"value": geodesic_distance(metric, 0j, 1 + 0j), "passed": True}

    def round_trip():
        q0 = center + 0.4 * (rng.uniform(-1, 1, 64) + 1j * rng.uniform(-1, 1, 64))
        # metric lengths well inside the injectivity radius so log inverts exp
        length = rng.uniform(0.05, 0.5, 64) * min(metric.injectivity_radius, 1.0)
        v0 = length * np.exp(1j * rng.uniform(0, 2 * np.pi, 64)) / np.sqrt(metric.eval(q0))
        err = float(np.max(np.abs(log_map(metric, q0, exp_map(metric, q0, v0)) - v0)))
        return {"maxError": err, "passed": err <= 1e-8}

    def triangles():
        tri = ball_convexity_check(metric, make_geodesic_ball(metric, center, 0.25), trials=100, seed=seed)
        return {k: tri[k] for k in ("tested", "degenerate", "max_pair_sum", "pair_margin",
                                    "max_gauss_bonnet_residual", "passed")}

    def contraction():
        r, r0 = 0.3, 0.6
        ball_r, ball_r0 = make_geodesic_ball(metric, center, r), make_geodesic_ball(metric, center, r0)

        def outside(k):
            # strictly outside the closed ball B_r, up to twice r0
            v = rng.uniform(r * 1.001, 2 * r0, k) * np.exp(1j * rng.uniform(0, 2 * np.pi, k))
            return exp_map(metric, np.full(k, complex(center)), v / np.sqrt(metric.eval(center)))

        quot = lipschitz_quotients(metric, ball_r, ball_r0, outside(pairs), outside(pairs))
        return {"pairs": pairs, "maxQuotient": float(np.max(quot)), "passed": bool(np.max(quot) < 1)}

    def increasing():
        phi = rng.uniform(0, 2 * np.pi, (2, 100))
        inc = increasing_distance_check(metric, center, np.exp(1j * phi[0]), np.exp(1j * phi[1]), 1.0)
        return {k: inc[k] for k in ("pairs", "excluded", "min_increment", "passed")}

    out["distance01"] = _guarded(distance01)
    out["expLogRoundTrip"] = _guarded(round_trip)
    out["triangles"] = _guarded(triangles)
    out["tangent"] = _guarded(lambda: tangent_geodesic_check(metric, make_geodesic_ball(metric, center, 0.6)))
    out["contraction"] = _guarded(contraction)
    out["increasing"] = _guarded(increasing)
    return out


def run_geodesics(sc, out: Output):
    metric = sc.rho.build()
    report = _header(sc, "geodesics")
    suite = geodesic_suite(metric, seed=sc.seed)
    report["checks"] = suite
    passed = {k: v["passed"] for k, v in suite.items() if v["passed"] is not None}
    report["passed"] = passed
    ok = all(passed.values())
    report["status"] = "all passed" if ok else "check failed"
    out.trace([{"check": k, "passed": v} for k, v in sorted(passed.items())])
    out.report(report)
    return (EXIT_OK if ok else EXIT_FAILED_CHECK), report


RUNNERS = {
    "solve": run_solve,
    "certify": run_certify,
    "sweep": run_sweep,
    "homotopy": run_homotopy,
    "geodesics": run_geodesics,
}
