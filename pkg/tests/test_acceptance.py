"""Acceptance criteria 1-11.

Each test prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated in
the terminal summary.  Run standalone with ``python3 tests/test_acceptance.py``
or through pytest.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from rkcmap.certify import (
    C_TOL,
    calibrate_ctol,
    certify,
    epsilon_sweep,
    minimum_principle_check,
    superharmonicity_check,
)
from rkcmap.energy import EnergyParams, derived_fields, monotonicity_gap
from rkcmap.geometry import flat_metric, sphere_metric
from rkcmap.grid import build_disc_grid
from rkcmap.homotopy import continuation_run, uniform_bounds_report
from rkcmap.runner import geodesic_suite, sweep_report
from rkcmap.scenario import load
from rkcmap.solver import solve_dirichlet, uniqueness_probe
from rkcmap.targets import EllipseTarget, make_loop

RESULTS = []
FLAT = flat_metric()
ELLIPSE = EllipseTarget(1.0, 0.6)
SWEEP = (0.4, 0.2, 0.1, 0.05, 0.025, 0.0)


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def ellipse_loop(grid):
    return make_loop(ELLIPSE, grid.boundary_s, "warped", 0.3)


@pytest.fixture(scope="module")
def rkc96():
    """Sweeps at n = 96 for p = 2, 3, 4; the eps = 0 entry is the solution to certify."""
    grid = build_disc_grid(96)
    loop = ellipse_loop(grid)
    return grid, {p: epsilon_sweep(grid, FLAT, FLAT, p, loop, SWEEP, jobs=3) for p in (2.0, 3.0, 4.0)}


def test_01_identity_reproduction():
    grid = build_disc_grid(64)
    h = grid.h
    rows, ok = [], True
    for p in (2, 3, 4):
        for eps in (0.0, 0.3):
            t0 = time.perf_counter()
            res = solve_dirichlet(grid, FLAT, FLAT, EnergyParams(p, eps), grid.nodes[grid.boundary])
            dt = time.perf_counter() - t0
            err = float(np.max(np.abs(res.field.values - grid.nodes)))
            J = derived_fields(res.field, EnergyParams(p, eps), FLAT, FLAT).jacobian
            jdev = float(np.max(np.abs(J - 1)))
            case = res.converged and err <= 1e-4 and jdev <= 10 * h and dt < 30
            ok &= case
            rows.append(f"p={p},eps={eps}: sup|u-z|={err:.1e} max|J-1|={jdev:.1e} {dt:.2f}s")
    assert record(1, ok, "; ".join(rows))


def test_02_linear_oracle():
    grid = build_disc_grid(64)
    center = int(np.argmin(np.abs(grid.nodes)))
    th = 2 * math.pi * np.arange(16384) / 16384
    data = [
        lambda t: np.exp(1j * t) + 0.3 * np.exp(-2j * t),
        lambda t: np.cos(3 * t) + 1j * np.exp(np.sin(t)),
        lambda t: 1 / (2 - np.exp(1j * t)) + 0.2j * np.cos(5 * t),
    ]
    rows, ok = [], True
    for k, g in enumerate(data):
        t0 = time.perf_counter()
        res = solve_dirichlet(grid, FLAT, FLAT, EnergyParams(2.0), g(grid.boundary_s))
        dt = time.perf_counter() - t0
        # Poisson integral at the centre is the boundary mean
        err = abs(res.field.values[center] - np.mean(g(th)))
        ok &= bool(err <= 5 * grid.h**2 and dt < 10)
        rows.append(f"data{k + 1}: err={err:.1e} (tol {5 * grid.h**2:.1e}) {dt:.2f}s")
    assert record(2, ok, "; ".join(rows))


def test_03_desk_scale_rkc(rkc96):
    grid, sweeps = rkc96
    rows, ok = [], True
    for p, sw in sweeps.items():
        res = sw["results"][0.0]
        rep = certify(res.field, EnergyParams(p, 0.0), FLAT, FLAT, ELLIPSE)
        case = res.converged and rep.interiorJacobianMin > 0 and rep.boundaryJacobianMin > 0 and rep.all_passed
        ok &= case
        rows.append(f"p={p:g}: Jint={rep.interiorJacobianMin:.3f} Jbdry={rep.boundaryJacobianMin:.3f} "
                    f"cert={'pass' if rep.all_passed else 'fail'}")
    assert record(3, ok, "; ".join(rows))


def test_04_subharmonicity(rkc96):
    grid, sweeps = rkc96
    params = EnergyParams(4.0, 0.0)
    ctol = calibrate_ctol(64, n_exp=2)
    coarse = superharmonicity_check(sweeps[4.0]["results"][0.0].field, params, FLAT, FLAT, n_exp=2)
    fine_grid = build_disc_grid(192)
    fine_res = solve_dirichlet(fine_grid, FLAT, FLAT, params, ellipse_loop(fine_grid))
    fine = superharmonicity_check(fine_res.field, params, FLAT, FLAT, n_exp=2)
    v_coarse, v_fine = max(coarse["worst"], 0.0), max(fine["worst"], 0.0)
    bound_ok = coarse["worst"] <= C_TOL * grid.h and fine["worst"] <= C_TOL * fine_grid.h
    refine_ok = v_coarse >= 1.5 * v_fine
    ok = bool(bound_ok and refine_ok and ctol <= C_TOL and fine_res.converged)
    assert record(4, ok, f"N_E=2 worst(h={grid.h:.4f})={coarse['worst']:.3f} "
                         f"worst(h/2)={fine['worst']:.3f} tol=c_tol*h with c_tol={C_TOL} "
                         f"(calibrated {ctol:.3f}); positive part {v_coarse:.2e} -> {v_fine:.2e}")


def test_05_minimum_principle(rkc96):
    _, sweeps = rkc96
    field = sweeps[4.0]["results"][0.0].field
    rep = minimum_principle_check(field, EnergyParams(4.0), FLAT, FLAT)
    subs = [r for r in rep["levels"] if r["radius"] < 1]
    T = derived_fields(field, EnergyParams(4.0), FLAT, FLAT).T
    tol = 1e-3 * float(np.max(T))
    ok = len(subs) == 4 and all(r["margin"] >= -tol for r in subs)
    margins = ", ".join(f"r={r['radius']}: {r['margin']:.1e}" for r in subs)
    assert record(5, ok, f"{margins} (tol -{tol:.1e})")


def test_06_homotopy():
    sc = load("ellipse-p3-homotopy")
    grid = build_disc_grid(sc.n)
    start, end = sc.loops(grid)
    t0 = time.perf_counter()
    try:
        states = continuation_run(grid, FLAT, FLAT, sc.p, sc.eps, start, end, steps=sc.steps)
        failure = None
    except Exception as exc:  # a continuation failure is a red criterion, not a crash
        states, failure = [], exc
    dt = time.perf_counter() - t0
    if failure is not None:
        assert record(6, False, f"continuation failed: {failure}")
    bounds = uniform_bounds_report(states)
    ok = all(s.min_interior_j > 0 for s in states) and dt < 600 and states[-1].t == 1
    assert record(6, ok, f"{len(states)} states over {sc.steps} steps, min interior J={bounds['minInteriorJ']:.3f}, "
                         f"c1={bounds['c1']:.3f}, {dt:.1f}s")


def test_07_convergence():
    sc = load("ellipse-p4-sweep")
    rep, _ = sweep_report(sc, jobs=3)
    lp = [e["lpDistance"] for e in rep["entries"]]
    jv = [e["jvSup"] for e in rep["entries"]]
    strictly = all(b < a for a, b in zip(lp, lp[1:]))
    ok = rep["allConverged"] and rep["lpDecreasing"] and rep["jvDecreasing"] and rep["finalWithinFloor"]
    assert record(7, bool(ok), "Lp " + " > ".join(f"{v:.1e}" for v in lp)
                  + f" (strict: {strictly}); final <= 3 x floor {rep['noiseFloor']:.1e}: {rep['finalWithinFloor']}; "
                  + "JV sup " + " > ".join(f"{v:.1e}" for v in jv))


def test_08_caccioppoli():
    bound = 2.0
    ratios = []
    for p in (3.0, 4.0):
        sc = replace(load("ellipse-p4-sweep"), p=p, noise_floor=False)
        rep, _ = sweep_report(sc, jobs=3)
        ratios += [e["caccioppoli"]["ratio"] for e in rep["entries"]]
        ratios.append(rep["reference"]["caccioppoli"]["ratio"])
    ok = all(math.isfinite(r) and 0 < r <= bound for r in ratios)
    assert record(8, ok, f"{len(ratios)} ratios in [{min(ratios):.3f}, {max(ratios):.3f}], "
                         f"single constant {bound}")


def _pairs(seed, m=10_000):
    rng = np.random.default_rng(seed)

    def draw():
        d = rng.normal(size=(m, 4))
        return d / np.linalg.norm(d, axis=1, keepdims=True) * np.exp(rng.uniform(-3, 2, (m, 1)))

    return draw(), draw()


def test_09_monotonicity():
    rows, ok = [], True
    for p in (2.0, 3.0, 4.0):
        params = EnergyParams(p, 0.1)
        consts, nonneg = [], True
        for seed in range(5):
            m = monotonicity_gap(*_pairs(seed), params)
            nonneg &= bool(np.all(m.lhs >= 0))
            c_lower = float(np.min(m.lhs[m.rhs > 0] / m.rhs[m.rhs > 0]))
            nonneg &= c_lower > 0
            consts.append(float(np.max(m.quotient)))
        spread = max(abs(c / consts[0] - 1) for c in consts)
        case = nonneg and spread <= 0.2
        ok &= case
        rows.append(f"p={p:g}: nonneg={nonneg} C={consts[0]:.4f} reseed spread={100 * spread:.2f}%")
    assert record(9, ok, "; ".join(rows))


def test_10_geodesic_geometry():
    suite = geodesic_suite(sphere_metric(), seed=0, pairs=1000)
    d = suite["distance01"]["value"]
    tri = suite["triangles"]
    checks = {
        "distance": abs(d - math.pi / 2) <= 1e-6,
        "expLog": suite["expLogRoundTrip"]["maxError"] <= 1e-8,
        "triangles": tri["passed"] and tri["tested"] + tri["degenerate"] == 100
        and tri["max_gauss_bonnet_residual"] <= 1e-4 and tri["max_pair_sum"] < math.pi,
        "contraction": suite["contraction"]["passed"] and suite["contraction"]["pairs"] == 1000,
        "increasing": suite["increasing"]["passed"] and suite["increasing"]["pairs"] == 100,
    }
    detail = (f"|d(0,1)-pi/2|={abs(d - math.pi / 2):.1e}, exp/log={suite['expLogRoundTrip']['maxError']:.1e}, "
              f"pair sum max={tri['max_pair_sum']:.4f} GB resid={tri['max_gauss_bonnet_residual']:.1e} "
              f"({tri['tested']} tested, {tri['degenerate']} degenerate), "
              f"Lipschitz max={suite['contraction']['maxQuotient']:.4f}, "
              f"monotone min increment={suite['increasing']['min_increment']:.1e}")
    assert record(10, all(checks.values()), detail)


def test_11_uniqueness():
    grid = build_disc_grid(64)
    rows, ok = [], True
    for p in (3.0, 4.0):
        rep = uniqueness_probe(grid, FLAT, FLAT, EnergyParams(p), ellipse_loop(grid))
        ok &= bool(rep["passed"]) and rep["maxPairwise"] <= 1e-5
        rows.append(f"p={p:g}: max pairwise sup={rep['maxPairwise']:.1e}")
    assert record(11, ok, "; ".join(rows))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
