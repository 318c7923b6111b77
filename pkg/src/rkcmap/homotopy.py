"""Continuation in t from a p = 2 problem to the target exponent.

Both the boundary speed and the exponent p_t = 2(1 - t) + p t move with t.
Each step warm-starts from the previous solution and must keep the interior
Jacobian positive; a failing step is bisected a bounded number of times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import boundary_jacobian_check, minimum_principle_check
from .energy import EnergyParams, derived_fields
from .errors import ContinuationError, SolverError
from .grid import INTERIOR, MapField
from .solver import SolveConfig, SolveResult, solve_dirichlet
from .targets import BoundaryLoop, boundary_homotopy

DEFAULT_STEPS = 16
BISECTION_CAP = 6
HOLDER_BETA = 0.5


def exponent_path(p_final: float, t: float) -> float:
    return 2.0 * (1.0 - t) + p_final * t


@dataclass
class HomotopyState:
    t: float
    p_t: float
    boundary: BoundaryLoop
    solution: SolveResult
    min_interior_j: float
    min_boundary_j: float
    holder_u: float
    holder_du: float
    min_principle_margin: float

    def trace_record(self) -> dict:
        return {
            "t": self.t,
            "p_t": self.p_t,
            "energy": self.solution.final_energy,
            "minInteriorJ": self.min_interior_j,
            "minBoundaryJ": self.min_boundary_j,
            "iterations": self.solution.iterations,
        }


def holder_proxy(nodes, values, beta: float = HOLDER_BETA, pairs: int = 4000, seed: int = 0) -> float:
    """max |f(a) - f(b)| / |a - b|^beta over random node pairs (f may be vector valued)."""
    rng = np.random.default_rng(seed)
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    a = rng.integers(0, nodes.size, pairs)
    b = rng.integers(0, nodes.size, pairs)
    keep = a != b
    a, b = a[keep], b[keep]
    num = np.linalg.norm(values[a] - values[b], axis=1)
    return float(np.max(num / np.abs(nodes[a] - nodes[b]) ** beta)) if a.size else 0.0


def _measure(t, p_t, loop, result, params, sigma, rho, beta, seed):
    field = result.field
    grid = field.grid
    d = derived_fields(field, params, sigma, rho)
    ux, uy = grid.dx @ field.values, grid.dy @ field.values
    du = np.column_stack([ux.real, ux.imag, uy.real, uy.imag])
    return HomotopyState(
        t=t,
        p_t=p_t,
        boundary=loop,
        solution=result,
        min_interior_j=float(np.min(d.jacobian[grid.kind == INTERIOR])),
        min_boundary_j=boundary_jacobian_check(field, sigma, rho)["min"],
        holder_u=holder_proxy(grid.nodes, np.column_stack([field.values.real, field.values.imag]), beta, seed=seed),
        holder_du=holder_proxy(grid.nodes, du, beta, seed=seed),
        min_principle_margin=minimum_principle_check(field, params, sigma, rho)["worst"],
    )


def continuation_run(grid, sigma, rho, p_final: float, eps: float, loop_start: BoundaryLoop,
                     loop_end: BoundaryLoop, steps: int = DEFAULT_STEPS, config: SolveConfig | None = None,
                     bisection_cap: int = BISECTION_CAP, exponent_only: bool = False,
                     beta: float = HOLDER_BETA, seed: int = 0, on_state=None) -> list:
    """States for t = 0, 1/steps, ..., 1 (plus any accepted bisection points).

    With ``exponent_only`` the boundary stays at ``loop_end`` and only p moves.
    """
    if not eps > 0:
        raise ValueError("continuation requires eps > 0")
    if steps < 1:
        raise ValueError("steps must be positive")
    config = config or SolveConfig()
    warm = SolveConfig(**{**config.__dict__, "init_kind": "given"})

    def loop_at(t):
        return loop_end if exponent_only else boundary_homotopy(loop_start, loop_end, t)

    def attempt(t, prev_field):
        p_t = exponent_path(p_final, t)
        params = EnergyParams(p_t, eps)
        loop = loop_at(t)
        if prev_field is None:
            res = solve_dirichlet(grid, sigma, rho, params, loop, config)
        else:
            res = solve_dirichlet(grid, sigma, rho, params, loop, warm, init=prev_field)
        return _measure(t, p_t, loop, res, params, sigma, rho, beta, seed)

    states = [attempt(0.0, None)]
    if states[0].min_interior_j <= 0:
        raise ContinuationError("start state has a non-positive Jacobian", 0.0, states[0])
    if on_state:
        on_state(states[0])
    for k in range(1, steps + 1):
        goal = k / steps
        depth = 0
        while states[-1].t < goal:
            t_prev = states[-1].t
            t_try = goal if depth == 0 else t_prev + (goal - t_prev) / 2**depth
            try:
                state = attempt(t_try, states[-1].solution.field)
                ok = state.solution.converged and state.min_interior_j > 0
            except SolverError:
                state, ok = None, False
            if ok:
                states.append(state)
                if on_state:
                    on_state(state)
                depth = 0
                continue
            depth += 1
            if depth > bisection_cap:
                raise ContinuationError(f"bisection cap exceeded near t = {t_try:.6g}", t_try, state)
    return states


def uniform_bounds_report(states) -> dict:
    if not states:
        raise ValueError("no states")
    return {
        "states": len(states),
        "holderU": max(s.holder_u for s in states),
        "holderDU": max(s.holder_du for s in states),
        "c1": min(s.min_boundary_j for s in states),
        "minInteriorJ": min(s.min_interior_j for s in states),
        "minPrincipleWorst": min(s.min_principle_margin for s in states),
        "beta": HOLDER_BETA,
    }
