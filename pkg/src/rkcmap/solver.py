"""Dirichlet minimization of the discrete regularized p-energy.

The default "auto" method runs a few iterations of nonlinear conjugate
gradients preconditioned by the flat P1 Laplacian, then switches to a
damped Newton method on the convexified Hessian when p <= 6.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .energy import EnergyModel, EnergyParams
from .errors import SolverError
from .geometry import ConformalMetric, gauss_curvature, geodesic_distance
from .grid import INTERIOR, DomainGrid, MapField

log = logging.getLogger(__name__)

INIT_KINDS = ("harmonic", "given", "radial-blend")


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 20000
    grad_tol: float | None = None     # absolute; default 1e-9 (|g0| + 1)
    rel_grad_tol: float = 1e-9
    shrink: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    init_kind: str = "harmonic"
    method: str = "auto"              # auto | ncg | newton
    ncg_warmup: int = 30
    newton_max_p: float = 6.0

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.init_kind not in INIT_KINDS:
            raise ValueError(f"unknown init kind {self.init_kind!r}")
        if self.method not in ("auto", "ncg", "newton"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolveResult:
    field: MapField
    iterations: int
    final_grad_norm: float
    final_energy: float
    converged: bool
    grad_tol: float
    energy_history: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "finalGradNorm": self.final_grad_norm,
            "finalEnergy": self.final_energy,
            "converged": self.converged,
            "gradTol": self.grad_tol,
        }


# ------------------------------------------------------------ linear pieces


def stiffness_matrix(grid: DomainGrid) -> sp.csr_matrix:
    """Flat P1 Laplacian (cotangent) stiffness matrix on all nodes."""
    cached = getattr(grid, "_stiffness", None)
    if cached is not None:
        return cached
    a, b, area = grid.tri_gx, grid.tri_gy, grid.tri_area
    K = area[:, None, None] * (a[:, :, None] * a[:, None, :] + b[:, :, None] * b[:, None, :])
    rows = np.repeat(grid.triangles, 3, axis=1).ravel()
    cols = np.tile(grid.triangles, (1, 3)).ravel()
    mat = sp.csr_matrix((K.ravel(), (rows, cols)), shape=(grid.size, grid.size))
    grid._stiffness = mat
    return mat


def _interior_factor(grid: DomainGrid):
    cached = getattr(grid, "_interior_lu", None)
    if cached is None:
        free = np.flatnonzero(grid.kind == INTERIOR)
        K = stiffness_matrix(grid)
        cached = (splu(K[free][:, free].tocsc()), K[free][:, grid.boundary])
        grid._interior_lu = cached
    return cached


def harmonic_extension(grid: DomainGrid, boundary_values) -> MapField:
    """Discrete harmonic (flat P1) extension of boundary values."""
    lu, kib = _interior_factor(grid)
    g = np.asarray(boundary_values, dtype=complex)
    rhs = -(kib @ g)
    u = np.empty(grid.size, dtype=complex)
    u[grid.boundary] = g
    free = np.flatnonzero(grid.kind == INTERIOR)
    u[free] = lu.solve(np.ascontiguousarray(rhs.real)) + 1j * lu.solve(np.ascontiguousarray(rhs.imag))
    return MapField(u, grid)


def radial_blend(grid: DomainGrid, boundary_values) -> MapField:
    """u(r e^{it}) = c + r (g(t) - c) with c the mean of the boundary data."""
    g = np.asarray(boundary_values, dtype=complex)
    c = g.mean()
    th = np.mod(np.angle(grid.nodes), 2 * math.pi)
    s = np.concatenate([grid.boundary_s, [2 * math.pi]])
    gg = np.concatenate([g, g[:1]])
    gt = np.interp(th, s, gg.real) + 1j * np.interp(th, s, gg.imag)
    u = c + np.abs(grid.nodes) * (gt - c)
    u[grid.boundary] = g
    return MapField(u, grid)


# ----------------------------------------------------------------- driver


def _boundary_array(grid, boundary_data):
    g = getattr(boundary_data, "points", boundary_data)
    g = np.asarray(g, dtype=complex)
    if g.shape != (grid.boundary.size,):
        raise ValueError(f"boundary data has {g.size} values, grid has {grid.boundary.size} boundary nodes")
    if not np.all(np.isfinite(g)):
        raise ValueError("boundary data must be finite")
    return g


def _pack(g, free):
    out = np.empty(2 * free.size)
    out[0::2], out[1::2] = g[free].real, g[free].imag
    return out


def _unpack(v):
    return v[0::2] + 1j * v[1::2]


def solve_dirichlet(grid: DomainGrid, sigma: ConformalMetric, rho: ConformalMetric, params: EnergyParams,
                    boundary_data, config: SolveConfig | None = None, init=None) -> SolveResult:
    """Minimize the P1 energy over interior values with the boundary fixed.

    ``boundary_data`` is an array over ``grid.boundary`` or anything with a
    ``points`` attribute.  ``init`` is used for ``init_kind="given"``.
    """
    config = config or SolveConfig()
    g_b = _boundary_array(grid, boundary_data)
    if config.init_kind == "given":
        if init is None:
            raise ValueError("init_kind 'given' requires an initial field")
        u = np.array(getattr(init, "values", init), dtype=complex)
        u[grid.boundary] = g_b
    elif config.init_kind == "radial-blend":
        u = radial_blend(grid, g_b).values.copy()
    else:
        u = harmonic_extension(grid, g_b).values.copy()
    if not np.all(np.isfinite(u)):
        raise ValueError("initial field is not finite")

    model = EnergyModel(grid, params, sigma, rho)
    free = model.free
    E = model.value(u)
    grad = model.gradient(u)
    gnorm = float(np.linalg.norm(grad))
    tol = config.grad_tol if config.grad_tol is not None else config.rel_grad_tol * (gnorm + 1.0)
    history = [E]
    use_newton = config.method == "newton" or (config.method == "auto" and params.p <= config.newton_max_p)
    warmup = 0 if config.method == "newton" else (config.ncg_warmup if use_newton else config.max_iters)
    g0 = gnorm

    lu, _ = _interior_factor(grid)

    def precond(gc):
        r = gc[free]
        return lu.solve(np.ascontiguousarray(r.real)) + 1j * lu.solve(np.ascontiguousarray(r.imag))

    it = 0
    d_prev = None
    z_prev = None
    g_prev = None
    while gnorm > tol and it < config.max_iters:
        it += 1
        in_ncg = it <= warmup and gnorm > 1e-3 * g0
        if in_ncg:
            z = precond(grad)
            if d_prev is None:
                d = -z
            else:
                y = grad[free] - g_prev
                beta = max(0.0, float(np.real(np.vdot(y, z))) / float(np.real(np.vdot(g_prev, z_prev))))
                d = -z + beta * d_prev
                if np.real(np.vdot(grad[free], d)) >= 0:
                    d = -z
            z_prev, g_prev = z, grad[free].copy()
        else:
            d = _newton_direction(model, u, grad, free)
        slope = float(np.real(np.vdot(grad[free], d)))
        if slope >= 0:
            d = -grad[free]
            slope = -float(np.real(np.vdot(grad[free], grad[free])))

        step, accepted = 1.0, False
        for _ in range(config.max_backtracks):
            trial = u.copy()
            trial[free] += step * d
            E_t = model.value(trial)
            if np.isfinite(E_t) and E_t <= E + config.armijo * step * slope:
                accepted = True
                break
            # near the minimum the decrease drowns in rounding; fall back to the gradient
            if np.isfinite(E_t) and abs(E_t - E) <= 64 * np.finfo(float).eps * max(abs(E), 1.0):
                g_t = model.gradient(trial)
                if np.linalg.norm(g_t) < gnorm:
                    accepted = True
                    break
            step *= config.shrink
        if not accepted:
            raise SolverError(
                f"line search failed at iteration {it} (grad norm {gnorm:.3e}, tol {tol:.3e})",
                last_iterate=MapField(u, grid),
            )
        u = trial
        E = E_t
        d_prev = d if in_ncg else None
        if not in_ncg:
            z_prev = g_prev = None
        grad = model.gradient(u)
        gnorm = float(np.linalg.norm(grad))
        history.append(E)

    converged = gnorm <= tol
    if not converged:
        log.warning("solver stopped after %d iterations with grad norm %.3e > %.3e", it, gnorm, tol)
    return SolveResult(MapField(u, grid), it, gnorm, E, converged, tol, history)


def _newton_direction(model: EnergyModel, u, grad, free):
    H = model.hessian(u)
    diag = H.diagonal()
    shift = 1e-12 * float(np.max(diag)) if diag.size else 0.0
    H = H + sp.diags(np.full(H.shape[0], shift))
    dv = spsolve(H.tocsc(), -_pack(grad, free))
    return _unpack(dv)


# ------------------------------------------------------------ measurements


def _target_radius(rho, points):
    """Smallest geodesic radius of a ball centred at the chart mean of ``points``
    that contains them (an upper bound on the optimal radius)."""
    c = complex(np.mean(points))
    return float(np.max(geodesic_distance(rho, np.full(points.shape, c), points))), c


def smallness_gate(rho: ConformalMetric, boundary_values, samples: int = 64) -> dict:
    """Uniqueness gate: target image inside a geodesic ball of radius below
    pi / (2 sqrt(kappa)), kappa the largest sampled target curvature."""
    g = np.asarray(boundary_values, dtype=complex)
    if rho.flat:
        return {"kappa": 0.0, "radius": None, "bound": math.inf, "satisfied": True}
    idx = np.linspace(0, g.size - 1, min(samples, g.size)).astype(int)
    pts = g[idx]
    c = complex(np.mean(pts))
    inner = c + np.outer(np.linspace(0, 1, 6), pts - c).ravel()
    kappa = float(np.max(gauss_curvature(rho, inner)))
    if kappa <= 0:
        return {"kappa": kappa, "radius": None, "bound": math.inf, "satisfied": True}
    bound = math.pi / (2 * math.sqrt(kappa))
    try:
        radius, _ = _target_radius(rho, pts)
    except Exception:  # distance beyond injectivity or shooting failure: not small
        return {"kappa": kappa, "radius": math.inf, "bound": bound, "satisfied": False}
    return {"kappa": kappa, "radius": radius, "bound": bound, "satisfied": bool(radius < bound)}


def uniqueness_probe(grid, sigma, rho, params, boundary_data, inits=None, config=None,
                     tol: float = 1e-5, seed: int = 0) -> dict:
    """Solve from several initial fields and compare the results pairwise."""
    g = _boundary_array(grid, boundary_data)
    gate = smallness_gate(rho, g)
    report = {"smallness": gate, "status": "ok" if gate["satisfied"] else "smallness violated"}
    if not gate["satisfied"]:
        report.update(maxPairwise=None, passed=None, results=[])
        return report
    config = config or SolveConfig()
    if inits is None:
        rng = np.random.default_rng(seed)
        harm = harmonic_extension(grid, g).values
        bump = (1 - np.abs(grid.nodes) ** 2) * (rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size))
        inits = [harm, radial_blend(grid, g).values, harm + 0.05 * bump]
    results = []
    for f in inits:
        cfg = SolveConfig(**{**config.__dict__, "init_kind": "given"})
        results.append(solve_dirichlet(grid, sigma, rho, params, g, cfg, init=f))
    worst = 0.0
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            worst = max(worst, float(np.max(np.abs(results[i].field.values - results[j].field.values))))
    report.update(maxPairwise=worst, passed=bool(worst <= tol and all(r.converged for r in results)),
                  results=results)
    return report


def _weighted_energy(model: EnergyModel, u):
    """Per-triangle lam |Du|^2 times A sigma, with lam = (eps^2+|Du|^2)^((p-2)/2)."""
    uz, uzb, ratio = model.element_terms(u)
    du2 = ratio * (np.abs(uz) ** 2 + np.abs(uzb) ** 2)
    lam = (model.params.eps**2 + du2) ** ((model.params.p - 2) / 2)
    return model.weight * lam * du2, lam


def caccioppoli_ratio(field: MapField, params: EnergyParams, sigma, rho, comparison) -> tuple:
    """(lhs, rhs, lhs/rhs) for int lam |Du|^2 dV of the solution against a competitor."""
    u0 = np.asarray(getattr(comparison, "values", comparison), dtype=complex)
    grid = field.grid
    if not np.allclose(u0[grid.boundary], field.values[grid.boundary], rtol=0, atol=1e-12):
        raise ValueError("comparison field has a different boundary trace")
    model = EnergyModel(grid, params, sigma, rho)
    lhs = float(np.sum(_weighted_energy(model, field.values)[0]))
    rhs = float(np.sum(_weighted_energy(model, u0)[0]))
    if rhs == 0:
        ratio = 1.0 if lhs == 0 else math.inf
    else:
        ratio = lhs / rhs
    return lhs, rhs, ratio


def weighted_test_inequality(field: MapField, params: EnergyParams, sigma, rho, center, radius: float, eta) -> dict:
    """Both sides of  int lam |Du|^2 eta^2 dV <= 16 r^2 int lam |grad eta|^2 dV.

    The ball is the Euclidean ball of the target chart; ``eta`` is a nodal
    array or a callable of the chart point and should vanish on the boundary.
    """
    grid = field.grid
    eta = np.asarray(eta(grid.nodes) if callable(eta) else eta, dtype=float)
    inside = float(np.max(np.abs(field.values - center))) <= radius
    model = EnergyModel(grid, params, sigma, rho)
    dens, lam = _weighted_energy(model, field.values)
    et = eta[grid.triangles]
    eta2 = np.mean(et**2, axis=1)
    gx = np.sum(grid.tri_gx * et, axis=1)
    gy = np.sum(grid.tri_gy * et, axis=1)
    # intrinsic |grad eta|^2 = flat |grad eta|^2 / sigma, and dV = sigma dx dy
    lhs = float(np.sum(dens * eta2))
    rhs = float(16 * radius**2 * np.sum(grid.tri_area * lam * (gx**2 + gy**2)))
    return {"lhs": lhs, "rhs": rhs, "imageInBall": inside, "holds": (lhs <= rhs) if inside else None}
