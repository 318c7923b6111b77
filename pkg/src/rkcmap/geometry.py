"""Conformal metrics on a single chart and their geodesic geometry.

A conformal metric is stored through its log-factor ``l = log f`` so that
curvature, Christoffel coefficients and the geodesic equation

    gamma'' = -A(gamma) (gamma')**2,   A = d l / d q   (complex derivative)

only need ``l`` and its first and second partials.  Every routine accepts
numpy arrays of chart points and works elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ChartExitError, EvaluationError, NoConvergenceError

DEFAULT_STEPS = 128
SMALL_RADIUS = 0.25


@dataclass(frozen=True)
class ConformalMetric:
    """The metric ``f(q)|dq|^2`` on a chart of the plane.

    ``log_grad`` returns the complex Wirtinger derivative d(log f)/dq and
    ``log_hess`` the tuple (l_xx, l_xy, l_yx, l_yy).
    """

    name: str
    log_factor: Callable[[np.ndarray], np.ndarray]
    log_grad: Callable[[np.ndarray], np.ndarray]
    log_hess: Callable[[np.ndarray], tuple]
    lower_bound: float
    upper_bound: float
    chart_radius: float = math.inf
    injectivity_radius: float = math.inf
    flat: bool = False
    params: dict = field(default_factory=dict)

    def eval(self, q):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = np.exp(self.log_factor(np.asarray(q)))
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"metric {self.name!r} is not finite at {q}")
        return val

    def log_deriv(self, q):
        return self.log_grad(np.asarray(q))

    def second_derivs(self, q):
        return self.log_hess(np.asarray(q))

    def in_chart(self, q):
        q = np.asarray(q)
        return np.isfinite(q) & (np.abs(q) < self.chart_radius)

    def real_gradient(self, q):
        """(f_x, f_y) of the factor itself."""
        a = self.log_deriv(q)
        f = self.eval(q)
        return 2.0 * f * a.real, -2.0 * f * a.imag

    def real_hessian(self, q):
        """(f_xx, f_xy, f_yy) of the factor itself."""
        f = self.eval(q)
        a = self.log_deriv(q)
        lx, ly = 2.0 * a.real, -2.0 * a.imag
        lxx, lxy, _, lyy = self.second_derivs(q)
        return f * (lxx + lx * lx), f * (lxy + lx * ly), f * (lyy + ly * ly)


def _zeros_like_real(q):
    return np.zeros(np.shape(q))


def flat_metric(scale: float = 1.0) -> ConformalMetric:
    if scale <= 0:
        raise ValueError("flat metric scale must be positive")
    log_c = math.log(scale)
    return ConformalMetric(
        name="flat",
        log_factor=lambda q: np.full(np.shape(q), log_c),
        log_grad=lambda q: np.zeros(np.shape(q), dtype=complex),
        log_hess=lambda q: (_zeros_like_real(q),) * 4,
        lower_bound=scale,
        upper_bound=scale,
        flat=True,
        params={"scale": scale},
    )


def sphere_metric(curvature: float = 1.0, bound_radius: float = 10.0) -> ConformalMetric:
    """Stereographic chart 4/(1 + k|q|^2)^2 of the sphere of curvature k."""
    k = float(curvature)
    if k <= 0:
        raise ValueError("sphere curvature must be positive")

    def log_factor(q):
        return math.log(4.0) - 2.0 * np.log1p(k * np.abs(q) ** 2)

    def log_grad(q):
        return -2.0 * k * np.conj(q) / (1.0 + k * np.abs(q) ** 2)

    def log_hess(q):
        x, y = np.real(q), np.imag(q)
        s = 1.0 + k * (x * x + y * y)
        lxx = -4.0 * k / s + 8.0 * k * k * x * x / s**2
        lyy = -4.0 * k / s + 8.0 * k * k * y * y / s**2
        lxy = 8.0 * k * k * x * y / s**2
        return lxx, lxy, lxy, lyy

    return ConformalMetric(
        name="sphere",
        log_factor=log_factor,
        log_grad=log_grad,
        log_hess=log_hess,
        lower_bound=4.0 / (1.0 + k * bound_radius**2) ** 2,
        upper_bound=4.0,
        chart_radius=1e6,
        injectivity_radius=math.pi / math.sqrt(k),
        params={"curvature": k},
    )


def hyperbolic_metric(curvature: float = 1.0, bound_radius: float = 0.95) -> ConformalMetric:
    """Poincare disc 4/(1 - k|z|^2)^2, Gaussian curvature -k."""
    k = float(curvature)
    if k <= 0:
        raise ValueError("hyperbolic curvature parameter must be positive")
    if bound_radius * math.sqrt(k) >= 1.0:
        raise ValueError("bound_radius must lie inside the Poincare disc")

    def log_factor(q):
        return math.log(4.0) - 2.0 * np.log1p(-k * np.abs(q) ** 2)

    def log_grad(q):
        return 2.0 * k * np.conj(q) / (1.0 - k * np.abs(q) ** 2)

    def log_hess(q):
        x, y = np.real(q), np.imag(q)
        s = 1.0 - k * (x * x + y * y)
        lxx = 4.0 * k / s + 8.0 * k * k * x * x / s**2
        lyy = 4.0 * k / s + 8.0 * k * k * y * y / s**2
        lxy = 8.0 * k * k * x * y / s**2
        return lxx, lxy, lxy, lyy

    return ConformalMetric(
        name="hyperbolic",
        log_factor=log_factor,
        log_grad=log_grad,
        log_hess=log_hess,
        lower_bound=4.0,
        upper_bound=4.0 / (1.0 - k * bound_radius**2) ** 2,
        chart_radius=1.0 / math.sqrt(k),
        params={"curvature": k},
    )


def bump_metric(amplitude: float = 0.5, width: float = 0.5) -> ConformalMetric:
    """exp(2 a exp(-|q|^2 / w^2)): a smooth radial bump, flat far away."""
    a, w = float(amplitude), float(width)
    if w <= 0:
        raise ValueError("bump width must be positive")

    def g(q):
        return np.exp(-np.abs(q) ** 2 / w**2)

    def log_factor(q):
        return 2.0 * a * g(q)

    def log_grad(q):
        # d/dq exp(-q qbar / w^2) = -qbar/w^2 * g
        return 2.0 * a * (-np.conj(q) / w**2) * g(q)

    def log_hess(q):
        x, y = np.real(q), np.imag(q)
        gg = g(q)
        c = 2.0 * a * gg
        lxx = c * (4.0 * x * x / w**4 - 2.0 / w**2)
        lyy = c * (4.0 * y * y / w**4 - 2.0 / w**2)
        lxy = c * 4.0 * x * y / w**4
        return lxx, lxy, lxy, lyy

    lo, hi = sorted((1.0, math.exp(2.0 * a)))
    return ConformalMetric(
        name="bump",
        log_factor=log_factor,
        log_grad=log_grad,
        log_hess=log_hess,
        lower_bound=lo,
        upper_bound=hi,
        params={"amplitude": a, "width": w},
    )


METRIC_PRESETS = {
    "flat": flat_metric,
    "sphere": sphere_metric,
    "hyperbolic": hyperbolic_metric,
    "bump": bump_metric,
}


def make_metric(name: str, **params) -> ConformalMetric:
    """Build a preset metric by name; ``custom`` selects ``params['preset']``."""
    if name == "custom":
        params = dict(params)
        name = params.pop("preset", "bump")
    try:
        factory = METRIC_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown metric preset {name!r}") from None
    return factory(**params)


def gauss_curvature(metric: ConformalMetric, q):
    """K = -Laplacian(log f) / (2 f)."""
    lxx, _, _, lyy = metric.second_derivs(q)
    f = metric.eval(q)
    k = -(lxx + lyy) / (2.0 * f)
    if not np.all(np.isfinite(k)):
        raise EvaluationError(f"curvature of {metric.name!r} not finite at {q}")
    return k


def christoffel_a(metric: ConformalMetric, q):
    """The complex coefficient A(q) = d log f / dq of the geodesic equation."""
    return metric.log_deriv(q)


# --------------------------------------------------------------------------
# geodesics


@dataclass
class GeodesicPath:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    metric: ConformalMetric

    @property
    def endpoint(self):
        return self.positions[-1]

    def speeds(self):
        return np.sqrt(self.metric.eval(self.positions)) * np.abs(self.velocities)


def _rk4(metric, q0, v0, t_end, steps, keep_path):
    """Fixed-step RK4 for (q, v)' = (v, -A(q) v^2).

    Returns (q, v, path_q, path_v, exit_time); exit_time is nan where the
    trajectory stayed in the chart.
    """
    q = np.array(q0, dtype=complex)
    v = np.array(v0, dtype=complex)
    q, v = np.broadcast_arrays(q, v)
    q, v = q.copy(), v.copy()
    dt = t_end / steps
    exit_time = np.full(q.shape, np.nan)
    alive = np.ones(q.shape, dtype=bool)
    path_q = [q.copy()] if keep_path else None
    path_v = [v.copy()] if keep_path else None

    def acc(x, w):
        with np.errstate(all="ignore"):
            return -metric.log_grad(x) * w * w

    for k in range(steps):
        k1q, k1v = v, acc(q, v)
        k2q, k2v = v + 0.5 * dt * k1v, acc(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
        k3q, k3v = v + 0.5 * dt * k2v, acc(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
        k4q, k4v = v + dt * k3v, acc(q + dt * k3q, v + dt * k3v)
        q = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        with np.errstate(invalid="ignore"):
            out = alive & ~metric.in_chart(q)
        if np.any(out):
            exit_time[out] = (k + 1) * dt
            alive &= ~out
            # freeze escaped trajectories so they stop producing garbage
            q = np.where(out, np.nan, q)
            v = np.where(out, np.nan, v)
        if keep_path:
            path_q.append(q.copy())
            path_v.append(v.copy())
    if keep_path:
        path_q, path_v = np.stack(path_q), np.stack(path_v)
    return q, v, path_q, path_v, exit_time


def geodesic_shoot(metric: ConformalMetric, q0, v0, t_end: float = 1.0, steps: int = DEFAULT_STEPS) -> GeodesicPath:
    """Integrate the geodesic with gamma(0) = q0, gamma'(0) = v0 up to t_end."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not np.all(np.isfinite(v0)):
        raise ValueError("initial velocity must be finite")
    _, _, pq, pv, exit_time = _rk4(metric, q0, v0, t_end, steps, keep_path=True)
    if np.any(np.isfinite(exit_time)):
        t_exit = float(np.nanmin(exit_time))
        raise ChartExitError(f"geodesic left the {metric.name} chart at t={t_exit:.6g}", t_exit)
    times = np.linspace(0.0, t_end, steps + 1)
    return GeodesicPath(times, pq, pv, metric)


def exp_map(metric: ConformalMetric, q0, v0, steps: int = DEFAULT_STEPS):
    q, _, _, _, exit_time = _rk4(metric, q0, v0, 1.0, steps, keep_path=False)
    if np.any(np.isfinite(exit_time)):
        t_exit = float(np.nanmin(exit_time))
        raise ChartExitError(f"exp map left the {metric.name} chart at t={t_exit:.6g}", t_exit)
    return q if np.ndim(q) else complex(q)


def log_map(metric: ConformalMetric, q0, q1, tol: float = 1e-13, max_iter: int = 40,
            steps: int = DEFAULT_STEPS):
    """Initial velocity of the geodesic from q0 reaching q1 at t = 1.

    Damped Newton on the endpoint residual with a finite-difference Jacobian,
    started from the chart straight line and restarted from rescaled guesses.
    """
    q0 = np.asarray(q0, dtype=complex)
    q1 = np.asarray(q1, dtype=complex)
    q0, q1 = np.broadcast_arrays(q0, q1)
    if metric.flat:
        out = q1 - q0
        return out if out.ndim else complex(out)

    def endpoint(v):
        q, _, _, _, _ = _rk4(metric, q0, v, 1.0, steps, keep_path=False)
        return q

    scale = 1.0 + np.abs(q1)
    best_v = None
    best_res = None
    for start in (1.0, 0.5, 1.5, 0.25):
        v = (q1 - q0) * start
        res = endpoint(v) - q1
        rnorm = np.where(np.isfinite(res), np.abs(res), np.inf)
        for _ in range(max_iter):
            done = rnorm <= tol * scale
            if np.all(done):
                break
            d = 1e-7 * np.maximum(1.0, np.abs(v))
            fx = (endpoint(v + d) - q1 - res) / d
            fy = (endpoint(v + 1j * d) - q1 - res) / d
            a11, a12, a21, a22 = fx.real, fy.real, fx.imag, fy.imag
            det = a11 * a22 - a12 * a21
            with np.errstate(all="ignore"):
                dx = (-res.real * a22 + res.imag * a12) / det
                dy = (-a11 * res.imag + a21 * res.real) / det
            step = np.where(np.isfinite(dx + dy) & ~done, dx + 1j * dy, 0.0)
            lam = np.ones(v.shape)
            v_new, res_new, rn_new = v, res, rnorm
            pending = ~done
            for _ in range(30):
                trial = v + lam * step
                r_t = endpoint(trial) - q1
                rn_t = np.where(np.isfinite(r_t), np.abs(r_t), np.inf)
                ok = pending & (rn_t < rnorm)
                v_new = np.where(ok, trial, v_new)
                res_new = np.where(ok, r_t, res_new)
                rn_new = np.where(ok, rn_t, rn_new)
                pending &= ~ok
                if not np.any(pending):
                    break
                lam = np.where(pending, lam * 0.5, lam)
            stalled = np.all(rn_new[~done] >= rnorm[~done])
            v, res, rnorm = v_new, res_new, rn_new
            if stalled:
                break
        if best_v is None:
            best_v, best_res = v.copy(), rnorm.copy()
        else:
            better = rnorm < best_res
            best_v = np.where(better, v, best_v)
            best_res = np.where(better, rnorm, best_res)
        if np.all(best_res <= tol * scale * 10):
            break
    if not np.all(best_res <= tol * scale * 10):
        worst = float(np.max(best_res))
        raise NoConvergenceError(f"log map shooting did not converge (residual {worst:.3e})", worst)
    return best_v if best_v.ndim else complex(best_v)


def metric_norm(metric: ConformalMetric, q, v):
    return np.sqrt(metric.eval(q)) * np.abs(v)


def geodesic_distance(metric: ConformalMetric, q0, q1, **kw):
    v = log_map(metric, q0, q1, **kw)
    d = metric_norm(metric, q0, v)
    if np.any(d > metric.injectivity_radius):
        raise ValueError("points are farther apart than the injectivity radius")
    return d if np.ndim(d) else float(d)


# --------------------------------------------------------------------------
# geodesic balls and the contraction construction


@dataclass
class GeodesicBall:
    center: complex
    radius: float
    boundary_samples: np.ndarray


def make_geodesic_ball(metric: ConformalMetric, center, radius: float, n_samples: int = 32) -> GeodesicBall:
    if radius <= 0:
        raise ValueError("radius must be positive")
    phi = 2 * np.pi * np.arange(n_samples) / n_samples
    unit = np.exp(1j * phi) / np.sqrt(metric.eval(center))
    pts = exp_map(metric, np.full(n_samples, complex(center)), radius * unit)
    return GeodesicBall(complex(center), float(radius), np.asarray(pts))


def ball_invariant_residual(metric: ConformalMetric, ball: GeodesicBall) -> float:
    d = geodesic_distance(metric, np.full(ball.boundary_samples.shape, ball.center), ball.boundary_samples)
    return float(np.max(np.abs(d - ball.radius)))


def _simpson(y, dt):
    """Composite Simpson along axis 0 (even number of intervals)."""
    n = y.shape[0] - 1
    if n % 2:
        raise ValueError("Simpson rule needs an even number of intervals")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return dt / 3.0 * np.tensordot(w, y, axes=(0, 0))


def curvature_integral(metric: ConformalMetric, vertices, steps: int = DEFAULT_STEPS):
    """Integral of K dV over geodesic triangles, via the boundary flux.

    K f = -Laplacian(log f)/2, so by the divergence theorem the area integral
    is -(1/2) * outward flux of grad(log f) through the geodesic sides, i.e.
    -sum over counter-clockwise sides of the line integral of
    Re A dy + Im A dx.  ``vertices`` has shape (3, m) and must be ordered
    counter-clockwise in the chart.
    """
    total = 0.0
    for i in range(3):
        a, b = vertices[i], vertices[(i + 1) % 3]
        v = log_map(metric, a, b, steps=steps)
        _, _, pq, pv, _ = _rk4(metric, a, v, 1.0, steps, keep_path=True)
        A = metric.log_grad(pq)
        integrand = A.real * pv.imag + A.imag * pv.real
        total = total - _simpson(integrand, 1.0 / steps)
    return total


def _sample_in_ball(metric, ball, m, rng, frac=1.0):
    rad = ball.radius * frac * np.sqrt(rng.uniform(0.0, 1.0, m))
    phi = rng.uniform(0.0, 2 * np.pi, m)
    v = rad * np.exp(1j * phi) / np.sqrt(metric.eval(ball.center))
    return np.asarray(exp_map(metric, np.full(m, ball.center), v))


def ball_convexity_check(metric: ConformalMetric, ball: GeodesicBall, trials: int = 100,
                         seed: int = 0, tol: float = 1e-4, small_radius: float = SMALL_RADIUS,
                         vertices=None) -> dict:
    """Angle-pair sums and the Gauss-Bonnet identity on sampled geodesic triangles.

    For each triangle with angles t1, t2, t3 checks t_i + t_j < pi and
    |(pi - t2 - t3) - (t1 - int_T K dV)| <= tol.  Nearly collinear triangles
    are reported as degenerate and skipped.
    """
    rng = np.random.default_rng(seed)
    if vertices is None:
        vertices = np.stack([_sample_in_ball(metric, ball, trials, rng) for _ in range(3)])
    vertices = np.asarray(vertices, dtype=complex)
    a, b, c = vertices
    cross = ((b - a) * np.conj(c - a)).imag * -1.0
    longest = np.maximum.reduce([np.abs(b - a), np.abs(c - b), np.abs(a - c)])
    degenerate = np.abs(cross) <= 1e-3 * longest**2
    keep = ~degenerate
    report = {
        "trials": int(vertices.shape[1]),
        "degenerate": int(degenerate.sum()),
        "tested": int(keep.sum()),
        "radius": ball.radius,
        "within_small_radius": ball.radius <= small_radius,
    }
    if not np.any(keep):
        report.update(max_pair_sum=None, max_gauss_bonnet_residual=None, passed=True)
        return report
    a, b, c = a[keep], b[keep], c[keep]
    # counter-clockwise order for the boundary integral
    ccw = ((b - a) * np.conj(c - a)).imag < 0
    b, c = np.where(ccw, b, c), np.where(ccw, c, b)

    def angle(p, x, y):
        vx, vy = log_map(metric, p, x), log_map(metric, p, y)
        return np.abs(np.angle(vy / vx))

    t1, t2, t3 = angle(a, b, c), angle(b, c, a), angle(c, a, b)
    kint = curvature_integral(metric, np.stack([a, b, c]))
    pair = np.maximum.reduce([t1 + t2, t2 + t3, t1 + t3])
    resid = np.abs((np.pi - t2 - t3) - (t1 - kint))
    report.update(
        max_pair_sum=float(pair.max()),
        pair_margin=float(np.pi - pair.max()),
        max_gauss_bonnet_residual=float(resid.max()),
        passed=bool(pair.max() < np.pi and resid.max() <= tol),
    )
    return report


def tangent_geodesic_check(metric: ConformalMetric, ball: GeodesicBall, samples=16,
                           s_max: float | None = None, n_points: int = 8) -> dict:
    """Geodesics tangent to the ball's boundary circle stay outside except at contact."""
    if s_max is None:
        s_max = 0.5 * ball.radius
    s = np.asarray(samples, dtype=float) if np.ndim(samples) else np.linspace(0.0, s_max, int(samples) + 1)
    phi = 2 * np.pi * np.arange(n_points) / n_points
    unit = np.exp(1j * phi) / np.sqrt(metric.eval(ball.center))
    _, _, pq, pv, _ = _rk4(metric, np.full(n_points, ball.center), ball.radius * unit, 1.0,
                           DEFAULT_STEPS, keep_path=True)
    p0, w = pq[-1], pv[-1]
    tangent = 1j * w / (np.abs(w) * np.sqrt(metric.eval(p0)))
    margins = []
    contact = []
    for sign in (1.0, -1.0):
        # positions at parameters s along the unit-speed tangent geodesic
        s_end = float(s.max()) if s.max() > 0 else 1.0
        steps = 64 * max(1, len(s))
        _, _, tq, _, _ = _rk4(metric, p0, sign * tangent * s_end, 1.0, steps, keep_path=True)
        idx = np.rint(s / s_end * steps).astype(int)
        pts = tq[idx]  # (len(s), n_points)
        d = geodesic_distance(metric, np.full(pts.shape, ball.center), pts)
        zero = s == 0
        if np.any(zero):
            contact.append(np.abs(d[zero] - ball.radius).max())
        if np.any(~zero):
            margins.append((d[~zero] - ball.radius).min())
    margin = float(min(margins)) if margins else None
    report = {
        "radius": ball.radius,
        "min_margin": margin,
        "contact_residual": float(max(contact)) if contact else None,
        "passed": margin is None or margin > 0,
    }
    return report


def increasing_distance_check(metric: ConformalMetric, p, dir_a, dir_b, t_max: float,
                              steps: int = 16) -> dict:
    """dist(a(t), b(t)) strictly increasing for unit-speed geodesics a, b from p.

    ``dir_a``/``dir_b`` may be arrays (one pair per entry); pairs with equal
    directions are excluded.
    """
    dir_a = np.atleast_1d(np.asarray(dir_a, dtype=complex))
    dir_b = np.atleast_1d(np.asarray(dir_b, dtype=complex))
    dir_a, dir_b = np.broadcast_arrays(dir_a, dir_b)
    s0 = np.sqrt(metric.eval(p))
    ua = dir_a / (np.abs(dir_a) * s0)
    ub = dir_b / (np.abs(dir_b) * s0)
    excluded = np.abs(np.angle(ub / ua)) < 1e-12
    report = {"pairs": int(dir_a.size), "excluded": int(excluded.sum())}
    keep = ~excluded
    if not np.any(keep):
        report.update(min_increment=None, increasing=None, passed=None)
        return report
    ua, ub = ua[keep], ub[keep]
    m = ua.size
    sub = 8
    _, _, pa, _, _ = _rk4(metric, np.full(m, complex(p)), ua * t_max, 1.0, steps * sub, keep_path=True)
    _, _, pb, _, _ = _rk4(metric, np.full(m, complex(p)), ub * t_max, 1.0, steps * sub, keep_path=True)
    qa, qb = pa[sub::sub], pb[sub::sub]  # t_k = k t_max / steps, k >= 1
    d = geodesic_distance(metric, qa, qb)
    d = np.vstack([np.zeros((1, m)), d])
    inc = np.diff(d, axis=0)
    report.update(
        min_increment=float(inc.min()),
        increasing=bool(np.all(inc > 0)),
        passed=bool(np.all(inc > 0)),
        distances=d[:, 0].tolist() if m == 1 else None,
    )
    return report


def radial_retraction(metric: ConformalMetric, center, radius: float, q):
    """Radial geodesic projection onto the closed ball B(center, radius)."""
    q = np.asarray(q, dtype=complex)
    v = log_map(metric, np.full(q.shape, center), q)
    d = metric_norm(metric, center, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(d > radius, v * (radius / d), v)
    return np.where(d > radius, exp_map(metric, np.full(q.shape, center), scaled), q)


def contraction_map(metric: ConformalMetric, ball_r: GeodesicBall, ball_r0: GeodesicBall, q):
    """The Lipschitz map that is the identity on B_r and contracts outside it.

    Identity on the closed ball B_r, radial projection onto its boundary on the
    annulus B_r0 minus B_r, and tau o psi outside B_r0 with psi the radial
    retraction onto B_r0 and tau the geodesic dilation by r / r0.
    """
    if ball_r.center != ball_r0.center:
        raise ValueError("balls must share their center")
    r, r0 = ball_r.radius, ball_r0.radius
    if not r < r0:
        raise ValueError("need r < r0")
    q = np.atleast_1d(np.asarray(q, dtype=complex))
    if not np.all(metric.in_chart(q)):
        raise ValueError("point outside the chart")
    c = ball_r.center
    cc = np.full(q.shape, c)
    v = log_map(metric, cc, q)
    d = metric_norm(metric, c, v)
    out = q.copy()
    annulus = (d > r) & (d < r0)
    if np.any(annulus):
        out[annulus] = exp_map(metric, cc[annulus], v[annulus] * (r / d[annulus]))
    far = d >= r0
    if np.any(far):
        psi = radial_retraction(metric, c, r0, q[far])
        w = log_map(metric, cc[far], psi)
        out[far] = exp_map(metric, cc[far], (r / r0) * w)
    return out


def lipschitz_quotients(metric: ConformalMetric, ball_r: GeodesicBall, ball_r0: GeodesicBall, q1, q2):
    """dist(Psi q1, Psi q2) / dist(q1, q2) for paired samples."""
    p1 = contraction_map(metric, ball_r, ball_r0, q1)
    p2 = contraction_map(metric, ball_r, ball_r0, q2)
    num = geodesic_distance(metric, p1, p2)
    den = geodesic_distance(metric, np.asarray(q1), np.asarray(q2))
    return np.asarray(num) / np.asarray(den)
