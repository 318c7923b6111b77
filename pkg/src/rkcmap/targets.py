"""Convex target regions in the target chart and boundary parametrizations.

A boundary loop is described by its cumulative length function
``ell(theta)`` measured along the target boundary from a fixed base point:
the image of the domain boundary point ``e^{i theta}`` is the target
boundary point at arc length ``ell(theta)``.  Its derivative is the boundary
speed.  Mixing two loops linearly in ``ell`` is exactly integrating the mixed
speed from the common base point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ellipeinc

_POLYLINE_POINTS = 16384


class TargetRegion:
    """A convex region with a positively oriented, arc-length parametrized boundary."""

    kind = "region"

    @property
    def length(self) -> float:
        raise NotImplementedError

    def point_at(self, s):
        """Boundary point at arc length ``s`` (taken modulo the length)."""
        raise NotImplementedError

    def contains(self, w):
        return self.signed_distance(w) < 0

    def polyline(self, m: int = _POLYLINE_POINTS) -> np.ndarray:
        return self.point_at(self.length * np.arange(m) / m)

    def signed_distance(self, w):
        """Euclidean chart distance to the boundary, negative inside."""
        w = np.asarray(w, dtype=complex)
        d = _polyline_distance(self._dense(), w)
        return np.where(self._inside(w), -d, d)

    def _dense(self):
        if not hasattr(self, "_poly_cache"):
            object.__setattr__(self, "_poly_cache", self.polyline())
        return self._poly_cache

    def _inside(self, w):
        raise NotImplementedError

    def is_convex(self, m: int = 512) -> bool:
        pts = self.polyline(m)
        e = np.roll(pts, -1) - pts
        turn = (np.conj(e) * np.roll(e, -1)).imag
        return bool(np.all(turn > -1e-12) and np.sum(turn) > 0)

    def spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class DiscTarget(TargetRegion):
    radius: float = 1.0
    center: complex = 0j
    kind = "disc"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    @property
    def length(self):
        return 2 * math.pi * self.radius

    def point_at(self, s):
        return self.center + self.radius * np.exp(1j * np.asarray(s) / self.radius)

    def signed_distance(self, w):
        return np.abs(np.asarray(w) - self.center) - self.radius

    def _inside(self, w):
        return np.abs(w - self.center) < self.radius

    def spec(self):
        return {"kind": "disc", "radius": self.radius}


@dataclass(frozen=True, eq=True)
class EllipseTarget(TargetRegion):
    """Ellipse x = a cos t, y = b sin t, base point (a, 0)."""

    a: float = 1.0
    b: float = 0.6
    kind = "ellipse"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("ellipse semi-axes must be positive")

    def _m(self):
        return -(self.a**2 - self.b**2) / self.b**2

    def arc(self, t):
        """Arc length from the base point to parameter t (t may exceed 2 pi)."""
        return self.b * ellipeinc(np.asarray(t, dtype=float), self._m())

    def speed(self, t):
        return np.hypot(self.a * np.sin(t), self.b * np.cos(t))

    @property
    def length(self):
        return float(self.arc(2 * math.pi))

    def param_at(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.length)
        t = 2 * math.pi * s / self.length
        for _ in range(50):
            step = (self.arc(t) - s) / self.speed(t)
            t = t - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return t

    def point_at(self, s):
        t = self.param_at(s)
        return self.a * np.cos(t) + 1j * self.b * np.sin(t)

    def polyline(self, m: int = _POLYLINE_POINTS):
        # equal parameter steps are fine for distance queries and avoid the inversion
        t = 2 * math.pi * np.arange(m) / m
        return self.a * np.cos(t) + 1j * self.b * np.sin(t)

    def _inside(self, w):
        return (w.real / self.a) ** 2 + (w.imag / self.b) ** 2 < 1

    def max_curvature(self):
        hi, lo = max(self.a, self.b), min(self.a, self.b)
        return hi / lo**2

    def spec(self):
        return {"kind": "ellipse", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class PolygonTarget(TargetRegion):
    vertices: tuple = field(default=())
    kind = "polygon"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex)
        if v.size < 3:
            raise ValueError("polygon needs at least three vertices")
        area = 0.5 * np.sum((np.conj(v) * np.roll(v, -1)).imag)
        if area <= 0:
            raise ValueError("polygon vertices must be counter-clockwise")
        e = np.roll(v, -1) - v
        if np.any((np.conj(e) * np.roll(e, -1)).imag <= 0):
            raise ValueError("polygon is not strictly convex")

    @property
    def _v(self):
        return np.asarray(self.vertices, dtype=complex)

    @property
    def _cum(self):
        v = self._v
        return np.concatenate([[0.0], np.cumsum(np.abs(np.roll(v, -1) - v))])

    @property
    def length(self):
        return float(self._cum[-1])

    def point_at(self, s):
        v, cum = self._v, self._cum
        s = np.mod(np.asarray(s, dtype=float), cum[-1])
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, v.size - 1)
        e = np.roll(v, -1) - v
        return v[k] + e[k] * ((s - cum[k]) / np.abs(e[k]))

    def signed_distance(self, w):
        w = np.asarray(w, dtype=complex)
        v = self._v
        e = np.roll(v, -1) - v
        d = _segment_distance(v, e, w)
        side = np.max(((np.conj(e)[None] * (w[..., None] - v)).imag * -1) / np.abs(e), axis=-1)
        return np.where(side < 0, -d, d)

    def _inside(self, w):
        return self.signed_distance(w) < 0

    def spec(self):
        return {"kind": "polygon", "vertices": [complex(z) for z in self.vertices]}


def _segment_distance(v, e, w):
    rel = w[..., None] - v
    t = np.clip((np.conj(e) * rel).real / np.abs(e) ** 2, 0, 1)
    return np.min(np.abs(rel - t * e), axis=-1)


def _polyline_distance(pts, w):
    """Distance from ``w`` to the closed polyline through ``pts``."""
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    flat = np.ravel(w)
    _, k = tree.query(np.column_stack([flat.real, flat.imag]))
    m = pts.size
    best = np.full(flat.shape, np.inf)
    for a in (k - 1, k):
        v = pts[a % m]
        e = pts[(a + 1) % m] - v
        t = np.clip((np.conj(e) * (flat - v)).real / np.abs(e) ** 2, 0, 1)
        best = np.minimum(best, np.abs(flat - v - t * e))
    return best.reshape(np.shape(w))


def make_target(kind: str, **params) -> TargetRegion:
    if kind == "disc":
        return DiscTarget(radius=float(params.get("radius", 1.0)))
    if kind == "ellipse":
        return EllipseTarget(a=float(params.get("a", 1.0)), b=float(params.get("b", 0.6)))
    if kind == "polygon":
        return PolygonTarget(vertices=tuple(complex(z) for z in params["vertices"]))
    raise ValueError(f"unknown target kind {kind!r}")


# ------------------------------------------------------------ boundary loops


@dataclass(frozen=True, eq=False)
class BoundaryLoop:
    """Boundary data sampled at domain angles ``theta``.

    ``ell`` is the target arc length reached at each angle and ``speed`` its
    derivative d ell / d theta.
    """

    target: TargetRegion
    theta: np.ndarray
    ell: np.ndarray
    speed: np.ndarray

    def __post_init__(self):
        if np.any(self.speed <= 0):
            raise ValueError("boundary speed must be strictly positive")

    @property
    def length(self) -> float:
        return self.target.length

    @property
    def points(self) -> np.ndarray:
        return self.target.point_at(self.ell)

    def total_speed(self) -> float:
        """Periodic trapezoid integral of the speed over the loop."""
        return float(np.mean(self.speed) * 2 * math.pi)


LOOP_KINDS = ("arclength", "warped", "angle")


def make_loop(target: TargetRegion, theta, kind: str = "arclength", warp: float = 0.0) -> BoundaryLoop:
    """Named boundary parametrization of ``target`` over domain angles ``theta``.

    arclength  constant speed L / 2 pi
    warped     ell = L (theta + warp sin theta) / 2 pi, |warp| < 1
    angle      ellipse: the point (a cos theta, b sin theta); disc: same as arclength
    """
    theta = np.asarray(theta, dtype=float)
    L = target.length
    if kind == "arclength":
        ell, speed = L * theta / (2 * math.pi), np.full(theta.shape, L / (2 * math.pi))
    elif kind == "warped":
        if not abs(warp) < 1:
            raise ValueError("warp must satisfy |warp| < 1")
        ell = L * (theta + warp * np.sin(theta)) / (2 * math.pi)
        speed = L * (1 + warp * np.cos(theta)) / (2 * math.pi)
    elif kind == "angle":
        if isinstance(target, EllipseTarget):
            ell, speed = target.arc(theta), target.speed(theta)
        elif isinstance(target, DiscTarget):
            ell, speed = L * theta / (2 * math.pi), np.full(theta.shape, L / (2 * math.pi))
        else:
            raise ValueError("angle parametrization needs a disc or ellipse target")
    else:
        raise ValueError(f"unknown boundary parametrization {kind!r}")
    return BoundaryLoop(target, theta, np.asarray(ell, dtype=float), np.asarray(speed, dtype=float))


def boundary_homotopy(loop0: BoundaryLoop, loop1: BoundaryLoop, t: float, tol: float = 1e-9) -> BoundaryLoop:
    """Loop whose speed is (1-t) speed0 + t speed1, started from the common base point."""
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    if loop0.theta.shape != loop1.theta.shape or np.any(loop0.theta != loop1.theta):
        raise ValueError("loops are sampled at different angles")
    if loop0.target != loop1.target and loop0.target.spec() != loop1.target.spec():
        raise ValueError("loops traverse different target curves")
    if abs(loop0.length - loop1.length) > tol * max(1.0, loop0.length):
        raise ValueError("loop lengths differ")
    if np.any(np.diff(loop0.ell) <= 0) or np.any(np.diff(loop1.ell) <= 0):
        raise ValueError("orientation mismatch: arc length must increase with the angle")
    ell = (1 - t) * loop0.ell + t * loop1.ell
    speed = (1 - t) * loop0.speed + t * loop1.speed
    return BoundaryLoop(loop0.target, loop0.theta, ell, speed)
