"""The regularized p-energy, its derivatives and the pointwise quantities
|Du|^2, J, lambda, T and V.

Pointwise fields are nodal and use the grid's finite-difference operators.
The energy that the solver minimizes is the P1 finite-element energy: on each
triangle the gradient of the linear interpolant is constant, the target
factor is sampled at the image of the centroid and the domain factor at the
centroid.  This couples neighbouring nodes and has no checkerboard null modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import ConformalMetric
from .grid import INTERIOR, DomainGrid, MapField, wirtinger

LAMBDA_FLOOR = 1e-30


@dataclass(frozen=True)
class EnergyParams:
    p: float
    eps: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 2):
            raise ValueError(f"p must be >= 2, got {self.p}")
        if not (0 <= self.eps < 1):
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")


def _pair_norm_sq(uz, uzb, sigma, rho, nodes, values):
    return rho.eval(values) / sigma.eval(nodes) * (np.abs(uz) ** 2 + np.abs(uzb) ** 2)


def du_norm_sq(field: MapField, sigma: ConformalMetric, rho: ConformalMetric):
    uz, uzb = wirtinger(field)
    return _pair_norm_sq(uz, uzb, sigma, rho, field.grid.nodes, field.values)


def jacobian(field: MapField, sigma: ConformalMetric, rho: ConformalMetric):
    uz, uzb = wirtinger(field)
    ratio = rho.eval(field.values) / sigma.eval(field.grid.nodes)
    return ratio * (np.abs(uz) ** 2 - np.abs(uzb) ** 2)


def lambda_of(du2, params: EnergyParams, floor: float = 0.0):
    """(eps^2 + |Du|^2)^((p-2)/2); ``floor`` guards 0**negative in derivatives."""
    return (params.eps**2 + du2 + floor) ** ((params.p - 2) / 2)


def lambda_field(field, params: EnergyParams, sigma, rho):
    return lambda_of(du_norm_sq(field, sigma, rho), params)


def t_field(field, params: EnergyParams, sigma, rho):
    return derived_fields(field, params, sigma, rho).T


def v_field(field, params: EnergyParams, sigma, rho):
    """V = (eps^2 + |Du|^2)^((p-2)/4) (u_z, u_zbar)."""
    uz, uzb = wirtinger(field)
    du2 = _pair_norm_sq(uz, uzb, sigma, rho, field.grid.nodes, field.values)
    s = (params.eps**2 + du2) ** ((params.p - 2) / 4)
    return s * uz, s * uzb


@dataclass(frozen=True)
class DerivedFields:
    du_norm_sq: np.ndarray
    jacobian: np.ndarray
    lam: np.ndarray
    T: np.ndarray
    V: tuple
    jv: np.ndarray           # det of the V pair: |V_1|^2 - |V_2|^2
    jv_weighted: np.ndarray  # same with the rho/sigma factor
    params: EnergyParams

    def columns(self) -> dict:
        return {"duNormSq": self.du_norm_sq, "J": self.jacobian, "lambda": self.lam, "T": self.T}


def derived_fields(field: MapField, params: EnergyParams, sigma, rho) -> DerivedFields:
    uz, uzb = wirtinger(field)
    ratio = rho.eval(field.values) / sigma.eval(field.grid.nodes)
    du2 = ratio * (np.abs(uz) ** 2 + np.abs(uzb) ** 2)
    jac = ratio * (np.abs(uz) ** 2 - np.abs(uzb) ** 2)
    lam = lambda_of(du2, params)
    s = np.sqrt(lam)
    jv = lam * (np.abs(uz) ** 2 - np.abs(uzb) ** 2)
    return DerivedFields(du2, jac, lam, lam * jac, (s * uz, s * uzb), jv, ratio * jv, params)


def el_residual(field: MapField, params: EnergyParams, sigma, rho):
    """Strong-form Euler-Lagrange residual

        [lam u_z]_zbar + [lam u_zbar]_z + 2 lam A(u) u_z u_zbar

    at interior nodes (nan on the boundary ring).  Diagnostic only.
    """
    grid = field.grid
    uz, uzb = wirtinger(field)
    lam = lambda_of(_pair_norm_sq(uz, uzb, sigma, rho, grid.nodes, field.values), params, LAMBDA_FLOOR)

    def d_z(f):
        return 0.5 * (grid.dx @ f - 1j * (grid.dy @ f))

    def d_zb(f):
        return 0.5 * (grid.dx @ f + 1j * (grid.dy @ f))

    res = d_zb(lam * uz) + d_z(lam * uzb) + 2 * lam * rho.log_deriv(field.values) * uz * uzb
    res = res.astype(complex)
    res[grid.kind != INTERIOR] = np.nan
    return res


# ---------------------------------------------------------------- P1 energy


class EnergyModel:
    """P1 energy of a map on ``grid`` with value, gradient and a convexified
    Hessian with respect to the interior nodal values.

    Gradients are packed as ``dE/dRe u + 1j dE/dIm u`` per node.
    """

    def __init__(self, grid: DomainGrid, params: EnergyParams, sigma: ConformalMetric, rho: ConformalMetric):
        self.grid, self.params, self.sigma, self.rho = grid, params, sigma, rho
        self.tri = grid.triangles
        self.a, self.b = grid.tri_gx, grid.tri_gy
        self.sig_c = sigma.eval(grid.centroids)
        self.weight = grid.tri_area * self.sig_c
        self.free = np.flatnonzero(grid.kind == INTERIOR)
        self._hess_pattern = None

    # element kinematics
    def _kin(self, u):
        ut = u[self.tri]
        ux = np.sum(self.a * ut, axis=1)
        uy = np.sum(self.b * ut, axis=1)
        uc = ut.mean(axis=1)
        S = 0.5 * (np.abs(ux) ** 2 + np.abs(uy) ** 2)
        return ut, ux, uy, uc, S

    def element_terms(self, u):
        """Per-triangle (u_z, u_zbar, rho/sigma ratio)."""
        _, ux, uy, uc, _ = self._kin(u)
        return 0.5 * (ux - 1j * uy), 0.5 * (ux + 1j * uy), self.rho.eval(uc) / self.sig_c

    def value(self, u) -> float:
        _, _, _, uc, S = self._kin(u)
        q = self.rho.eval(uc) * S / self.sig_c
        return float(np.sum(self.weight * (self.params.eps**2 + q) ** (self.params.p / 2)))

    def _dphi(self, w):
        p = self.params.p
        return 0.5 * p * w ** (0.5 * p - 1)

    def gradient(self, u):
        _, ux, uy, uc, S = self._kin(u)
        R = self.rho.eval(uc)
        A = self.rho.log_deriv(uc)
        w = self.params.eps**2 + R * S / self.sig_c + LAMBDA_FLOOR
        coef = self.weight * self._dphi(w) / self.sig_c
        # d(R S)/dU_k packed: S R (2/3) conj(A) + R (a_k u_x + b_k u_y)
        g_el = coef[:, None] * R[:, None] * (
            (2.0 / 3.0) * (S * np.conj(A))[:, None] + self.a * ux[:, None] + self.b * uy[:, None]
        )
        g = np.zeros(self.grid.size, dtype=complex)
        np.add.at(g, self.tri.ravel(), g_el.ravel())
        g[self.grid.kind != INTERIOR] = 0.0
        return g

    def hessian(self, u) -> sp.csr_matrix:
        """Sum of per-triangle Hessians projected onto PSD, restricted to
        interior dofs ordered (Re u_0, Im u_0, Re u_1, ...) over ``free``."""
        p = self.params.p
        ut, ux, uy, uc, S = self._kin(u)
        nt = ut.shape[0]
        U = np.empty((nt, 6))
        U[:, 0::2], U[:, 1::2] = ut.real, ut.imag
        K = self.a[:, :, None] * self.a[:, None, :] + self.b[:, :, None] * self.b[:, None, :]
        Q = _kron_i2(K)
        gS = np.einsum("tij,tj->ti", Q, U)
        R = self.rho.eval(uc)
        w = self.params.eps**2 + R * S / self.sig_c + LAMBDA_FLOOR
        d1 = 0.5 * p * w ** (0.5 * p - 1)
        d2 = 0.5 * p * (0.5 * p - 1) * w ** (0.5 * p - 2)
        if self.rho.flat:
            gq = R[:, None] * gS / self.sig_c[:, None]
            Hq = (R / self.sig_c)[:, None, None] * Q
        else:
            A = self.rho.log_deriv(uc)
            lx, ly = 2 * A.real, -2 * A.imag
            lxx, lxy, _, lyy = self.rho.second_derivs(uc)
            grho = R[:, None] * np.stack([lx, ly], axis=1)
            Hrho = R[:, None, None] * np.stack(
                [np.stack([lxx + lx * lx, lxy + lx * ly], 1), np.stack([lxy + lx * ly, lyy + ly * ly], 1)], 1
            )
            gR = np.tile(grho, 3) / 3.0
            HR = np.tile(Hrho, (1, 3, 3)) / 9.0
            sc = 1.0 / self.sig_c
            gq = sc[:, None] * (S[:, None] * gR + R[:, None] * gS)
            Hq = sc[:, None, None] * (
                S[:, None, None] * HR
                + gR[:, :, None] * gS[:, None, :]
                + gS[:, :, None] * gR[:, None, :]
                + R[:, None, None] * Q
            )
        H = self.weight[:, None, None] * (
            d2[:, None, None] * gq[:, :, None] * gq[:, None, :] + d1[:, None, None] * Hq
        )
        if not self.rho.flat:
            vals, vecs = np.linalg.eigh(H)
            H = np.einsum("tij,tj,tkj->tik", vecs, np.clip(vals, 0.0, None), vecs)
        rows, cols, keep, n_free = self._pattern()
        return sp.csr_matrix((H.reshape(nt, 36).ravel()[keep], (rows, cols)), shape=(2 * n_free, 2 * n_free))

    def _pattern(self):
        if self._hess_pattern is None:
            loc = np.full(self.grid.size, -1)
            loc[self.free] = np.arange(self.free.size)
            dof = np.empty((self.tri.shape[0], 6), dtype=int)
            lt = loc[self.tri]
            dof[:, 0::2] = np.where(lt >= 0, 2 * lt, -1)
            dof[:, 1::2] = np.where(lt >= 0, 2 * lt + 1, -1)
            r = np.repeat(dof, 6, axis=1).ravel()
            c = np.tile(dof, (1, 6)).ravel()
            keep = (r >= 0) & (c >= 0)
            self._hess_pattern = (r[keep], c[keep], keep, self.free.size)
        return self._hess_pattern


def _kron_i2(K):
    out = np.zeros(K.shape[:1] + (6, 6))
    out[:, 0::2, 0::2] = K
    out[:, 1::2, 1::2] = K
    return out


def energy_value(field: MapField, params: EnergyParams, sigma, rho) -> float:
    return EnergyModel(field.grid, params, sigma, rho).value(field.values)


def energy_gradient(field: MapField, params: EnergyParams, sigma, rho):
    """Packed gradient of :func:`energy_value`; zero at boundary nodes."""
    return EnergyModel(field.grid, params, sigma, rho).gradient(field.values)


# ---------------------------------------------------------- exponent N_E


def alpha_bounds(params: EnergyParams) -> tuple:
    """Range of t E''(t)/E'(t) for E(t) = (eps^2 + t)^(p/2) over t > 0."""
    a = (params.p - 2) / 2
    return (a, a) if params.eps == 0 else (0.0, a)


def subharmonicity_exponent(params: EnergyParams, alpha_lo=None, alpha_hi=None, reject_below: float = -0.49) -> int:
    """Smallest convenient integer N with N > C^2/(1-C^2) for all alpha in range,
    where C = |alpha|/(2 + 2 alpha - |alpha|)."""
    lo, hi = alpha_bounds(params)
    lo = lo if alpha_lo is None else float(alpha_lo)
    hi = hi if alpha_hi is None else float(alpha_hi)
    if lo <= -0.5:
        raise ValueError(f"alpha lower bound {lo} must exceed -1/2")
    if lo < reject_below:
        raise ValueError(f"alpha lower bound {lo} below configured limit {reject_below}")
    if hi < lo:
        raise ValueError("alpha upper bound below lower bound")
    worst = 0.0
    for a in (lo, hi):
        c = abs(a) / (2 + 2 * a - abs(a))
        worst = max(worst, c * c / (1 - c * c))
    return int(math.ceil(worst)) + 1


# --------------------------------------------------- monotonicity inequalities


def _as_real(X):
    X = np.asarray(X)
    if np.iscomplexobj(X):
        return np.concatenate([X.real, X.imag], axis=-1)
    return X.astype(float)


@dataclass(frozen=True)
class MonotonicitySample:
    lhs: np.ndarray       # <F(X) - F(Y), X - Y> with F(X) = (eps^2+|X|^2)^((p-2)/2) X
    rhs: np.ndarray       # (eps^2+|X|^2+|Y|^2)^((p-2)/2) |X - Y|^2, i.e. the bound with C = 1
    quotient: np.ndarray  # |G(X) - G(Y)| / (((eps^2+|X|^2)^q + (eps^2+|Y|^2)^q) |X - Y|)


def monotonicity_gap(X, Y, params: EnergyParams, q=None) -> MonotonicitySample:
    """Both monotonicity estimates on sampled vector pairs (last axis = components).

    ``q`` defaults to (p-2)/4, the exponent carried by V.
    """
    X, Y = _as_real(X), _as_real(Y)
    e2, p = params.eps**2, params.p
    q = (p - 2) / 4 if q is None else q
    nx, ny = np.sum(X * X, axis=-1), np.sum(Y * Y, axis=-1)
    D = X - Y
    d2 = np.sum(D * D, axis=-1)
    FX = (e2 + nx)[..., None] ** ((p - 2) / 2) * X
    FY = (e2 + ny)[..., None] ** ((p - 2) / 2) * Y
    lhs = np.sum((FX - FY) * D, axis=-1)
    rhs = (e2 + nx + ny) ** ((p - 2) / 2) * d2
    GX = (e2 + nx)[..., None] ** q * X
    GY = (e2 + ny)[..., None] ** q * Y
    num = np.sqrt(np.sum((GX - GY) ** 2, axis=-1))
    den = ((e2 + nx) ** q + (e2 + ny) ** q) * np.sqrt(d2)
    with np.errstate(invalid="ignore", divide="ignore"):
        quot = np.where(d2 > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return MonotonicitySample(lhs, rhs, quot)
