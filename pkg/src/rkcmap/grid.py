"""Disc-chart discretization: nodes, stencils, P1 elements and quadrature.

Interior nodes are the points of the lattice ``-1 + h Z^2`` (h = 2/n) lying
in ``|z| < 1 - h/2``; boundary nodes sit exactly on the unit circle at equal
angles, so boundary data is evaluated, never interpolated.  The two sets are
joined by a triangulation whose interior part splits every full lattice
square along the same diagonal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay, cKDTree

INTERIOR = 0
BOUNDARY = 1
GHOST = 2  # reserved in the kind vocabulary; never materialized

KIND_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary", GHOST: "ghost"}

_LSQ_NEIGHBORS = 12


@dataclass(eq=False)
class DomainGrid:
    n: int
    h: float
    nodes: np.ndarray          # complex chart positions
    kind: np.ndarray           # INTERIOR / BOUNDARY per node
    lattice: np.ndarray        # (N, 2) lattice indices, -1 on the boundary ring
    boundary: np.ndarray       # boundary node indices in counter-clockwise order
    boundary_s: np.ndarray     # arc-length coordinate (= angle) of each boundary node
    nbr5: np.ndarray           # (N, 4) E, W, N, S lattice neighbours or -1
    nbr9: np.ndarray           # (N, 8) adds NE, NW, SW, SE
    full_stencil: np.ndarray   # interior nodes whose 4 neighbours are interior
    triangles: np.ndarray      # (T, 3) counter-clockwise
    tri_area: np.ndarray
    tri_gx: np.ndarray         # (T, 3) d(hat_k)/dx on each triangle
    tri_gy: np.ndarray
    weights: np.ndarray        # lumped nodal quadrature weights
    dx: sp.csr_matrix = field(repr=False)
    dy: sp.csr_matrix = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.kind == INTERIOR)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def boundary_length(self) -> float:
        return 2 * math.pi


def build_disc_grid(n: int) -> DomainGrid:
    if n < 8:
        raise ValueError(f"grid resolution n={n} too small (need n >= 8)")
    h = 2.0 / n
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    z = (-1.0 + ii * h) + 1j * (-1.0 + jj * h)
    inside = np.abs(z) < 1.0 - 0.5 * h
    ii, jj, z = ii[inside], jj[inside], z[inside]
    n_int = z.size

    m = int(math.ceil(2 * math.pi / h))
    theta = 2 * math.pi * np.arange(m) / m
    ring = np.exp(1j * theta)

    nodes = np.concatenate([z, ring])
    kind = np.concatenate([np.full(n_int, INTERIOR, np.int8), np.full(m, BOUNDARY, np.int8)])
    lattice = np.full((nodes.size, 2), -1, dtype=int)
    lattice[:n_int, 0], lattice[:n_int, 1] = ii, jj
    boundary = np.arange(n_int, n_int + m)

    index = np.full((n + 1, n + 1), -1, dtype=int)
    index[ii, jj] = np.arange(n_int)

    def at(di, dj):
        a, b = ii + di, jj + dj
        ok = (a >= 0) & (a <= n) & (b >= 0) & (b <= n)
        out = np.full(n_int, -1)
        out[ok] = index[a[ok], b[ok]]
        return out

    offsets5 = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    offsets9 = offsets5 + [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    nbr5 = np.full((nodes.size, 4), -1)
    nbr9 = np.full((nodes.size, 8), -1)
    nbr5[:n_int] = np.stack([at(*o) for o in offsets5], axis=1)
    nbr9[:n_int] = np.stack([at(*o) for o in offsets9], axis=1)
    full = np.zeros(nodes.size, dtype=bool)
    full[:n_int] = np.all(nbr5[:n_int] >= 0, axis=1)

    triangles = _triangulate(nodes, n_int, ii, jj, index, n)
    p = nodes[triangles]
    x, y = p.real, p.imag
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / area2[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / area2[:, None]
    area = 0.5 * area2
    weights = np.bincount(triangles.ravel(), weights=np.repeat(area / 3.0, 3), minlength=nodes.size)

    dx, dy = _derivative_matrices(nodes, full, nbr5, h)
    return DomainGrid(
        n=n, h=h, nodes=nodes, kind=kind, lattice=lattice, boundary=boundary,
        boundary_s=theta, nbr5=nbr5, nbr9=nbr9, full_stencil=full,
        triangles=triangles, tri_area=area, tri_gx=gx, tri_gy=gy, weights=weights,
        dx=dx, dy=dy,
    )


def _triangulate(nodes, n_int, ii, jj, index, n):
    pts = np.column_stack([nodes.real, nodes.imag])
    tri = Delaunay(pts).simplices
    # lower-left corners of lattice squares with all four corners interior
    a = index[:-1, :-1]
    b = index[1:, :-1]
    c = index[1:, 1:]
    d = index[:-1, 1:]
    full_sq = (a >= 0) & (b >= 0) & (c >= 0) & (d >= 0)
    sq_id = np.full((n + 1, n + 1), -1)
    sq_id[:-1, :-1][full_sq] = 1

    # drop Delaunay triangles covering a full square; they are re-added with a fixed diagonal
    lat_i = np.full(nodes.size, -10**6)
    lat_j = np.full(nodes.size, -10**6)
    lat_i[:n_int], lat_j[:n_int] = ii, jj
    ti, tj = lat_i[tri], lat_j[tri]
    all_lattice = np.all(tri < n_int, axis=1)
    i0, j0 = ti.min(axis=1), tj.min(axis=1)
    in_square = all_lattice & (ti.max(axis=1) - i0 <= 1) & (tj.max(axis=1) - j0 <= 1)
    covered = np.zeros(tri.shape[0], dtype=bool)
    covered[in_square] = sq_id[i0[in_square], j0[in_square]] == 1
    keep = tri[~covered]

    A, B, C, D = a[full_sq], b[full_sq], c[full_sq], d[full_sq]
    fixed = np.concatenate([np.stack([A, B, C], 1), np.stack([A, C, D], 1)])
    tris = np.concatenate([keep, fixed])
    p = nodes[tris]
    cross = ((p[:, 1] - p[:, 0]) * np.conj(p[:, 2] - p[:, 0])).imag
    flip = cross > 0  # clockwise
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _derivative_matrices(nodes, full, nbr5, h):
    """Sparse d/dx, d/dy: central differences on full stencils, local quadratic
    least squares (exact for quadratics) elsewhere."""
    n_nodes = nodes.size
    rows, cols, vx, vy = [], [], [], []
    idx = np.flatnonzero(full)
    e, w, nn, s = nbr5[idx].T
    for nb, cx, cy in ((e, 1.0, 0.0), (w, -1.0, 0.0), (nn, 0.0, 1.0), (s, 0.0, -1.0)):
        rows.append(idx)
        cols.append(nb)
        vx.append(np.full(idx.size, cx / (2 * h)))
        vy.append(np.full(idx.size, cy / (2 * h)))

    rest = np.flatnonzero(~full)
    tree = cKDTree(np.column_stack([nodes.real, nodes.imag]))
    _, nbrs = tree.query(np.column_stack([nodes[rest].real, nodes[rest].imag]), k=_LSQ_NEIGHBORS)
    d = nodes[nbrs] - nodes[rest][:, None]
    X, Y = d.real / h, d.imag / h
    V = np.stack([np.ones_like(X), X, Y, X * X, X * Y, Y * Y], axis=2)
    pinv = np.linalg.pinv(V)  # (m, 6, k)
    rows.append(np.repeat(rest, _LSQ_NEIGHBORS))
    cols.append(nbrs.ravel())
    vx.append((pinv[:, 1, :] / h).ravel())
    vy.append((pinv[:, 2, :] / h).ravel())

    rows, cols = np.concatenate(rows), np.concatenate(cols)
    dx = sp.csr_matrix((np.concatenate(vx), (rows, cols)), shape=(n_nodes, n_nodes))
    dy = sp.csr_matrix((np.concatenate(vy), (rows, cols)), shape=(n_nodes, n_nodes))
    return dx, dy


@dataclass(eq=False)
class MapField:
    """Nodal values of a map in the target chart."""

    values: np.ndarray
    grid: DomainGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.size,):
            raise ValueError("field size does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")

    @classmethod
    def from_function(cls, grid: DomainGrid, fn) -> "MapField":
        return cls(fn(grid.nodes), grid)

    @property
    def boundary_trace(self) -> np.ndarray:
        return self.values[self.grid.boundary]

    def conj(self) -> "MapField":
        return MapField(np.conj(self.values), self.grid)

    def copy(self) -> "MapField":
        return MapField(self.values.copy(), self.grid)


def partials(grid: DomainGrid, values):
    values = np.asarray(values)
    return grid.dx @ values, grid.dy @ values


def wirtinger(field: MapField):
    """(u_z, u_zbar) at every node."""
    ux, uy = partials(field.grid, field.values)
    return 0.5 * (ux - 1j * uy), 0.5 * (ux + 1j * uy)


def integrate(grid: DomainGrid, values, sigma=None) -> float:
    """Quadrature of a nodal field against dV = sigma dx dy."""
    w = grid.weights
    if sigma is not None:
        w = w * sigma.eval(grid.nodes)
    return float(np.sum(w * np.asarray(values)))


def discrete_laplacian(grid: DomainGrid, values):
    """5-point Laplacian on full-stencil interior nodes; nan elsewhere."""
    values = np.asarray(values)
    out = np.full(values.shape, np.nan, dtype=values.dtype if np.iscomplexobj(values) else float)
    idx = np.flatnonzero(grid.full_stencil)
    nb = grid.nbr5[idx]
    out[idx] = (values[nb].sum(axis=1) - 4.0 * values[idx]) / grid.h**2
    return out


def dump_fields_csv(path, field: MapField, extra: dict | None = None) -> None:
    grid = field.grid
    extra = extra or {}
    cols = ["x", "y", "kind", "re_u", "im_u", *extra]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for k in range(grid.size):
            row = [
                repr(float(grid.nodes[k].real)), repr(float(grid.nodes[k].imag)),
                KIND_NAMES[int(grid.kind[k])],
                repr(float(field.values[k].real)), repr(float(field.values[k].imag)),
            ]
            row += [repr(float(np.real(v[k]))) for v in extra.values()]
            wr.writerow(row)
