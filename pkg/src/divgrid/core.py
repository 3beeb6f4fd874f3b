"""Grid domains and discrete calculus.

A domain is a set of integer lattice cells with 4/8-neighbor (2D) or
6/26-neighbor (3D) connectivity.  Node functions live on cells, edge fields
live on canonically oriented edges, and the boundary condition "no flux
leaves the domain" is built into the graph: there simply are no edges
crossing the mask boundary.

Two unit systems are supported everywhere through a `mode` argument:

* ``"graph"``  - lengths count lattice steps (1, sqrt 2, sqrt 3), cells
  have measure 1.  Used by the exact tests.
* ``"mesh"``   - lengths carry the cell size h, cells have measure h^m,
  transversal weights h^(m-1)/unit_length.

Geometric quantities (cell centers, boundary distances, atom positions)
are always in mesh coordinates, i.e. multiples of h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import BasepointOutside, CellOutside, DimensionTooSmall, EmptyMask

GRAPH = "graph"
MESH = "mesh"

# positive-lexicographic neighbor offsets; each edge is generated once
_OFFSETS = {
    (2, "4"): [(0, 1), (1, 0)],
    (2, "8"): [(0, 1), (1, -1), (1, 0), (1, 1)],
    (3, "6"): [(0, 0, 1), (0, 1, 0), (1, 0, 0)],
    (3, "26"): None,  # filled below
}
_OFFSETS[(3, "26")] = [
    off
    for off in (
        (i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)
    )
    if off > (0, 0, 0)
]


def _check_scale_mode(mode):
    if mode not in (GRAPH, MESH):
        raise ValueError(f"mode must be {GRAPH!r} or {MESH!r}, got {mode!r}")


@dataclass(frozen=True)
class GridDomain:
    """Immutable grid domain: cells, canonical edge list, basepoint."""

    m: int
    h: float
    connectivity: str
    cells: np.ndarray          # (n, m) int64, lexicographically sorted
    basepoint: int             # index into cells
    edges: np.ndarray          # (E, 2) int64 cell indices, tail lex-smaller
    edge_unit: np.ndarray      # (E,) float, length in lattice steps
    component: np.ndarray      # (n,) int component labels
    cell_delta: np.ndarray     # (n,) float, boundary distance in lattice units
    cell_index: dict = field(repr=False)   # tuple(cell) -> index

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_components(self):
        return int(self.component.max()) + 1 if len(self.component) else 0

    def scale(self, mode):
        _check_scale_mode(mode)
        return self.h if mode == MESH else 1.0

    def edge_lengths(self, mode=GRAPH):
        return self.edge_unit * self.scale(mode)

    def cell_measure(self, mode=GRAPH):
        return self.scale(mode) ** self.m

    def tv_weights(self, mode=GRAPH):
        """Transversal weights h^(m-1) * (h / length); TV of an indicator is
        then the crossing-face perimeter in the chosen units."""
        s = self.scale(mode)
        return s ** (self.m - 1) / self.edge_unit

    def centers(self, mode=MESH):
        """Cell centers; mesh coordinates by default."""
        c = (self.cells + 0.5) * self.h
        if mode == GRAPH:
            return (self.cells + 0.5).astype(float)
        return c

    def index_of(self, cell):
        key = tuple(int(x) for x in cell)
        if key not in self.cell_index:
            raise CellOutside(f"cell {key} is not in the mask")
        return self.cell_index[key]

    def boundary_distance_all(self, mode=MESH):
        return self.cell_delta * (self.h if mode == MESH else 1.0)

    def adjacency(self, mode=GRAPH):
        """Symmetric sparse matrix of edge lengths."""
        ln = self.edge_lengths(mode)
        t, hd = self.edges[:, 0], self.edges[:, 1]
        n = self.n_cells
        return csr_matrix(
            (np.concatenate([ln, ln]), (np.concatenate([t, hd]), np.concatenate([hd, t]))),
            shape=(n, n),
        )


def build_domain(mask, h=1.0, connectivity="4", basepoint=None):
    """Build a GridDomain from a collection of integer lattice cells.

    basepoint defaults to the lexicographically smallest cell.  A
    disconnected mask is allowed; solvers reject cross-component imbalance.
    """
    cells = np.array(sorted({tuple(int(x) for x in c) for c in mask}), dtype=np.int64)
    if cells.size == 0:
        raise EmptyMask("mask is empty")
    m = cells.shape[1]
    if (m, str(connectivity)) not in _OFFSETS:
        raise ValueError(f"unsupported connectivity {connectivity!r} for m={m}")
    connectivity = str(connectivity)
    if h <= 0:
        raise ValueError("cell size h must be positive")

    index = {tuple(c): i for i, c in enumerate(cells.tolist())}
    if basepoint is None:
        bp = 0
    else:
        key = tuple(int(x) for x in basepoint)
        if key not in index:
            raise BasepointOutside(f"basepoint {key} is not in the mask")
        bp = index[key]

    tails, heads, units = [], [], []
    for off in _OFFSETS[(m, connectivity)]:
        ln = math.sqrt(sum(o * o for o in off))
        for i, c in enumerate(cells.tolist()):
            nb = tuple(c[d] + off[d] for d in range(m))
            j = index.get(nb)
            if j is not None:
                tails.append(i)
                heads.append(j)
                units.append(ln)
    edges = np.array([tails, heads], dtype=np.int64).T.reshape(-1, 2)
    edge_unit = np.array(units, dtype=float)
    order = np.lexsort((edges[:, 1] if len(edges) else [], edges[:, 0] if len(edges) else []))
    edges, edge_unit = edges[order], edge_unit[order]

    n = len(cells)
    if len(edges):
        adj = csr_matrix(
            (np.ones(2 * len(edges)), (np.concatenate([edges[:, 0], edges[:, 1]]),
                                       np.concatenate([edges[:, 1], edges[:, 0]]))),
            shape=(n, n),
        )
        _, labels = connected_components(adj, directed=False)
    else:
        labels = np.arange(n)

    delta = _boundary_distances(cells)
    return GridDomain(
        m=m, h=float(h), connectivity=connectivity, cells=cells, basepoint=bp,
        edges=edges, edge_unit=edge_unit, component=labels.astype(np.int64),
        cell_delta=delta, cell_index=index,
    )


def _box_distances(points, boxes_lo, chunk=262144):
    """Exact Euclidean distance from each point to the nearest unit box
    among boxes_lo (lattice units).  points (n,m), boxes_lo (k,m)."""
    n = len(points)
    out = np.full(n, np.inf)
    if len(boxes_lo) == 0:
        return out
    k = len(boxes_lo)
    rows = max(1, chunk // max(k, 1))
    lo = boxes_lo.astype(float)
    hi = lo + 1.0
    for s in range(0, n, rows):
        p = points[s:s + rows, None, :]
        d = np.maximum(lo[None] - p, 0.0) + np.maximum(p - hi[None], 0.0)
        out[s:s + rows] = np.sqrt((d * d).sum(-1)).min(1)
    return out


def _region_distance_lattice(cells, points):
    """Distance (lattice units) from points to the complement of the union
    of closed unit boxes over `cells`.  Exact: the complement is tiled by
    the outside lattice boxes plus the exterior of the bounding box."""
    m = cells.shape[1]
    lo_b, hi_b = cells.min(0), cells.max(0) + 1
    # distance to the exterior of the bounding box (0 if outside it)
    slack = np.minimum(points - lo_b, hi_b - points).min(1)
    d_ext = np.maximum(slack, 0.0)
    # outside cells inside the bounding box
    shape = tuple(hi_b - lo_b)
    grid = np.zeros(shape, dtype=bool)
    grid[tuple((cells - lo_b).T)] = True
    holes = np.argwhere(~grid) + lo_b
    d_holes = _box_distances(points, holes)
    return np.minimum(d_ext, d_holes)


def _boundary_distances(cells):
    centers = cells + 0.5
    return _region_distance_lattice(cells, centers)


def point_boundary_distance(domain, points):
    """Exact Euclidean distance from arbitrary points (mesh coordinates) to
    the complement of the domain region.  Points outside get 0."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)) / domain.h
    return _region_distance_lattice(domain.cells, pts) * domain.h


def contains_points(domain, points):
    """True for points lying in the closed domain region (mesh coords).
    A point on a shared face belongs to several closed boxes; any match
    counts."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)) / domain.h
    base = np.floor(pts - 1e-12).astype(np.int64)
    inside = np.zeros(len(pts), dtype=bool)
    for shift in np.ndindex(*(2,) * domain.m):
        c = base + np.array(shift)
        geo = np.all((pts >= c) & (pts <= c + 1), axis=1)
        ok = np.array([tuple(r) in domain.cell_index for r in c.tolist()])
        inside |= geo & ok
    return inside


def containing_cells(domain, points):
    """Cell index containing each point (mesh coords); raises CellOutside
    sentinel -1 for points in no inside cell."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)) / domain.h
    out = np.full(len(pts), -1, dtype=np.int64)
    base = np.floor(pts - 1e-12).astype(np.int64)
    for shift in np.ndindex(*(2,) * domain.m):
        c = base + np.array(shift)
        good = np.all((pts >= c) & (pts <= c + 1), axis=1)
        for i in np.nonzero(good & (out < 0))[0]:
            j = domain.cell_index.get(tuple(c[i].tolist()))
            if j is not None:
                out[i] = j
    return out


def boundary_distance(domain, cell, mode=MESH):
    """Distance from the cell center to the nearest complement point."""
    i = cell if np.isscalar(cell) else domain.index_of(cell)
    return float(domain.cell_delta[i]) * (domain.h if mode == MESH else 1.0)


def graph_distance(domain, a, b, mode=GRAPH):
    """Shortest path length along edges; inf across components."""
    ia = a if np.isscalar(a) else domain.index_of(a)
    ib = b if np.isscalar(b) else domain.index_of(b)
    if ia == ib:
        return 0.0
    d = dijkstra(domain.adjacency(mode), directed=False, indices=ia)
    return float(d[ib])


def graph_distance_from(domain, src, mode=GRAPH):
    """Distances from one source cell to every cell."""
    i = src if np.isscalar(src) else domain.index_of(src)
    return dijkstra(domain.adjacency(mode), directed=False, indices=i)


def divergence(domain, v):
    """(div v)(c) = sum of v over edges with tail c minus edges with head c.

    Flux never leaves the mask, so the result always sums to zero."""
    v = np.asarray(v, dtype=float)
    if v.shape != (domain.n_edges,):
        raise ValueError("edge field shape mismatch")
    out = np.zeros(domain.n_cells)
    np.add.at(out, domain.edges[:, 0], v)
    np.add.at(out, domain.edges[:, 1], -v)
    return out


def weighted_divergence(domain, v, weights):
    out = np.zeros(domain.n_cells)
    np.add.at(out, domain.edges[:, 0], v * weights)
    np.add.at(out, domain.edges[:, 1], -v * weights)
    return out


def gradient(domain, u, mode=GRAPH):
    """(grad u)_e = (u(head) - u(tail)) / length(e); adjoint of -divergence
    under the summation-by-parts pairing."""
    u = np.asarray(u, dtype=float)
    if u.shape != (domain.n_cells,):
        raise ValueError("node function shape mismatch")
    return (u[domain.edges[:, 1]] - u[domain.edges[:, 0]]) / domain.edge_lengths(mode)


def total_variation(domain, u, mode=GRAPH):
    """TV(u) = sum over edges of |jump| * transversal weight."""
    u = np.asarray(u, dtype=float)
    jumps = u[domain.edges[:, 1]] - u[domain.edges[:, 0]]
    return float(np.abs(jumps) @ domain.tv_weights(mode))


def lipschitz_constant_edgewise(domain, u, mode=GRAPH):
    """max_e |jump| / length: the graph Lipschitz constant."""
    if domain.n_edges == 0:
        return 0.0
    return float(np.max(np.abs(gradient(domain, u, mode))))


def lipschitz_constant_euclidean(domain, u, mode=MESH):
    """max over cell pairs of |u(x)-u(y)| / |x-y|_2 with Euclidean center
    distance.  Agrees with the edgewise constant only as h -> 0 on convex
    domains; both are exposed on purpose."""
    c = domain.centers(mode)
    u = np.asarray(u, dtype=float)
    best = 0.0
    for i in range(domain.n_cells - 1):
        d = np.sqrt(((c[i + 1:] - c[i]) ** 2).sum(1))
        best = max(best, float(np.max(np.abs(u[i + 1:] - u[i]) / d)))
    return best


@dataclass(frozen=True)
class Constants:
    """Dimensional constants: unit-ball volume, isoperimetric constant,
    and the conjugate exponent m/(m-1)."""

    m: int
    ball_volume: float
    isoperimetric: float
    conjugate: float


def sobolev_constants(m):
    """alpha(m) = pi^(m/2)/Gamma(m/2+1), kappa = alpha^(-1/m)/m,
    conjugate exponent m/(m-1).  Requires m >= 2."""
    if m < 2:
        raise DimensionTooSmall("constants are defined for m >= 2")
    alpha = math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)
    kappa = alpha ** (-1.0 / m) / m
    return Constants(m=m, ball_volume=alpha, isoperimetric=kappa, conjugate=m / (m - 1.0))


def component_sums(domain, f):
    """Sum of a node function over each connected component."""
    f = np.asarray(f, dtype=float)
    out = np.zeros(domain.n_components)
    np.add.at(out, domain.component, f)
    return out
