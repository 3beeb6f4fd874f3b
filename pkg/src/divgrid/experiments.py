"""Canned domain families and experiment sweeps used by the CLI and the
scripts in scripts/."""

from __future__ import annotations

import numpy as np

from . import core, measures, norms


def square_mask(n):
    return [(i, j) for i in range(n) for j in range(n)]


def annulus_mask(n, inner_frac=0.25, outer_frac=0.48):
    """Cells whose center lies between two circles around the grid middle."""
    c = (n - 1) / 2.0
    lo, hi = inner_frac * n, outer_frac * n
    cells = []
    for i in range(n):
        for j in range(n):
            r = np.hypot(i - c, j - c)
            if lo <= r <= hi:
                cells.append((i, j))
    return cells


def l_shape_mask(n):
    """n x n square minus its upper-right quadrant."""
    half = n // 2
    return [
        (i, j)
        for i in range(n)
        for j in range(n)
        if not (i >= half and j >= half)
    ]


def slit_mask(n, depth, width=1, column=None):
    """n x n square with a vertical slit of the given width cut from the
    top; points on opposite sides of a deep narrow slit are close in the
    plane but far in the graph."""
    col = n // 2 if column is None else column
    removed = {
        (i, j)
        for i in range(col, col + width)
        for j in range(n - depth, n)
    }
    return [(i, j) for i in range(n) for j in range(n) if (i, j) not in removed]


def rooms_and_corridor(k, room=3):
    """Two square rooms joined by a 1-cell-high corridor of length k."""
    cells = []
    mid = room // 2
    for i in range(room):
        for j in range(room):
            cells.append((i, j))
            cells.append((room + k + i, j))
    for i in range(k):
        cells.append((room + i, mid))
    return cells


def random_connected_mask(rng, max_side, max_cells=None, p_keep=0.6):
    """Random connected mask: random cell soup on a random side length,
    largest 4-connected component kept; resamples until the optional
    cell-count cap is met."""
    while True:
        n = int(rng.integers(2, max_side + 1))
        keep = rng.random((n, n)) < p_keep
        keep[rng.integers(0, n), rng.integers(0, n)] = True
        cells = [(i, j) for i in range(n) for j in range(n) if keep[i, j]]
        dom = core.build_domain(cells, connectivity="4")
        counts = np.bincount(dom.component)
        comp = int(np.argmax(counts))
        chosen = [tuple(c) for c in dom.cells[dom.component == comp].tolist()]
        if len(chosen) >= 2 and (max_cells is None or len(chosen) <= max_cells):
            return chosen


def random_mean_zero(rng, domain):
    f = rng.standard_normal(domain.n_cells)
    for comp in range(domain.n_components):
        idx = domain.component == comp
        f[idx] -= f[idx].mean()
    return f


def nikodym_sweep(ks, p=1.0, mode=core.GRAPH):
    """Poincare lower bounds on rooms-and-corridor domains against the
    corridor length.  The lower bound scans axis slabs (which include
    every cut through the corridor), so it is exact enough to exhibit
    the growth; the upper bound is reported only when exact enumeration
    is affordable."""
    rows = []
    for k in ks:
        dom = core.build_domain(rooms_and_corridor(k), connectivity="4")
        method = "exact" if dom.n_cells <= 20 else "heuristic"
        lower, upper = norms.poincare_bracket(dom, p=p, method=method, mode=mode)
        rows.append((int(k), dom.n_cells, float(lower),
                     float(upper) if upper is not None else float("nan")))
    return rows


def refine_sweep(sizes, connectivity="8"):
    """h-refinement of the transport and charge norms for one fixed
    continuum instance: a unit dipole in the unit square.  Trends only;
    no convergence rate is asserted."""
    a, b = np.array([0.201, 0.301]), np.array([0.701, 0.801])
    rows = []
    for n in sizes:
        h = 1.0 / n
        dom = core.build_domain(square_mask(n), h=h, connectivity=connectivity)
        mu = measures.dipole(a, b)
        F = measures.rasterize(mu, dom, mode=core.GRAPH)
        free, _ = norms.free_norm(dom, F, mode=core.MESH)
        sch, _ = norms.sch_norm(dom, F, mode=core.MESH)
        rows.append((int(n), h, float(free), float(sch)))
    return rows
