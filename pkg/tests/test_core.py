import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from divgrid import core
from divgrid.errors import BasepointOutside, CellOutside, DimensionTooSmall, EmptyMask
from divgrid.experiments import square_mask


def test_build_single_cell():
    dom = core.build_domain([(0, 0)])
    assert dom.n_cells == 1 and dom.n_edges == 0


def test_build_square2(square2):
    assert square2.n_cells == 4
    assert square2.n_edges == 4
    assert np.allclose(square2.edge_unit, 1.0)


def test_build_empty_mask():
    with pytest.raises(EmptyMask):
        core.build_domain([])


def test_basepoint_outside():
    with pytest.raises(BasepointOutside):
        core.build_domain([(0, 0)], basepoint=(5, 5))


def test_edges_canonical(square3_8):
    e = square3_8.edges
    # tail lexicographically smaller than head, sorted, unique
    cells = square3_8.cells
    for t, h in e.tolist():
        assert tuple(cells[t]) < tuple(cells[h])
    assert len({(t, h) for t, h in e.tolist()}) == len(e)


def test_disconnected_components():
    dom = core.build_domain([(0, 0), (5, 5)])
    assert dom.n_components == 2


# boundary distance ---------------------------------------------------------

def test_boundary_distance_corner():
    dom = core.build_domain(square_mask(4))
    assert core.boundary_distance(dom, (0, 0)) == pytest.approx(0.5)


def test_boundary_distance_center_3x3():
    dom = core.build_domain(square_mask(3))
    assert core.boundary_distance(dom, (1, 1)) == pytest.approx(1.5)


def _sampled_complement_distance(cells, point, n=2001):
    """Oracle: exhaustive sampling of the boundary faces of the mask."""
    cellset = set(map(tuple, cells))
    best = math.inf
    ts = np.linspace(0.0, 1.0, n)
    for (i, j) in cellset:
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (i + di, j + dj) in cellset:
                continue
            # outer face of cell (i, j) in direction (di, dj)
            if di:
                xs = np.full(n, i + (di > 0))
                ys = j + ts
            else:
                xs = i + ts
                ys = np.full(n, j + (dj > 0))
            d = np.hypot(xs - point[0], ys - point[1]).min()
            best = min(best, float(d))
    return best


def test_boundary_distance_plus_shape():
    # 3x3 with the four corner cells removed: the nearest complement point
    # to the middle is the inner corner of a removed cell, at 0.5 sqrt 2
    cells = [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)]
    dom = core.build_domain(cells)
    got = core.boundary_distance(dom, (1, 1))
    assert got == pytest.approx(0.5 * math.sqrt(2), abs=1e-12)
    oracle = _sampled_complement_distance(cells, (1.5, 1.5))
    assert got == pytest.approx(oracle, abs=1e-3)


def test_boundary_distance_x_shape():
    # 3x3 with the four edge-midpoint cells removed: every face of the
    # middle cell touches a removed cell, so the distance is 0.5
    cells = [(0, 0), (2, 0), (1, 1), (0, 2), (2, 2)]
    dom = core.build_domain(cells)
    assert core.boundary_distance(dom, (1, 1)) == pytest.approx(0.5)


def test_boundary_distance_cell_outside():
    dom = core.build_domain(square_mask(2))
    with pytest.raises(CellOutside):
        core.boundary_distance(dom, (9, 9))


def test_point_boundary_distance_matches_cells():
    dom = core.build_domain(square_mask(5), h=0.25)
    centers = dom.centers(core.MESH)
    d = core.point_boundary_distance(dom, centers)
    assert np.allclose(d, dom.boundary_distance_all(core.MESH), atol=1e-12)


# graph distance ------------------------------------------------------------

def test_graph_distance_same_cell(square2):
    assert core.graph_distance(square2, (0, 0), (0, 0)) == 0.0


def test_graph_distance_adjacent(square2):
    assert core.graph_distance(square2, (0, 0), (0, 1)) == pytest.approx(1.0)


def test_graph_distance_diagonal_8(square3_8):
    got = core.graph_distance(square3_8, (0, 0), (2, 2))
    assert got == pytest.approx(2 * math.sqrt(2), abs=1e-12)


def test_graph_distance_across_components():
    dom = core.build_domain([(0, 0), (5, 5)])
    assert core.graph_distance(dom, (0, 0), (5, 5)) == math.inf


def test_graph_distance_metric(rng):
    dom = core.build_domain(square_mask(5), connectivity="8")
    d = np.vstack([core.graph_distance_from(dom, i) for i in range(dom.n_cells)])
    assert np.allclose(d, d.T, atol=1e-12)
    for _ in range(200):
        i, j, k = rng.integers(0, dom.n_cells, 3)
        assert d[i, j] <= d[i, k] + d[k, j] + 1e-12


# discrete calculus ---------------------------------------------------------

def test_divergence_single_edge():
    dom = core.build_domain([(0, 0), (1, 0)])
    div = core.divergence(dom, np.array([1.0]))
    assert div[dom.index_of((0, 0))] == 1.0
    assert div[dom.index_of((1, 0))] == -1.0


def test_divergence_zero_field(square2):
    assert np.all(core.divergence(square2, np.zeros(square2.n_edges)) == 0)


def test_divergence_three_cycle():
    # three pairwise adjacent cells under 8-connectivity form a cycle
    dom = core.build_domain([(0, 0), (1, 0), (1, 1)], connectivity="8")
    # orient a unit circulation along the cycle
    v = np.zeros(dom.n_edges)
    cyc = [((0, 0), (1, 0)), ((1, 0), (1, 1)), ((1, 1), (0, 0))]
    for a, b in cyc:
        ia, ib = dom.index_of(a), dom.index_of(b)
        for e, (t, h) in enumerate(dom.edges.tolist()):
            if (t, h) == (ia, ib):
                v[e] += 1.0
            elif (t, h) == (ib, ia):
                v[e] -= 1.0
    div = core.divergence(dom, v)
    assert np.allclose(div, 0.0, atol=1e-15)


def test_gradient_constant(square2):
    g = core.gradient(square2, np.ones(4))
    assert np.all(g == 0)


def test_gradient_unit_edge():
    dom = core.build_domain([(0, 0), (1, 0)])
    u = np.zeros(2)
    u[dom.index_of((1, 0))] = 1.0
    g = core.gradient(dom, u)
    assert g[0] == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(
    u=hnp.arrays(np.float64, 9, elements=st.floats(-5, 5)),
    v=hnp.arrays(np.float64, 20, elements=st.floats(-5, 5)),
)
def test_summation_by_parts(u, v):
    dom = core.build_domain(square_mask(3), connectivity="8")
    assert dom.n_edges == 20
    w = dom.tv_weights(core.GRAPH)
    ln = dom.edge_lengths(core.GRAPH)
    lhs = float((core.gradient(dom, u) * v * ln * w).sum())
    rhs = -float(u @ core.weighted_divergence(dom, v, w))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


@settings(max_examples=30, deadline=None)
@given(v=hnp.arrays(np.float64, 12, elements=st.floats(-10, 10)))
def test_flux_conservation(v):
    dom = core.build_domain(square_mask(3), connectivity="4")
    assert dom.n_edges == 12
    assert abs(core.divergence(dom, v).sum()) <= 1e-12 * (1 + np.abs(v).sum())


# total variation -----------------------------------------------------------

def test_tv_constant(square2):
    assert core.total_variation(square2, np.full(4, 7.3)) == 0.0


def test_tv_single_cell(square2):
    u = np.zeros(4)
    u[square2.index_of((0, 0))] = 1.0
    assert core.total_variation(square2, u) == pytest.approx(2.0)


def test_tv_left_column(square2):
    u = np.zeros(4)
    u[square2.index_of((0, 0))] = 1.0
    u[square2.index_of((0, 1))] = 1.0
    assert core.total_variation(square2, u) == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(
    u=hnp.arrays(np.float64, 4, elements=st.floats(-5, 5)),
    w=hnp.arrays(np.float64, 4, elements=st.floats(-5, 5)),
    c=st.floats(-4, 4),
)
def test_tv_axioms(u, w, c, square2):
    tv_u = core.total_variation(square2, u)
    assert tv_u >= 0
    assert core.total_variation(square2, c * u) == pytest.approx(abs(c) * tv_u)
    assert core.total_variation(square2, u + w) <= (
        tv_u + core.total_variation(square2, w) + 1e-12
    )


def test_tv_mesh_weight():
    dom = core.build_domain(square_mask(2), h=0.5, connectivity="4")
    u = np.zeros(4)
    u[dom.index_of((0, 0))] = 1.0
    # two crossing faces of length h = 0.5 each
    assert core.total_variation(dom, u, core.MESH) == pytest.approx(1.0)


# constants -----------------------------------------------------------------

def test_constants_m2():
    c = core.sobolev_constants(2)
    assert c.ball_volume == pytest.approx(math.pi, abs=1e-15)
    assert c.isoperimetric == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=1e-15)
    assert c.conjugate == 2.0


def test_constants_m3():
    c = core.sobolev_constants(3)
    assert c.ball_volume == pytest.approx(4 * math.pi / 3, abs=1e-14)
    assert c.conjugate == pytest.approx(1.5)


def test_constants_m1_rejected():
    with pytest.raises(DimensionTooSmall):
        core.sobolev_constants(1)


def test_constants_identity():
    for m in range(2, 7):
        c = core.sobolev_constants(m)
        assert c.isoperimetric == pytest.approx(
            c.ball_volume ** (-1 / m) / m, rel=1e-14
        )


# lipschitz constants -------------------------------------------------------

def test_lipschitz_constants_expose_both():
    dom = core.build_domain(square_mask(3), connectivity="4")
    u = dom.centers(core.GRAPH)[:, 0]
    assert core.lipschitz_constant_edgewise(dom, u) == pytest.approx(1.0)
    assert core.lipschitz_constant_euclidean(dom, u) == pytest.approx(1.0)


def test_mesh_scalings():
    dom = core.build_domain(square_mask(2), h=0.1, connectivity="8")
    assert dom.cell_measure(core.MESH) == pytest.approx(0.01)
    assert dom.cell_measure(core.GRAPH) == 1.0
    diag = dom.edge_unit > 1.1
    assert np.allclose(dom.edge_lengths(core.MESH)[diag], 0.1 * math.sqrt(2))
    assert np.allclose(dom.tv_weights(core.MESH)[diag], 0.1 / math.sqrt(2))
