"""Exact combinatorial solvers for div v = F on a grid domain.

* min_cost_flow: the L1 problem min sum |v_e| len_e subject to div v = F,
  solved by successive shortest paths with node potentials.  The returned
  potential is a graph-1-Lipschitz dual certificate with <u, F> = cost.
* chebyshev_solve: the L-infinity problem min max_e |v_e|/w_e subject to
  div v = F, solved by bisection on t with a max-flow feasibility test;
  the infeasible end yields a cut certificate.
* decompose_pencil: weighted path decomposition of an optimal dipole flow
  (cycle cancellation, then source-to-sink peeling).
* gale_hoffman_brute: independent subset-enumeration oracle for the
  Chebyshev optimum.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from . import core
from .errors import (
    DisconnectedImbalance,
    NotADipole,
    NotMeanZero,
    ToleranceNotReached,
    TooLarge,
    Unbalanced,
)

_SSP_EPS = 1e-12


@dataclass
class FlowSolution:
    domain: core.GridDomain
    mode: str
    v: np.ndarray            # flux per canonical edge
    cost: float              # sum |v_e| * length_e
    potential: np.ndarray    # dual u, graph-1-Lipschitz, u(basepoint) = 0
    source: np.ndarray       # the F that was solved
    residual: float          # max |div v - F|
    iterations: int


@dataclass
class ChebyshevSolution:
    domain: core.GridDomain
    mode: str
    v: np.ndarray
    value: float             # t* = max_e |v_e| / w_e up to solver tolerance
    cut: np.ndarray | None   # cell indices of the certificate set S
    cut_ratio: float         # |f(S)| / crossing weight, within tol of value
    residual: float          # max |div v - f|
    iterations: int
    f: np.ndarray


@dataclass
class PencilDecomposition:
    domain: core.GridDomain
    mode: str
    a: int
    b: int
    theta: float
    paths: list              # node index arrays, oriented a -> b
    weights: np.ndarray      # sums to 1
    nu_total: float          # sum weight * path length
    lam: float               # nu_total / |b - a|_2
    acyclic_flow: np.ndarray # the cycle-free part of the input flow
    path_lengths: np.ndarray = field(default=None)


def _check_balance(domain, F, tol=1e-9):
    F = np.asarray(F, dtype=float)
    if F.shape != (domain.n_cells,):
        raise ValueError("node function shape mismatch")
    ref = max(float(np.abs(F).sum()), 1e-300)
    sums = core.component_sums(domain, F)
    if np.any(np.abs(sums) > tol * ref):
        if domain.n_components > 1 and abs(F.sum()) <= tol * ref:
            raise DisconnectedImbalance(
                "source sums to zero overall but not on every component"
            )
        raise Unbalanced(f"source must sum to zero per component, got {sums}")
    return F


def _adjacency_lists(domain):
    """Per node: arrays of (edge index, neighbor, +1 if node is the tail)."""
    n = domain.n_cells
    nbr_edge = [[] for _ in range(n)]
    nbr_node = [[] for _ in range(n)]
    nbr_dir = [[] for _ in range(n)]
    for e, (t, h) in enumerate(domain.edges.tolist()):
        nbr_edge[t].append(e)
        nbr_node[t].append(h)
        nbr_dir[t].append(1.0)
        nbr_edge[h].append(e)
        nbr_node[h].append(t)
        nbr_dir[h].append(-1.0)
    return nbr_edge, nbr_node, nbr_dir


def min_cost_flow(domain, F, mode=core.GRAPH, tol=1e-9):
    """Cost-minimal edge flux with div v = F, plus the dual potential.

    Successive shortest paths with Johnson potentials; deterministic
    tie-breaking through node index order in the heap.  Optimality is
    certified before returning: |du| <= length on every edge, with
    equality on every edge carrying flux, and <u, F> = cost.
    """
    F = _check_balance(domain, F, tol)
    n, E = domain.n_cells, domain.n_edges
    lengths = domain.edge_lengths(mode)
    nbr_edge, nbr_node, nbr_dir = _adjacency_lists(domain)

    x = np.zeros(E)
    pi = np.zeros(n)
    excess = F.copy()
    mass_eps = tol * max(float(np.abs(F).sum()), 1e-300)
    iterations = 0
    max_rounds = 16 * (n + E) + 64

    while True:
        sources = np.nonzero(excess > mass_eps)[0]
        if len(sources) == 0:
            break
        if iterations > max_rounds:
            raise ToleranceNotReached("successive shortest paths did not converge")
        iterations += 1
        s = int(sources[0])

        dist = np.full(n, np.inf)
        dist[s] = 0.0
        pred_e = np.full(n, -1, dtype=np.int64)
        pred_n = np.full(n, -1, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        heap = [(0.0, s)]
        target = -1
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if excess[u] < -mass_eps:
                target = u
                break
            for e, w, drn in zip(nbr_edge[u], nbr_node[u], nbr_dir[u]):
                if done[w]:
                    continue
                cancel = x[e] * drn < -_SSP_EPS
                cost = -lengths[e] if cancel else lengths[e]
                red = cost + pi[u] - pi[w]
                if red < 0.0:
                    red = 0.0  # guard float jitter in the invariant
                nd = d + red
                if nd < dist[w] - 1e-15:
                    dist[w] = nd
                    pred_e[w] = e
                    pred_n[w] = u
                    heapq.heappush(heap, (nd, w))
        if target < 0:
            raise Unbalanced("excess cannot reach any deficit (disconnected?)")

        # amount limited by the endpoints and by cancellation capacities
        amount = min(excess[s], -excess[target])
        node = target
        while node != s:
            e, u = pred_e[node], pred_n[node]
            drn = 1.0 if domain.edges[e, 0] == u else -1.0
            if x[e] * drn < -_SSP_EPS:
                amount = min(amount, abs(x[e]))
            node = u
        node = target
        while node != s:
            e, u = pred_e[node], pred_n[node]
            drn = 1.0 if domain.edges[e, 0] == u else -1.0
            x[e] += drn * amount
            node = u
        excess[s] -= amount
        excess[target] += amount

        d_t = dist[target]
        pi += np.where(np.isfinite(dist), np.minimum(dist, d_t), d_t)

    cost = float(np.abs(x) @ lengths)
    u = pi[domain.basepoint] - pi
    div = core.divergence(domain, x)
    residual = float(np.max(np.abs(div - F))) if n else 0.0

    # dual certificate
    jumps = u[domain.edges[:, 1]] - u[domain.edges[:, 0]]
    cert_tol = tol * (1.0 + float(lengths.max(initial=1.0)))
    assert np.all(np.abs(jumps) <= lengths + cert_tol), "potential not 1-Lipschitz"
    carrying = np.abs(x) > mass_eps
    assert np.all(
        np.abs(np.abs(jumps[carrying]) - lengths[carrying]) <= cert_tol
    ), "complementary slackness violated"
    pairing = float(u @ F)
    assert abs(pairing - cost) <= tol * (1.0 + abs(cost)), "duality gap"

    return FlowSolution(
        domain=domain, mode=mode, v=x, cost=cost, potential=u,
        source=F.copy(), residual=residual, iterations=iterations,
    )


def _positive_arcs(domain, v, eps):
    """Arcs (frm, to, amount, edge index) for entries with |v_e| > eps."""
    arcs = []
    for e, (t, h) in enumerate(domain.edges.tolist()):
        if v[e] > eps:
            arcs.append([t, h, float(v[e]), e])
        elif v[e] < -eps:
            arcs.append([h, t, float(-v[e]), e])
    return arcs


def _cancel_cycles(n, arcs, eps):
    """Remove directed cycles from an arc list; strictly reduces total
    amount * length, terminates because every pass zeroes an arc."""
    while True:
        out = [[] for _ in range(n)]
        for k, arc in enumerate(arcs):
            if arc[2] > eps:
                out[arc[0]].append(k)
        color = np.zeros(n, dtype=np.int8)  # 0 fresh, 1 on stack, 2 done
        cycle = None
        for start in range(n):
            if color[start] or not out[start]:
                continue
            stack = [(start, iter(out[start]))]
            color[start] = 1
            trail = {start: None}
            while stack and cycle is None:
                node, it = stack[-1]
                advanced = False
                for k in it:
                    w = arcs[k][1]
                    if color[w] == 1:
                        # walk trail back from node to w
                        cyc = [k]
                        cur = node
                        while cur != w:
                            kk = trail[cur]
                            cyc.append(kk)
                            cur = arcs[kk][0]
                        cycle = cyc
                        advanced = True
                        break
                    if color[w] == 0:
                        color[w] = 1
                        trail[w] = k
                        stack.append((w, iter(out[w])))
                        advanced = True
                        break
                if not advanced:
                    color[node] = 2
                    stack.pop()
            if cycle:
                break
        if cycle is None:
            return arcs
        dec = min(arcs[k][2] for k in cycle)
        for k in cycle:
            arcs[k][2] -= dec


def decompose_pencil(solution, a, b, tol=1e-9):
    """Decompose an optimal dipole flow into weighted source-to-sink paths.

    The solution's source must be theta * (delta_b - delta_a).  Cycles are
    cancelled first, then paths are peeled along positive residual flux;
    paths are reported oriented from a to b and weights are normalized by
    theta so they sum to one.
    """
    domain, F = solution.domain, solution.source
    ia = a if np.isscalar(a) else domain.index_of(a)
    ib = b if np.isscalar(b) else domain.index_of(b)
    theta = float(F[ib])
    ref = max(1.0, float(np.abs(F).sum()))
    others = np.delete(np.arange(domain.n_cells), [ia, ib])
    if (
        ia == ib
        or abs(theta) <= tol * ref
        or abs(F[ia] + theta) > tol * ref
        or (len(others) and np.max(np.abs(F[others])) > tol * ref)
    ):
        raise NotADipole("source is not theta * (delta_b - delta_a)")

    eps = tol * max(1.0, float(np.abs(solution.v).max(initial=0.0)))
    arcs = _positive_arcs(domain, solution.v, eps)
    arcs = _cancel_cycles(domain.n_cells, arcs, eps)

    lengths = domain.edge_lengths(solution.mode)
    acyclic = np.zeros(domain.n_edges)
    for frm, to, amt, e in arcs:
        if amt > eps:
            acyclic[e] += amt if domain.edges[e, 0] == frm else -amt

    src, snk = (ib, ia) if theta > 0 else (ia, ib)
    out = [[] for _ in range(domain.n_cells)]
    for k, arc in enumerate(arcs):
        out[arc[0]].append(k)
    for lst in out:
        lst.sort(key=lambda k: arcs[k][3])

    remaining = abs(theta)
    paths, weights, plens = [], [], []
    guard = len(arcs) + 4
    while remaining > tol * abs(theta) and guard:
        guard -= 1
        node, trail_nodes, trail_arcs = src, [src], []
        while node != snk:
            k = next((k for k in out[node] if arcs[k][2] > eps), None)
            if k is None:
                raise AssertionError("flow conservation broken during peel")
            trail_arcs.append(k)
            node = arcs[k][1]
            trail_nodes.append(node)
        w = min(remaining, min(arcs[k][2] for k in trail_arcs))
        for k in trail_arcs:
            arcs[k][2] -= w
        plen = sum(lengths[arcs[k][3]] for k in trail_arcs)
        if src == ib:
            trail_nodes = trail_nodes[::-1]
        paths.append(np.array(trail_nodes, dtype=np.int64))
        weights.append(w / abs(theta))
        plens.append(plen)
        remaining -= w
    if remaining > tol * abs(theta):
        raise AssertionError("failed to peel the full dipole mass")

    weights = np.array(weights)
    plens = np.array(plens)
    nu_total = float(weights @ plens)
    centers = domain.centers(solution.mode)
    dist_ab = float(np.linalg.norm(centers[ib] - centers[ia]))
    return PencilDecomposition(
        domain=domain, mode=solution.mode, a=ia, b=ib, theta=theta,
        paths=paths, weights=weights, nu_total=nu_total,
        lam=nu_total / dist_ab, acyclic_flow=acyclic, path_lengths=plens,
    )


def _check_mean_zero(domain, f, tol=1e-9):
    f = np.asarray(f, dtype=float)
    if f.shape != (domain.n_cells,):
        raise ValueError("node function shape mismatch")
    ref = max(float(np.abs(f).sum()), 1e-300)
    sums = core.component_sums(domain, f)
    if np.any(np.abs(sums) > tol * ref):
        raise NotMeanZero(f"f must have zero mean per component, got {sums}")
    return f


class _FeasibilityOracle:
    """Integer-scaled max-flow feasibility test for |v_e| <= t * w_e with
    div v = f.  Scaling by S makes the saturation test exact; scipy's
    max-flow works in int32, so S is chosen to keep the total supply
    below 2^31 and edge capacities are clipped there (a capacity at the
    total supply is already unlimited)."""

    def __init__(self, domain, f, weights):
        self.domain = domain
        n = domain.n_cells
        self.n = n
        self.weights = weights
        pos = float(f[f > 0].sum())
        self.S = (2.0 ** 31 - 64.0) / max(pos, 1e-300)
        si = np.rint(f * self.S).astype(np.int64)
        # restore exact per-component balance disturbed by rounding
        for comp in range(domain.n_components):
            idx = np.nonzero(domain.component == comp)[0]
            r = int(si[idx].sum())
            if r:
                order = idx[np.argsort(-np.abs(si[idx]), kind="stable")]
                step = 1 if r < 0 else -1
                for j in range(abs(r)):
                    si[order[j % len(order)]] += step
        self.si = si
        self.total_pos = int(si[si > 0].sum())
        t, h = domain.edges[:, 0], domain.edges[:, 1]
        src = np.nonzero(si > 0)[0]
        snk = np.nonzero(si < 0)[0]
        self.rows = np.concatenate([t, h, np.full(len(src), n), snk])
        self.cols = np.concatenate([h, t, src, np.full(len(snk), n + 1)])
        self.fixed = np.concatenate(
            [np.zeros(2 * domain.n_edges, dtype=np.int64), si[src], -si[snk]]
        )
        self.n_arc_entries = 2 * domain.n_edges

    @property
    def cap_ceiling(self):
        """Edge capacity matching the total supply: effectively infinite."""
        return self.total_pos

    def matrix(self, t):
        cap = np.minimum(
            np.rint(t * self.weights * self.S), float(self.total_pos)
        ).astype(np.int64)
        data = self.fixed.copy()
        data[: self.n_arc_entries] = np.concatenate([cap, cap])
        return csr_matrix(
            (data.astype(np.int32), (self.rows, self.cols)),
            shape=(self.n + 2, self.n + 2),
        )

    def solve(self, t):
        g = self.matrix(t)
        res = maximum_flow(g, self.n, self.n + 1)
        return res.flow_value >= self.total_pos, g, res

    def edge_flux(self, res):
        flow = res.flow.tocsr()
        t, h = self.domain.edges[:, 0], self.domain.edges[:, 1]
        return np.asarray(flow[t, h]).ravel() / self.S

    def cut_cells(self, g, res):
        residual = g - res.flow
        reach = breadth_first_order(residual > 0, self.n, return_predecessors=False)
        return np.array(sorted(int(c) for c in reach if c < self.n), dtype=np.int64)


def crossing_weight(domain, cells, mode=core.GRAPH):
    """Total transversal weight of edges leaving the cell set."""
    inset = np.zeros(domain.n_cells, dtype=bool)
    inset[cells] = True
    cross = inset[domain.edges[:, 0]] != inset[domain.edges[:, 1]]
    return float(domain.tv_weights(mode)[cross].sum())


def chebyshev_solve(domain, f, tol=1e-6, mode=core.GRAPH, max_iter=200):
    """Minimal sup-norm solution of div v = f by bisection plus max-flow.

    Feasibility of the capacitated transshipment (capacity t * w_e per
    direction) is monotone in t, so bisection is sound.  At the infeasible
    end the min cut provides the certificate set S whose ratio
    |f(S)| / crossing weight agrees with t* within tolerance.
    """
    f = _check_mean_zero(domain, f)
    weights = domain.tv_weights(mode)
    if float(np.abs(f).max(initial=0.0)) <= 1e-300:
        return ChebyshevSolution(
            domain=domain, mode=mode, v=np.zeros(domain.n_edges), value=0.0,
            cut=None, cut_ratio=0.0, residual=0.0, iterations=0, f=f.copy(),
        )
    oracle = _FeasibilityOracle(domain, f, weights)

    w_min = float(weights.min(initial=1.0))
    t_hi = float(np.abs(f).sum()) / (2.0 * w_min)
    feasible, g_hi, res_hi = oracle.solve(t_hi)
    doublings = 0
    while not feasible:
        # any cut supports |f(S)| <= sum|f|/2 against >= one crossing edge,
        # so this only fires when integer rounding shaved the margin
        t_hi *= 2.0
        doublings += 1
        if doublings > 8:
            raise ToleranceNotReached("no feasible capacity found")
        feasible, g_hi, res_hi = oracle.solve(t_hi)
    t_lo = 0.0

    iterations = 0
    while t_hi - t_lo > tol * (1.0 + t_hi):
        if iterations >= max_iter:
            raise ToleranceNotReached(
                f"bisection gap {t_hi - t_lo:g} after {iterations} iterations"
            )
        iterations += 1
        mid = 0.5 * (t_lo + t_hi)
        ok, g_mid, res_mid = oracle.solve(mid)
        if ok:
            t_hi, g_hi, res_hi = mid, g_mid, res_mid
        else:
            t_lo = mid

    v = oracle.edge_flux(res_hi)
    # the integer solve hits round(f * S) / S exactly; route the rounding
    # dust through an exact transport solve so that div v = f holds to
    # float precision, then report the realized sup as the value
    dust = core.divergence(domain, v) - f
    for comp in range(domain.n_components):
        idx = domain.component == comp
        dust[idx] -= dust[idx].mean()
    if float(np.abs(dust).max(initial=0.0)) > 0.0:
        v = v + min_cost_flow(domain, -dust, mode=mode).v
    div = core.divergence(domain, v)
    residual = float(np.max(np.abs(div - f)))
    value = float(np.max(np.abs(v) / weights)) if domain.n_edges else 0.0

    _, g_lo, res_lo = oracle.solve(t_lo)
    cut = oracle.cut_cells(g_lo, res_lo)
    if len(cut) == 0 or len(cut) == domain.n_cells:
        cut_ratio = 0.0
        cut = None
    else:
        cw = crossing_weight(domain, cut, mode)
        cut_ratio = abs(float(f[cut].sum())) / cw
    return ChebyshevSolution(
        domain=domain, mode=mode, v=v, value=value, cut=cut,
        cut_ratio=cut_ratio, residual=residual, iterations=iterations,
        f=f.copy(),
    )


def gale_hoffman_brute(domain, f, mode=core.GRAPH, return_set=False):
    """max over nonempty proper subsets S of |f(S)| / crossing weight.

    Equals the Chebyshev optimum by max-flow min-cut; enumeration over
    2^n subsets, so limited to 20 cells.
    """
    n = domain.n_cells
    if n > 20:
        raise TooLarge(f"{n} cells exceed the 2^20 enumeration limit")
    f = np.asarray(f, dtype=float)
    if n == 1:
        return (0.0, None) if return_set else 0.0
    subsets = np.arange(1, (1 << n) - 1, dtype=np.uint64)
    fS = np.zeros(len(subsets))
    for c in range(n):
        fS += f[c] * ((subsets >> np.uint64(c)) & np.uint64(1)).astype(float)
    per = np.zeros(len(subsets))
    w = domain.tv_weights(mode)
    for e, (t, h) in enumerate(domain.edges.tolist()):
        bit = ((subsets >> np.uint64(t)) ^ (subsets >> np.uint64(h))) & np.uint64(1)
        per += w[e] * bit.astype(float)
    valid = per > 0
    ratios = np.zeros(len(subsets))
    ratios[valid] = np.abs(fS[valid]) / per[valid]
    best = int(np.argmax(ratios))
    value = float(ratios[best])
    if not return_set:
        return value
    s = int(subsets[best])
    members = np.array([c for c in range(n) if (s >> c) & 1], dtype=np.int64)
    return value, members
