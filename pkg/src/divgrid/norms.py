"""Norms and constants built on the flow solvers.

free_norm is the optimal-transport norm of a finitely supported node
charge, with the basepoint absorbing any imbalance; its dual certificate
is a graph-1-Lipschitz potential vanishing at the basepoint.  sch_norm is
the dual norm against total variation, computed as the Chebyshev optimum;
its witness is a cut.  cheeger_constant and poincare_bracket expose the
isoperimetric side, and the weak-Lebesgue helpers classify decay profiles
of |f| level sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core, flows
from .errors import BadExponent, GridTooNarrow, TooLarge


def free_norm(domain, F, mode=core.GRAPH, tol=1e-9):
    """Transport norm of the node charge F; imbalance is routed to the
    basepoint (test potentials vanish there, so this is free of charge).
    Returns (value, dual potential with u(basepoint) = 0)."""
    F = np.asarray(F, dtype=float)
    if F.shape != (domain.n_cells,):
        raise ValueError("node function shape mismatch")
    Fc = F.copy()
    Fc[domain.basepoint] -= F.sum()
    sol = flows.min_cost_flow(domain, Fc, mode=mode, tol=tol)
    return sol.cost, sol.potential


def free_norm_solution(domain, F, mode=core.GRAPH, tol=1e-9):
    """Same as free_norm but returns the full FlowSolution."""
    F = np.asarray(F, dtype=float)
    Fc = F.copy()
    Fc[domain.basepoint] -= F.sum()
    return flows.min_cost_flow(domain, Fc, mode=mode, tol=tol)


def sch_norm(domain, f, mode=core.GRAPH, tol=1e-6):
    """Dual norm sup { |<u, f>| : TV(u) <= 1 }, attained on indicators;
    computed as the Chebyshev optimum.  Returns (value, cut witness)."""
    sol = flows.chebyshev_solve(domain, f, tol=tol, mode=mode)
    return sol.value, sol.cut


def _subset_tables(domain, mode):
    """(subsets, sizes, perimeters) for all nonempty proper subsets."""
    n = domain.n_cells
    if n > 20:
        raise TooLarge(f"{n} cells exceed the 2^20 enumeration limit")
    subsets = np.arange(1, (1 << n) - 1, dtype=np.uint64)
    sizes = np.bitwise_count(subsets).astype(np.int64)
    per = np.zeros(len(subsets))
    w = domain.tv_weights(mode)
    for e, (t, h) in enumerate(domain.edges.tolist()):
        bit = ((subsets >> np.uint64(t)) ^ (subsets >> np.uint64(h))) & np.uint64(1)
        per += w[e] * bit.astype(float)
    return subsets, sizes, per


def _subset_members(s, n):
    return np.array([c for c in range(n) if (s >> c) & 1], dtype=np.int64)


def _slab_candidates(domain):
    """Axis-aligned prefix cuts; deterministic, cheap, and sharp on
    corridor-like domains."""
    cands = []
    for axis in range(domain.m):
        vals = np.unique(domain.cells[:, axis])
        for v in vals[:-1]:
            cands.append(np.nonzero(domain.cells[:, axis] <= v)[0])
    return cands


def cheeger_constant(domain, method="exact", mode=core.GRAPH, trials=16, seed=0):
    """h* = max over nonempty proper S of min(|S|, |S^c|) / Per(S).

    Exact mode enumerates all subsets (<= 20 cells); heuristic mode scans
    axis slabs plus cut witnesses of random Chebyshev runs and reports the
    best found, a lower bound.  Returns (h*, witness indices or None).
    """
    n = domain.n_cells
    meas = domain.cell_measure(mode)
    if n == 1:
        return 0.0, None
    if method == "exact":
        subsets, sizes, per = _subset_tables(domain, mode)
        valid = per > 0
        ratios = np.zeros(len(subsets))
        ratios[valid] = (
            np.minimum(sizes[valid], n - sizes[valid]) * meas / per[valid]
        )
        best = int(np.argmax(ratios))
        members = _subset_members(int(subsets[best]), n)
        value = float(ratios[best])
        check = min(len(members), n - len(members)) * meas / flows.crossing_weight(
            domain, members, mode
        )
        assert abs(check - value) <= 1e-12 * (1.0 + value)
        return value, members
    if method != "heuristic":
        raise ValueError("method must be 'exact' or 'heuristic'")

    cands = _slab_candidates(domain)
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        f = rng.standard_normal(n)
        for comp in range(domain.n_components):
            idx = domain.component == comp
            f[idx] -= f[idx].mean()
        sol = flows.chebyshev_solve(domain, f, mode=mode)
        if sol.cut is not None:
            cands.append(sol.cut)
    best_val, best_set = 0.0, None
    for S in cands:
        if 0 < len(S) < n:
            cw = flows.crossing_weight(domain, S, mode)
            if cw <= 0:
                continue
            val = min(len(S), n - len(S)) * meas / cw
            if val > best_val:
                best_val, best_set = val, np.sort(np.asarray(S))
    return best_val, best_set


def poincare_bracket(domain, p=1.0, method="exact", mode=core.GRAPH):
    """Bracket for the best constant in ||u - const||_p <= c_p ||Du||.

    p = 1: returns [h*, 2 h*]; the lower bound comes from indicator test
    functions, the upper from the coarea/median argument, and mean versus
    median costs at most the factor 2.  p > 1: lower bound from the
    indicator scan, upper side unknown.
    """
    n = domain.n_cells
    meas = domain.cell_measure(mode)
    if p == 1.0:
        h_star, _ = cheeger_constant(domain, method=method, mode=mode)
        return h_star, 2.0 * h_star
    if p < 1.0:
        raise BadExponent("p must be >= 1")
    if method == "exact":
        if n == 1:
            return 0.0, None
        _, sizes, per = _subset_tables(domain, mode)
        valid = per > 0
        k = sizes[valid].astype(float)
        frac = k / n
        norm_p = (meas * (k * (1 - frac) ** p + (n - k) * frac ** p)) ** (1.0 / p)
        lower = float(np.max(norm_p / per[valid])) if valid.any() else 0.0
        return lower, None
    lower = 0.0
    for S in _slab_candidates(domain):
        if 0 < len(S) < n:
            cw = flows.crossing_weight(domain, S, mode)
            if cw <= 0:
                continue
            k = float(len(S))
            frac = k / n
            val = (meas * (k * (1 - frac) ** p + (n - k) * frac ** p)) ** (1.0 / p)
            lower = max(lower, val / cw)
    return lower, None


# ---------------------------------------------------------------------------
# weak Lebesgue profiles


@dataclass
class RadialProfile:
    """Radial |f|(r) on R^m with invertible level sets: the distribution
    function is exactly alpha(m) * r(y)^m."""

    m: int
    f_of_r: callable
    r_of_y: callable
    label: str = "radial"

    def dist(self, y):
        alpha = core.sobolev_constants(self.m).ball_volume
        return alpha * float(self.r_of_y(y)) ** self.m


@dataclass
class DistSpec:
    """Function known only through its distribution function."""

    m: int
    dist_fn: callable
    label: str = "dist"

    def dist(self, y):
        return float(self.dist_fn(y))


@dataclass
class GridFunction:
    """Node function with cell measure h^m."""

    domain: core.GridDomain
    values: np.ndarray
    label: str = "grid"

    @property
    def m(self):
        return self.domain.m

    def dist(self, y):
        hm = self.domain.h ** self.domain.m
        return float(np.count_nonzero(np.abs(self.values) > y)) * hm


def _invert_decreasing(f, y, lo=1e-200, hi=1e200):
    """Solve f(r) = y for strictly decreasing positive f by bisection."""
    a, b = 1.0, 1.0
    while f(a) <= y and a > lo:
        a *= 0.5
    while f(b) >= y and b < hi:
        b *= 2.0
    if f(a) <= y:
        return 0.0
    for _ in range(200):
        mid = math.sqrt(a * b)
        if f(mid) > y:
            a = mid
        else:
            b = mid
    return math.sqrt(a * b)


def ball_indicator(m):
    """Indicator of the unit ball: a member of every L_q."""
    return RadialProfile(
        m=m,
        f_of_r=lambda r: 1.0 if r <= 1.0 else 0.0,
        r_of_y=lambda y: 1.0 if y < 1.0 else 0.0,
        label="ball_indicator",
    )


def power_decay(m, q):
    """|x|^(-m/q): weak-L_q but in no smaller class; epsilon is constant."""
    a = m / q
    return RadialProfile(
        m=m,
        f_of_r=lambda r: r ** (-a),
        r_of_y=lambda y: y ** (-q / m),
        label="power_decay",
    )


def log_damped_power(m, q):
    """|x|^(-m/q) (1 + |log |x||)^(-1/q): in the weak-L_q closure of L_q
    but not in L_q itself."""
    a = m / q
    b = 1.0 / q

    def f(r):
        return r ** (-a) * (1.0 + abs(math.log(r))) ** (-b)

    return RadialProfile(
        m=m, f_of_r=f, r_of_y=lambda y: _invert_decreasing(f, y),
        label="log_damped_power",
    )


def epsilon_q(f, q, y):
    """epsilon_q(f, y) = dist(f, y) * y^q."""
    if q <= 1.0:
        raise BadExponent("q must exceed 1")
    if y <= 0:
        raise BadExponent("level y must be positive")
    return f.dist(y) * y ** q


@dataclass
class WeakLqProfile:
    q: float
    levels: np.ndarray
    eps: np.ndarray
    quasi_norm: float
    verdict: str                  # "Lq" | "Lq0" | "Lqinf" | "none"
    slope_low: float
    slope_high: float
    diagnostic: bool = True       # finite-data heuristic, not a proof
    thresholds: dict = field(default_factory=dict)


def _end_fit(logy, logeps, mask):
    """Least-squares slope of log eps against log y over one end decade."""
    x, z = logy[mask], logeps[mask]
    if len(x) == 1:
        return 0.0
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    return float(coef[0])


def classify_weak(f, q, y_grid, flat_margin=0.02, decay_margin=0.5,
                  zero_frac=1e-3):
    """Classify the decay profile of f from epsilon_q on a level grid.

    The verdict is a finite-data diagnostic: end-decade power-law fits
    decide whether epsilon vanishes, stays flat, or grows at each end.
    Lq needs decaying fits with margin at both ends (so the off-grid tail
    integral converges), Lq0 needs vanishing fitted limits, Lqinf needs a
    bounded profile.
    """
    y = np.asarray(y_grid, dtype=float)
    if y.ndim != 1 or len(y) < 8 or np.any(np.diff(y) <= 0):
        raise GridTooNarrow("y grid must be increasing with several points")
    if math.log10(y[-1] / y[0]) < 6.0 - 1e-9:
        raise GridTooNarrow("y grid must span at least six decades")
    eps = np.array([epsilon_q(f, q, yy) for yy in y])
    sup = float(eps.max())
    quasi = sup ** (1.0 / q)
    if sup <= 0.0:
        return WeakLqProfile(q, y, eps, 0.0, "Lq", math.inf, -math.inf)

    floor = sup * 1e-300
    logy = np.log(y)
    logeps = np.where(eps > floor, np.log(np.maximum(eps, floor)), -np.inf)
    lo_dec = y <= y[0] * 10.0
    hi_dec = y >= y[-1] / 10.0

    def end(maskdec, sign):
        zero = eps[maskdec] <= floor
        if zero.all():
            return sign * math.inf, 0.0
        mask = maskdec & np.isfinite(logeps)
        s = _end_fit(logy, logeps, mask)
        idx = np.nonzero(mask)[0]
        level = float(eps[idx[0] if sign > 0 else idx[-1]])
        # limit under the fitted power law
        if sign > 0:   # y -> 0 end: eps ~ c y^s
            lim = 0.0 if s > flat_margin else (math.inf if s < -flat_margin else level)
        else:          # y -> infinity end
            lim = 0.0 if s < -flat_margin else (math.inf if s > flat_margin else level)
        return s, lim

    s_lo, lim_lo = end(lo_dec, +1)
    s_hi, lim_hi = end(hi_dec, -1)

    thresholds = dict(flat_margin=flat_margin, decay_margin=decay_margin,
                      zero_frac=zero_frac)
    if math.isinf(lim_lo) or math.isinf(lim_hi):
        verdict = "none"
    elif lim_lo <= zero_frac * sup and lim_hi <= zero_frac * sup:
        if s_lo >= decay_margin and s_hi <= -decay_margin:
            verdict = "Lq"
        else:
            verdict = "Lq0"
    else:
        verdict = "Lqinf"
    return WeakLqProfile(q, y, eps, quasi, verdict, s_lo, s_hi,
                         thresholds=thresholds)


def truncation_approximant(f, j, q, y_grid=None):
    """Height-j, ball-j truncation f_j of f and the weak-L_q distance
    estimate sup_y epsilon_q(f - f_j, y)^(1/q) over the evaluation grid."""
    if j < 1:
        raise BadExponent("truncation index j must be >= 1")
    if y_grid is None:
        y_grid = np.geomspace(1e-4, 1e4, 161)

    if isinstance(f, GridFunction):
        centers = f.domain.centers(core.MESH)
        inside = np.sqrt((centers ** 2).sum(1)) <= j
        vals = np.clip(f.values, -j, j) * inside
        fj = GridFunction(f.domain, vals, label=f.label + f"_trunc{j}")
        diff = GridFunction(f.domain, f.values - vals, label="diff")
        est = max(epsilon_q(diff, q, y) ** (1.0 / q) for y in y_grid)
        return fj, float(est)

    alpha = core.sobolev_constants(f.m).ball_volume
    r_of_y = f.r_of_y
    mm = f.m

    def dist_fj(y):
        if y >= j:
            return 0.0
        return alpha * min(float(j), float(r_of_y(y))) ** mm

    def dist_diff(y):
        inner = alpha * min(float(j), float(r_of_y(y + j))) ** mm
        ry = float(r_of_y(y))
        outer = alpha * max(ry ** mm - float(j) ** mm, 0.0) if ry > j else 0.0
        return inner + outer

    fj = DistSpec(m=f.m, dist_fn=dist_fj, label=f.label + f"_trunc{j}")
    diff = DistSpec(m=f.m, dist_fn=dist_diff, label="diff")
    est = max(epsilon_q(diff, q, y) ** (1.0 / q) for y in y_grid)
    return fj, float(est)
