"""Scattered sets, three-ball covers, and partitions of unity.

For a scale tau in (0, 1] and boundary distance delta, a set D is
scattered when distinct members keep distance (tau/4) max(delta(a),
delta(b)).  Greedy scanning of a finite candidate set replaces the
transfinite maximality argument; the result is maximal over the
candidates, which is what the covering checks below rely on.

Every center carries three open balls of radii (tau/8) delta, (tau/2)
delta, (3 tau/4) delta: the small family is pairwise disjoint, the middle
family covers the candidates, and bumps supported in the large family
are normalized into a partition of unity whose gradients scale like
1 / (tau delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .errors import EmptyDomain, InfeasibleSpec, UncoveredPoint


@dataclass(frozen=True)
class BumpSpec:
    """Mollified trapezoid profile.

    Identically 1 on [-1/2, 1/2], supported strictly inside (-3/4, 3/4),
    C^1, with |derivative| <= slope <= 5.  A cubic or quintic smoothstep
    over the quarter-width window would violate the derivative bound
    (peak slopes 6 and 7.5), hence the ramp construction: a linear drop
    of the given slope centered at 5/8, convolved with a box kernel of
    the given half-width.
    """

    slope: float = 4.5
    width: float = 0.01

    def __post_init__(self):
        if self.slope > 5.0:
            raise InfeasibleSpec("slope must not exceed 5")
        if self.slope <= 0 or self.width <= 0:
            raise InfeasibleSpec("slope and width must be positive")
        if self.ramp_lo - self.width < 0.5 or self.ramp_hi + self.width >= 0.75:
            raise InfeasibleSpec(
                "mollified transition must fit strictly inside (1/2, 3/4)"
            )

    @property
    def ramp_lo(self):
        return 0.625 - 0.5 / self.slope

    @property
    def ramp_hi(self):
        return 0.625 + 0.5 / self.slope


def _trapezoid(spec, t):
    a = np.abs(t)
    ramp = 1.0 - spec.slope * (a - spec.ramp_lo)
    return np.where(a <= spec.ramp_lo, 1.0, np.clip(ramp, 0.0, 1.0))


def _trapezoid_integral(spec, t):
    """Antiderivative of the even trapezoid, odd in t."""
    a = np.abs(t)
    t0, t1, s = spec.ramp_lo, spec.ramp_hi, spec.slope
    mid = t0 + (a - t0) - 0.5 * s * (a - t0) ** 2
    top = t0 + 0.5 / s
    val = np.where(a <= t0, a, np.where(a <= t1, mid, top))
    return np.sign(t) * val


def bump(spec, t):
    """phi(t): box-mollified trapezoid, vectorized."""
    t = np.asarray(t, dtype=float)
    w = spec.width
    return (_trapezoid_integral(spec, t + w) - _trapezoid_integral(spec, t - w)) / (2 * w)


def bump_derivative(spec, t):
    t = np.asarray(t, dtype=float)
    w = spec.width
    return (_trapezoid(spec, t + w) - _trapezoid(spec, t - w)) / (2 * w)


@dataclass(frozen=True)
class ScatteredSet:
    domain: core.GridDomain
    tau: float
    points: np.ndarray            # (k, m), mesh coordinates
    deltas: np.ndarray            # (k,)
    candidate_points: np.ndarray  # the full scanned candidate set
    candidate_deltas: np.ndarray
    accepted: np.ndarray          # indices into the candidate arrays

    @property
    def n_centers(self):
        return len(self.points)

    def radii_small(self):
        return (self.tau / 8.0) * self.deltas

    def radii_mid(self):
        return (self.tau / 2.0) * self.deltas

    def radii_big(self):
        return (0.75 * self.tau) * self.deltas


@dataclass(frozen=True)
class WhitneyCover:
    centers: np.ndarray
    deltas: np.ndarray
    r_small: np.ndarray
    r_mid: np.ndarray
    r_big: np.ndarray


def cover(scattered):
    return WhitneyCover(
        centers=scattered.points,
        deltas=scattered.deltas,
        r_small=scattered.radii_small(),
        r_mid=scattered.radii_mid(),
        r_big=scattered.radii_big(),
    )


def greedy_scattered(domain, tau, order=None, seed=None, candidates=None,
                     candidate_deltas=None):
    """Greedy maximal scattered set over a finite candidate set.

    Candidates default to the cell centers; a finer sub-grid may be
    passed explicitly for convergence studies.  The scan order is part of
    the deterministic contract: None keeps candidate order, "random"
    permutes with the given seed, or an explicit index array is used.
    """
    if not (0.0 < tau <= 1.0):
        raise ValueError("tau must lie in (0, 1]")
    if candidates is None:
        pts = domain.centers(core.MESH)
        deltas = domain.boundary_distance_all(core.MESH)
    else:
        pts = np.atleast_2d(np.asarray(candidates, dtype=float))
        if candidate_deltas is None:
            deltas = core.point_boundary_distance(domain, pts)
        else:
            deltas = np.asarray(candidate_deltas, dtype=float)
    if len(pts) == 0:
        raise EmptyDomain("no candidates")

    if order is None:
        scan = np.arange(len(pts))
    elif isinstance(order, str) and order == "random":
        scan = np.random.default_rng(seed).permutation(len(pts))
    else:
        scan = np.asarray(order, dtype=np.int64)

    acc_pts = np.empty_like(pts)
    acc_del = np.empty_like(deltas)
    accepted = []
    k = 0
    factor = tau / 4.0
    for i in scan:
        p, dp = pts[i], deltas[i]
        if dp <= 0:
            continue
        if k:
            d = np.sqrt(((acc_pts[:k] - p) ** 2).sum(1))
            need = factor * np.maximum(acc_del[:k], dp)
            if np.any(d < need):
                continue
        acc_pts[k] = p
        acc_del[k] = dp
        accepted.append(int(i))
        k += 1
    return ScatteredSet(
        domain=domain, tau=tau, points=acc_pts[:k].copy(),
        deltas=acc_del[:k].copy(), candidate_points=pts,
        candidate_deltas=deltas, accepted=np.array(accepted, dtype=np.int64),
    )


def verify_scattered(scattered, strict=True):
    """Brute-force pairwise check of the scattered predicate."""
    p, d, tau = scattered.points, scattered.deltas, scattered.tau
    for i in range(len(p)):
        dist = np.sqrt(((p[i + 1:] - p[i]) ** 2).sum(1))
        need = (tau / 4.0) * np.maximum(d[i + 1:], d[i])
        if np.any(dist < need - 1e-12):
            if strict:
                raise AssertionError("scattered predicate violated")
            return False
    return True


def coverage_gaps(scattered):
    """Candidate indices not covered by any middle ball; empty for a
    greedy-maximal set."""
    pts = scattered.candidate_points
    gaps = []
    r = scattered.radii_mid()
    for i, x in enumerate(pts):
        d = np.sqrt(((scattered.points - x) ** 2).sum(1))
        if not np.any(d < r):
            gaps.append(i)
    return np.array(gaps, dtype=np.int64)


class Partition:
    """Normalized bump family chi_a = phi_a / sum_b phi_b.

    phi_a(x) = bump(|x - a| / (tau delta(a))), supported in the big ball
    of a.  Evaluators are defined wherever some middle ball covers the
    point; querying an uncovered point raises UncoveredPoint, signalling
    that the scattered set is not maximal for that region.
    """

    def __init__(self, scattered, spec=None):
        if scattered.n_centers == 0:
            raise EmptyDomain("empty scattered set")
        self.scattered = scattered
        self.spec = spec if spec is not None else BumpSpec()
        self.centers = scattered.points
        self.deltas = scattered.deltas
        self.tau = scattered.tau
        self.domain = scattered.domain

    def _scaled_dist(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        diff = x[:, None, :] - self.centers[None]
        r = np.sqrt((diff ** 2).sum(-1))
        return x, diff, r, self.tau * self.deltas[None]

    def phi(self, x):
        _, _, r, scale = self._scaled_dist(x)
        return bump(self.spec, r / scale)

    def sum_phi(self, x):
        return self.phi(x).sum(1)

    def chi(self, x):
        """(len(x), n_centers) matrix of partition values."""
        x2, _, r, scale = self._scaled_dist(x)
        ph = bump(self.spec, r / scale)
        tot = ph.sum(1)
        inside = core.contains_points(self.domain, x2)
        if np.any(inside & (tot == 0.0)):
            raise UncoveredPoint("point in the domain not covered by any bump")
        out = np.zeros_like(ph)
        ok = inside & (tot > 0)
        out[ok] = ph[ok] / tot[ok, None]
        return out

    def grad_chi(self, x):
        """(len(x), n_centers, m) array of partition gradients, by the
        chain and quotient rules."""
        x2, diff, r, scale = self._scaled_dist(x)
        t = r / scale
        ph = bump(self.spec, t)
        dph = bump_derivative(self.spec, t) / scale
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, diff / r[..., None], 0.0)
        grad_phi = dph[..., None] * unit
        tot = ph.sum(1)
        inside = core.contains_points(self.domain, x2)
        if np.any(inside & (tot == 0.0)):
            raise UncoveredPoint("point in the domain not covered by any bump")
        ok = inside & (tot > 0)
        grad_tot = grad_phi.sum(1)
        out = np.zeros_like(grad_phi)
        t2 = tot[ok, None, None]
        out[ok] = (grad_phi[ok] * t2 - ph[ok][..., None] * grad_tot[ok][:, None, :]) / t2 ** 2
        return out


def partition_of_unity(scattered, spec=None):
    return Partition(scattered, spec)


def overlap_counts(scattered):
    """For each center, the number of big balls meeting its big ball."""
    p, r = scattered.points, scattered.radii_big()
    counts = np.zeros(len(p), dtype=np.int64)
    for i in range(len(p)):
        d = np.sqrt(((p - p[i]) ** 2).sum(1))
        counts[i] = int(np.count_nonzero(d < r + r[i]))
    return counts


def dimensional_bound(m):
    """The crude uniform bound 18 * 392^m used in the overlap and
    gradient estimates; empirical constants are far smaller."""
    return 18.0 * 392.0 ** m
