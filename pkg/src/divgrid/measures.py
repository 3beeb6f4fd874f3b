"""Finitely supported signed measures and their regularity diagnostics.

Atoms make the unrestricted sup of |mu|(B(x,r))/r^(m-1) infinite, so the
ball-ratio norm is always reported above an atomization scale r_min; the
segment and fractal measures produced here are discretizations of
continuum measures and r_min documents their resolution.  Balls are
closed throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import core
from .errors import AtomOutside, BadAngle, BadTau, NonpositiveRadius


@dataclass(frozen=True)
class AtomicMeasure:
    """Signed measure with finitely many atoms.  Duplicate points are
    merged on construction and zero weights dropped."""

    points: np.ndarray   # (n, m)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(pts) != len(w):
            raise ValueError("points and weights disagree in length")
        if len(pts):
            order = np.lexsort(pts.T[::-1])
            pts, w = pts[order], w[order]
            same = np.all(pts[1:] == pts[:-1], axis=1)
            group = np.concatenate([[0], np.cumsum(~same)])
            merged_w = np.zeros(group[-1] + 1)
            np.add.at(merged_w, group, w)
            first = np.concatenate([[True], ~same])
            pts, w = pts[first], merged_w
            keep = w != 0.0
            pts, w = pts[keep], w[keep]
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self):
        return len(self.weights)

    @property
    def m(self):
        return self.points.shape[1]

    def __add__(self, other):
        return AtomicMeasure(
            np.vstack([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
        )

    def scaled(self, factor):
        return AtomicMeasure(self.points, self.weights * factor)

    def dilated(self, lam):
        return AtomicMeasure(self.points * lam, self.weights)


def dipole(a, b, theta=1.0):
    """theta * (delta_b - delta_a)."""
    return AtomicMeasure(np.array([a, b], dtype=float), np.array([-theta, theta]))


def empty_measure(m=2):
    return AtomicMeasure(np.empty((0, m)), np.empty(0))


@dataclass(frozen=True)
class MeasureStats:
    total_mass: float
    total_variation: float
    balanced: bool
    first_moment: float


def measure_stats(mu, tol=1e-12):
    """Total mass, |mu|(R^m), balance flag, and the first moment
    integral of |x| d|mu|."""
    mass = float(mu.weights.sum()) if mu.n_atoms else 0.0
    tv = float(np.abs(mu.weights).sum()) if mu.n_atoms else 0.0
    moment = (
        float(np.abs(mu.weights) @ np.sqrt((mu.points ** 2).sum(1)))
        if mu.n_atoms
        else 0.0
    )
    return MeasureStats(
        total_mass=mass,
        total_variation=tv,
        balanced=abs(mass) <= tol * max(tv, 1.0),
        first_moment=moment,
    )


def _ball_masses_at(centers, mu, radius):
    """|mu|(B(c, radius)) for each center; closed balls, chunked."""
    out = np.zeros(len(centers))
    absw = np.abs(mu.weights)
    if mu.n_atoms == 0:
        return out
    chunk = max(1, 4_000_000 // max(mu.n_atoms, 1))
    r2 = radius ** 2 if np.isscalar(radius) else np.asarray(radius) ** 2
    for s in range(0, len(centers), chunk):
        d2 = ((centers[s:s + chunk, None, :] - mu.points[None]) ** 2).sum(-1)
        rr = r2 if np.isscalar(radius) else r2[s:s + chunk, None]
        out[s:s + chunk] = (d2 <= rr + 1e-18) @ absw
    return out


def mz_norm_above(mu, r_min, m=None, centers="atoms+midpoints"):
    """sup over r >= r_min and candidate centers of |mu|(B(x,r))/r^(m-1).

    Candidate centers are the atoms, optionally joined by midpoints of
    atom pairs closer than 2 r_min, or an explicit array; the radii
    scanned per center are the pairwise-distance breakpoints clipped to
    r_min, where the step function |mu|(B(x,.)) jumps.  A restricted
    candidate set makes this a certified lower bound of the continuum
    sup; the default set is exact for the sup over the scanned centers.
    """
    if r_min <= 0:
        raise NonpositiveRadius("r_min must be positive")
    if mu.n_atoms == 0:
        return 0.0
    m = mu.m if m is None else m
    if isinstance(centers, str):
        cand = [mu.points]
        if centers == "atoms+midpoints":
            tree = cKDTree(mu.points)
            pairs = tree.query_pairs(2.0 * r_min, output_type="ndarray")
            if len(pairs):
                cand.append(0.5 * (mu.points[pairs[:, 0]] + mu.points[pairs[:, 1]]))
        elif centers != "atoms":
            raise ValueError(f"unknown center strategy {centers!r}")
        cand = np.vstack(cand)
    else:
        cand = np.atleast_2d(np.asarray(centers, dtype=float))

    absw = np.abs(mu.weights)
    best = 0.0
    chunk = max(1, 2_000_000 // max(mu.n_atoms, 1))
    for s in range(0, len(cand), chunk):
        d2 = ((cand[s:s + chunk, None, :] - mu.points[None]) ** 2).sum(-1)
        idx = np.argsort(d2, axis=1)
        d = np.sqrt(np.take_along_axis(d2, idx, axis=1))
        cum = np.cumsum(absw[idx], axis=1)
        radii = np.maximum(d, r_min)
        best = max(best, float((cum / radii ** (m - 1)).max()))
    return best


def eta(mu, domain, tau):
    """Boundary-weighted local ball ratio at scale tau:
    sup over cell centers x of (1/delta(x)) |mu|(B(x, tau delta(x)))
    / (tau delta(x))^(m-1).  Evaluating over cell centers makes this a
    lower bound for the continuum sup."""
    if not (0.0 < tau <= 1.0):
        raise BadTau("tau must lie in (0, 1]")
    if mu.n_atoms and not core.contains_points(domain, mu.points).all():
        raise AtomOutside("all atoms must lie in the domain region")
    if mu.n_atoms == 0:
        return 0.0
    x = domain.centers(core.MESH)
    delta = domain.boundary_distance_all(core.MESH)
    rho = tau * delta
    masses = _ball_masses_at(x, mu, rho)
    vals = masses / (delta * rho ** (domain.m - 1))
    return float(vals.max())


def eta_profile(mu, domain, taus):
    return np.array([eta(mu, domain, t) for t in taus])


@dataclass
class KochSpec:
    """Four-segment generator parameters: endpoints, per-level angles."""

    a: np.ndarray
    b: np.ndarray
    angles: np.ndarray   # one angle per subdivision level, radians
    level: int

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.angles = np.atleast_1d(np.asarray(self.angles, dtype=float))
        if self.level < 0:
            raise BadAngle("level must be >= 0")
        if self.level > 0:
            if len(self.angles) < self.level:
                raise BadAngle("need one angle per subdivision level")
            if np.any(self.angles[: self.level] <= 0) or np.any(
                self.angles[: self.level] >= math.pi / 2
            ):
                raise BadAngle("angles must lie in (0, pi/2)")


@dataclass
class KochCurve:
    polyline: np.ndarray       # (4^n + 1, 2)
    measure: AtomicMeasure     # one atom per segment midpoint, total mass 1
    length: float              # summed Euclidean length of the polyline
    growth: np.ndarray         # per-level multipliers 2 / (1 + cos theta_j)
    product_converged: bool    # partial products settled within 1e-3


def koch_curve(spec):
    """Level-n polyline from a to b; level j replaces every segment by the
    symmetric 4-segment generator with angle theta_j, so endpoints are
    preserved and sub-segments have length |q - p| / (2 (1 + cos theta)).
    The returned measure is the uniform parameter measure pushed to the
    curve, one atom of weight 4^(-n) per segment midpoint."""
    pts = np.array([spec.a, spec.b], dtype=float)
    growth = 2.0 / (1.0 + np.cos(spec.angles[: spec.level]))
    for j in range(spec.level):
        theta = float(spec.angles[j])
        p, q = pts[:-1], pts[1:]
        seg = q - p
        ell = 1.0 / (2.0 * (1.0 + math.cos(theta)))
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)],
             [math.sin(theta), math.cos(theta)]]
        )
        A = p + ell * seg
        B = q - ell * seg
        apex = A + ell * seg @ rot.T
        pts = np.concatenate(
            [np.stack([p, A, apex, B], axis=1).reshape(-1, 2), pts[-1:]]
        )
    seglen = np.sqrt(((pts[1:] - pts[:-1]) ** 2).sum(1))
    length = float(seglen.sum())
    mids = 0.5 * (pts[1:] + pts[:-1])
    weights = np.full(len(mids), 1.0 / len(mids))
    if spec.level == 0:
        converged = True
    else:
        partial = np.cumprod(growth)
        converged = (
            spec.level >= 2
            and abs(partial[-1] - partial[-2]) <= 1e-3 * partial[-1]
        )
    return KochCurve(
        polyline=pts,
        measure=AtomicMeasure(mids, weights),
        length=length,
        growth=growth,
        product_converged=bool(converged),
    )


@dataclass(frozen=True)
class WeightFlags:
    bound_ok: bool      # |h| <= c * delta at every atom
    balanced: bool      # integral of h d mu vanishes


def weight_by(mu, h, domain, c, tol=1e-12):
    """Reweight atoms by h and report the EX-style admissibility flags.

    h may be a callable on points (n, m) -> (n,) or an array of values
    per atom.  Flags, not errors: the caller decides what to do with an
    inadmissible weight."""
    if callable(h):
        hv = np.asarray(h(mu.points), dtype=float).ravel()
    else:
        hv = np.asarray(h, dtype=float).ravel()
    if hv.shape != (mu.n_atoms,):
        raise ValueError("weight values must match the atom count")
    delta = core.point_boundary_distance(domain, mu.points) if mu.n_atoms else np.zeros(0)
    bound_ok = bool(np.all(np.abs(hv) <= c * delta + 1e-12))
    new_w = mu.weights * hv
    integral = float(new_w.sum())
    scale = float(np.abs(new_w).sum())
    balanced = abs(integral) <= tol * max(scale, 1.0)
    return AtomicMeasure(mu.points, new_w), WeightFlags(bound_ok, balanced)


def rasterize(mu, domain, mode=core.GRAPH):
    """Deposit each atom's weight in its containing cell.  Total mass is
    preserved exactly; mesh mode divides by h^m to yield a density."""
    out = np.zeros(domain.n_cells)
    if mu.n_atoms == 0:
        return out
    idx = core.containing_cells(domain, mu.points)
    if np.any(idx < 0):
        raise AtomOutside("atom outside the domain region")
    np.add.at(out, idx, mu.weights)
    if mode == core.MESH:
        out /= domain.h ** domain.m
    return out


@dataclass
class MZProfile:
    radii: np.ndarray
    ratios: np.ndarray            # sup over atom centers of ball ratio
    slope: float                  # log-log fit of ratio against r
    vanishing_consistent: bool    # ratios shrink with r (diagnostic)
    eta_taus: np.ndarray = None
    eta_values: np.ndarray = None


def upper_regularity_profile(mu, radii, slope_margin=0.1):
    """Ball-ratio table r -> sup over atom-centered balls of
    |mu|(B(x,r))/r^(m-1), with a fitted log-log slope.  A positive slope
    (ratios shrinking as r shrinks) is consistent with a vanishing
    upper-regularity envelope; diagnostic only."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise NonpositiveRadius("radii must be positive and increasing")
    if mu.n_atoms == 0:
        return MZProfile(radii, np.zeros_like(radii), 0.0, True)
    m = mu.m
    uniform = np.ptp(np.abs(mu.weights)) <= 1e-15 * np.abs(mu.weights).max()
    ratios = np.zeros_like(radii)
    if uniform:
        tree = cKDTree(mu.points)
        w0 = abs(float(mu.weights[0]))
        for i, r in enumerate(radii):
            counts = tree.query_ball_point(mu.points, r + 1e-15, return_length=True)
            ratios[i] = w0 * counts.max() / r ** (m - 1)
    else:
        for i, r in enumerate(radii):
            masses = _ball_masses_at(mu.points, mu, r)
            ratios[i] = masses.max() / r ** (m - 1)
    pos = ratios > 0
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(radii[pos]), np.log(ratios[pos]), 1)[0])
    else:
        slope = 0.0
    return MZProfile(radii, ratios, slope, bool(slope > slope_margin))
