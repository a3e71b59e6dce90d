"""Measure-geometry analyzers on finite spaces.

Every infimum or supremum over a continuous radius is taken exactly: the
open ball B(x, r) is constant for r in (d_k, d_{k+1}], so each quantity only
needs evaluating at finitely many event radii.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import EmptyAnnulus, InclusionFailure, LambdaOutOfRange, PreconditionRadius
from .mmspace import Ball, MetricMeasureSpace

LAMBDA_CAP = 0.19
MASS_RTOL = 1e-12


def _mass_tol(space: MetricMeasureSpace) -> float:
    return MASS_RTOL * space.total_measure


def auto_resolution(space: MetricMeasureSpace) -> float:
    """Default analysis scale: three times the smallest gap."""
    return 3.0 * space.min_distance


# ---------------------------------------------------------------- phi


def phi(space: MetricMeasureSpace, x: int, r: float) -> float:
    """sup{t in [0, r] : mu(B(x,t)) <= mu(B(x,r)) / 2}.

    mu(B(x,t)) is left-continuous and jumps just after each distance, so the
    supremum is the first distance whose closed ball already exceeds half the
    mass, capped at r.
    """
    if r <= 0:
        return 0.0
    half = 0.5 * float(space.open_mass(x, r))
    tol = _mass_tol(space)
    if space.weights[x] > half + tol:
        return 0.0
    dists = space.distinct_distances[x]
    closed = space.closed_mass(x, dists)
    over = np.flatnonzero(closed > half + tol)
    if len(over) == 0:
        return float(r)
    return float(min(dists[over[0]], r))


def phi_iterates(space: MetricMeasureSpace, x: int, r: float, count: int) -> list[float]:
    """The sequence r, phi(r), phi(phi(r)), ... of length count + 1.

    On atomic spaces this reaches 0 after finitely many steps, since the
    centre atom eventually outweighs half of a shrinking ball.
    """
    seq = [float(r)]
    for _ in range(count):
        seq.append(phi(space, x, seq[-1]))
    return seq


def phi_properties(space: MetricMeasureSpace, x: int, r: float) -> dict[str, Any]:
    """Evaluate the basic phi properties at one (x, r): the two-sided mass bracket and range."""
    f = phi(space, x, r)
    half = 0.5 * float(space.open_mass(x, r))
    tol = _mass_tol(space)
    lower = float(space.open_mass(x, f))
    upper = float(space.closed_mass(x, f))
    return {
        "phi": f,
        "bracket_low": lower <= half + tol,
        "bracket_high": half <= upper + tol,
        "in_range": 0.0 <= f <= r,
        "fixed_iff_zero": (f == r) == (r == 0),
    }


# ------------------------------------------------------ uniform perfectness


@dataclass(frozen=True)
class Perfectness:
    lam: float | None
    lam_eff: float | None
    resolution: float
    witness: tuple[int, float] | None  # (x, r) where the annulus test is tightest

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "lambda_eff": self.lam_eff,
            "resolution": self.resolution,
            "witness": None if self.witness is None else {"x": self.witness[0], "r": self.witness[1]},
        }


def uniform_perfectness(space: MetricMeasureSpace, resolution: float) -> Perfectness:
    """Largest lambda with B(x,r) minus B(x, lambda r) nonempty whenever B(x,r) != X.

    Only radii in [resolution, diam] are tested. For r in (d_k, d_{k+1}] the
    best admissible lambda is d_k / r, smallest at the right endpoint.
    """
    best = np.inf
    witness = None
    for x in range(space.n):
        dists = space.distinct_distances[x]
        ecc = dists[-1]
        if resolution > ecc:
            continue
        below = dists[dists < resolution]
        cand_r = [resolution]
        cand_l = [below[-1] / resolution if len(below) else 0.0]
        for k in np.flatnonzero((dists > resolution) & (dists <= ecc)):
            cand_r.append(float(dists[k]))
            cand_l.append(float(dists[k - 1] / dists[k]) if k > 0 else 0.0)
        i = int(np.argmin(cand_l))
        if cand_l[i] < best:
            best, witness = cand_l[i], (x, float(cand_r[i]))
    if not np.isfinite(best) or best <= 0:
        return Perfectness(None, None, resolution, witness)
    return Perfectness(float(best), min(float(best), LAMBDA_CAP), resolution, witness)


# ------------------------------------------------------ mass bounds


def radius_candidates(space: MetricMeasureSpace, x: int, r_min: float, r_max: float) -> np.ndarray:
    dists = space.distinct_distances[x]
    cand = dists[(dists >= r_min) & (dists <= r_max)]
    return np.unique(np.append(cand, r_max))


def lower_mass_constant(space: MetricMeasureSpace, s: float, r_min: float) -> tuple[float, Ball]:
    """Exact inf of mu(B(x,r)) / r^s over all x and r in [r_min, diam]."""
    diam = space.diameter
    best, witness = np.inf, None
    for x in range(space.n):
        radii = radius_candidates(space, x, r_min, diam)
        ratios = space.open_mass(x, radii) / radii**s
        i = int(np.argmin(ratios))
        if ratios[i] < best:
            best, witness = float(ratios[i]), Ball(x, float(radii[i]))
    return best, witness


def doubling_constant(space: MetricMeasureSpace) -> tuple[float, Ball]:
    """Exact sup of mu(B(x,2r)) / mu(B(x,r)) over all balls with r > 0."""
    best, witness = 1.0, Ball(0, space.diameter)
    for x in range(space.n):
        dists = space.distinct_distances[x]
        events = np.unique(np.concatenate([dists, dists / 2]))
        ratios = space.open_mass(x, 2 * events) / space.open_mass(x, events)
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best, witness = float(ratios[i]), Ball(x, float(events[i]))
    return best, witness


def relative_lower_bound(space: MetricMeasureSpace, s: float) -> tuple[float, tuple[Ball, Ball]]:
    """Exact inf of [mu(B(x,r)) / mu(B(y,R))] (R/r)^s over nested pairs, 0 < r <= R.

    Radii live in constancy intervals: r in (a, b] gives B(x,b), and R in
    (e, f] gives the closed ball of radius e about y. Inside a pair of
    intervals the factor R/r is pushed to max(1, e/b) when b <= e, to 1 when
    the intervals overlap, and the pair is infeasible otherwise. The result
    is an infimum, so the witness records R at its left limit e.
    Cost grows like n^4; meant for spaces of at most a few hundred points.
    """
    n = space.n
    ys, es, fs, masses = [], [], [], []
    for y in range(n):
        dists = space.distinct_distances[y]
        lefts = np.concatenate(([0.0], dists))
        rights = np.concatenate((dists, [np.inf]))
        ys.append(np.full(len(lefts), y))
        es.append(lefts)
        fs.append(rights)
        masses.append(space.closed_mass(y, lefts))
    ys = np.concatenate(ys)
    es = np.concatenate(es)
    fs = np.concatenate(fs)
    masses = np.concatenate(masses)

    best, witness = np.inf, None
    for x in range(n):
        dists = space.distinct_distances[x]
        prev = np.concatenate(([0.0], dists[:-1]))
        for a, b in zip(prev, dists):
            members = space.dist[x] < b
            reach = space.dist[:, members].max(axis=1)
            contain = reach[ys] <= es
            overlap = np.maximum(a, es) < np.minimum(b, fs)
            factor = np.where(b <= es, es / b, np.where(overlap, 1.0, np.nan))
            ok = contain & ~np.isnan(factor)
            if not ok.any():
                continue
            vals = np.full(len(es), np.inf)
            mb = space.measure(members)
            vals[ok] = mb / masses[ok] * factor[ok] ** s
            i = int(np.argmin(vals))
            if vals[i] < best:
                best = float(vals[i])
                witness = (Ball(x, float(b)), Ball(int(ys[i]), float(max(es[i], b))))
    return best, witness


@dataclass(frozen=True)
class VVerdict:
    holds: bool
    worst_ratio: float
    witness: Ball | None


def v_condition(space: MetricMeasureSpace, B0: Ball, sigma: float, s: float, b: float) -> VVerdict:
    """Whether mu(B(x,r)) >= b r^s for every ball inside sigma*B0 with r <= sigma*R0."""
    big = B0.dilate(sigma)
    inside = big.mask(space)
    rmax = big.radius
    worst, witness = np.inf, None
    for x in np.flatnonzero(inside):
        dists = space.distinct_distances[x]
        radii = np.unique(np.append(dists[dists <= rmax], rmax))
        for r in radii:
            members = space.dist[x] < r
            if not np.all(inside[members]):
                break  # larger radii from this centre only grow
            ratio = float(space.measure(members)) / r**s
            if ratio < worst:
                worst, witness = ratio, Ball(int(x), float(r))
    holds = bool(b <= 0 or worst >= b * (1 - MASS_RTOL))
    return VVerdict(holds, float(worst), witness)


# ------------------------------------------------------ fat ball


@dataclass(frozen=True)
class FatBall:
    center: int
    radius: float
    parent: Ball
    lam: float

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.radius)

    def to_dict(self) -> dict[str, Any]:
        return {"center": self.center, "radius": self.radius, "parent": self.parent.to_dict(), "lambda": self.lam}


def fat_ball(space: MetricMeasureSpace, x: int, r: float, lam: float) -> FatBall:
    """A sub-ball of B(x, r) of comparable radius on which the half-mass radius is large.

    The centre is the lowest-index point of the annulus
    B(x, phi/lam + 2 lam r) minus B(x, phi + 2 lam^2 r), the radius is
    2 phi/lam + 2 lam r, and all three inclusions are checked before return.
    """
    if not 0 < lam < 0.2:
        raise LambdaOutOfRange(lam)
    f = phi(space, x, r)
    if r <= 3 * f / lam**2:
        raise PreconditionRadius(x, r, f, lam)
    inner, outer = f + 2 * lam**2 * r, f / lam + 2 * lam * r
    d = space.dist[x]
    annulus = np.flatnonzero((d >= inner) & (d < outer))
    if len(annulus) == 0:
        raise EmptyAnnulus(x, inner, outer)
    xt = int(annulus[0])
    rt = 2 * f / lam + 2 * lam * r
    core = space.closed_mask(x, f)
    fat = space.open_mask(xt, rt)
    parent = space.open_mask(x, r)
    small = space.open_mask(xt, lam * rt / 2)
    if not np.all(fat[core]):
        raise InclusionFailure("closed phi-ball not inside fat ball")
    if not np.all(parent[fat]):
        raise InclusionFailure("fat ball not inside parent ball")
    if not np.all(parent[small] & ~core[small]):
        raise InclusionFailure("shrunken fat ball meets the closed phi-ball or leaves the parent")
    return FatBall(xt, float(rt), Ball(x, float(r)), lam)


# ------------------------------------------------------ summary


@dataclass
class GeometrySummary:
    s: float
    resolution: float
    kappa: float
    kappa_witness: Ball
    doubling_constant: float
    doubling_witness: Ball
    relative_kappa: float | None
    relative_witness: tuple[Ball, Ball] | None
    perfectness: Perfectness
    phi_table: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        rel = None
        if self.relative_witness is not None:
            rel = [b.to_dict() for b in self.relative_witness]
        return {
            "s": self.s,
            "resolution": self.resolution,
            "kappa": self.kappa,
            "kappa_witness": self.kappa_witness.to_dict(),
            "doubling_constant": self.doubling_constant,
            "doubling_witness": self.doubling_witness.to_dict(),
            "relative_kappa": self.relative_kappa,
            "relative_witness": rel,
            "uniform_perfectness": self.perfectness.to_dict(),
            "phi_table": self.phi_table,
        }


def analyze(space: MetricMeasureSpace, s: float, resolution: float | None = None,
            relative_limit: int = 128) -> GeometrySummary:
    """All geometric constants at one scale. The n^4 relative bound is skipped above relative_limit points."""
    res = auto_resolution(space) if resolution is None else resolution
    kappa, kw = lower_mass_constant(space, s, res)
    dbl, dw = doubling_constant(space)
    rel, rw = (None, None)
    if space.n <= relative_limit:
        rel, rw = relative_lower_bound(space, s)
    table = []
    for x in range(space.n):
        radii = [r for r in space.distinct_distances[x] if r >= res]
        table.append({"x": x, "r": [float(r) for r in radii], "phi": [phi(space, x, r) for r in radii]})
    return GeometrySummary(s, res, kappa, kw, dbl, dw, rel, rw, uniform_perfectness(space, res), table)
