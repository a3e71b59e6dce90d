"""Finite metric measure spaces and exact ball arithmetic.

A space is a dense distance matrix together with strictly positive atom
weights. Balls are open (``d < r``) unless flagged closed (``d <= r``); the
open ball of radius zero is empty and the closed one is the centre alone.

Because every measure here is atomic with positive weights, statements that
hold "almost everywhere" are enforced at every point.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from .errors import (
    AsymmetricDistance,
    CoincidentPoints,
    MalformedSpace,
    NonpositiveWeight,
    NonzeroDiagonal,
    TooFewPoints,
    TriangleViolation,
)

TRIANGLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    dist: np.ndarray
    weights: np.ndarray
    name: str = "space"
    coords: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def point_ids(self) -> list[int]:
        return list(range(self.n))

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def _sorted(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # per centre: distances ascending, matching point order, cumulative weight
        order = np.argsort(self.dist, axis=1, kind="stable")
        ds = np.take_along_axis(self.dist, order, axis=1)
        cw = np.cumsum(self.weights[order], axis=1)
        return ds, order, cw

    @cached_property
    def distinct_distances(self) -> list[np.ndarray]:
        """Sorted distinct positive distances from each centre."""
        ds = self._sorted[0]
        return [np.unique(row[row > 0]) for row in ds]

    @cached_property
    def min_distance(self) -> float:
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())

    def open_mass(self, x: int, r: float | np.ndarray) -> float | np.ndarray:
        """mu(B(x, r)) for scalar or array r, via binary search on sorted distances."""
        ds, _, cw = self._sorted
        idx = np.searchsorted(ds[x], r, side="left")
        padded = np.concatenate(([0.0], cw[x]))
        return padded[idx]

    def closed_mass(self, x: int, r: float | np.ndarray) -> float | np.ndarray:
        ds, _, cw = self._sorted
        idx = np.searchsorted(ds[x], r, side="right")
        padded = np.concatenate(([0.0], cw[x]))
        return padded[idx]

    def open_mask(self, x: int, r: float) -> np.ndarray:
        return self.dist[x] < r

    def closed_mask(self, x: int, r: float) -> np.ndarray:
        return self.dist[x] <= r

    def measure(self, mask: np.ndarray) -> float:
        return float(self.weights[mask].sum())

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "dist": self.dist.tolist(),
            "weights": self.weights.tolist(),
        }
        if self.coords is not None:
            out["coords"] = self.coords.tolist()
        return out

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float
    closed: bool = False

    def mask(self, space: MetricMeasureSpace) -> np.ndarray:
        if self.closed:
            return space.closed_mask(self.center, self.radius)
        return space.open_mask(self.center, self.radius)

    def dilate(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor, self.closed)

    def to_dict(self) -> dict[str, Any]:
        return {"center": self.center, "radius": self.radius, "closed": self.closed}


@dataclass(frozen=True, eq=False)
class PointSet:
    space: MetricMeasureSpace = field(repr=False)
    mask: np.ndarray

    @classmethod
    def of(cls, space: MetricMeasureSpace, indices) -> "PointSet":
        mask = np.zeros(space.n, dtype=bool)
        mask[list(indices)] = True
        return cls(space, mask)

    @classmethod
    def everything(cls, space: MetricMeasureSpace) -> "PointSet":
        return cls(space, np.ones(space.n, dtype=bool))

    @property
    def indices(self) -> list[int]:
        return np.flatnonzero(self.mask).tolist()

    @property
    def measure(self) -> float:
        return self.space.measure(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, i: object) -> bool:
        return isinstance(i, (int, np.integer)) and 0 <= i < self.space.n and bool(self.mask[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.mask, other.mask)

    def __hash__(self) -> int:
        return hash((id(self.space), self.mask.tobytes()))


def _first_triangle_violation(d: np.ndarray, tol: float) -> TriangleViolation | None:
    best: tuple[int, int, int, float] | None = None
    n = len(d)
    for k in range(n):
        excess = d - d[:, k, None] - d[None, k, :]
        bad = np.argwhere(np.triu(excess > tol, 1))
        if len(bad):
            i, j = bad[0]
            cand = (int(i), int(j), k, float(excess[i, j]))
            if best is None or cand[:2] < best[:2]:
                best = cand
    if best is None:
        return None
    return TriangleViolation(*best)


def validate_space(raw: Mapping[str, Any] | MetricMeasureSpace) -> MetricMeasureSpace:
    """Check a candidate record and return an immutable space.

    Raises the first violated invariant with its witness: shape problems,
    too few points, bad diagonal, asymmetry, coincident points, nonpositive
    weights, then the triangle inequality (tolerance 1e-12 absolute).
    """
    if isinstance(raw, MetricMeasureSpace):
        raw = raw.to_dict()
    try:
        d = np.array(raw["dist"], dtype=float)
        w = np.array(raw["weights"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedSpace(f"space record needs numeric 'dist' and 'weights': {exc}") from exc
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MalformedSpace(f"dist must be square, got shape {d.shape}")
    if w.ndim != 1 or len(w) != len(d):
        raise MalformedSpace(f"weights length {w.shape} does not match dist size {len(d)}")
    n = len(w)
    if n < 2:
        raise TooFewPoints(n)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        i, j = np.argwhere(~np.isfinite(d) | (d < 0))[0]
        raise MalformedSpace(f"dist[{i}][{j}] is negative or not finite")
    diag = np.flatnonzero(np.diag(d) != 0)
    if len(diag):
        raise NonzeroDiagonal(int(diag[0]))
    asym = np.argwhere(np.triu(d != d.T, 1))
    if len(asym):
        raise AsymmetricDistance(int(asym[0][0]), int(asym[0][1]))
    zero = np.argwhere(np.triu(d == 0, 1))
    if len(zero):
        raise CoincidentPoints(int(zero[0][0]), int(zero[0][1]))
    bad_w = np.flatnonzero(~np.isfinite(w) | (w <= 0))
    if len(bad_w):
        raise NonpositiveWeight(int(bad_w[0]))
    violation = _first_triangle_violation(d, TRIANGLE_TOL)
    if violation is not None:
        raise violation
    coords = raw.get("coords")
    coords_arr = None if coords is None else np.array(coords, dtype=float)
    d.setflags(write=False)
    w.setflags(write=False)
    return MetricMeasureSpace(dist=d, weights=w, name=str(raw.get("name", "space")), coords=coords_arr)


def ball_members(space: MetricMeasureSpace, ball: Ball) -> PointSet:
    return PointSet(space, ball.mask(space))


def ball_measure(space: MetricMeasureSpace, ball: Ball) -> float:
    if ball.closed:
        return float(space.closed_mass(ball.center, ball.radius))
    return float(space.open_mass(ball.center, ball.radius))


def critical_radii(space: MetricMeasureSpace, center: int) -> tuple[float, ...]:
    """Distinct positive distances from ``center``; the open ball is constant between them."""
    row = space.distinct_distances[center]
    return tuple(float(v) for v in row[row <= space.diameter])


def diameter(space: MetricMeasureSpace) -> float:
    return space.diameter


def restrict(space: MetricMeasureSpace, domain: PointSet) -> MetricMeasureSpace:
    idx = np.flatnonzero(domain.mask)
    if len(idx) < 2:
        raise TooFewPoints(len(idx))
    coords = None if space.coords is None else space.coords[idx]
    sub = space.dist[np.ix_(idx, idx)].copy()
    w = space.weights[idx].copy()
    sub.setflags(write=False)
    w.setflags(write=False)
    return MetricMeasureSpace(dist=sub, weights=w, name=f"{space.name}|restricted", coords=coords)


def load_space(path: str | Path) -> MetricMeasureSpace:
    with open(path) as fh:
        return validate_space(json.load(fh))


def save_space(space: MetricMeasureSpace, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(space.to_dict(), fh, sort_keys=True)
