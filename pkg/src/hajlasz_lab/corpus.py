"""Generators for spaces with known geometry.

Distances are built from integer offsets wherever possible so that equal
nominal distances are equal floats; critical radii then come out distinct.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import BadParams
from .mmspace import MetricMeasureSpace, validate_space

CANTOR_DIM = math.log(2) / math.log(3)


@dataclass(frozen=True)
class CorpusSpec:
    generator: str
    params: dict[str, Any] = field(default_factory=dict)
    exponent: float | None = None
    regularity: str = "lower-regular"  # lower-regular | doubling | neither


def _build(name: str, dist: np.ndarray, weights: np.ndarray, coords=None) -> MetricMeasureSpace:
    raw = {"name": name, "dist": dist, "weights": weights}
    if coords is not None:
        raw["coords"] = coords
    return validate_space(raw)


def grid(dim: int, n: int) -> MetricMeasureSpace:
    """Lattice points of [0,1]^dim, n per axis, uniform weight n^-dim."""
    if dim not in (1, 2) or n < 2:
        raise BadParams(f"grid needs dim in (1, 2) and n >= 2, got dim={dim}, n={n}")
    ticks = np.arange(n)
    if dim == 1:
        idx = ticks[:, None]
    else:
        idx = np.array([(i, j) for i in ticks for j in ticks])
    diff = idx[:, None, :] - idx[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2)) / (n - 1)
    weights = np.full(len(idx), float(n) ** -dim)
    return _build(f"grid({dim},{n})", dist, weights, idx / (n - 1))


def cantor(level: int) -> MetricMeasureSpace:
    """Left endpoints of the middle-thirds intervals at the given level."""
    if not 1 <= level <= 8:
        raise BadParams(f"cantor level must be in 1..8, got {level}")
    nums = [0]
    for k in range(level):
        step = 2 * 3 ** (level - k - 1)
        nums = nums + [v + step for v in nums]
    nums = np.array(sorted(nums), dtype=np.int64)
    dist = np.abs(nums[:, None] - nums[None, :]) / float(3**level)
    weights = np.full(len(nums), 2.0**-level)
    return _build(f"cantor({level})", dist, weights, (nums / float(3**level))[:, None])


def snowflake(space: MetricMeasureSpace, alpha: float) -> MetricMeasureSpace:
    if not 0 < alpha < 1:
        raise BadParams(f"snowflake exponent must lie in (0,1), got {alpha}")
    return _build(f"snowflake({space.name},{alpha})", space.dist**alpha, space.weights.copy(), space.coords)


def vanishing_density(n: int, beta: float) -> MetricMeasureSpace:
    """Points i/n with weights proportional to (i/n)^beta; fails the s=1 lower bound near 0."""
    if n < 4 or beta <= 0:
        raise BadParams(f"vanishing_density needs n >= 4 and beta > 0, got n={n}, beta={beta}")
    i = np.arange(1, n + 1)
    dist = np.abs(i[:, None] - i[None, :]) / float(n)
    w = (i / n) ** beta
    return _build(f"vanishing_density({n},{beta})", dist, w / w.sum(), (i / n)[:, None])


def random_space(n: int, seed: int) -> MetricMeasureSpace:
    """n uniform points in the unit square, Euclidean distance, uniform weights."""
    if n < 2:
        raise BadParams(f"random_space needs n >= 2, got {n}")
    pts = np.random.default_rng(seed).random((n, 2))
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    return _build(f"random_space({n},{seed})", dist, np.full(n, 1.0 / n), pts)


def generate(spec: CorpusSpec) -> MetricMeasureSpace:
    makers = {
        "grid": grid,
        "cantor": cantor,
        "vanishing_density": vanishing_density,
        "random_space": random_space,
    }
    if spec.generator == "snowflake":
        base = generate(CorpusSpec(**spec.params["base"]))
        return snowflake(base, spec.params["alpha"])
    if spec.generator not in makers:
        raise BadParams(f"unknown generator {spec.generator!r}")
    return makers[spec.generator](**spec.params)


def expected_exponent(space_name: str) -> float | None:
    """Regularity exponent implied by a generator name, if it has one."""
    if space_name.startswith("snowflake("):
        inner, alpha = space_name[len("snowflake(") : -1].rsplit(",", 1)
        base = expected_exponent(inner)
        return None if base is None else base / float(alpha)
    if space_name.startswith("grid("):
        return float(space_name[5:].split(",")[0])
    if space_name.startswith("cantor("):
        return CANTOR_DIM
    if space_name.startswith("random_space("):
        return 2.0
    return None
