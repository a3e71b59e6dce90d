"""Explicit Lipschitz test functions built from a ball.

Three kinds: a single linear bump, and two nested families of bumps whose
transition annuli shrink geometrically toward half the ball radius (kind
``c1``) or toward half of phi_x(r) (kind ``c2``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import BadRadii, LambdaOutOfRange, PreconditionRadius, ZeroPhi
from .geometry import MASS_RTOL, phi
from .mmspace import Ball, MetricMeasureSpace

DEFAULT_J_MAX = 64
EXTRA_INDICES = 4


def bump_values(dist_row: np.ndarray, r: float, R: float) -> np.ndarray:
    """1 on the closed r-ball, linear ramp (R - d)/(R - r) on the open annulus, 0 from R on."""
    return np.where(dist_row <= r, 1.0, np.where(dist_row < R, (R - dist_row) / (R - r), 0.0))


def bump(space: MetricMeasureSpace, x: int, r: float, R: float) -> tuple[np.ndarray, np.ndarray]:
    """The bump centred at x and the gradient (R - r)^-1 on the open R-ball."""
    if not 0 <= r < R < np.inf:
        raise BadRadii(r, R)
    d = space.dist[x]
    u = bump_values(d, r, R)
    g = np.where(d < R, 1.0 / (R - r), 0.0)
    return u, g


def measured_lipschitz(space: MetricMeasureSpace, u) -> float:
    u = np.asarray(u, dtype=float)
    ii, jj = np.triu_indices(space.n, 1)
    return float(np.max(np.abs(u[ii] - u[jj]) / space.dist[ii, jj]))


@dataclass(frozen=True)
class FamilyMember:
    j: int
    u: np.ndarray
    g: np.ndarray
    inner: Ball  # open ball carrying the support of u
    lipschitz: float

    def to_dict(self) -> dict[str, Any]:
        return {"j": self.j, "u": self.u.tolist(), "g": self.g.tolist(),
                "inner": self.inner.to_dict(), "lipschitz": self.lipschitz}


@dataclass
class ConstructionFamily:
    kind: str  # bump | c1 | c2
    base: Ball
    members: list[FamilyMember]
    radii: list[float]  # r_1, r_2, ... one more than members
    scale: float  # r for c1, phi_x(r) for c2
    lam: float | None = None
    stabilization: int | None = None
    inner_masses: list[float] = field(default_factory=list)  # mu(B^j) for j = 1 .. len(members)+1

    def member(self, j: int) -> FamilyMember:
        return self.members[j - 1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "base": self.base.to_dict(),
            "lambda": self.lam,
            "scale": self.scale,
            "radii": self.radii,
            "stabilization": self.stabilization,
            "inner_masses": self.inner_masses,
            "members": [m.to_dict() for m in self.members],
        }


def family_radii(scale: float, count: int) -> np.ndarray:
    """(2^-j-1 + 1/2) * scale for j = 1 .. count."""
    j = np.arange(1, count + 1, dtype=float)
    return (2.0 ** (-j - 1) + 0.5) * scale


def stabilization_index(dist_row: np.ndarray, scale: float, j_max: int) -> int:
    """First j after which the family no longer changes on the point set.

    That is the first j with no distance in (scale/2, r_j): from then on
    every bump is the indicator of the closed scale/2 ball.
    """
    radii = family_radii(scale, j_max + 1)
    half = scale / 2
    for j, rj in enumerate(radii, start=1):
        if not np.any((dist_row > half) & (dist_row < rj)):
            return j
    return j_max


def _build(space: MetricMeasureSpace, kind: str, B: Ball, scale: float, j_max: int,
           lam: float | None) -> ConstructionFamily:
    d = space.dist[B.center]
    stab = stabilization_index(d, scale, j_max)
    count = min(j_max, stab + EXTRA_INDICES)
    radii = family_radii(scale, count + 1)
    members = []
    for j in range(1, count + 1):
        rj, rnext = radii[j - 1], radii[j]
        u = bump_values(d, rnext, rj)
        lip = 2.0 ** (j + 2) / scale
        g = np.where(d < rj, lip, 0.0)
        members.append(FamilyMember(j, u, g, Ball(B.center, float(rj)), lip))
    masses = [float(space.open_mass(B.center, rj)) for rj in radii]
    return ConstructionFamily(kind, B, members, [float(r) for r in radii], float(scale), lam, stab, masses)


def construction1(space: MetricMeasureSpace, B: Ball, j_max: int = DEFAULT_J_MAX) -> ConstructionFamily:
    """Bumps from the closed r_(j+1)-ball to the r_j-ball with r_j = (2^-j-1 + 1/2) r.

    The family stops four indices past stabilization (or at j_max).
    """
    if B.radius <= 0:
        raise BadRadii(0.0, B.radius)
    return _build(space, "c1", B, B.radius, j_max, None)


def construction2(space: MetricMeasureSpace, B: Ball, lam: float, j_max: int = DEFAULT_J_MAX) -> ConstructionFamily:
    """Same nesting as construction1 but at scale phi_x(r) instead of r.

    Needs 0 < lam < 1/5, phi_x(r) > 0 and r <= 3 phi_x(r) / lam^2.
    """
    if not 0 < lam < 0.2:
        raise LambdaOutOfRange(lam)
    f = phi(space, B.center, B.radius)
    if f == 0:
        raise ZeroPhi(B.center, B.radius)
    if B.radius > 3 * f / lam**2:
        raise PreconditionRadius(B.center, B.radius, f, lam)
    return _build(space, "c2", B, f, j_max, lam)


@dataclass(frozen=True)
class HalfmassVerdict:
    holds: bool
    measure: float  # mass of {y in B : |u_j(y) - gamma| >= 1/2}
    required: float  # mu of the next inner ball


def verify_halfmass(space: MetricMeasureSpace, family: ConstructionFamily, j: int, gamma: float) -> HalfmassVerdict:
    """Whether |u_j - gamma| >= 1/2 on a part of B weighing at least mu(B^(j+1))."""
    if family.kind != "c2":
        raise ValueError("half-mass property is stated for c2 families")
    u = family.member(j).u
    inside = family.base.mask(space)
    far = inside & (np.abs(u - gamma) >= 0.5)
    got = space.measure(far)
    need = family.inner_masses[j]
    return HalfmassVerdict(bool(got >= need - MASS_RTOL * space.total_measure), got, need)
