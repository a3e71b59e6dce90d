"""Generalized gradients, minimal gradients, norms and constant shifts.

A nonnegative g is a generalized gradient of u on a domain when
|u(x) - u(y)| <= d(x, y) (g(x) + g(y)) for every pair of domain points.
Finding the cheapest such g is a linear program for p = 1, a smooth convex
program for p > 1 and a concave minimization over a polyhedron for p < 1.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
from scipy.optimize import brentq, linprog

from .errors import DegenerateDomain, EmptySet
from .mmspace import MetricMeasureSpace, PointSet

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12
KKT_TARGET = 1e-8
ENUMERATION_LIMIT = 8
SLOPE_FLOOR = 1e-12


def _mask(space: MetricMeasureSpace, domain) -> np.ndarray:
    if domain is None:
        return np.ones(space.n, dtype=bool)
    if isinstance(domain, PointSet):
        return domain.mask
    arr = np.asarray(domain)
    if arr.dtype == bool:
        return arr
    mask = np.zeros(space.n, dtype=bool)
    mask[arr.astype(int)] = True
    return mask


def lp_norm(space: MetricMeasureSpace, values, p: float, domain=None) -> float:
    """(sum over domain of mu_i |v_i|^p)^(1/p); a quasi-norm when p < 1."""
    m = _mask(space, domain)
    v = np.abs(np.asarray(values, dtype=float)[m])
    return float(np.sum(space.weights[m] * v**p) ** (1.0 / p))


def pair_bounds(space: MetricMeasureSpace, u, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairs (i, j) of idx with i < j and the slope |u_i - u_j| / d(i, j) each forces."""
    u = np.asarray(u, dtype=float)
    ii, jj = np.triu_indices(len(idx), 1)
    a, b = idx[ii], idx[jj]
    return a, b, np.abs(u[a] - u[b]) / space.dist[a, b]


@dataclass(frozen=True)
class GradientVerdict:
    holds: bool
    worst_pair: tuple[int, int] | None
    slack: float


def is_generalized_gradient(space: MetricMeasureSpace, u, g, domain=None, tol: float = FEASIBILITY_TOL) -> GradientVerdict:
    """Check the pointwise inequality on every pair of the domain; slack is the smallest margin."""
    idx = np.flatnonzero(_mask(space, domain))
    if len(idx) < 2:
        return GradientVerdict(True, None, float("inf"))
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    ii, jj = np.triu_indices(len(idx), 1)
    a, b = idx[ii], idx[jj]
    diff = np.abs(u[a] - u[b])
    slack = space.dist[a, b] * (g[a] + g[b]) - diff
    k = int(np.argmin(slack))
    scale = max(1.0, float(diff.max()))
    ok = bool(slack[k] >= -tol * scale) and bool(np.all(g[idx] >= 0))
    return GradientVerdict(ok, (int(a[k]), int(b[k])), float(slack[k]))


@dataclass
class SolverReport:
    g: np.ndarray
    value: float
    method: str  # exact-lp | convex-descent | vertex-enumeration | heuristic
    evidence: dict[str, Any] = field(default_factory=dict)
    certified: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "g": self.g.tolist(),
            "value": self.value,
            "method": self.method,
            "certified": self.certified,
            "evidence": self.evidence,
        }


def minimal_gradient(space: MetricMeasureSpace, u, p: float, domain=None, method: str | None = None) -> SolverReport:
    """Smallest weighted p-norm over all generalized gradients of u on the domain.

    Entries of g outside the domain are zero. method can force
    'vertex-enumeration' for any p on small domains.
    """
    idx = np.flatnonzero(_mask(space, domain))
    if len(idx) < 2:
        raise DegenerateDomain(len(idx))
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    a, b, c = pair_bounds(space, u, idx)
    w = space.weights[idx]
    pos = {int(k): t for t, k in enumerate(idx)}
    ra = np.array([pos[int(k)] for k in a])
    rb = np.array([pos[int(k)] for k in b])

    if method is None:
        if p == 1:
            method = "exact-lp"
        elif p > 1:
            method = "convex-descent"
        elif len(idx) <= ENUMERATION_LIMIT:
            method = "vertex-enumeration"
        else:
            method = "heuristic"

    # g is homogeneous in u, so solve with slopes scaled to max 1; the LP
    # solver's absolute tolerances would otherwise swamp tiny inputs
    scale = float(c.max()) if len(c) else 0.0
    if scale > 0:
        c = c / scale
        c[c < SLOPE_FLOOR] = 0.0  # below float resolution relative to the largest slope
    if not scale > 0:
        local, evidence, certified = np.zeros(len(idx)), {"reason": "u is constant on the domain"}, True
    elif method == "exact-lp":
        local, evidence = _solve_lp(w, ra, rb, c)
        certified = True
    elif method == "convex-descent":
        local, evidence = _solve_convex(w, ra, rb, c, p)
        certified = evidence["kkt_residual"] <= KKT_TARGET
    elif method == "vertex-enumeration":
        local, evidence = _enumerate_vertices(w, ra, rb, c, p)
        certified = True
    elif method == "heuristic":
        local, evidence = _reweighted_lp(w, ra, rb, c, p)
        certified = False
    else:
        raise ValueError(f"unknown method {method!r}")

    if scale > 0:
        local = local * scale
        evidence["slope_scale"] = scale
    g = np.zeros(space.n)
    g[idx] = local
    value = float(np.sum(w * local**p) ** (1.0 / p))
    return SolverReport(g, value, method, evidence, certified)


def _constraint_matrix(n: int, ra: np.ndarray, rb: np.ndarray) -> np.ndarray:
    A = np.zeros((len(ra), n))
    A[np.arange(len(ra)), ra] = 1.0
    A[np.arange(len(ra)), rb] = 1.0
    return A


def _solve_lp(w, ra, rb, c) -> tuple[np.ndarray, dict[str, Any]]:
    A = _constraint_matrix(len(w), ra, rb)
    res = linprog(w, A_ub=-A, b_ub=-c, bounds=[(0, None)] * len(w), method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program did not solve: {res.message}")
    g = _rescale_feasible(np.maximum(res.x, 0.0), ra, rb, c)
    y = np.maximum(-res.ineqlin.marginals, 0.0)
    dual_value = float(c @ y)
    primal_value = float(w @ g)
    load = A.T @ y
    return g, {
        "dual_value": dual_value,
        "primal_value": primal_value,
        "duality_gap": primal_value - dual_value,
        "dual_infeasibility": float(max(0.0, np.max(load - w))),
        "primal_infeasibility": float(max(0.0, np.max(c - A @ g))),
    }


def _rescale_feasible(g: np.ndarray, ra, rb, c) -> np.ndarray:
    # a uniform shift would move coordinates off zero, where the gradient
    # of g^p blows up for p < 2; rescaling keeps them there
    sums = g[ra] + g[rb]
    live = (c > 0) & (sums > 0)
    if live.any():
        g = g * max(1.0, float(np.max(c[live] / sums[live])))
    # constraints with nothing to rescale get their deficit split locally
    for k in np.flatnonzero(g[ra] + g[rb] < c):
        deficit = c[k] - g[ra[k]] - g[rb[k]]
        if deficit > 0:
            g[ra[k]] += deficit / 2
            g[rb[k]] += deficit / 2
    return g


def _g_of_load(load: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    # stationarity of sum w g^p: p w g^(p-1) = load
    return (np.maximum(load, 0.0) / (p * w)) ** (1.0 / (p - 1.0))


def kkt_residual(w, ra, rb, c, p: float, g: np.ndarray, y: np.ndarray) -> dict[str, float]:
    """Scaled KKT residuals of min sum w g^p subject to g_i + g_j >= c_ij."""
    A = _constraint_matrix(len(w), ra, rb)
    load = A.T @ y
    grad = p * w * g ** (p - 1.0)
    scale = max(1.0, float(np.max(grad)))
    cscale = max(1.0, float(np.max(c)))
    gap = A @ g - c
    return {
        "stationarity": float(np.max(np.abs(grad - load)) / scale),
        "primal_infeasibility": float(max(0.0, -np.min(gap)) / cscale),
        "complementarity": float(np.max(np.abs(y * gap)) / (scale * cscale)),
    }


def _solve_convex(w, ra, rb, c, p: float, max_sweeps: int = 200_000) -> tuple[np.ndarray, dict[str, Any]]:
    """Dual coordinate ascent on the pair multipliers.

    Each sweep maximizes the dual exactly in one multiplier at a time, which
    enforces g_i + g_j = c_ij whenever that multiplier is positive. For p = 2
    the update is closed form; otherwise it is a monotone 1-D root.
    """
    n, m = len(w), len(c)
    y = np.zeros(m)
    load = np.zeros(n)
    order = np.argsort(-c, kind="stable")
    res = {}
    for sweep in range(max_sweeps):
        for k in order:
            i, j = ra[k], rb[k]
            if p == 2:
                gi, gj = load[i] / (2 * w[i]), load[j] / (2 * w[j])
                step = (c[k] - gi - gj) / (1 / (2 * w[i]) + 1 / (2 * w[j]))
                step = max(step, -y[k])
            else:
                def excess(t, i=i, j=j, k=k):
                    li, lj = load[i] + t, load[j] + t
                    return _g_of_load(np.array([li]), w[i:i + 1], p)[0] + _g_of_load(np.array([lj]), w[j:j + 1], p)[0] - c[k]

                lo = -y[k]
                if excess(lo) >= 0:
                    step = lo
                else:
                    hi = max(1.0, abs(lo))
                    while excess(hi) < 0:
                        hi *= 2
                    step = brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15)
            if step != 0.0:
                y[k] += step
                load[i] += step
                load[j] += step
        if sweep % 10 == 9 or sweep == max_sweeps - 1:
            g = _g_of_load(load, w, p)
            res = kkt_residual(w, ra, rb, c, p, g, y)
            if max(res.values()) <= 1e-11:
                break
    raw = _g_of_load(load, w, p)
    g = _rescale_feasible(raw, ra, rb, c)
    res = kkt_residual(w, ra, rb, c, p, g, y)
    factor = float(np.max(g / np.where(raw > 0, raw, 1.0)))
    return g, {**res, "kkt_residual": max(res.values()), "sweeps": sweep + 1, "repair_scale": factor}


def _enumerate_vertices(w, ra, rb, c, p: float, chunk: int = 200_000) -> tuple[np.ndarray, dict[str, Any]]:
    """Exact minimum over all vertices of the feasible polyhedron.

    The objective is monotone in each coordinate and the polyhedron is
    pointed, so for any p > 0 with p <= 1 (concave) or p = 1 the minimum sits
    at a vertex: a feasible point where n linearly independent constraints
    are tight.
    """
    n = len(w)
    A = np.vstack([_constraint_matrix(n, ra, rb), np.eye(n)])
    rhs = np.concatenate([c, np.zeros(n)])
    best_val, best_g, count = np.inf, None, 0
    combos = itertools.combinations(range(len(A)), n)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if len(block) == 0:
            break
        mats = A[block]
        dets = np.linalg.det(mats)
        ok = np.abs(dets) > 1e-12
        if not ok.any():
            continue
        sols = np.linalg.solve(mats[ok], rhs[block[ok]][..., None])[..., 0]
        feas = np.all(sols >= -1e-12, axis=1) & np.all(sols @ A[: len(c)].T >= c - 1e-12, axis=1)
        sols = sols[feas]
        # exact zeros come back as round-off, which g^p with p < 1 would magnify
        sols[sols < SLOPE_FLOOR] = 0.0
        count += len(sols)
        if len(sols) == 0:
            continue
        vals = np.sum(w * sols**p, axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_g = float(vals[k]), sols[k]
    return best_g, {"vertices_checked": count}


def _reweighted_lp(w, ra, rb, c, p: float, rounds: int = 50) -> tuple[np.ndarray, dict[str, Any]]:
    """Majorize-minimize from the p = 1 vertex: each round solves the LP with tangent weights.

    Concavity of t -> t^p makes each tangent an upper model, so the
    objective never increases. Local minima are possible, hence the
    non-certified flag.
    """
    g, _ = _solve_lp(w, ra, rb, c)
    obj = float(np.sum(w * g**p))
    floor = 1e-9 * max(1.0, float(np.max(c)))
    history = [obj]
    for _ in range(rounds):
        tangent = w * p * np.maximum(g, floor) ** (p - 1)
        cand, _ = _solve_lp(tangent, ra, rb, c)
        new = float(np.sum(w * cand**p))
        if new >= obj * (1 - 1e-14):
            break
        g, obj = cand, new
        history.append(obj)
    return g, {"rounds": len(history), "objective_history": history}


def m_norm(space: MetricMeasureSpace, u, p: float, domain=None) -> float:
    return lp_norm(space, u, p, domain) + minimal_gradient(space, u, p, domain).value


def ball_mean(space: MetricMeasureSpace, u, E) -> float:
    m = _mask(space, E)
    mass = space.measure(m)
    if mass <= 0:
        raise EmptySet()
    return float(np.sum(space.weights[m] * np.asarray(u, dtype=float)[m]) / mass)


class Shift(NamedTuple):
    gamma: float
    value: float
    approximate: bool


def _convex_shift(v: np.ndarray, w: np.ndarray, q: float) -> float:
    """Minimizer of sum w|v - gamma|^q for q > 1: the root of its increasing derivative."""
    def slope(t: float) -> float:
        d = t - v
        return float(np.sum(w * np.sign(d) * np.abs(d) ** (q - 1)))

    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    return brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def best_constant_shift(space: MetricMeasureSpace, u, q: float, E) -> Shift:
    """Minimize gamma -> (mean over E of |u - gamma|^q)^(1/q).

    For q <= 1 the objective is concave (or linear) between consecutive data
    values, so the minimum is at a data value and the scan is exact. For
    q > 1 it is strictly convex and the minimizer is the root of its slope.
    """
    m = _mask(space, E)
    mass = space.measure(m)
    if mass <= 0:
        raise EmptySet()
    v = np.asarray(u, dtype=float)[m]
    w = space.weights[m]
    return shift_from_samples(v, w, q)


def shift_from_samples(v: np.ndarray, w: np.ndarray, q: float) -> Shift:
    cands = np.unique(v)
    vals = np.sum(w[None, :] * np.abs(v[None, :] - cands[:, None]) ** q, axis=1) / np.sum(w)
    k = int(np.argmin(vals))
    gamma, best = float(cands[k]), float(vals[k])
    if q > 1 and len(cands) > 1:
        t = _convex_shift(v, w, q)
        val = float(np.sum(w * np.abs(v - t) ** q) / np.sum(w))
        if val < best:
            gamma, best = t, val
    return Shift(gamma, best ** (1.0 / q), False)


def shift_with_zero_mass(v: np.ndarray, w: np.ndarray, zero_mass: np.ndarray, q: float) -> np.ndarray:
    """inf over gamma of sum w|v - gamma|^q + z |gamma|^q, for each z in zero_mass.

    This is the unnormalized q-th power objective for a function equal to v
    on some atoms and to 0 on extra mass z. Repeated z values are computed
    once.
    """
    z_unique, inverse = np.unique(np.asarray(zero_mass, dtype=float), return_inverse=True)
    cands = np.unique(np.append(v, 0.0))
    base = np.sum(w[None, :] * np.abs(v[None, :] - cands[:, None]) ** q, axis=1)
    grid = base[None, :] + z_unique[:, None] * np.abs(cands)[None, :] ** q
    out = grid.min(axis=1)
    if q > 1:
        for t, z in enumerate(z_unique):
            vv = np.append(v, 0.0)
            ww = np.append(w, z)
            g = _convex_shift(vv, ww, q)
            out[t] = min(out[t], float(np.sum(ww * np.abs(vv - g) ** q)))
    return out[inverse]
