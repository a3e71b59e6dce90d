"""Evaluate embedding inequalities, estimate their constants and trace the chaining argument.

Every evaluator returns the two sides with the unknown constant stripped
from the right, so lhs / rhs_core is exactly the constant a given pair
(u, g) forces on a given ball.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import BadParams, ChainStuck, EmptyCorpus, NotAGradient, VConditionFails, ZeroGradientNorm
from .geometry import v_condition
from .hajlasz import best_constant_shift, is_generalized_gradient
from .mmspace import Ball, MetricMeasureSpace

CHECK_RTOL = 1e-9

LOCAL_KINDS = ("sobolev", "poincare", "sobolev-doubling", "poincare-doubling")
EXP_KINDS = ("exponential", "exponential-doubling")
HOLDER_KINDS = ("holder-global", "holder-local")
GLOBAL_KINDS = ("global-sobolev", "global-poincare")
KINDS = LOCAL_KINDS + EXP_KINDS + HOLDER_KINDS + GLOBAL_KINDS


@dataclass(frozen=True)
class InequalityCase:
    kind: str
    s: float
    p: float
    sigma: float = 2.0
    C1: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadParams(f"unknown inequality kind {self.kind!r}")
        if self.s <= 0 or self.p <= 0 or self.sigma < 1:
            raise BadParams(f"need s > 0, p > 0, sigma >= 1; got s={self.s}, p={self.p}, sigma={self.sigma}")
        if self.kind in LOCAL_KINDS + GLOBAL_KINDS and not self.p < self.s:
            raise BadParams(f"{self.kind} needs p < s")
        if self.kind in EXP_KINDS and self.p != self.s:
            raise BadParams(f"{self.kind} needs p = s")
        if self.kind in HOLDER_KINDS and not self.p > self.s:
            raise BadParams(f"{self.kind} needs p > s")

    @property
    def p_star(self) -> float:
        return self.s * self.p / (self.s - self.p)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "s": self.s, "p": self.p, "sigma": self.sigma, "C1": self.C1, "gamma": self.gamma}


def _avg(space: MetricMeasureSpace, mask: np.ndarray, values: np.ndarray) -> float:
    return float(np.sum(space.weights[mask] * values[mask]) / space.measure(mask))


def _require_gradient(space: MetricMeasureSpace, u, g, mask: np.ndarray) -> None:
    verdict = is_generalized_gradient(space, u, g, mask)
    if not verdict.holds:
        raise NotAGradient(verdict.worst_pair, verdict.slack)


def eval_inequality(space: MetricMeasureSpace, case: InequalityCase, B0: Ball | None, u, g,
                    check_gradient: bool = True) -> tuple[float, float]:
    """Left side and constant-free right side of the inequality named by case.kind on B0."""
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    s, p = case.s, case.p
    if case.kind in GLOBAL_KINDS + ("holder-global",):
        domain = np.ones(space.n, dtype=bool)
    else:
        domain = B0.dilate(case.sigma).mask(space)
    if check_gradient:
        _require_gradient(space, u, g, domain)

    if case.kind in EXP_KINDS:
        value = exp_integral(space, B0, case.sigma, case.C1, case.gamma, u, g, s,
                             doubling=case.kind == "exponential-doubling")
        return value, 1.0
    if case.kind in HOLDER_KINDS:
        return _holder_sides(space, case, u, g, B0)

    if case.kind in GLOBAL_KINDS:
        w = space.weights
        grad = float(np.sum(w * g**p) ** (1 / p))
        if case.kind == "global-sobolev":
            lhs = float(np.sum(w * np.abs(u) ** case.p_star) ** (1 / case.p_star))
            return lhs, grad + float(np.sum(w * np.abs(u) ** p) ** (1 / p))
        shift = best_constant_shift(space, u, case.p_star, None)
        return shift.value * space.total_measure ** (1 / case.p_star), grad

    inner = B0.mask(space)
    R0 = B0.radius
    big = domain
    g_mean = _avg(space, big, g**p) ** (1 / p)
    u_mean = _avg(space, big, np.abs(u) ** p) ** (1 / p)
    if case.kind in ("sobolev", "sobolev-doubling"):
        lhs = _avg(space, inner, np.abs(u) ** case.p_star) ** (1 / case.p_star)
        core = R0 * g_mean + u_mean
    else:
        lhs = best_constant_shift(space, u, case.p_star, inner).value
        core = R0 * g_mean
    if case.kind in ("sobolev", "poincare"):
        core *= (space.measure(big) / R0**s) ** (1 / p)
    return lhs, core


def ratio(lhs: float, core: float) -> float:
    if core > 0:
        return lhs / core
    return math.inf if lhs > 0 else 0.0


def exp_integral(space: MetricMeasureSpace, B0: Ball, sigma: float, C1: float, gamma: float, u, g,
                 s: float, doubling: bool = False) -> float:
    """Mean over B0 of exp((C1 |u - u_B0| / ||g||_{L^s(sigma B0)})^gamma).

    With doubling=True the argument also carries mu(sigma B0)^(1/s) / R0.
    """
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    inner = B0.mask(space)
    big = B0.dilate(sigma).mask(space)
    norm = float(np.sum(space.weights[big] * g[big] ** s) ** (1 / s))
    if norm <= 0:
        raise ZeroGradientNorm()
    scale = C1 / norm
    if doubling:
        scale *= space.measure(big) ** (1 / s) / B0.radius
    # averaging deviations from a sample point keeps a constant u exactly constant
    ref = u[inner][0]
    mean = ref + _avg(space, inner, u - ref)
    with np.errstate(over="ignore"):
        vals = np.exp((scale * np.abs(u - mean)) ** gamma)
    return _avg(space, inner, vals)


def _holder_sides(space: MetricMeasureSpace, case: InequalityCase, u, g, B0: Ball | None) -> tuple[float, float]:
    s, p = case.s, case.p
    if case.kind == "holder-global":
        pts = np.arange(space.n)
        norm = float(np.sum(space.weights * g**p) ** (1 / p))
    else:
        pts = np.flatnonzero(B0.mask(space))
        big = B0.dilate(case.sigma).mask(space)
        norm = B0.radius ** (s / p) * _avg(space, big, g**p) ** (1 / p)
    if len(pts) < 2:
        return 0.0, norm
    ii, jj = np.triu_indices(len(pts), 1)
    a, b = pts[ii], pts[jj]
    lhs = float(np.max(np.abs(u[a] - u[b]) / space.dist[a, b] ** (1 - s / p)))
    return lhs, norm


def holder_constant(space: MetricMeasureSpace, case: InequalityCase, u, g, B0: Ball | None = None) -> float:
    """Smallest C with |u(x) - u(y)| <= C d(x,y)^(1-s/p) times the gradient normalization."""
    if case.kind not in HOLDER_KINDS:
        raise BadParams("holder_constant needs a holder kind")
    lhs, core = _holder_sides(space, case, np.asarray(u, float), np.asarray(g, float), B0)
    if core <= 0:
        if lhs > 0:
            raise ZeroGradientNorm()
        return 0.0
    return lhs / core


# ------------------------------------------------------- constant estimation


@dataclass
class EmbeddingRow:
    ball: Ball
    best_pair: int
    lhs: float
    rhs_core: float
    ratio: float

    def to_dict(self) -> dict[str, Any]:
        return {"ball": self.ball.to_dict(), "best_pair": self.best_pair, "lhs": self.lhs,
                "rhs_core": self.rhs_core, "ratio": self.ratio}


@dataclass
class EmbeddingReport:
    case: InequalityCase
    rows: list[EmbeddingRow]
    constant: float
    witness: EmbeddingRow | None
    bound_kind: str = "lower bound on the universal constant"

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case.to_dict(),
            "constant": self.constant,
            "bound_kind": self.bound_kind,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["center", "radius", "best_pair", "lhs", "rhs_core", "ratio"])
        for r in self.rows:
            out.writerow([r.ball.center, repr(r.ball.radius), r.best_pair, repr(r.lhs), repr(r.rhs_core), repr(r.ratio)])
        return buf.getvalue()


Corpus = Sequence[tuple[np.ndarray, np.ndarray]] | Callable[[Ball], Iterable[tuple[np.ndarray, np.ndarray]]]


def estimate_constant(space: MetricMeasureSpace, case: InequalityCase, corpus: Corpus,
                      balls: Sequence[Ball]) -> EmbeddingReport:
    """Sup of lhs / rhs_core over balls and test pairs; a lower bound for the true constant.

    corpus is either a fixed list of (u, g) pairs or a function producing
    pairs for each ball (for instance a construction family on that ball).
    For exponential kinds the demanded quantity is the integral itself.
    """
    rows = []
    seen_any = False
    for ball in balls:
        pairs = list(corpus(ball) if callable(corpus) else corpus)
        if not pairs:
            continue
        seen_any = True
        best = None
        for t, (u, g) in enumerate(pairs):
            lhs, core = eval_inequality(space, case, ball, u, g)
            rt = ratio(lhs, core)
            if best is None or rt > best.ratio:
                best = EmbeddingRow(ball, t, lhs, core, rt)
        rows.append(best)
    if not seen_any:
        raise EmptyCorpus()
    witness = max(rows, key=lambda r: r.ratio)
    return EmbeddingReport(case, rows, witness.ratio, witness)


# ------------------------------------------------------- chaining trace


@dataclass
class ChainStep:
    level: int  # the step goes from E_level to E_(level-1)
    source: int
    target: int
    radius: float
    distance: float
    ball_mass: float
    hypothesis_rhs: float  # 2 mu(sigma B0 minus E_(level-1))
    intersection_mass: float
    lipschitz_ok: bool

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class Chain:
    start: int
    start_level: int
    steps: list[ChainStep]
    telescoped: float  # sum of |u| increments plus |u(end) - gamma|
    bound: float  # the geometric-series bound
    value: float  # |u(start) - gamma|

    def to_dict(self) -> dict[str, Any]:
        return {"start": self.start, "start_level": self.start_level, "telescoped": self.telescoped,
                "bound": self.bound, "value": self.value, "steps": [s.to_dict() for s in self.steps]}


@dataclass
class ChainCertificate:
    inputs: dict[str, Any]
    trivial: bool
    shifted_g: np.ndarray | None = None
    levels: dict[int, list[int]] = field(default_factory=dict)
    k0: int | None = None
    gamma: float | None = None
    chains: list[Chain] = field(default_factory=list)
    checks: list[dict[str, Any]] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "inputs": self.inputs,
            "trivial": self.trivial,
            "shifted_g": None if self.shifted_g is None else self.shifted_g.tolist(),
            "levels": {str(k): v for k, v in self.levels.items()},
            "k0": self.k0,
            "gamma": self.gamma,
            "chains": [c.to_dict() for c in self.chains],
            "checks": self.checks,
            "verified": self.verified,
        }


def _leq(a: float, b: float) -> bool:
    return a <= b + CHECK_RTOL * max(1.0, abs(b))


def chaining_trace(space: MetricMeasureSpace, B0: Ball, sigma: float, s: float, p: float, b: float,
                   u, g, gamma: float | None = None) -> ChainCertificate:
    """Run the level-set chaining argument on concrete data and log every inequality it uses.

    g is first replaced by g + (mean over sigma B0 of g^p)^(1/p). Points of
    B0 whose level exceeds k0 are walked down to E_k0 through balls of
    geometrically shrinking radius; each step, Lipschitz bound and the final
    telescoped estimate is recorded with a pass flag. gamma defaults to u at
    the heaviest point of E_k0.
    """
    if sigma <= 1:
        raise BadParams("the chaining argument needs sigma > 1")
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    w = space.weights
    big = B0.dilate(sigma).mask(space)
    inner = B0.mask(space)
    inputs = {"B0": B0.to_dict(), "sigma": sigma, "s": s, "p": p, "b": b,
              "u": u.tolist(), "g": g.tolist(), "gamma": gamma}
    checks: list[dict[str, Any]] = []

    def check(name: str, ok: bool, **detail):
        checks.append({"name": name, "ok": bool(ok), **detail})

    verdict = v_condition(space, B0, sigma, s, b)
    if not verdict.holds:
        wb = verdict.witness
        raise VConditionFails(wb.center, wb.radius, verdict.worst_ratio, b)
    check("volume-condition", True, worst_ratio=verdict.worst_ratio)

    _require_gradient(space, u, g, big)
    integral = float(np.sum(w[big] * g[big] ** p))
    if integral == 0:
        spread = float(np.ptp(u[big]))
        check("constant-when-gradient-vanishes", spread == 0, spread=spread)
        return ChainCertificate(inputs, True, g.copy(), {}, None, float(u[big][0]), [], checks)

    mass_big = space.measure(big)
    shift = (integral / mass_big) ** (1 / p)
    gt = g + shift
    gt_int = float(np.sum(w[big] * gt[big] ** p))
    floor = 2 ** -(1 + 1 / p) * (gt_int / mass_big) ** (1 / p)
    check("shifted-gradient-floor", bool(np.all(gt[big] >= floor)), floor=floor, minimum=float(gt[big].min()))

    gvals = gt[big]
    lo = math.floor(math.log2(gvals.min())) - 1
    hi = math.ceil(math.log2(gvals.max())) + 1

    def level_set(j: int) -> np.ndarray:
        return big & (gt <= 2.0**j)

    def complement_mass(j: int) -> float:
        return space.measure(big & ~(gt <= 2.0**j))

    target = ((2 ** (1 / s) / ((1 - 2 ** (-p / s)) * (sigma - 1))) ** (s / p)
              * (b * B0.radius**s) ** (-1 / p) * gt_int ** (1 / p))
    k0 = math.ceil(math.log2(target))
    while 2.0 ** (k0 - 1) >= target:
        k0 -= 1
    while 2.0**k0 < target:
        k0 += 1
    check("k0-least", 2.0**k0 >= target and 2.0 ** (k0 - 1) < target, k0=k0, target=target)
    lo = min(lo, k0)
    hi = max(hi, k0)
    levels = {j: np.flatnonzero(level_set(j)).tolist() for j in range(lo, hi + 1)}

    for j in range(lo, hi + 1):
        lhs = complement_mass(j)
        rhs = 2.0 ** (-j * p) * gt_int
        check("chebyshev", _leq(lhs, rhs), level=j, lhs=lhs, rhs=rhs)

    # level-set decomposition: sum over shells of 2^(jp) mu(shell) sits in [integral, 2^p integral]
    shell_sum = 0.0
    for j in range(lo + 1, hi + 1):
        shell = level_set(j) & ~level_set(j - 1)
        shell_sum += 2.0 ** (j * p) * space.measure(shell)
    check("level-decomposition", _leq(gt_int, shell_sum) and _leq(shell_sum, 2**p * gt_int),
          integral=gt_int, shell_sum=shell_sum)

    E0 = level_set(k0)
    check("half-mass-at-k0", _leq(mass_big / 2, space.measure(E0)), mass=space.measure(E0), half=mass_big / 2)
    if not E0.any():
        raise ChainStuck(k0, int(B0.center), 0.0)
    members = np.flatnonzero(E0)
    y = int(members[np.argmax(w[members] - 1e-15 * members)])
    if gamma is None:
        gamma = float(u[y])
    end_sup = float(np.max(np.abs(u[E0] - gamma)))

    factor = 2 ** (1 / s) * b ** (-1 / s) * gt_int ** (1 / s)

    def radius(level: int) -> float:
        # radius of the ball searched when stepping from E_level down to E_(level-1)
        return factor * 2.0 ** (-(level - 1) * p / s)

    total = sum(radius(k0 + 1 + i) for i in range(0, 200))
    check("radii-fit", _leq(total, (sigma - 1) * B0.radius), total=total, room=(sigma - 1) * B0.radius)

    chains = []
    starts = np.flatnonzero(inner & ~E0)
    for x in starts:
        k = int(math.ceil(math.log2(gt[x])))
        while gt[x] > 2.0**k:
            k += 1
        while k - 1 > k0 and gt[x] <= 2.0 ** (k - 1):
            k -= 1
        steps = []
        cur = int(x)
        for level in range(k, k0, -1):
            rad = radius(level)
            ball = space.open_mask(cur, rad)
            inside = bool(np.all(big[ball]))
            check("step-ball-inside", inside, point=cur, radius=rad)
            lower = level_set(level - 1)
            ball_mass = space.measure(ball)
            hyp_rhs = 2 * complement_mass(level - 1)
            hyp = _leq(hyp_rhs, ball_mass)
            cand = np.flatnonzero(ball & lower)
            inter = space.measure(ball & lower)
            check("ball-meets-lower-level", hyp and _leq(ball_mass / 2, inter) and inter > 0,
                  point=cur, level=level - 1, ball_mass=ball_mass, hypothesis_rhs=hyp_rhs, intersection=inter)
            if len(cand) == 0:
                raise ChainStuck(level - 1, cur, rad)
            nxt = int(cand[np.argmax(w[cand] - 1e-15 * cand)])
            dist = float(space.dist[cur, nxt])
            lip = abs(u[cur] - u[nxt]) <= 2.0 ** (level + 1) * dist * (1 + CHECK_RTOL) + 1e-300
            check("step-distance", dist < rad, point=cur, next=nxt, distance=dist, radius=rad)
            check("lipschitz-on-level-set", lip, level=level, point=cur, next=nxt)
            steps.append(ChainStep(level, cur, nxt, rad, dist, ball_mass, hyp_rhs, inter, bool(lip)))
            cur = nxt
        increments = sum(abs(u[st.source] - u[st.target]) for st in steps)
        telescoped = increments + abs(u[cur] - gamma)
        value = abs(u[x] - gamma)
        series = 4 * factor * sum(2.0 ** (j * (1 - p / s)) for j in range(k0, k))
        bound = series + end_sup
        check("telescoping", _leq(value, telescoped) and _leq(telescoped, bound),
              start=int(x), value=value, telescoped=telescoped, bound=bound)
        chains.append(Chain(int(x), k, steps, telescoped, bound, value))

    for k in range(k0 + 1, hi + 1):
        sel = inner & level_set(k)
        a_k = float(np.max(np.abs(u[sel] - gamma))) if sel.any() else 0.0
        bound = 4 * factor * sum(2.0 ** (j * (1 - p / s)) for j in range(k0, k)) + end_sup
        check("level-sup-bound", _leq(a_k, bound), level=k, a_k=a_k, bound=bound)

    return ChainCertificate(inputs, False, gt, levels, k0, gamma, chains, checks)


def to_json(obj: Any) -> str:
    payload = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default)


def _json_default(o: Any):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")
