"""Turn measured embedding constants into certified lower mass bounds.

For each candidate ball the pipeline builds the explicit test family, reads
off the constant that family forces on that ball, converts it with the
closed-form kappa formula and checks the resulting mass bound. On a finite
space each check is an exact consequence of the reverse-direction argument,
so a single failure means a bug.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .constructions import (
    DEFAULT_J_MAX,
    ConstructionFamily,
    bump,
    construction1,
    construction2,
)
from .errors import (
    BadBeta,
    BadExponents,
    BadParams,
    ConstructionImpossible,
    InclusionFailure,
    LambdaOutOfRange,
    MissingConstant,
    VerificationFailed,
)
from .geometry import auto_resolution, fat_ball, phi, radius_candidates, uniform_perfectness
from .hajlasz import shift_from_samples, shift_with_zero_mass
from .mmspace import Ball, MetricMeasureSpace

log = logging.getLogger(__name__)

VERIFY_RTOL = 1e-9
CASES = ("thm4.1-b", "thm4.1-c", "thm4.4-b", "thm4.4-c", "thm5.1", "thm5.4", "thm6.1", "thm6.2")
ABSOLUTE_CASES = ("thm4.1-b", "thm4.1-c", "thm5.1", "thm6.1")
RELATIVE_CASES = ("thm4.4-b", "thm4.4-c", "thm5.4", "thm6.2")
NEEDS_LAMBDA = ("thm4.1-c", "thm4.4-c", "thm5.1", "thm5.4", "thm6.1", "thm6.2")


# ------------------------------------------------------------ iteration inequality


@dataclass(frozen=True)
class IterationInstance:
    """A finite prefix a_1..a_m of a sequence, continued by the constant a_m."""

    a_seq: tuple[float, ...]
    a: float
    b: float
    p: float
    q: float
    rho: float
    tau: float


@dataclass(frozen=True)
class IterationVerdict:
    hypothesis: bool
    conclusion: bool
    lower_bound: float  # smallest a_1 compatible with the conclusion
    failing_index: int | None  # first j where a_(j+1)^(1/q) <= rho tau^j a_j^(1/p) fails


def iteration_check(inst: IterationInstance) -> IterationVerdict:
    """Check the recursive hypothesis and the closed-form conclusion on one instance.

    The hypothesis is read on the infinite sequence obtained by repeating
    the last term, so it also requires the tail step at j = m; with
    tau >= 1 that single step covers every later j, and with tau < 1 the
    tail eventually fails.
    """
    p, q, rho, tau = inst.p, inst.q, inst.rho, inst.tau
    if not 0 < p < q:
        raise BadExponents(p, q)
    seq = np.asarray(inst.a_seq, dtype=float)
    if len(seq) == 0 or rho <= 0 or tau <= 0:
        raise BadParams("need a nonempty sequence and positive rho, tau")
    failing = None
    if not np.all((seq >= inst.a) & (seq <= inst.b)):
        failing = int(np.flatnonzero((seq < inst.a) | (seq > inst.b))[0]) + 1
    j = np.arange(1, len(seq), dtype=float)
    lhs = seq[1:] ** (1 / q)
    rhs = rho * tau**j * seq[:-1] ** (1 / p)
    bad = np.flatnonzero(lhs > rhs)
    if failing is None and len(bad):
        failing = int(bad[0]) + 1
    last = seq[-1]
    tail_ok = tau >= 1 and last ** (1 / q) <= rho * tau ** len(seq) * last ** (1 / p)
    if failing is None and not tail_ok:
        failing = len(seq)
    # logs keep extreme exponents q / (q - p) from overflowing
    log_strength = p * math.log(rho) + p * q / (q - p) * math.log(tau)
    conclusion = (1 - p / q) * math.log(seq[0]) + log_strength >= 0
    log_bound = -q / (q - p) * log_strength
    lower_bound = math.exp(log_bound) if log_bound < 709 else math.inf
    return IterationVerdict(failing is None, bool(conclusion), lower_bound, failing)


# ------------------------------------------------------------ kappa formulas


def _need(constants: Mapping[str, float], *names: str) -> list[float]:
    out = []
    for name in names:
        val = constants.get(name)
        if val is None or not val > 0 or not math.isfinite(val):
            raise MissingConstant(name)
        out.append(float(val))
    return out


def _lam(constants: Mapping[str, float]) -> float:
    (lam,) = _need(constants, "lambda")
    if not lam < 0.2:
        raise LambdaOutOfRange(lam)
    return lam


def extract_kappa(case: str, constants: Mapping[str, float]) -> float:
    """Lower mass constant implied by a measured embedding constant (absolute form)."""
    if case == "thm4.1-b":
        C, s, p = _need(constants, "C_S", "s", "p")
        return 2**-s * (8 * C) ** -p
    if case == "thm4.1-c":
        C, s, p = _need(constants, "C_P", "s", "p")
        lam = _lam(constants)
        return 2**-s * (24 * C * lam**-2) ** -p * lam**s
    if case == "thm5.1":
        C1, C2, s, g = _need(constants, "C1", "C2", "s", "gamma")
        lam = _lam(constants)
        return C1**s * lam ** (2 * s) / (96**s * (2 * s / g) ** (s / g) * math.sqrt(C2))
    if case == "thm6.1":
        C, p = _need(constants, "C_H", "p")
        lam = _lam(constants)
        return (lam / C) ** p
    raise BadParams(f"{case!r} has no absolute kappa formula")


def extract_relative_kappa(case: str, constants: Mapping[str, float]) -> tuple[float, float]:
    """(kappa, exponent) for the nested-ball form mu(B)/mu(B0) >= kappa (r/R)^exponent."""
    if case == "thm4.4-b":
        C, s, p = _need(constants, "C_S", "s", "p")
        return (8 * C) ** -s * 2 ** (-(s**2) / p), s
    if case == "thm4.4-c":
        C, s, p = _need(constants, "C_P", "s", "p")
        lam = _lam(constants)
        return (lam**2 / (24 * C)) ** s * 2 ** (-(s**2) / p), s
    if case == "thm5.4":
        C1, C2, s, g = _need(constants, "C1", "C2", "s", "gamma")
        beta = constants.get("beta")
        if beta is None:
            raise MissingConstant("beta")
        if not beta > 1:
            raise BadBeta(beta)
        lam = _lam(constants)
        base = C1 * lam**2 / (24 * (beta * s / g) ** (1 / g) * C2 ** (1 / (beta * s)))
        return base**s * 2 ** (-(beta**2) * s / (beta - 1) ** 2), beta * s / (beta - 1)
    if case == "thm6.2":
        C, s, p = _need(constants, "C_H", "s", "p")
        lam = _lam(constants)
        return (lam / C) ** p, s
    raise BadParams(f"{case!r} has no relative kappa formula")


# ------------------------------------------------------------ pipelines


@dataclass(frozen=True)
class PipelineParams:
    s: float
    p: float | None = None  # default: s/2 for the p < s cases, s for exponential, 2s for Holder
    sigma: float = 2.0
    resolution: float | None = None
    C1: float = 1.0
    gamma: float = 1.0
    beta: float = 2.0
    j_max: int = DEFAULT_J_MAX
    lam: float | None = None  # override for the effective uniform-perfectness constant

    def exponent_for(self, case: str) -> float:
        if self.p is not None:
            return self.p
        if case.startswith("thm5"):
            return self.s
        if case.startswith("thm6"):
            return 2 * self.s
        return self.s / 2

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class ExtractionReport:
    case: str
    inputs: dict[str, Any]
    rows: list[dict[str, Any]]
    skipped: list[dict[str, Any]]
    constant_global: float  # sup of the per-ball measured constants
    kappa_global: float  # kappa formula evaluated at that sup
    exponent: float
    verdict: bool
    notes: list[str] = field(default_factory=list)

    @property
    def failures(self) -> list[dict[str, Any]]:
        return [r for r in self.rows if not r["verdict"]]

    @property
    def skip_fraction(self) -> float:
        total = len(self.rows) + len(self.skipped)
        return len(self.skipped) / total if total else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "case": self.case,
            "inputs": self.inputs,
            "constant_global": self.constant_global,
            "kappa_global": self.kappa_global,
            "exponent": self.exponent,
            "verdict": "PASS" if self.verdict else "FAIL",
            "checked": len(self.rows),
            "skipped_count": len(self.skipped),
            "skip_fraction": self.skip_fraction,
            "notes": self.notes,
            "rows": self.rows,
            "skipped": self.skipped,
        }

    def to_csv(self) -> str:
        cols = ["center", "radius", "mass", "constant", "kappa", "factor", "bound", "margin", "path", "verdict",
                "outer_center", "outer_radius", "outer_mass"]
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(cols)
        for r in self.rows:
            out.writerow([_csv_cell(r.get(c)) for c in cols])
        return buf.getvalue()


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "PASS" if v else "FAIL"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def candidate_balls(space: MetricMeasureSpace, resolution: float) -> list[Ball]:
    """Every centre with every critical radius in [resolution, diam], plus diam itself."""
    balls = []
    for x in range(space.n):
        for r in radius_candidates(space, x, resolution, space.diameter):
            balls.append(Ball(x, float(r)))
    return balls


@dataclass
class _Family:
    """Dense view of a construction family: one row per index j."""

    U: np.ndarray
    G: np.ndarray
    inner_masses: np.ndarray  # mu(B^j) for the listed j

    @classmethod
    def of(cls, fam: ConstructionFamily) -> "_Family":
        U = np.array([m.u for m in fam.members])
        G = np.array([m.g for m in fam.members])
        return cls(U, G, np.array(fam.inner_masses[: len(fam.members)]))


def _c1_sobolev_constant(space, ball: Ball, s, p, sigma, j_max) -> float:
    fam = _Family.of(construction1(space, ball, j_max))
    w = space.weights
    q = s * p / (s - p)
    inside = ball.mask(space)
    big = ball.dilate(sigma).mask(space)
    mB, mS, r = space.measure(inside), space.measure(big), ball.radius
    lhs = (np.sum(w * inside * np.abs(fam.U) ** q, axis=1) / mB) ** (1 / q)
    gmean = (np.sum(w * big * fam.G**p, axis=1) / mS) ** (1 / p)
    umean = (np.sum(w * big * np.abs(fam.U) ** p, axis=1) / mS) ** (1 / p)
    rhs = (mS / r**s) ** (1 / p) * (r * gmean + umean)
    return float(np.max(lhs / rhs))


def _c2_poincare_constant(space, ball: Ball, s, p, sigma, lam, j_max) -> float:
    fam = _Family.of(construction2(space, ball, lam, j_max))
    w = space.weights
    q = s * p / (s - p)
    inside = ball.mask(space)
    big = ball.dilate(sigma).mask(space)
    mS, r = space.measure(big), ball.radius
    lhs = np.array([shift_from_samples(u[inside], w[inside], q).value for u in fam.U])
    gmean = (np.sum(w * big * fam.G**p, axis=1) / mS) ** (1 / p)
    rhs = (mS / r**s) ** (1 / p) * r * gmean
    return float(np.max(lhs / rhs))


def _c2_exponential_constant(space, ball: Ball, s, sigma, lam, C1, gamma, j_max) -> float:
    fam = _Family.of(construction2(space, ball, lam, j_max))
    w = space.weights
    inside = ball.mask(space)
    big = ball.dilate(sigma).mask(space)
    mB = space.measure(inside)
    norms = np.sum(w * big * fam.G**s, axis=1) ** (1 / s)
    means = np.sum(w * inside * fam.U, axis=1) / mB
    with np.errstate(over="ignore"):
        vals = np.exp((C1 * np.abs(fam.U - means[:, None]) / norms[:, None]) ** gamma)
    integrals = np.sum(w * inside * vals, axis=1) / mB
    return float(np.max(integrals))


class _Skip(Exception):
    pass


def _good_or_fat(space: MetricMeasureSpace, ball: Ball, lam: float) -> tuple[Ball, str, dict[str, Any]]:
    """The ball on which to run the c2 family, and whether it is the ball itself or a fat sub-ball."""
    f = phi(space, ball.center, ball.radius)
    if ball.radius <= 3 * f / lam**2:
        return ball, "direct", {"phi": f}
    try:
        fb = fat_ball(space, ball.center, ball.radius, lam)
    except (ConstructionImpossible, InclusionFailure) as exc:
        raise _Skip(f"fat ball unavailable: {exc}") from exc
    ft = phi(space, fb.center, fb.radius)
    if fb.radius > 3 * ft / lam**2:
        raise _Skip(f"fat ball B({fb.center},{fb.radius}) fails its own radius condition")
    if not fb.radius > lam * ball.radius:
        raise _Skip(f"fat ball radius {fb.radius} not above lambda*r")
    return fb.ball, "fat-ball", {"phi": f, "fat_center": fb.center, "fat_radius": fb.radius}


def _row(ball: Ball, mass: float, constant: float, kappa: float, factor: float, bound: float,
         path: str, extra: dict[str, Any] | None = None) -> dict[str, Any]:
    margin = mass / bound if bound > 0 else math.inf
    row = {
        "center": ball.center,
        "radius": ball.radius,
        "mass": mass,
        "constant": constant,
        "kappa": kappa,
        "factor": factor,
        "bound": bound,
        "margin": margin,
        "path": path,
        "verdict": bool(mass >= bound * (1 - VERIFY_RTOL)),
    }
    if extra:
        row.update(extra)
    return row


def _resolve_lambda(space, case, params, res) -> tuple[float | None, float | None]:
    if case not in NEEDS_LAMBDA:
        return None, None
    perf = uniform_perfectness(space, res)
    if params.lam is not None:
        if not 0 < params.lam < 0.2:
            raise LambdaOutOfRange(params.lam)
        return perf.lam, params.lam
    if perf.lam_eff is None:
        raise BadParams(f"space is not uniformly perfect at resolution {res}")
    return perf.lam, perf.lam_eff


def pipeline_verify(space: MetricMeasureSpace, case: str, params: PipelineParams,
                    strict: bool = True) -> ExtractionReport:
    """Run one reverse-direction case on every candidate ball.

    With strict=True a failing ball raises VerificationFailed carrying the
    full report and the first failing row.
    """
    if case not in CASES:
        raise BadParams(f"unknown case {case!r}; expected one of {', '.join(CASES)}")
    s, p, sigma = params.s, params.exponent_for(case), params.sigma
    if s <= 0 or p <= 0 or sigma < 1:
        raise BadParams("need s > 0, p > 0 and sigma >= 1")
    if case in ("thm4.1-b", "thm4.1-c", "thm4.4-b", "thm4.4-c") and not p < s:
        raise BadParams(f"{case} needs p < s")
    if case.startswith("thm6") and not p > s:
        raise BadParams(f"{case} needs p > s")
    if case == "thm5.4" and not params.beta > 1:
        raise BadBeta(params.beta)
    res = auto_resolution(space) if params.resolution is None else params.resolution
    if not 0 < res <= space.diameter:
        raise BadParams(f"resolution {res} outside (0, diam]")
    lam_measured, lam = _resolve_lambda(space, case, params, res)
    balls = candidate_balls(space, res)
    inputs = {"params": params.to_dict(), "p_used": p, "resolution": res, "lambda": lam_measured,
              "lambda_eff": lam, "space": space.name, "ball_count": len(balls)}

    if case in ABSOLUTE_CASES:
        rows, skipped, consts, factors = _absolute(space, case, balls, s, p, sigma, lam, params)
    else:
        rows, skipped, consts, factors = _relative(space, case, balls, s, p, sigma, lam, params)

    constants = {"s": s, "p": p, "lambda": lam, "C1": params.C1, "gamma": params.gamma, "beta": params.beta}
    exponent = s
    if consts:
        top = max(consts)
        name = _constant_name(case)
        if case in ABSOLUTE_CASES:
            kappa_global = extract_kappa(case, {**constants, name: top}) if math.isfinite(top) else 0.0
        else:
            kappa_global, exponent = (extract_relative_kappa(case, {**constants, name: top})
                                      if math.isfinite(top) else (0.0, _relative_exponent(case, s, params.beta)))
        kappa_global *= min(factors)
    else:
        top, kappa_global = 0.0, 0.0
        if case in RELATIVE_CASES:
            exponent = _relative_exponent(case, s, params.beta)
    rows.sort(key=lambda r: (r["center"], r["radius"]))
    skipped.sort(key=lambda r: (r["center"], r["radius"]))
    for sk in skipped:
        log.info("skipped %s ball B(%d, %g): %s", case, sk["center"], sk["radius"], sk["reason"])
    report = ExtractionReport(case, inputs, rows, skipped, float(top), float(kappa_global), float(exponent),
                              all(r["verdict"] for r in rows))
    if case == "thm5.4":
        report.notes.append("kappa uses the closed-form display with exponent s on the bracket")
    if strict and not report.verdict:
        first = report.failures[0]
        err = VerificationFailed(f"{case}: mass bound fails at B({first['center']}, {first['radius']})", first)
        err.report = report
        raise err
    return report


def _constant_name(case: str) -> str:
    return {"thm4.1-b": "C_S", "thm4.4-b": "C_S", "thm4.1-c": "C_P", "thm4.4-c": "C_P",
            "thm5.1": "C2", "thm5.4": "C2", "thm6.1": "C_H", "thm6.2": "C_H"}[case]


def _relative_exponent(case: str, s: float, beta: float) -> float:
    return beta * s / (beta - 1) if case == "thm5.4" else s


def _absolute(space, case, balls, s, p, sigma, lam, params):
    rows, skipped, consts, factors = [], [], [], []
    total = space.total_measure
    consts_base = {"s": s, "p": p, "lambda": lam, "C1": params.C1, "gamma": params.gamma}
    for ball in balls:
        mass = float(space.open_mass(ball.center, ball.radius))
        extra: dict[str, Any] = {}
        path, factor = "direct", 1.0
        try:
            if case == "thm4.1-b":
                C = _c1_sobolev_constant(space, ball, s, p, sigma, params.j_max)
                kappa = extract_kappa(case, {**consts_base, "C_S": C})
            elif case == "thm4.1-c":
                target, path, extra = _good_or_fat(space, ball, lam)
                C = _c2_poincare_constant(space, target, s, p, sigma, lam, params.j_max)
                kappa = extract_kappa(case, {**consts_base, "C_P": C})
            elif case == "thm5.1":
                target, path, extra = _good_or_fat(space, ball, lam)
                C = max(1.0, _c2_exponential_constant(space, target, s, sigma, lam, params.C1, params.gamma,
                                                      params.j_max))
                kappa = extract_kappa(case, {**consts_base, "C2": C}) if math.isfinite(C) else 0.0
                if path == "fat-ball":
                    factor = lam**s
            else:  # thm6.1
                C, extra = _holder_ball_constant(space, ball, s, p, lam, total, mass)
                kappa = extract_kappa(case, {**consts_base, "C_H": C})
        except _Skip as exc:
            skipped.append({"center": ball.center, "radius": ball.radius, "reason": str(exc)})
            continue
        except ConstructionImpossible as exc:
            skipped.append({"center": ball.center, "radius": ball.radius, "reason": str(exc)})
            continue
        consts.append(C)
        factors.append(factor)
        bound = kappa * factor * ball.radius**s
        rows.append(_row(ball, mass, C, kappa, factor, bound, path, extra))
    return rows, skipped, consts, factors


def _holder_ball_constant(space, ball: Ball, s, p, lam, total, mass) -> tuple[float, dict[str, Any]]:
    if mass >= total:
        raise _Skip("ball is the whole space")
    d = space.dist[ball.center]
    inner = lam * ball.radius
    if not np.any((d >= inner) & (d < ball.radius)):
        raise _Skip("annulus B(x,r) minus B(x,lambda r) is empty")
    u, g = bump(space, ball.center, 0.0, inner)
    norm = float(np.sum(space.weights * g**p) ** (1 / p))
    support = np.flatnonzero(u > 0)
    diff = np.abs(u[support][:, None] - u[None, :])
    dd = space.dist[support]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(dd > 0, diff / dd ** (1 - s / p), 0.0)
    return float(q.max() / norm), {}


# ------------------------------------------------------------ nested-ball cases


@dataclass
class _Outer:
    """All candidate outer balls B(y, R) with R a critical radius of y or the diameter."""

    y: np.ndarray
    R: np.ndarray
    mass: np.ndarray
    big_mass: np.ndarray
    count: np.ndarray  # number of points strictly inside

    @classmethod
    def build(cls, space: MetricMeasureSpace, sigma: float) -> "_Outer":
        ys, Rs = [], []
        for y in range(space.n):
            radii = np.unique(np.append(space.distinct_distances[y], space.diameter))
            ys.append(np.full(len(radii), y))
            Rs.append(radii)
        y = np.concatenate(ys)
        R = np.concatenate(Rs)
        mass = np.array([space.open_mass(a, b) for a, b in zip(y, R)], dtype=float)
        big = np.array([space.open_mass(a, sigma * b) for a, b in zip(y, R)], dtype=float)
        ds = space._sorted[0]
        count = np.array([np.searchsorted(ds[a], b, side="left") for a, b in zip(y, R)])
        return cls(y, R, mass, big, count)


def _relative(space, case, balls, s, p, sigma, lam, params):
    outer = _Outer.build(space, sigma)
    w = space.weights
    total = space.total_measure
    rows, skipped, consts, factors = [], [], [], []
    order = space._sorted[1]
    base = {"s": s, "p": p, "lambda": lam, "C1": params.C1, "gamma": params.gamma, "beta": params.beta}
    exponent = _relative_exponent(case, s, params.beta)
    for ball in balls:
        members = ball.mask(space)
        mass = space.measure(members)
        reach = space.dist[:, members].max(axis=1)
        sel = np.flatnonzero((reach[outer.y] < outer.R) & (outer.R >= ball.radius))
        mB0, mS0, R = outer.mass[sel], outer.big_mass[sel], outer.R[sel]
        path, extra, factor = "direct", {}, 1.0
        try:
            if case == "thm4.4-b":
                fam = _Family.of(construction1(space, ball, params.j_max))
                q = s * p / (s - p)
                # the family lives inside B, hence inside B0 and sigma B0
                S = np.sum(w * np.abs(fam.U) ** q, axis=1)
                gint = np.sum(w * fam.G**p, axis=1)
                uint = np.sum(w * np.abs(fam.U) ** p, axis=1)
                lhs = (S[:, None] / mB0[None, :]) ** (1 / q)
                rhs = R[None, :] * (gint[:, None] / mS0[None, :]) ** (1 / p) + (uint[:, None] / mS0[None, :]) ** (1 / p)
                C = np.max(lhs / rhs, axis=0)
                kappa = (8 * C) ** -s * 2 ** (-(s**2) / p)
            elif case == "thm4.4-c":
                target, path, extra = _good_or_fat(space, ball, lam)
                fam = _Family.of(construction2(space, target, lam, params.j_max))
                q = s * p / (s - p)
                ratios = []
                for u, gj, inner_mass in zip(fam.U, fam.G, fam.inner_masses):
                    sup = u > 0
                    best = shift_with_zero_mass(u[sup], w[sup], mB0 - inner_mass, q)
                    lhs = (best / mB0) ** (1 / q)
                    rhs = R * (np.sum(w * gj**p) / mS0) ** (1 / p)
                    ratios.append(lhs / rhs)
                C = np.max(np.array(ratios), axis=0)
                kappa = (lam**2 / (24 * C)) ** s * 2 ** (-(s**2) / p)
                if path == "fat-ball":
                    factor = lam**s
            elif case == "thm5.4":
                target, path, extra = _good_or_fat(space, ball, lam)
                fam = _Family.of(construction2(space, target, lam, params.j_max))
                C = np.ones(len(sel))
                with np.errstate(over="ignore", invalid="ignore"):
                    for u, gj, inner_mass in zip(fam.U, fam.G, fam.inner_masses):
                        sup = u > 0
                        v, ww = u[sup], w[sup]
                        mean = np.sum(ww * v) / mB0
                        norm = np.sum(w * gj**s) ** (1 / s)
                        K = params.C1 * mS0 ** (1 / s) / (R * norm)
                        inside = np.sum(ww[None, :] * np.exp((K[:, None] * np.abs(v[None, :] - mean[:, None])) ** params.gamma), axis=1)
                        rest = (mB0 - inner_mass) * np.exp((K * mean) ** params.gamma)
                        C = np.maximum(C, (inside + rest) / mB0)
                kappa = np.array([extract_relative_kappa(case, {**base, "C2": c})[0] if math.isfinite(c) else 0.0
                                  for c in C])
                if path == "fat-ball":
                    factor = lam**exponent
            else:  # thm6.2
                if mass >= total:
                    raise _Skip("ball is the whole space")
                d = space.dist[ball.center]
                inner = lam * ball.radius
                if not np.any((d >= inner) & (d < ball.radius)):
                    raise _Skip("annulus B(x,r) minus B(x,lambda r) is empty")
                u, g = bump(space, ball.center, 0.0, inner)
                support = np.flatnonzero(u > 0)
                dd = space.dist[support]
                with np.errstate(divide="ignore", invalid="ignore"):
                    q = np.where(dd > 0, np.abs(u[support][:, None] - u[None, :]) / dd ** (1 - s / p), 0.0)
                colmax = q.max(axis=0)
                running = np.maximum.accumulate(colmax[order], axis=1)
                N = running[outer.y[sel], outer.count[sel] - 1]
                gint = np.sum(w * g**p)
                norm = R ** (s / p) * (gint / mS0) ** (1 / p)
                C = N / norm
                kappa = (lam / C) ** p
        except (_Skip, ConstructionImpossible) as exc:
            skipped.append({"center": ball.center, "radius": ball.radius, "reason": str(exc)})
            continue
        C = np.asarray(C, dtype=float)
        kappa = np.asarray(kappa, dtype=float)
        bound = kappa * factor * (ball.radius / R) ** exponent
        with np.errstate(divide="ignore"):
            margin = np.where(bound > 0, (mass / mB0) / bound, np.inf)
        k = int(np.argmin(margin))
        consts.append(float(np.max(C)))
        factors.append(factor)
        row = _row(ball, mass, float(C[k]), float(kappa[k]), factor, float(bound[k] * mB0[k]), path, extra)
        row.update({"outer_center": int(outer.y[sel][k]), "outer_radius": float(R[k]),
                    "outer_mass": float(mB0[k]), "outer_count": int(len(sel))})
        rows.append(row)
    return rows, skipped, consts, factors
