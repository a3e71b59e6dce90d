import json
import math

import numpy as np
import pytest

import oracles
from conftest import path3
from hajlasz_lab import corpus
from hajlasz_lab.constructions import bump, construction1
from hajlasz_lab.embeddings import (
    InequalityCase,
    chaining_trace,
    estimate_constant,
    eval_inequality,
    exp_integral,
    holder_constant,
    ratio,
    to_json,
)
from hajlasz_lab.errors import BadParams, EmptyCorpus, NotAGradient, VConditionFails, ZeroGradientNorm
from hajlasz_lab.geometry import lower_mass_constant
from hajlasz_lab.hajlasz import minimal_gradient
from hajlasz_lab.mmspace import Ball


def pair_bound_gradient(space, u):
    # g_i = max_j |u_i - u_j| / d(i, j) always works
    n = space.n
    return np.array([max(abs(u[i] - u[j]) / space.dist[i, j] for j in range(n) if j != i) for i in range(n)])


def test_case_validation():
    with pytest.raises(BadParams):
        InequalityCase("sobolev", 1.0, 1.0)
    with pytest.raises(BadParams):
        InequalityCase("exponential", 1.0, 0.5)
    with pytest.raises(BadParams):
        InequalityCase("holder-global", 1.0, 1.0)
    with pytest.raises(BadParams):
        InequalityCase("nonsense", 1.0, 0.5)
    assert InequalityCase("poincare", 1.0, 0.5).p_star == 1.0


def test_sobolev_sides_by_direct_summation(path):
    u = np.array([0.0, 0.0, 1.0])
    g = pair_bound_gradient(path, u)
    case = InequalityCase("sobolev", 1.0, 0.5, sigma=2.0)
    lhs, core = eval_inequality(path, case, Ball(1, 0.6), u, g)
    w = path.weights
    # B(x2, 0.6) and B(x2, 1.2) are the whole space
    mass = w.sum()
    want_lhs = sum(w[i] * abs(u[i]) for i in range(3)) / mass
    gm = (sum(w[i] * g[i] ** 0.5 for i in range(3)) / mass) ** 2
    um = (sum(w[i] * abs(u[i]) ** 0.5 for i in range(3)) / mass) ** 2
    want_core = (mass / 0.6) ** 2 * (0.6 * gm + um)
    assert lhs == pytest.approx(want_lhs, rel=1e-14)
    assert core == pytest.approx(want_core, rel=1e-14)
    assert 0 < ratio(lhs, core) < math.inf


def test_not_a_gradient(path):
    case = InequalityCase("sobolev", 1.0, 0.5)
    with pytest.raises(NotAGradient):
        eval_inequality(path, case, Ball(1, 0.6), [0, 0, 1], [0, 0, 0])


def test_sobolev_ratio_matches_nested_bump_closed_form():
    space = corpus.grid(1, 33)
    s, p, sigma = 1.0, 0.5, 2.0
    ball = Ball(16, 0.25)
    fam = construction1(space, ball)
    case = InequalityCase("sobolev", s, p, sigma)
    w = space.weights
    d = space.dist[16]
    mS = w[d < sigma * ball.radius].sum()
    mB = w[d < ball.radius].sum()
    for m in fam.members:
        lhs, core = eval_inequality(space, case, ball, m.u, m.g)
        # gradient term: 2^(j+2)/r times mu(B^j)^(1/p), all normalized by mu(sigma B)
        inner = w[d < m.inner.radius].sum()
        gterm = ball.radius * (2.0 ** (m.j + 2) / ball.radius) * (inner / mS) ** (1 / p)
        uterm = (np.sum(w[d < sigma * ball.radius] * m.u[d < sigma * ball.radius] ** p) / mS) ** (1 / p)
        want_core = (mS / ball.radius**s) ** (1 / p) * (gterm + uterm)
        want_lhs = (np.sum(w[d < ball.radius] * m.u[d < ball.radius]) / mB)
        assert core == pytest.approx(want_core, rel=1e-10)
        assert lhs == pytest.approx(want_lhs, rel=1e-10)


def test_estimate_constant_is_max_over_family():
    space = corpus.grid(1, 33)
    case = InequalityCase("sobolev", 1.0, 0.5, 2.0)
    ball = Ball(16, 0.25)
    fam = construction1(space, ball)
    report = estimate_constant(space, case, lambda b: [(m.u, m.g) for m in construction1(space, b).members], [ball])
    want = oracles.sobolev_family_constant(space.dist, space.weights, 16, 0.25, 1.0, 0.5, 2.0, len(fam.members))
    assert report.constant == pytest.approx(want, rel=1e-12)
    assert report.to_csv().splitlines()[0] == "center,radius,best_pair,lhs,rhs_core,ratio"
    json.loads(to_json(report))


def test_empty_corpus(path):
    with pytest.raises(EmptyCorpus):
        estimate_constant(path, InequalityCase("sobolev", 1.0, 0.5), [], [Ball(0, 1.0)])


def test_exp_integral_by_summation(path):
    u = np.array([0.0, 0.0, 1.0])
    g = minimal_gradient(path, u, 1.0).g
    B0 = Ball(1, 0.6)
    got = exp_integral(path, B0, 2.0, 1.0, 1.0, u, g, 1.0)
    norm = sum(path.weights[i] * g[i] for i in range(3))
    mean = 1 / 3
    want = sum(math.exp(abs(u[i] - mean) / norm) for i in range(3)) / 3
    assert got > 0
    assert got == pytest.approx(want, rel=1e-14)


def test_exp_integral_of_constant_is_one(path):
    assert exp_integral(path, Ball(1, 0.6), 2.0, 1.0, 1.0, [2.0, 2.0, 2.0], [1.0, 1.0, 1.0], 1.0) == 1.0
    with pytest.raises(ZeroGradientNorm):
        exp_integral(path, Ball(1, 0.6), 2.0, 1.0, 1.0, [0, 0, 1], [0, 0, 0], 1.0)


def test_holder_constant_on_bump():
    space = corpus.grid(1, 17)
    s, p = 1.0, 2.0
    x, radius = 8, 0.1
    u, g = bump(space, x, 0.0, radius)
    case = InequalityCase("holder-global", s, p)
    C = holder_constant(space, case, u, g)
    norm = math.sqrt(np.sum(space.weights * g**2))
    # every pair obeys |u(x) - u(y)| <= C d^(1 - s/p) ||g||, tightly at the worst pair
    slack = [abs(u[i] - u[j]) / (space.dist[i, j] ** (1 - s / p) * norm)
             for i in range(17) for j in range(17) if i != j]
    assert C == pytest.approx(max(slack), rel=1e-12)
    y = 10  # outside the bump: u(x) - u(y) = 1
    assert 1.0 <= C * space.dist[x, y] ** (1 - s / p) * norm * (1 + 1e-12)


def test_holder_requires_holder_kind(path):
    with pytest.raises(BadParams):
        holder_constant(path, InequalityCase("sobolev", 1.0, 0.5), [0, 0, 1], [1, 1, 1])


# ---- chaining trace


def chain_inputs(center):
    space = corpus.grid(1, 65)
    kappa, _ = lower_mass_constant(space, 1.0, space.min_distance)
    u, g = bump(space, center, 0.0, 1 / 64)
    return space, kappa / 5, u, g


def test_chain_with_steps():
    space, b, u, g = chain_inputs(20)
    cert = chaining_trace(space, Ball(32, 1.0), 5.0, 1.0, 0.9, b, u, g)
    assert cert.verified
    assert cert.k0 == 4 and len(cert.chains) == 1 and len(cert.chains[0].steps) == 3
    names = {c["name"] for c in cert.checks}
    assert {"chebyshev", "ball-meets-lower-level", "step-distance", "telescoping", "lipschitz-on-level-set"} <= names
    oracles.recheck_chain(cert, space)
    json.loads(to_json(cert))


def test_chain_on_small_ball():
    space = corpus.grid(1, 65)
    kappa, _ = lower_mass_constant(space, 1.0, space.min_distance)
    u, g = bump(space, 30, 0.0, 1 / 64)
    cert = chaining_trace(space, Ball(32, 0.25), 2.0, 1.0, 0.5, kappa / 2, u, g)
    assert cert.verified
    oracles.recheck_chain(cert, space)


def test_chain_trivial_when_gradient_vanishes(path):
    cert = chaining_trace(path, Ball(1, 0.6), 2.0, 1.0, 0.5, 0.1, [1, 1, 1], [0, 0, 0])
    assert cert.trivial and cert.verified


def test_chain_rejects_volume_failure(path):
    with pytest.raises(VConditionFails):
        chaining_trace(path, Ball(1, 0.6), 2.0, 1.0, 0.5, 5.0, [0, 0, 1], [1, 1, 1])
    with pytest.raises(BadParams):
        chaining_trace(path, Ball(1, 0.6), 1.0, 1.0, 0.5, 0.1, [0, 0, 1], [1, 1, 1])
