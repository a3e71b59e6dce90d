import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import path3, planar_spaces, two_point
from hajlasz_lab import corpus
from hajlasz_lab.errors import EmptyAnnulus, LambdaOutOfRange, PreconditionRadius
from hajlasz_lab.geometry import (
    LAMBDA_CAP,
    analyze,
    doubling_constant,
    fat_ball,
    lower_mass_constant,
    phi,
    phi_iterates,
    phi_properties,
    relative_lower_bound,
    uniform_perfectness,
    v_condition,
)
from hajlasz_lab.mmspace import Ball, validate_space


def test_phi_examples(path, pair):
    assert phi(pair, 0, 1.0) == 0.0
    assert phi(path, 0, 1.0) == 0.5
    assert phi(path, 1, 0.0) == 0.0


def test_phi_iterates(path, pair):
    assert phi_iterates(path, 0, 1.0, 2) == [1.0, 0.5, 0.0]
    assert phi_iterates(pair, 0, 1.0, 3) == [1.0, 0.0, 0.0, 0.0]
    assert phi_iterates(path, 0, 0.0, 3) == [0.0] * 4


def test_uniform_perfectness_examples(pair):
    assert uniform_perfectness(pair, 1.0).lam is None
    grid = uniform_perfectness(corpus.grid(1, 65), 4 / 64)
    assert grid.lam >= 0.5 and grid.lam_eff == LAMBDA_CAP
    c4 = uniform_perfectness(corpus.cantor(4), 3 / 81)
    assert 0 < c4.lam < 1 and c4.lam_eff == min(c4.lam, LAMBDA_CAP)


def test_lower_mass_on_path(path):
    kappa, witness = lower_mass_constant(path, 1.0, 1e-6)
    assert kappa == pytest.approx(2 / 3)
    assert witness.radius == 0.5


def test_doubling_examples(path, pair):
    assert doubling_constant(path)[0] == pytest.approx(3.0)
    assert doubling_constant(pair)[0] == pytest.approx(2.0)
    heavy = validate_space({"dist": path.dist, "weights": [0.98, 0.01, 0.01]})
    value, _ = doubling_constant(heavy)
    assert value >= 1
    assert value == pytest.approx(oracles.doubling(heavy.dist, heavy.weights))


def test_relative_lower_bound_two_points(pair):
    assert relative_lower_bound(pair, 1.0)[0] == pytest.approx(0.5)


def test_relative_lower_bound_grid_refinement():
    a = relative_lower_bound(corpus.grid(1, 17), 1.0)[0]
    b = relative_lower_bound(corpus.grid(1, 33), 1.0)[0]
    assert 0 < a <= 1 and 0 < b <= 1
    assert abs(a - b) <= 0.15 * max(a, b)


def test_v_condition(path):
    B0 = Ball(1, 0.6)
    ok = v_condition(path, B0, 1.0, 1.0, 2 / 3)
    assert ok.holds and ok.worst_ratio == pytest.approx(2 / 3)
    bad = v_condition(path, B0, 1.0, 1.0, 0.7)
    assert not bad.holds
    assert bad.witness.radius == 0.5


def test_fat_ball_precondition_on_uniform_grid():
    # on the uniform grid phi_0(1) = 1/2, far too large for the construction
    with pytest.raises(PreconditionRadius):
        fat_ball(corpus.grid(1, 65), 0, 1.0, 0.19)


def heavy_left_grid():
    g = corpus.grid(1, 65)
    w = np.full(65, 1 / 65)
    w[0] = 2.0
    return validate_space({"dist": g.dist, "weights": w})


def test_fat_ball_on_heavy_atom():
    space = heavy_left_grid()
    lam = 0.19
    fb = fat_ball(space, 0, 1.0, lam)
    f = phi(space, 0, 1.0)
    assert f == 0.0
    assert fb.radius == pytest.approx(2 * f / lam + 2 * lam)
    assert lam * 1.0 < fb.radius <= 1.0
    d = space.dist
    parent = [y for y in range(65) if d[0][y] < 1.0]
    fat = [y for y in range(65) if d[fb.center][y] < fb.radius]
    small = [y for y in range(65) if d[fb.center][y] < lam * fb.radius / 2]
    core = [y for y in range(65) if d[0][y] <= f]
    assert set(core) <= set(fat) <= set(parent)
    assert set(small) <= set(parent) - set(core)


def test_fat_ball_guards():
    space = heavy_left_grid()
    with pytest.raises(LambdaOutOfRange):
        fat_ball(space, 0, 1.0, 0.2)
    two = two_point((5.0, 1.0))
    with pytest.raises(EmptyAnnulus):
        fat_ball(two, 0, 1.0, 0.19)


def test_analyze_summary():
    summary = analyze(corpus.cantor(4), corpus.CANTOR_DIM)
    d = summary.to_dict()
    # closest cantor(4) points are 2/81 apart
    assert d["resolution"] == pytest.approx(6 / 81)
    assert 0 < d["kappa"] <= 1
    assert d["relative_kappa"] is not None
    assert len(d["phi_table"]) == 16


# ---- properties and oracle agreement


@settings(max_examples=80, deadline=None)
@given(planar_spaces())
def test_phi_matches_oracle_and_brackets(space):
    for x in range(space.n):
        for r in list(space.distinct_distances[x]) + [space.diameter * 1.3]:
            assert phi(space, x, r) == oracles.phi(space.dist, space.weights, x, r)
            check = phi_properties(space, x, r)
            assert check["bracket_low"] and check["bracket_high"] and check["in_range"]


@settings(max_examples=60, deadline=None)
@given(planar_spaces(), st.floats(0.3, 2.5))
def test_lower_mass_matches_oracle(space, s):
    r_min = space.min_distance
    kappa, witness = lower_mass_constant(space, s, r_min)
    assert kappa == pytest.approx(oracles.lower_mass(space.dist, space.weights, s, r_min), rel=1e-12)
    mass = oracles.ball_mass(space.dist, space.weights, witness.center, witness.radius)
    assert mass / witness.radius**s == pytest.approx(kappa, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(planar_spaces())
def test_perfectness_matches_oracle(space):
    res = space.min_distance
    got = uniform_perfectness(space, res).lam
    want = oracles.perfectness(space.dist, space.weights, res)
    if want is None:
        assert got is None
    else:
        assert got == pytest.approx(want, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(planar_spaces())
def test_doubling_matches_oracle(space):
    got, _ = doubling_constant(space)
    assert got == pytest.approx(oracles.doubling(space.dist, space.weights), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(planar_spaces(max_points=5), st.floats(0.5, 2.0))
def test_relative_bound_matches_oracle(space, s):
    got, _ = relative_lower_bound(space, s)
    assert got == pytest.approx(oracles.relative_lower(space.dist, space.weights, s), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(planar_spaces(min_points=3), st.floats(0.5, 2.0))
def test_v_condition_agrees_with_kappa_on_whole_space(space, s):
    B0 = Ball(0, space.diameter * 1.01)
    kappa = oracles.lower_mass(space.dist, space.weights, s, 1e-12)
    verdict = v_condition(space, B0, 1.0, s, kappa)
    assert verdict.holds
    assert verdict.worst_ratio == pytest.approx(kappa, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 0.7])
@pytest.mark.parametrize("base", [corpus.cantor(4), corpus.grid(1, 17)])
def test_snowflake_covariance(base, alpha):
    s = 1.0 if base.name.startswith("grid") else corpus.CANTOR_DIM
    r_min = 3 * base.min_distance
    a, _ = lower_mass_constant(base, s, r_min)
    b, _ = lower_mass_constant(corpus.snowflake(base, alpha), s / alpha, r_min**alpha)
    assert b == pytest.approx(a, rel=1e-12)
