"""Slow, loop-based reference implementations used to cross-check the package.

Nothing here imports the package's numerics; each function works from the
raw distance matrix and weights.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def ball_mass(dist, w, x, r, closed=False):
    total = 0.0
    for y in range(len(w)):
        if dist[x][y] < r or (closed and dist[x][y] == r):
            total += w[y]
    return total


def phi(dist, w, x, r):
    # {t : mu(B(x,t)) <= half} is an interval [0, T]; T is r or a distance
    if r <= 0:
        return 0.0
    half = ball_mass(dist, w, x, r) / 2
    cands = sorted({0.0, r} | {float(d) for d in dist[x] if 0 < d <= r})
    best = 0.0
    for t in cands:
        if ball_mass(dist, w, x, t) <= half * (1 + 1e-12) + 1e-15:
            best = max(best, t)
    return best


def lower_mass(dist, w, s, r_min):
    n = len(w)
    diam = max(max(row) for row in dist)
    best = math.inf
    for x in range(n):
        radii = {diam} | {float(d) for d in dist[x] if r_min <= d <= diam}
        for r in radii:
            best = min(best, ball_mass(dist, w, x, r) / r**s)
    return best


def is_gradient(dist, u, g, points=None, tol=1e-12):
    pts = range(len(u)) if points is None else points
    for i, j in itertools.combinations(pts, 2):
        if abs(u[i] - u[j]) > dist[i][j] * (g[i] + g[j]) + tol:
            return False
    return True


def pair_constraints(dist, u):
    rows = []
    for i, j in itertools.combinations(range(len(u)), 2):
        c = abs(u[i] - u[j]) / dist[i][j]
        if c > 0:
            rows.append((i, j, c))
    return rows


def vertex_minimum(dist, w, u, p):
    """min sum w g^p over {g >= 0, g_i + g_j >= c_ij} by trying every basis."""
    n = len(w)
    rows = pair_constraints(dist, u)
    if not rows:
        return 0.0
    lines = []
    for i, j, c in rows:
        a = np.zeros(n)
        a[i] = a[j] = 1.0
        lines.append((a, c))
    for i in range(n):
        a = np.zeros(n)
        a[i] = 1.0
        lines.append((a, 0.0))
    top = max(c for _, _, c in rows)
    best = math.inf
    for combo in itertools.combinations(range(len(lines)), n):
        A = np.array([lines[k][0] for k in combo])
        b = np.array([lines[k][1] for k in combo])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        g = np.linalg.solve(A, b)
        if np.any(g < -1e-12 * top):
            continue
        if any(g[i] + g[j] < c * (1 - 1e-10) for i, j, c in rows):
            continue
        # solve() leaves round-off where a vertex coordinate is exactly 0, and g^p with p < 1 inflates it
        g[g < 1e-12 * top] = 0.0
        best = min(best, float(np.sum(np.asarray(w) * g**p)))
    return best ** (1 / p)


def dual_ascent_p2(instances, iterations=1_000_000):
    """Projected gradient ascent on the dual of min sum w g^2, batched over instances.

    Each instance is (w, rows) with rows = [(i, j, c)], all of equal size.
    Returns the primal values (sum w g^2)^(1/2) at the final dual iterate.
    """
    W = np.array([inst[0] for inst in instances])
    m = len(instances[0][1])
    n = W.shape[1]
    A = np.zeros((len(instances), m, n))
    C = np.zeros((len(instances), m))
    for t, (_, rows) in enumerate(instances):
        for k, (i, j, c) in enumerate(rows):
            A[t, k, i] = A[t, k, j] = 1.0
            C[t, k] = c
    # dual: max c.y - sum (A^T y)^2 / (4 w); gradient c - A g with g = A^T y / (2w)
    M = np.einsum("tmn,tkn->tmk", A / (2 * W[:, None, :]), A)
    step = 1.0 / np.linalg.eigvalsh(M)[:, -1]
    y = np.zeros((len(instances), m))
    At = A.transpose(0, 2, 1).copy()
    for _ in range(iterations):
        g = np.einsum("tnm,tm->tn", At, y) / (2 * W)
        y = np.maximum(y + step[:, None] * (C - np.einsum("tmn,tn->tm", A, g)), 0.0)
    g = np.einsum("tnm,tm->tn", At, y) / (2 * W)
    # the dual iterate gives a slightly infeasible g; scale up to feasibility
    slack = np.einsum("tmn,tn->tm", A, g)
    scale = np.max(np.where(C > 0, C / np.maximum(slack, 1e-300), 0.0), axis=1)
    g = g * np.maximum(scale, 1.0)[:, None]
    return np.sqrt(np.sum(W * g**2, axis=1))


def sobolev_family_constant(dist, w, center, r, s, p, sigma, count):
    """Max over the first `count` nested bumps of the ratio the Sobolev inequality demands."""
    n = len(w)
    q = s * p / (s - p)
    best = 0.0
    mB = sum(w[y] for y in range(n) if dist[center][y] < r)
    mS = sum(w[y] for y in range(n) if dist[center][y] < sigma * r)
    for j in range(1, count + 1):
        outer = (2.0 ** (-j - 1) + 0.5) * r
        inner = (2.0 ** (-j - 2) + 0.5) * r
        lip = 2.0 ** (j + 2) / r
        u = []
        g = []
        for y in range(n):
            d = dist[center][y]
            u.append(1.0 if d <= inner else ((outer - d) / (outer - inner) if d < outer else 0.0))
            g.append(lip if d < outer else 0.0)
        lhs = (sum(w[y] * u[y] ** q for y in range(n) if dist[center][y] < r) / mB) ** (1 / q)
        big = [y for y in range(n) if dist[center][y] < sigma * r]
        gm = (sum(w[y] * g[y] ** p for y in big) / mS) ** (1 / p)
        um = (sum(w[y] * u[y] ** p for y in big) / mS) ** (1 / p)
        rhs = (mS / r**s) ** (1 / p) * (r * gm + um)
        best = max(best, lhs / rhs)
    return best


# closed forms, written out longhand
def kappa_sobolev(C, s, p):
    return 1 / (2**s * (8 * C) ** p)


def kappa_poincare(C, s, p, lam):
    return lam**s / (2**s * (24 * C / lam**2) ** p)


def kappa_exponential(C1, C2, s, gamma, lam):
    return (C1**s * lam ** (2 * s)) / (96**s * (2 * s / gamma) ** (s / gamma) * C2**0.5)


def kappa_holder(C, p, lam):
    return (lam / C) ** p


def perfectness(dist, w, resolution):
    """Smallest max{d < r}/r over sampled radii in [resolution, eccentricity]."""
    best = math.inf
    for x in range(len(w)):
        row = sorted(float(d) for d in dist[x] if d > 0)
        ecc = row[-1]
        if resolution > ecc:
            continue
        radii = {resolution} | {d for d in row if resolution <= d <= ecc}
        for r in radii:
            inside = [d for d in dist[x] if d < r]
            best = min(best, max(inside) / r)
    return best if best > 0 else None


def doubling(dist, w, eps=1e-9):
    best = 1.0
    for x in range(len(w)):
        radii = {float(d) / 2 + eps for d in dist[x] if d > 0} | {float(d) for d in dist[x] if d > 0}
        for r in radii:
            best = max(best, ball_mass(dist, w, x, 2 * r) / ball_mass(dist, w, x, r))
    return best


def relative_lower(dist, w, s, eps=1e-9):
    n = len(w)
    best = math.inf
    for x in range(n):
        for r in {float(d) for d in dist[x] if d > 0}:
            members = [z for z in range(n) if dist[x][z] < r]
            mb = sum(w[z] for z in members)
            for y in range(n):
                # R = r itself matters when no distance from y lands between r and the next jump
                for R in {float(d) + eps for d in dist[y]} | {float(d) for d in dist[y] if d > 0} | {r}:
                    if R < r or any(dist[y][z] >= R for z in members):
                        continue
                    best = min(best, mb / ball_mass(dist, w, y, R) * (R / r) ** s)
    return best


def recheck_chain(cert, space):
    """Recompute the logged chaining inequalities from the certificate's own data."""
    w = space.weights
    gt = cert.shifted_g
    B0 = cert.inputs["B0"]
    big = np.asarray(space.dist[B0["center"]]) < B0["radius"] * cert.inputs["sigma"]
    p = cert.inputs["p"]
    integral = float(np.sum(w[big] * gt[big] ** p))
    for c in cert.checks:
        if c["name"] == "chebyshev":
            tail = float(np.sum(w[big & (gt > 2.0 ** c["level"])]))
            assert tail <= 2.0 ** (-c["level"] * p) * integral * (1 + 1e-9)
        elif c["name"] == "step-distance":
            assert space.dist[c["point"], c["next"]] < c["radius"]
        elif c["name"] == "ball-meets-lower-level":
            assert c["hypothesis_rhs"] <= c["ball_mass"] * (1 + 1e-9)
            assert c["intersection"] >= c["ball_mass"] / 2 * (1 - 1e-9)
    for chain in cert.chains:
        u = np.array(cert.inputs["u"])
        total = sum(abs(u[s.source] - u[s.target]) for s in chain.steps)
        total += abs(u[chain.steps[-1].target] - cert.gamma) if chain.steps else abs(u[chain.start] - cert.gamma)
        assert abs(u[chain.start] - cert.gamma) <= total * (1 + 1e-12) + 1e-15
        assert total <= chain.bound * (1 + 1e-9)
