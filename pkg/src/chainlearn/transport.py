"""Exact L1-Wasserstein distances between finitely supported measures.

Solver strategy, in order:

1.  Quantile (x-monotone) coupling plus an optimality certificate.  The
    staircase coupling is a basic feasible solution of the transportation
    polytope; dual potentials u, v with u_i + v_j = c_ij on its support are
    recovered by a single sweep.  If u_i + v_j <= c_ij holds everywhere, LP
    duality certifies the coupling as optimal and the cost is exact.  This
    route covers order-compatible ground costs (affine targets) at
    O(m n) cost, which is what the geometric-decay audit needs at 4096
    atoms a side.
2.  Hungarian assignment (`scipy.optimize.linear_sum_assignment`) when both
    measures are uniform with equal atom counts.
3.  The transportation LP solved by HiGHS (`scipy.optimize.linprog`) for
    everything else within the size cap.

Every returned plan is feasible and attains the returned cost; the test
suite cross-checks the solver against exhaustive vertex-coupling
minimization on small instances and against the Kantorovich-Rubinstein
dual lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import csr_matrix

from . import rng
from .state_space import DiscreteMeasure, StatePoint, graph_point, rho

ATOM_CAP = 4096          # per measure, after duplicate merging
LP_VARIABLE_CAP = 1 << 22
_DUAL_TOL = 1e-11


class SizeError(ValueError):
    """A measure exceeds the solver's atom cap."""


@dataclass(frozen=True)
class TransportPlan:
    entries: tuple[tuple[int, int, float], ...]
    cost: float

    def marginals(self, m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        row = np.zeros(m)
        col = np.zeros(n)
        for i, j, mass in self.entries:
            row[i] += mass
            col[j] += mass
        return row, col


def _cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    diff = mu.points()[:, None, :] - nu.points()[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def _staircase(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int, float]]:
    """Quantile coupling entries, with zero-mass tie links keeping the
    support a connected staircase tree (a degenerate transportation basis)."""
    entries: list[tuple[int, int, float]] = []
    i = j = 0
    ra, rb = a[0], b[0]
    while i < len(a) and j < len(b):
        mass = min(ra, rb)
        entries.append((i, j, mass))
        ra -= mass
        rb -= mass
        a_done = ra <= 1e-18
        b_done = rb <= 1e-18
        if a_done and b_done:
            if i + 1 < len(a) and j + 1 < len(b):
                entries.append((i + 1, j, 0.0))
            i += 1
            j += 1
            if i < len(a):
                ra = a[i]
            if j < len(b):
                rb = b[j]
        elif a_done:
            i += 1
            if i < len(a):
                ra = a[i]
        else:
            j += 1
            if j < len(b):
                rb = b[j]
    return entries


def _certified_monotone(a, b, cost) -> tuple[list[tuple[int, int, float]], float] | None:
    entries = _staircase(a, b)
    m, n = cost.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    for i, j, _ in entries:
        if math.isnan(v[j]) and not math.isnan(u[i]):
            v[j] = cost[i, j] - u[i]
        elif math.isnan(u[i]) and not math.isnan(v[j]):
            u[i] = cost[i, j] - v[j]
    if np.isnan(u).any() or np.isnan(v).any():
        return None
    if not (u[:, None] + v[None, :] <= cost + _DUAL_TOL).all():
        return None
    total = float(sum(mass * cost[i, j] for i, j, mass in entries))
    return [(i, j, mass) for i, j, mass in entries if mass > 0.0], total


def _common_denominator(weights: np.ndarray, cap: int) -> int | None:
    """Smallest K <= cap with every weight an integer multiple of 1/K, if any."""
    for k in range(1, cap + 1):
        scaled = weights * k
        if np.abs(scaled - np.round(scaled)).max() < 1e-9 * k:
            return k
    return None


def _assignment(cost) -> tuple[list[tuple[int, int, float]], float]:
    rows, cols = linear_sum_assignment(cost)
    w = 1.0 / cost.shape[0]
    entries = [(int(i), int(j), w) for i, j in zip(rows, cols)]
    total = float(cost[rows, cols].sum() * w)
    return entries, total


def _transportation_lp(a, b, cost) -> tuple[list[tuple[int, int, float]], float]:
    m, n = cost.shape
    if m * n > LP_VARIABLE_CAP:
        raise SizeError(
            f"transportation LP with {m}x{n} atoms exceeds the variable cap; "
            "pre-coarsen via quantile binning"
        )
    rows: list[int] = []
    cols: list[int] = []
    for i in range(m):
        rows.extend([i] * n)
        cols.extend(range(i * n, (i + 1) * n))
    for j in range(n):
        rows.extend([m + j] * m)
        cols.extend(i * n + j for i in range(m))
    mat = csr_matrix(
        (np.ones(2 * m * n), (rows, cols)), shape=(m + n, m * n)
    )
    res = linprog(
        cost.ravel(),
        A_eq=mat,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if res.status != 0:
        raise RuntimeError(f"transportation LP failed: {res.message}")
    plan = res.x.reshape(m, n)
    entries = [
        (int(i), int(j), float(plan[i, j]))
        for i, j in zip(*np.nonzero(plan > 1e-15))
    ]
    total = float(sum(mass * cost[i, j] for i, j, mass in entries))
    return entries, total


def wasserstein1_exact(
    mu: DiscreteMeasure, nu: DiscreteMeasure
) -> tuple[float, TransportPlan]:
    """Optimal transport cost between mu and nu under the Euclidean metric."""
    for name, m in (("mu", mu), ("nu", nu)):
        if abs(m.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not normalized: weights sum to {m.weights.sum()!r}")
    mu = mu.merged()
    nu = nu.merged()
    if len(mu) > ATOM_CAP or len(nu) > ATOM_CAP:
        raise SizeError(
            f"{max(len(mu), len(nu))} atoms exceed the cap of {ATOM_CAP}; "
            "pre-coarsen via quantile binning"
        )
    cost = _cost_matrix(mu, nu)
    a, b = mu.weights, nu.weights

    certified = _certified_monotone(a, b, cost)
    if certified is not None:
        entries, total = certified
        return total, TransportPlan(tuple(entries), total)

    m, n = cost.shape
    uniform = (
        m == n
        and np.abs(a - 1.0 / m).max() < 1e-12
        and np.abs(b - 1.0 / n).max() < 1e-12
    )
    if uniform:
        entries, total = _assignment(cost)
        return total, TransportPlan(tuple(entries), total)

    if m * n > LP_VARIABLE_CAP:
        k = _common_denominator(np.concatenate([a, b]), ATOM_CAP)
        if k is not None:
            reps_a = np.round(a * k).astype(int)
            reps_b = np.round(b * k).astype(int)
            ia = np.repeat(np.arange(m), reps_a)
            ib = np.repeat(np.arange(n), reps_b)
            rows, cols = linear_sum_assignment(cost[np.ix_(ia, ib)])
            agg: dict[tuple[int, int], float] = {}
            for r, c in zip(rows, cols):
                key = (int(ia[r]), int(ib[c]))
                agg[key] = agg.get(key, 0.0) + 1.0 / k
            entries = [(i, j, mass) for (i, j), mass in sorted(agg.items())]
            total = float(sum(mass * cost[i, j] for i, j, mass in entries))
            return total, TransportPlan(tuple(entries), total)

    entries, total = _transportation_lp(a, b, cost)
    return total, TransportPlan(tuple(entries), total)


def wasserstein1_monotone_upper(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Cost of the increasing-x quantile coupling.

    A feasible coupling, hence always >= the exact distance; equal to it
    whenever the chord metric is order-compatible (affine targets).
    """
    mu = mu.merged()
    nu = nu.merged()
    cost = _cost_matrix(mu, nu)
    entries = _staircase(mu.weights, nu.weights)
    return float(sum(mass * cost[i, j] for i, j, mass in entries))


def kr_dual_lower(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    witness_count: int,
    seed: int = 0,
    knots: int = 8,
) -> float:
    """Kantorovich-Rubinstein lower bound from 1-Lipschitz witnesses.

    Witnesses are the canonical distance functions rho(., z) anchored at
    support atoms plus random piecewise-linear profiles in the curve
    parameter, projected onto the 1-Lipschitz cone by inf-convolution with
    the support metric.
    """
    if witness_count < 1:
        raise ValueError("witness_count must be at least 1")
    mu = mu.merged()
    nu = nu.merged()
    pts = np.concatenate([mu.points(), nu.points()])
    sig = np.concatenate([mu.weights, -nu.weights])
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))

    best = 0.0
    # canonical witnesses: g = rho(., z) attains the distance for point masses
    anchors = range(len(pts)) if len(pts) <= 512 else range(0, len(pts), len(pts) // 512)
    for k in anchors:
        best = max(best, abs(float(np.dot(sig, dist[k]))))

    s = rng.derive(seed, rng.WITNESS)
    scale = float(dist.max()) or 1.0
    xs = pts[:, 0]
    knot_x = np.linspace(xs.min(), xs.max() + 1e-12, knots)
    for w in range(witness_count):
        raw_knots = (rng.uniform_array(s, np.full(knots, w), np.arange(knots)) * 2 - 1) * scale
        raw = np.interp(xs, knot_x, raw_knots)
        g = (raw[None, :] + dist).min(axis=1)  # largest 1-Lipschitz minorant
        best = max(best, abs(float(np.dot(sig, g))))
    return best


@dataclass(frozen=True)
class ContractionAudit:
    sup_ratio: float
    worst_pair: tuple[StatePoint, StatePoint]
    rows: tuple[tuple[float, float, float, float, float], ...]  # x1,x2,rho,w1,ratio


def contraction_audit(chain, pair_count: int, seed: int = 0) -> ContractionAudit:
    """Sampled sup of W1(P(z1,.), P(z2,.)) / rho(z1, z2) over state pairs."""
    from .chain import one_step_kernel  # local import to avoid a module cycle

    if pair_count < 1:
        raise ValueError("pair_count must be at least 1")
    target = chain.space.target
    s = rng.derive(seed, rng.PAIR_SAMPLING)
    rows = []
    sup = -1.0
    worst = None
    for i in range(pair_count):
        x1 = rng.uniform(s, i, 0)
        x2 = rng.uniform(s, i, 1)
        bump = 2
        while x2 == x1:  # degenerate pair: resample deterministically
            x2 = rng.uniform(s, i, bump)
            bump += 1
        z1 = graph_point(x1, target)
        z2 = graph_point(x2, target)
        w1, _ = wasserstein1_exact(one_step_kernel(chain, z1), one_step_kernel(chain, z2))
        d = rho(z1, z2)
        ratio = w1 / d
        rows.append((x1, x2, d, w1, ratio))
        if ratio > sup:
            sup = ratio
            worst = (z1, z2)
    return ContractionAudit(sup, worst, tuple(rows))
