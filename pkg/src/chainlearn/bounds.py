"""Closed-form constants, tail bounds, sample complexities, and the
Poisson-equation estimator.

Ergodicity constants: iterating the one-step contraction gives
W1(P^n(z, .), pi) <= (1-eta)^n * W1(delta_z, pi) <= diam * e^(-C2 n) with
C1 = diam and C2 = -ln(1-eta), so 1 - e^(-C2) recovers eta exactly.

All tail bounds are returned raw (possibly above 1) together with their
validity threshold; covering numbers enter as explicit arguments, either as
a raw count or as a natural log for models too large to exponentiate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import rng
from .chain import ContractiveChain
from .hypothesis import Hypothesis
from .learner import true_error
from .loss import LossConstants
from .state_space import DiscreteMeasure


@dataclass(frozen=True)
class ModelConstants:
    eta: float
    C1: float
    C2: float
    L: float
    L_bar: float
    B: float
    m: Optional[float] = None
    M: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0,1), got {self.eta}")
        if self.C1 <= 0 or self.C2 <= 0:
            raise ValueError("C1 and C2 must be positive")
        if (self.m is None) != (self.M is None):
            raise ValueError("m and M must be given together")
        if self.m is not None and not 0 < self.m <= self.M:
            raise ValueError("need 0 < m <= M")

    @property
    def one_minus_exp_neg_c2(self) -> float:
        return -math.expm1(-self.C2)

    @classmethod
    def from_chain(
        cls,
        eta: float,
        diam: float,
        losses: LossConstants,
        m: Optional[float] = None,
        M: Optional[float] = None,
    ) -> "ModelConstants":
        c1, c2 = ergodicity_constants(eta, diam)
        return cls(eta, c1, c2, losses.L, losses.L_bar, losses.B, m, M)

    def require_mm(self) -> tuple[float, float]:
        if self.m is None or self.M is None:
            raise ValueError("this calculator needs the error range (m, M)")
        return self.m, self.M


def ergodicity_constants(eta: float, diam: float) -> tuple[float, float]:
    """C1 = diam and C2 = -ln(1 - eta), so the geometric decay rate matches
    the one-step contraction factor."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0,1), got {eta}")
    if diam <= 0:
        raise ValueError(f"diam must be positive, got {diam}")
    return diam, -math.log1p(-eta)


def _ln_covering(covering_number: Optional[float], ln_covering: Optional[float]) -> float:
    if (covering_number is None) == (ln_covering is None):
        raise ValueError("pass exactly one of covering_number / ln_covering")
    if covering_number is not None:
        if covering_number < 1:
            raise ValueError("covering number must be at least 1")
        return math.log(covering_number)
    return float(ln_covering)


class TailBound(NamedTuple):
    value: float
    valid: bool


class RelativeTailBound(NamedTuple):
    value: float
    epsilon_prime_ok: bool


def single_h_tail_bound(eps: float, n: int, consts: ModelConstants) -> TailBound:
    """exp(-(eps n (1-e^-C2) / (2 C1 L) - 2)^2 / (2n)); valid once
    n >= 4 C1 L / (eps (1-e^-C2))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    omc = consts.one_minus_exp_neg_c2
    c1l = consts.C1 * consts.L
    coef = eps * n * omc / (2.0 * c1l)
    value = math.exp(-((coef - 2.0) ** 2) / (2.0 * n))
    return TailBound(value, n >= 4.0 * c1l / (eps * omc))


def uniform_tail_bound(
    eps: float,
    n: int,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> TailBound:
    """Covering number (at eps / 4 L_bar) times the uniform exponential
    factor; valid once n >= 8 C1 L / (eps (1-e^-C2))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    lncov = _ln_covering(covering_number, ln_covering)
    omc = consts.one_minus_exp_neg_c2
    c1l = consts.C1 * consts.L
    coef = eps * n * omc / (4.0 * c1l)
    log_value = lncov - ((coef - 2.0) ** 2) / (2.0 * n)
    value = math.exp(log_value) if log_value < 700 else math.inf
    return TailBound(value, n >= 8.0 * c1l / (eps * omc))


def n1_terms(
    eps: float,
    delta: float,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> tuple[float, float]:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    lncov = _ln_covering(covering_number, ln_covering)
    omc = consts.one_minus_exp_neg_c2
    c1l = consts.C1 * consts.L
    t1 = 16.0 * c1l / (eps * omc)
    t2 = 128.0 * c1l**2 * (lncov + math.log(1.0 / delta)) / (eps**2 * omc**2)
    return t1, t2


def n1(
    eps: float,
    delta: float,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> int:
    """Sample size guaranteeing the learner's 5-eps generalization bound;
    the covering number is taken at radius eps / (4 L_bar)."""
    t1, t2 = n1_terms(eps, delta, consts, covering_number, ln_covering=ln_covering)
    return math.ceil(max(t1, t2))


def xi_constants(m: float, M: float, consts: ModelConstants) -> tuple[float, float]:
    """The two constants of the relative-deviation exponential bound."""
    if not 0 < m <= M:
        raise ValueError("need 0 < m <= M")
    omc = consts.one_minus_exp_neg_c2
    c1l = consts.C1 * consts.L
    xi1 = 49.0 * m**4 * omc**2 / (72.0 * M * (M + 6.0 * m) ** 2 * c1l**2)
    xi2 = 7.0 * m**2 * omc / (6.0 * math.sqrt(M) * (M + 6.0 * m) * c1l)
    return xi1, xi2


def epsilon_prime_ok(eps: float, m: float, M: float) -> bool:
    """The substituted deviation level m^{3/2} eps / (M + 6m) must stay below
    2m/3 for the two-sided argument behind the relative bound; parameter
    choices beyond it are flagged, not rejected."""
    return m**1.5 * eps / (M + 6.0 * m) < 2.0 * m / 3.0


def n2_terms(
    eps: float,
    delta: float,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> tuple[float, float]:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    m, M = consts.require_mm()
    lncov = _ln_covering(covering_number, ln_covering)
    omc = consts.one_minus_exp_neg_c2
    c1l = consts.C1 * consts.L
    xi1, xi2 = xi_constants(m, M, consts)
    t1 = 2.0 * c1l / (eps * min(math.sqrt(m), 1.0) * omc)
    t2 = (xi2 * eps + lncov + math.log(4.0 / delta)) / (xi1 * eps**2)
    return t1, t2


def n2(
    eps: float,
    delta: float,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> int:
    """Sample size for the relative-deviation bound; covering number taken
    at radius eps / L_bar."""
    m, M = consts.require_mm()
    if not epsilon_prime_ok(eps, m, M):
        warnings.warn(
            f"eps={eps} puts the substituted level at or beyond 2m/3; "
            "the two-sided argument does not cover this choice",
            stacklevel=2,
        )
    t1, t2 = n2_terms(eps, delta, consts, covering_number, ln_covering=ln_covering)
    return math.ceil(max(t1, t2))


def n3_terms(
    eps: float,
    delta: float,
    alpha: float,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> tuple[float, float]:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    m, M = consts.require_mm()
    lncov = _ln_covering(covering_number, ln_covering)
    omc = consts.one_minus_exp_neg_c2
    c1l = consts.C1 * consts.L
    xi1, xi2 = xi_constants(m, M, consts)
    root = math.sqrt(1.0 + 1.0 / alpha)
    t1 = 2.0 * c1l * root / (math.sqrt(eps) * min(math.sqrt(m), 1.0) * omc)
    t2 = ((alpha + 1.0) / (alpha * xi1)) * (
        (xi2 * math.sqrt(eps) / root) + lncov + math.log(4.0 / delta)
    ) / eps
    return t1, t2


def n3(
    eps: float,
    delta: float,
    alpha: float,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> int:
    """Sample size for the multiplicative-accuracy bound; covering number
    taken at radius sqrt(eps) / (L_bar sqrt(1 + 1/alpha))."""
    m, M = consts.require_mm()
    tilde = math.sqrt(eps / (1.0 + 1.0 / alpha))
    if not epsilon_prime_ok(tilde, m, M):
        warnings.warn(
            f"(eps={eps}, alpha={alpha}) puts the substituted level at or "
            "beyond 2m/3; the two-sided argument does not cover this choice",
            stacklevel=2,
        )
    t1, t2 = n3_terms(eps, delta, alpha, consts, covering_number, ln_covering=ln_covering)
    return math.ceil(max(t1, t2))


def relative_tail_bound(
    eps: float,
    n: int,
    consts: ModelConstants,
    covering_number: Optional[float] = None,
    *,
    ln_covering: Optional[float] = None,
) -> RelativeTailBound:
    """4 * covering(eps / L_bar) * exp(-xi1 eps^2 n + xi2 eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    m, M = consts.require_mm()
    lncov = _ln_covering(covering_number, ln_covering)
    xi1, xi2 = xi_constants(m, M, consts)
    log_value = math.log(4.0) + lncov - xi1 * eps**2 * n + xi2 * eps
    value = math.exp(log_value) if log_value < 700 else math.inf
    return RelativeTailBound(value, epsilon_prime_ok(eps, m, M))


# --- Poisson equation -------------------------------------------------------

@dataclass(frozen=True)
class PoissonEstimate:
    xs: np.ndarray
    values: np.ndarray
    truncation: int
    rollouts: int
    mc_tolerance: float
    er_pi: float

    def value_map(self) -> dict[float, float]:
        return {float(x): float(v) for x, v in zip(self.xs, self.values)}


def truncation_for_tolerance(consts: ModelConstants, tol: float) -> int:
    """Smallest N with C1 L e^(-C2 N) / (1 - e^(-C2)) <= tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    c1l = consts.C1 * consts.L
    omc = consts.one_minus_exp_neg_c2
    return max(0, math.ceil(math.log(c1l / (tol * omc)) / consts.C2))


def poisson_estimate(
    h: Hypothesis,
    chain: ContractiveChain,
    pi_hat: DiscreteMeasure,
    consts: ModelConstants,
    grid: int,
    truncation: int,
    rollouts: int,
    seed: int = 0,
    truncation_tol: float = 1e-3,
) -> PoissonEstimate:
    """Monte Carlo estimate of the truncated Poisson-equation solution
    g(z) = sum_k E_z[centered loss at step k] on a dyadic x-grid.

    Raises if the truncation's geometric tail exceeds the requested
    tolerance.  The reported Monte Carlo tolerance is 3 B sqrt(N / R).
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    if rollouts < 1:
        raise ValueError("rollouts must be at least 1")
    c1l = consts.C1 * consts.L
    omc = consts.one_minus_exp_neg_c2
    tail = c1l * math.exp(-consts.C2 * truncation) / omc
    if tail > truncation_tol:
        raise ValueError(
            f"truncation {truncation} leaves a geometric tail of {tail:.3g} "
            f"above the requested tolerance {truncation_tol:.3g}"
        )
    target = chain.space.target
    er = true_error(h, pi_hat)
    xs = np.linspace(0.0, 1.0, grid + 1)
    lanes = np.arange(grid + 1, dtype=np.uint64)[:, None] * np.uint64(rollouts) + np.arange(
        rollouts, dtype=np.uint64
    )[None, :]
    s = rng.derive(seed, rng.POISSON)
    state = np.broadcast_to(xs[:, None], lanes.shape).copy()
    acc = np.zeros(lanes.shape)
    for k in range(truncation + 1):
        fy = np.asarray(target(state), dtype=float)
        hy = np.asarray(h(state), dtype=float)
        acc += (hy - fy) ** 2
        if k < truncation:
            bits = rng.bit_array(s, lanes, np.full(lanes.shape, k, dtype=np.uint64))
            state = (state + bits) / 2.0
    values = acc.mean(axis=1) - (truncation + 1) * er
    mc_tol = 3.0 * consts.B * math.sqrt(max(truncation, 1) / rollouts)
    return PoissonEstimate(xs, values, truncation, rollouts, mc_tol, er)


class PoissonResidual(NamedTuple):
    max_residual: float
    threshold: float
    interpolation_slack: float


def poisson_residual_check(
    estimate: PoissonEstimate,
    chain: ContractiveChain,
    h: Hypothesis,
    pi_hat: DiscreteMeasure,
) -> PoissonResidual:
    """Max over the grid of |g(z) - E_z g(Z_1) - centered loss(z)|.

    Children x/2 and (x+1)/2 off the grid are linearly interpolated; the
    recorded slack is the estimate's numerical Lipschitz constant times the
    grid spacing.  Passing means the residual stays below
    2 * mc_tolerance + slack.
    """
    xs, g = estimate.xs, estimate.values
    spacing = xs[1] - xs[0]
    target = chain.space.target
    g_lo = np.interp(xs / 2.0, xs, g)
    g_hi = np.interp((xs + 1.0) / 2.0, xs, g)
    fy = np.asarray(target(xs), dtype=float)
    hy = np.asarray(h(xs), dtype=float)
    centered = (hy - fy) ** 2 - estimate.er_pi
    residual = np.abs(g - 0.5 * g_lo - 0.5 * g_hi - centered)
    lip_hat = float(np.abs(np.diff(g)).max() / spacing) if g.size > 1 else 0.0
    slack = lip_hat * spacing
    return PoissonResidual(
        float(residual.max()), 2.0 * estimate.mc_tolerance + slack, slack
    )
