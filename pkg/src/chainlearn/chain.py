"""The two-branch contractive chain on the curve state space.

One step maps x to x/2 or (x+1)/2 with probability 1/2 each, so dyadic
rationals stay dyadic forever while irrational starts never reach them:
the chain is not irreducible.  Its x-marginal leaves the uniform law on
[0, 1] invariant, and this module carries exact kernels, trajectories
(float and exact dyadic), the discretized invariant measure, and the
atom check for functions of the chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import rng, transport
from .state_space import (
    DiscreteMeasure,
    SpaceDescriptor,
    StatePoint,
    TargetFunction,
    graph_point,
)

__all__ = [
    "ContractiveChain",
    "DyadicState",
    "Trajectory",
    "DiscreteMeasure",
    "step",
    "trajectory",
    "simulate_x_batch",
    "trajectory_exact",
    "one_step_kernel",
    "n_step_kernel",
    "invariant_measure",
    "arc_length_measure",
    "kernel_pushforward",
    "invariance_defect",
    "invariant_candidates_audit",
    "lemma_atom_check",
]

MAX_KERNEL_STEPS = 20


@dataclass(frozen=True)
class ContractiveChain:
    space: SpaceDescriptor
    branch_probability: float = 0.5


@dataclass(frozen=True)
class DyadicState:
    """Exact dyadic rational x = sum bits[i] * 2^-(i+1), bits most significant
    first.  The empty tuple represents 0."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def length(self) -> int:
        return len(self.bits)

    def value(self) -> Fraction:
        num = 0
        for b in self.bits:
            num = num * 2 + b
        return Fraction(num, 2 ** len(self.bits))

    def step(self, bit: int) -> "DyadicState":
        # (x + bit) / 2, exactly: prepend the branch bit
        return DyadicState((bit,) + self.bits)


@dataclass(frozen=True)
class Trajectory:
    xs: np.ndarray
    ys: np.ndarray
    seed: int
    replication_index: int

    def __len__(self) -> int:
        return int(self.xs.size)

    def state(self, i: int) -> StatePoint:
        return StatePoint(float(self.xs[i]), float(self.ys[i]))

    def states(self):
        return [self.state(i) for i in range(len(self))]

    def to_csv(self) -> str:
        lines = ["step,x,y"]
        lines.extend(
            f"{k},{float(x)!r},{float(y)!r}"
            for k, (x, y) in enumerate(zip(self.xs, self.ys))
        )
        return "\n".join(lines) + "\n"


def step(chain: ContractiveChain, z: StatePoint, bit: int) -> StatePoint:
    """Apply one branch: bit 0 maps x to x/2, bit 1 to (x+1)/2."""
    return graph_point((z.x + bit) / 2.0, chain.space.target)


def trajectory(
    chain: ContractiveChain,
    z0: StatePoint,
    n: int,
    seed: int,
    replication_index: int = 0,
) -> Trajectory:
    """States Z_0 .. Z_{n-1}; a pure function of (seed, replication_index)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    s = rng.derive(seed, rng.TRAJECTORY)
    xs = np.empty(n)
    xs[0] = z0.x
    for k in range(1, n):
        xs[k] = (xs[k - 1] + rng.bit(s, replication_index, k)) / 2.0
    ys = np.asarray(chain.space.target(xs), dtype=float)
    ys[0] = z0.y
    return Trajectory(xs, ys, seed, replication_index)


def simulate_x_batch(
    chain: ContractiveChain,
    x0: np.ndarray,
    n: int,
    seed: int,
    replication_indices: np.ndarray,
) -> np.ndarray:
    """x-trajectories for many replications at once, shape (reps, n).

    Bit-identical to calling `trajectory` per replication; the counter-based
    streams make the result independent of evaluation order.
    """
    s = rng.derive(seed, rng.TRAJECTORY)
    reps = np.asarray(replication_indices, dtype=np.uint64)
    xs = np.empty((reps.size, n))
    xs[:, 0] = x0
    for k in range(1, n):
        bits = rng.bit_array(s, reps, np.full(reps.size, k, dtype=np.uint64))
        xs[:, k] = (xs[:, k - 1] + bits) / 2.0
    return xs


def trajectory_exact(
    chain: ContractiveChain,
    x0: DyadicState,
    n: int,
    seed: int = 0,
    replication_index: int = 0,
    bits: Sequence[int] | None = None,
) -> list[DyadicState]:
    """Start plus n exact dyadic steps (n + 1 states).

    Branch bits come from the same stream as `trajectory` unless given
    explicitly.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    s = rng.derive(seed, rng.TRAJECTORY)
    states = [x0]
    for k in range(1, n + 1):
        b = bits[k - 1] if bits is not None else rng.bit(s, replication_index, k)
        states.append(states[-1].step(b))
    return states


def one_step_kernel(chain: ContractiveChain, z: StatePoint) -> DiscreteMeasure:
    xs = np.array([z.x / 2.0, (z.x + 1.0) / 2.0])
    return DiscreteMeasure.on_graph(chain.space.target, xs, np.array([0.5, 0.5]))


def n_step_kernel(chain: ContractiveChain, z: StatePoint, n: int) -> DiscreteMeasure:
    """Exact n-step kernel: 2^n atoms of weight 2^-n at x-values (x+j)/2^n."""
    if not 1 <= n <= MAX_KERNEL_STEPS:
        raise transport.SizeError(
            f"n={n} outside 1..{MAX_KERNEL_STEPS} (kernel has 2^n atoms)"
        )
    count = 1 << n
    xs = (z.x + np.arange(count)) / count
    w = np.full(count, 1.0 / count)
    return DiscreteMeasure.on_graph(chain.space.target, xs, w)


def invariant_measure(chain: ContractiveChain, grid_size: int) -> DiscreteMeasure:
    """Midpoint discretization of the graph-pushforward of the uniform law."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    xs = (np.arange(grid_size) + 0.5) / grid_size
    w = np.full(grid_size, 1.0 / grid_size)
    return DiscreteMeasure.on_graph(chain.space.target, xs, w)


def arc_length_measure(
    chain: ContractiveChain, grid_size: int, subgrid: int = 16
) -> DiscreteMeasure:
    """Midpoint atoms weighted by the arc length of each cell (the competing
    invariant-measure candidate; coincides with the pushforward only when
    |f'| is constant)."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    target = chain.space.target
    fine = np.linspace(0.0, 1.0, grid_size * subgrid + 1)
    fy = np.asarray(target(fine), dtype=float)
    seg = np.hypot(np.diff(fine), np.diff(fy))
    cell_len = seg.reshape(grid_size, subgrid).sum(axis=1)
    xs = (np.arange(grid_size) + 0.5) / grid_size
    return DiscreteMeasure.on_graph(target, xs, cell_len / cell_len.sum())


def kernel_pushforward(chain: ContractiveChain, measure: DiscreteMeasure) -> DiscreteMeasure:
    """One transition applied to a discrete measure (atom count doubles)."""
    xs = np.concatenate([measure.xs / 2.0, (measure.xs + 1.0) / 2.0])
    w = np.concatenate([measure.weights / 2.0, measure.weights / 2.0])
    return DiscreteMeasure.on_graph(chain.space.target, xs, w).merged()


def invariance_defect(chain: ContractiveChain, measure: DiscreteMeasure) -> float:
    """W1 distance between a measure and its one-step pushforward."""
    cost, _ = transport.wasserstein1_exact(measure, kernel_pushforward(chain, measure))
    return cost


def invariant_candidates_audit(chain: ContractiveChain, grid_size: int) -> dict[str, float]:
    """One-step invariance defect of both invariant-measure candidates."""
    return {
        "uniform_pushforward": invariance_defect(chain, invariant_measure(chain, grid_size)),
        "arc_length": invariance_defect(chain, arc_length_measure(chain, grid_size)),
    }


@dataclass(frozen=True)
class LemmaAtomReport:
    passed: bool
    worst_violation: float
    worst_y: float | None
    worst_preimages: tuple[float, float] | None


def _preimages(target: TargetFunction, y: float, grid: int) -> list[float]:
    xs = np.linspace(0.0, 1.0, grid + 1)
    vals = np.asarray(target(xs), dtype=float) - y
    roots: list[float] = [float(x) for x, v in zip(xs, vals) if v == 0.0]
    sign_change = np.nonzero(vals[:-1] * vals[1:] < 0)[0]
    for i in sign_change:
        lo, hi = xs[i], xs[i + 1]
        flo = vals[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = float(target(mid)) - y
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    roots.sort()
    clustered: list[float] = []
    for r in roots:
        if not clustered or r - clustered[-1] > 1e-6:
            clustered.append(r)
    return clustered


def lemma_atom_check(
    chain: ContractiveChain,
    probe_count: int,
    tolerance: float,
    seed: int = 0,
    preimage_grid: int = 4096,
    max_pairs_per_level: int = 6,
) -> LemmaAtomReport:
    """Do states with equal f-value share the same one-step graph kernel?

    For sampled levels y of the target, all distinct preimages x1, x2 found
    by grid search (refined by bisection) are compared through
    W1(P((x1, y), .), P((x2, y), .)).  Injective targets pass vacuously.
    """
    if probe_count < 1:
        raise ValueError("probe_count must be at least 1")
    target = chain.space.target
    s = rng.derive(seed, rng.PROBE)
    worst = 0.0
    worst_y = None
    worst_pair = None
    for t in range(probe_count):
        y = float(target(rng.uniform(s, t, 0)))
        pre = _preimages(target, y, preimage_grid)
        if len(pre) < 2:
            continue
        pairs = [
            (pre[i], pre[j])
            for i in range(len(pre))
            for j in range(i + 1, len(pre))
        ][:max_pairs_per_level]
        for x1, x2 in pairs:
            mu = one_step_kernel(chain, graph_point(x1, target))
            nu = one_step_kernel(chain, graph_point(x2, target))
            gap, _ = transport.wasserstein1_exact(mu, nu)
            if gap > worst:
                worst, worst_y, worst_pair = gap, y, (x1, x2)
    return LemmaAtomReport(worst <= tolerance, worst, worst_y, worst_pair)
