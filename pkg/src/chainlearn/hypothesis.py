"""Hypothesis classes, constructive epsilon-nets, and covering-number bounds.

Classes are piecewise-linear functions on a uniform knot grid over [0, 1]:
plain constants, Lipschitz-bounded functions, and Lipschitz functions pinned
at an anchor point.  Nets are built in the sup metric only; a sup net is
reused as an L1 net since the L1 distance on [0, 1] never exceeds the sup
distance.

Net construction for a Lipschitz bound L > 0 and radius eps: knots are
spaced 1/ceil(2L/eps) apart and knot values live on a lattice of step
exactly L * spacing (at most eps/2), with adjacent knots moving at most one
lattice step.  The step choice makes the slope constraint and the lattice
commensurate, so every enumerated member is feasible and any class member
is tracked within one lattice step at the knots; with the interpolation
error this certifies a sup covering radius of at most 3*eps/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional

import numpy as np

from . import rng

NET_SIZE_CAP = 10_000_000

Kind = Literal["constants", "lipschitz", "lipschitz_anchored"]


class NetExplosionError(ValueError):
    """The requested net would exceed the enumeration cap."""


@dataclass(frozen=True)
class HypothesisClass:
    kind: Kind
    y_lo: float
    y_hi: float
    lip_bound: float = 0.0
    anchor: Optional[tuple[float, float]] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.y_lo) or not math.isfinite(self.y_hi):
            raise ValueError("class range must be bounded")
        if self.y_hi < self.y_lo:
            raise ValueError("empty class range")
        if self.kind == "constants":
            if self.lip_bound != 0.0:
                raise ValueError("constants class must have lip_bound 0")
        elif self.kind in ("lipschitz", "lipschitz_anchored"):
            if self.lip_bound <= 0.0:
                raise ValueError("lipschitz classes need lip_bound > 0")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "lipschitz_anchored":
            if self.anchor is None:
                raise ValueError("anchored class needs an anchor")
            ax, ay = self.anchor
            if not (0.0 <= ax <= 1.0 and self.y_lo <= ay <= self.y_hi):
                raise ValueError("anchor outside the class domain or range")

    @property
    def width(self) -> float:
        return self.y_hi - self.y_lo


@dataclass(frozen=True)
class Hypothesis:
    """Piecewise-linear interpolant on a uniform knot grid; a single knot
    value denotes a constant function."""

    knot_values: tuple[float, ...]

    @property
    def knot_count(self) -> int:
        return len(self.knot_values)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.knot_count == 1:
            out = np.full_like(x, self.knot_values[0])
            return out if out.ndim else float(out)
        grid = np.linspace(0.0, 1.0, self.knot_count)
        out = np.interp(x, grid, self.knot_values)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class HypothesisNet:
    members: tuple[Hypothesis, ...]
    radius: float
    metric_tag: str
    hypothesis_class: HypothesisClass

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("net must have at least one member")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def knot_count(self) -> int:
        return self.members[0].knot_count

    def member_matrix(self, xs: np.ndarray) -> np.ndarray:
        """All members evaluated at xs, shape (len(net), len(xs))."""
        xs = np.asarray(xs, dtype=float)
        if self.knot_count == 1:
            vals = np.array([h.knot_values[0] for h in self.members])
            return np.broadcast_to(vals[:, None], (len(self), xs.size)).copy()
        grid = np.linspace(0.0, 1.0, self.knot_count)
        return np.stack([np.interp(xs, grid, h.knot_values) for h in self.members])

    def to_csv(self) -> str:
        header = "member," + ",".join(f"knot_{k}" for k in range(self.knot_count))
        lines = [header]
        lines.extend(
            f"{i}," + ",".join(repr(v) for v in h.knot_values)
            for i, h in enumerate(self.members)
        )
        return "\n".join(lines) + "\n"


def _constants_values(cls: HypothesisClass, eps: float) -> np.ndarray:
    if cls.width == 0.0:
        return np.array([cls.y_lo])
    count = max(1, math.ceil(cls.width / eps - 1e-9))
    cell = cls.width / count
    return cls.y_lo + (np.arange(count) + 0.5) * cell


def _lattice(cls: HypothesisClass, step: float) -> np.ndarray:
    vals = []
    k = 0
    while cls.y_lo + (k + 0.5) * step <= cls.y_hi + 1e-12:
        vals.append(cls.y_lo + (k + 0.5) * step)
        k += 1
    if not vals:
        vals = [0.5 * (cls.y_lo + cls.y_hi)]
    return np.asarray(vals)


def _path_count(levels: int, knots: int, pinned: Optional[tuple[int, int]]) -> int:
    """Number of index paths of the given length with steps in {-1, 0, 1}."""
    ways = np.zeros(levels, dtype=object)
    if pinned is not None and pinned[0] == 0:
        ways[pinned[1]] = 1
    else:
        ways[:] = 1
    for k in range(1, knots):
        nxt = np.zeros(levels, dtype=object)
        for v in range(levels):
            lo, hi = max(0, v - 1), min(levels - 1, v + 1)
            nxt[v] = sum(ways[lo : hi + 1])
        if pinned is not None and pinned[0] == k:
            mask = np.zeros(levels, dtype=object)
            mask[pinned[1]] = nxt[pinned[1]]
            nxt = mask
        ways = nxt
    return int(ways.sum())


def build_epsilon_net(
    cls: HypothesisClass, eps: float, metric_tag: str = "sup"
) -> HypothesisNet:
    """Constructive finite eps-cover of the class in the sup metric."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if metric_tag not in ("sup", "l1"):
        raise ValueError("nets are constructed in the sup metric (reused for l1)")

    if cls.kind == "constants":
        values = _constants_values(cls, eps)
        if values.size > NET_SIZE_CAP:
            raise NetExplosionError(f"{values.size} members exceed the cap")
        members = tuple(Hypothesis((float(v),)) for v in values)
        return HypothesisNet(members, eps, metric_tag, cls)

    lam = cls.lip_bound
    cells = max(1, math.ceil(2.0 * lam / eps - 1e-9))
    spacing = 1.0 / cells
    step = lam * spacing  # lattice step == max knot move, <= eps/2
    lattice = _lattice(cls, step)
    knots = cells + 1
    levels = lattice.size

    pinned = None
    if cls.kind == "lipschitz_anchored":
        ax, ay = cls.anchor
        anchor_knot = int(round(ax * cells))
        anchor_level = int(np.argmin(np.abs(lattice - ay)))
        pinned = (anchor_knot, anchor_level)

    total = _path_count(levels, knots, pinned)
    if total > NET_SIZE_CAP:
        raise NetExplosionError(
            f"net for eps={eps} would have {total} members (cap {NET_SIZE_CAP})"
        )
    if total == 0:
        raise ValueError("anchored construction produced no feasible member")

    members: list[Hypothesis] = []
    path = [0] * knots

    def extend(k: int, level: int) -> None:
        if pinned is not None and pinned[0] == k and level != pinned[1]:
            return
        path[k] = level
        if k + 1 == knots:
            members.append(Hypothesis(tuple(float(lattice[v]) for v in path)))
            return
        for nxt in (level - 1, level, level + 1):
            if 0 <= nxt < levels:
                extend(k + 1, nxt)

    for start in range(levels):
        extend(0, start)
    return HypothesisNet(tuple(members), eps, metric_tag, cls)


def random_member(
    cls: HypothesisClass, knot_count: int, seed: int, lane: int
) -> Hypothesis:
    """A random feasible class member on the given knot grid."""
    if cls.kind == "constants":
        u = rng.uniform(seed, lane, 0)
        return Hypothesis((cls.y_lo + u * cls.width,))
    spacing = 1.0 / (knot_count - 1)
    move = cls.lip_bound * spacing
    values = np.empty(knot_count)
    if cls.kind == "lipschitz_anchored":
        ax, ay = cls.anchor
        start = int(round(ax * (knot_count - 1)))
        values[start] = ay
        for k in range(start + 1, knot_count):
            u = 2.0 * rng.uniform(seed, lane, k) - 1.0
            values[k] = np.clip(values[k - 1] + u * move, cls.y_lo, cls.y_hi)
        for k in range(start - 1, -1, -1):
            u = 2.0 * rng.uniform(seed, lane, k) - 1.0
            values[k] = np.clip(values[k + 1] + u * move, cls.y_lo, cls.y_hi)
    else:
        values[0] = cls.y_lo + rng.uniform(seed, lane, 0) * cls.width
        for k in range(1, knot_count):
            u = 2.0 * rng.uniform(seed, lane, k) - 1.0
            values[k] = np.clip(values[k - 1] + u * move, cls.y_lo, cls.y_hi)
    return Hypothesis(tuple(float(v) for v in values))


def net_covering_probe(
    net: HypothesisNet,
    cls: HypothesisClass,
    probe_count: int,
    seed: int = 0,
    refine: int = 4,
) -> float:
    """Worst covering distance of random class members to the net.

    Probes live on a grid refining the net's knots, where the sup distance
    of two piecewise-linear functions is attained at the knots.
    """
    if probe_count < 1:
        raise ValueError("probe_count must be at least 1")
    cells = max(net.knot_count - 1, 1)
    probe_knots = cells * refine + 1
    xs = np.linspace(0.0, 1.0, probe_knots)
    member_vals = net.member_matrix(xs)
    s = rng.derive(seed, rng.PROBE)
    worst = 0.0
    for p in range(probe_count):
        h = random_member(cls, probe_knots, s, p)
        gap = float(np.abs(member_vals - np.asarray(h(xs))).max(axis=1).min())
        worst = max(worst, gap)
    return worst


def class_metric(h1: Hypothesis, h2: Hypothesis, metric_tag: str) -> float:
    """Distance between hypotheses sharing a knot grid.

    sup: exact maximum of |h1 - h2| (attained at the knots for a shared
    grid); l1: trapezoid rule on the knot grid; lipschitz: sup plus the
    largest slope difference.
    """
    if h1.knot_count != h2.knot_count:
        raise ValueError(
            f"knot grids differ ({h1.knot_count} vs {h2.knot_count})"
        )
    v1 = np.asarray(h1.knot_values)
    v2 = np.asarray(h2.knot_values)
    diff = np.abs(v1 - v2)
    if metric_tag == "sup":
        return float(diff.max())
    if metric_tag == "l1":
        if h1.knot_count == 1:
            return float(diff[0])
        return float(np.trapezoid(diff, np.linspace(0.0, 1.0, h1.knot_count)))
    if metric_tag == "lipschitz":
        if h1.knot_count == 1:
            return float(diff.max())
        spacing = 1.0 / (h1.knot_count - 1)
        s1 = np.diff(v1) / spacing
        s2 = np.diff(v2) / spacing
        return float(diff.max() + np.abs(s1 - s2).max())
    raise ValueError(f"unknown metric {metric_tag!r}")


class CoveringBound(NamedTuple):
    """Value of 2^(13VT/eps) together with its base-2 exponent."""

    value: float
    log2: float


def covering_bound_bkp(V: float, T: float, eps: float) -> CoveringBound:
    """Bounded-variation covering bound 2^(13VT/eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    exponent = 13.0 * V * T / eps
    try:
        value = 2.0**exponent
    except OverflowError:
        value = math.inf
    return CoveringBound(value, exponent)


def covering_bound_holder(C: float, d: int, gamma: float, eps: float) -> float:
    """Natural log of the Holder-class covering bound: C * eps^(-2d/gamma)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if d < 1:
        raise ValueError("d must be a positive integer")
    return C * eps ** (-2.0 * d / gamma)
