"""Experiment orchestration: configs, Monte Carlo tail estimation, and
deterministic reports.

Everything downstream of (config, master seed) is reproducible byte for
byte: replications draw from counter-based streams, reports carry a config
hash instead of timestamps, and serialization is canonical (sorted JSON
keys, fixed CSV column order, shortest-roundtrip float formatting).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Any, Optional

import numpy as np

from . import bounds as bd
from . import rng, transport
from .chain import (
    ContractiveChain,
    invariant_candidates_audit,
    invariant_measure,
    lemma_atom_check,
    n_step_kernel,
    simulate_x_batch,
)
from .hypothesis import (
    Hypothesis,
    HypothesisClass,
    HypothesisNet,
    build_epsilon_net,
    covering_bound_holder,
)
from .learner import (
    DegenerateClassError,
    class_error_range,
    opt_pi,
    true_errors,
)
from .loss import loss_constants
from .state_space import graph_point, make_space, make_target


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    target_name: str = "identity"
    target_params: dict = field(default_factory=dict)
    x0_policy: str = "fixed"  # fixed | uniform | stationary
    x0: float = 0.0
    class_kind: str = "constants"
    y_lo: float = 0.0
    y_hi: float = 1.0
    lip_bound: float = 0.0
    anchor: Optional[tuple[float, float]] = None
    net_radius: float = 0.05
    master_seed: int = 1
    replications: int = 100
    pi_grid: int = 4096
    diameter_grid: int = 1024
    n: int = 10_000
    n_list: tuple[int, ...] = ()
    eps: float = 0.1
    eps_list: tuple[float, ...] = ()
    delta: float = 0.05
    alpha: float = 1.0
    pair_count: int = 10_000
    decay_n_max: int = 12
    decay_grid: int = 4096
    opt_refinement: int = 8
    eta_override: Optional[float] = None
    c1_override: Optional[float] = None
    m_override: Optional[float] = None
    M_override: Optional[float] = None
    poisson_grid: int = 64
    poisson_rollouts: int = 10_000
    poisson_h_const: float = 0.5
    truncation_tol: float = 1e-3
    holder_c: float = 1.0
    holder_d: int = 1
    holder_gamma: float = 1.0
    lemma_probes: int = 32
    lemma_tolerance: float = 1e-9
    lemma_grid: int = 4096

    KINDS = (
        "contraction",
        "concentration",
        "asem",
        "relative",
        "scaling",
        "bounds",
        "poisson",
        "lemma",
    )

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.x0_policy not in ("fixed", "uniform", "stationary"):
            raise ConfigError(f"unknown x0 policy {self.x0_policy!r}")
        if not 0.0 <= self.x0 <= 1.0:
            raise ConfigError("x0 must lie in [0, 1]")
        if not 1 <= self.decay_n_max <= 12:
            raise ConfigError("decay_n_max must lie in 1..12")
        if self.net_radius <= 0:
            raise ConfigError("net_radius must be positive")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in raw:
            raise ConfigError("config needs an experiment 'kind'")
        raw = dict(raw)
        for key in ("n_list", "eps_list"):
            if key in raw:
                raw[key] = tuple(raw[key])
        if raw.get("anchor") is not None:
            ax, ay = raw["anchor"]
            raw["anchor"] = (float(ax), float(ay))
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_dict(raw)


# --- model assembly ---------------------------------------------------------

def build_chain(config: ExperimentConfig) -> ContractiveChain:
    target = make_target(config.target_name, **config.target_params)
    return ContractiveChain(make_space(target, config.diameter_grid))


def build_class(config: ExperimentConfig) -> HypothesisClass:
    return HypothesisClass(
        kind=config.class_kind,
        y_lo=config.y_lo,
        y_hi=config.y_hi,
        lip_bound=config.lip_bound,
        anchor=config.anchor,
    )


def chain_eta(chain: ContractiveChain) -> float:
    return 1.0 - math.sqrt(1.0 + chain.space.target.lip**2) / 2.0


def model_constants(
    config: ExperimentConfig,
    chain: ContractiveChain,
    cls: HypothesisClass,
    m: Optional[float] = None,
    M: Optional[float] = None,
) -> bd.ModelConstants:
    """Bound inputs for a configured experiment.

    Overridden eta/C1 must stay conservative (eta no larger than the audited
    contraction margin, C1 no smaller than the diameter) so that every bound
    evaluated from them remains a true bound.
    """
    eta = chain_eta(chain)
    c1 = chain.space.diameter
    if config.eta_override is not None:
        if config.eta_override > eta + 1e-12:
            raise ConfigError(
                f"eta override {config.eta_override} exceeds the certified "
                f"contraction margin {eta}"
            )
        eta = config.eta_override
    if config.c1_override is not None:
        if config.c1_override < c1 - 1e-12:
            raise ConfigError(
                f"C1 override {config.c1_override} is below the certified "
                f"diameter {c1}"
            )
        c1 = config.c1_override
    losses = loss_constants(cls, chain.space)
    return bd.ModelConstants.from_chain(eta, c1, losses, m, M)


def covering_count(cls: HypothesisClass, radius: float) -> int:
    """Cardinality of the constructed net at the given radius, an upper
    bound for the class covering number."""
    if cls.kind == "constants":
        if cls.width == 0.0:
            return 1
        return max(1, math.ceil(cls.width / radius - 1e-9))
    return len(build_epsilon_net(cls, radius))


def initial_xs(config: ExperimentConfig, pi_hat, reps: np.ndarray) -> np.ndarray:
    if config.x0_policy == "fixed":
        return np.full(reps.size, config.x0)
    s = rng.derive(config.master_seed, rng.INITIAL_STATE)
    u = rng.uniform_array(s, reps, np.zeros_like(reps))
    if config.x0_policy == "uniform":
        return u
    idx = np.minimum((u * len(pi_hat)).astype(int), len(pi_hat) - 1)
    return pi_hat.xs[idx]


# --- reports ---------------------------------------------------------------

@dataclass
class Report:
    metadata: dict[str, Any]
    columns: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self) -> None:
        self.columns = tuple(self.columns)
        self.rows = [tuple(r) for r in self.rows]


def _fmt_cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def render_report(report: Report, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        for key in sorted(report.metadata):
            buf.write(f"# {key}={_fmt_cell(report.metadata[key])}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_fmt_cell(v) for v in row])
        return buf.getvalue()
    if fmt == "json":
        payload = {
            "metadata": report.metadata,
            "columns": list(report.columns),
            "rows": [list(r) for r in report.rows],
        }
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"
    raise ConfigError(f"unknown format {fmt!r}")


def write_report(report: Report, path: str, fmt: str = "csv") -> None:
    text = render_report(report, fmt)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report_json(path: str) -> Report:
    with open(path) as fh:
        payload = json.load(fh)
    return Report(
        metadata=payload["metadata"],
        columns=tuple(payload["columns"]),
        rows=[tuple(r) for r in payload["rows"]],
    )


# --- batched empirical statistics -------------------------------------------

def _batch_empirical(
    net: HypothesisNet,
    chain: ContractiveChain,
    config: ExperimentConfig,
    n: int,
    pi_hat,
    rep_block: int = 256,
) -> np.ndarray:
    """Empirical error of every member for every replication, shape
    (members, replications); matches `empirical_error` on each trajectory."""
    target = chain.space.target
    reps_all = np.arange(config.replications, dtype=np.uint64)
    out = np.empty((len(net), config.replications))
    constants_net = net.knot_count == 1
    consts_vals = (
        np.array([h.knot_values[0] for h in net.members]) if constants_net else None
    )
    for lo in range(0, config.replications, rep_block):
        reps = reps_all[lo : lo + rep_block]
        x0 = initial_xs(config, pi_hat, reps)
        xs = simulate_x_batch(chain, x0, n, config.master_seed, reps)
        fy = np.asarray(target(xs), dtype=float)
        if constants_net:
            mf = fy.mean(axis=1)
            mf2 = (fy**2).mean(axis=1)
            block = (
                consts_vals[:, None] ** 2
                - 2.0 * consts_vals[:, None] * mf[None, :]
                + mf2[None, :]
            )
        else:
            block = np.empty((len(net), reps.size))
            for i, h in enumerate(net.members):
                block[i] = ((np.asarray(h(xs)) - fy) ** 2).mean(axis=1)
        out[:, lo : lo + reps.size] = block
    return out


# --- experiments -------------------------------------------------------------

def _base_metadata(config: ExperimentConfig) -> dict[str, Any]:
    return {"config_hash": config.digest(), "seed": config.master_seed}


def run_contraction_audit(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    target = chain.space.target
    eta = chain_eta(chain)
    c1, c2 = bd.ergodicity_constants(eta, chain.space.diameter)
    audit = transport.contraction_audit(chain, config.pair_count, config.master_seed)
    ratio_bound = 1.0 - eta

    pi_hat = invariant_measure(chain, config.decay_grid)
    z0 = graph_point(config.x0, target)
    chord = math.sqrt(1.0 + target.lip**2)
    decay_tol = chord / config.decay_grid
    rows: list[tuple] = []
    decay_violations = 0
    for n in range(1, config.decay_n_max + 1):
        w1, _ = transport.wasserstein1_exact(n_step_kernel(chain, z0, n), pi_hat)
        bound = c1 * math.exp(-c2 * n)
        ok = w1 <= bound + decay_tol + 1e-9
        decay_violations += not ok
        rows.append(("decay", float(n), 0.0, 0.0, w1, bound, ok))
    for x1, x2, d, w1, ratio in audit.rows:
        rows.append(("pair", x1, x2, d, w1, ratio, ratio <= ratio_bound + 1e-9))

    # invariance defects of the two invariant-measure candidates: the uniform
    # pushforward must be invariant up to discretization, normalized arc
    # length only when |f'| is constant
    defect_grid = min(config.decay_grid, 128)
    defects = invariant_candidates_audit(chain, defect_grid)

    meta = _base_metadata(config)
    meta.update(
        {
            "eta": eta,
            "c1": c1,
            "c2": c2,
            "sup_ratio": audit.sup_ratio,
            "ratio_bound": ratio_bound,
            "worst_x1": audit.worst_pair[0].x,
            "worst_x2": audit.worst_pair[1].x,
            "decay_tolerance": decay_tol,
            "invariance_defect_grid": defect_grid,
            "invariance_defect_pushforward": defects["uniform_pushforward"],
            "invariance_defect_arc_length": defects["arc_length"],
            "violations": int(decay_violations + (audit.sup_ratio > ratio_bound + 1e-9)),
        }
    )
    return Report(meta, ("row_kind", "x1_or_n", "x2", "rho", "w1", "ratio_or_bound", "ok"), rows)


def run_concentration_experiment(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    cls = build_class(config)
    net = build_epsilon_net(cls, config.net_radius)
    consts = model_constants(config, chain, cls)
    pi_hat = invariant_measure(chain, config.pi_grid)
    true = true_errors(net, pi_hat)

    n_values = config.n_list or (config.n,)
    eps_values = config.eps_list or (config.eps,)
    rows: list[tuple] = []
    low_rows: list[int] = []
    for n in n_values:
        emp = _batch_empirical(net, chain, config, int(n), pi_hat)
        devs = np.abs(emp - true[:, None]).max(axis=0)
        for eps in eps_values:
            exceed = int((devs > eps).sum())
            bound = bd.uniform_tail_bound(
                eps, int(n), consts, covering_number=len(net)
            )
            if bound.value < 1e-3:
                low_rows.append(len(rows))
            rows.append(
                (
                    int(n),
                    float(eps),
                    config.replications,
                    exceed,
                    exceed / config.replications,
                    bound.value,
                    bound.valid,
                )
            )
    meta = _base_metadata(config)
    meta.update(
        {
            "net_size": len(net),
            "L": consts.L,
            "L_bar": consts.L_bar,
            "B": consts.B,
            "eta": consts.eta,
            "c1": consts.C1,
            "low_probability_rows": ",".join(map(str, low_rows)),
        }
    )
    return Report(
        meta,
        ("n", "eps", "trials", "exceedances", "empirical_freq", "theoretical_bound", "bound_valid"),
        rows,
    )


def run_asem_experiment(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    cls = build_class(config)
    net = build_epsilon_net(cls, config.net_radius)
    consts = model_constants(config, chain, cls)
    pi_hat = invariant_measure(chain, config.pi_grid)
    true = true_errors(net, pi_hat)
    opt = opt_pi(net, pi_hat, config.opt_refinement)

    emp = _batch_empirical(net, chain, config, config.n, pi_hat)
    picks = emp.argmin(axis=0)
    gaps = np.abs(true[picks] - opt)
    successes = gaps < 5.0 * config.eps

    cov_n1 = covering_count(cls, config.eps / (4.0 * consts.L_bar))
    n1_value = bd.n1(config.eps, config.delta, consts, covering_number=cov_n1)
    rows = [
        (int(r), int(picks[r]), float(emp[picks[r], r]), float(true[picks[r]]), float(gaps[r]), bool(successes[r]))
        for r in range(config.replications)
    ]
    meta = _base_metadata(config)
    meta.update(
        {
            "eps": config.eps,
            "n": config.n,
            "net_size": len(net),
            "opt_pi": opt,
            "success_freq": float(successes.mean()),
            "n1": n1_value,
            "n1_covering": cov_n1,
            "n_below_n1": bool(config.n < n1_value),
        }
    )
    return Report(
        meta,
        ("replication", "pick_index", "empirical", "true_error", "abs_gap", "success"),
        rows,
    )


def run_relative_experiment(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    cls = build_class(config)
    net = build_epsilon_net(cls, config.net_radius)
    pi_hat = invariant_measure(chain, config.pi_grid)
    m, M = class_error_range(net, pi_hat)
    if config.m_override is not None:
        m = config.m_override
    if config.M_override is not None:
        M = config.M_override
    if m <= 0.0:
        raise DegenerateClassError("class error range has m = 0")
    consts = model_constants(config, chain, cls, m=m, M=M)
    xi1, xi2 = bd.xi_constants(m, M, consts)
    true = true_errors(net, pi_hat)
    sqrt_true = np.sqrt(true)

    n_values = config.n_list or (config.n,)
    eps_values = config.eps_list or (config.eps,)
    rows: list[tuple] = []
    low_rows: list[int] = []
    for n in n_values:
        emp = _batch_empirical(net, chain, config, int(n), pi_hat)
        rel = (np.abs(emp - true[:, None]) / sqrt_true[:, None]).max(axis=0)
        for eps in eps_values:
            exceed = int((rel > eps).sum())
            cov = covering_count(cls, eps / consts.L_bar)
            bound = bd.relative_tail_bound(eps, int(n), consts, covering_number=cov)
            if bound.value < 1e-3:
                low_rows.append(len(rows))
            rows.append(
                (
                    int(n),
                    float(eps),
                    config.replications,
                    exceed,
                    exceed / config.replications,
                    bound.value,
                    bound.epsilon_prime_ok,
                )
            )
    meta = _base_metadata(config)
    meta.update(
        {
            "m": m,
            "M": M,
            "xi1": xi1,
            "xi2": xi2,
            "net_size": len(net),
            "low_probability_rows": ",".join(map(str, low_rows)),
        }
    )
    return Report(
        meta,
        ("n", "eps", "trials", "exceedances", "empirical_freq", "theoretical_bound", "bound_valid"),
        rows,
    )


def run_scaling_experiment(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    cls = build_class(config)
    pi_hat = invariant_measure(chain, config.pi_grid)
    if config.m_override is not None and config.M_override is not None:
        m, M = config.m_override, config.M_override
    else:
        net = build_epsilon_net(cls, config.net_radius)
        m, M = class_error_range(net, pi_hat)
    if m <= 0.0:
        raise DegenerateClassError("class error range has m = 0")
    consts = model_constants(config, chain, cls, m=m, M=M)

    eps_values = config.eps_list or tuple(2.0**-k for k in range(3, 9))
    rows: list[tuple] = []
    n1s, n3s = [], []
    for eps in eps_values:
        ln_cov1 = covering_bound_holder(
            config.holder_c, config.holder_d, config.holder_gamma, eps / (4.0 * consts.L_bar)
        )
        v1 = bd.n1(eps, config.delta, consts, ln_covering=ln_cov1)
        root = math.sqrt(1.0 + 1.0 / config.alpha)
        ln_cov3 = covering_bound_holder(
            config.holder_c,
            config.holder_d,
            config.holder_gamma,
            math.sqrt(eps) / (consts.L_bar * root),
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v3 = bd.n3(eps, config.delta, config.alpha, consts, ln_covering=ln_cov3)
        n1s.append(v1)
        n3s.append(v3)
        rows.append((float(eps), v1, v3))

    log_inv_eps = np.log(1.0 / np.asarray(eps_values))
    slope1 = float(np.polyfit(log_inv_eps, np.log(np.asarray(n1s, dtype=float)), 1)[0])
    slope3 = float(np.polyfit(log_inv_eps, np.log(np.asarray(n3s, dtype=float)), 1)[0])
    meta = _base_metadata(config)
    meta.update(
        {
            "n1_slope": slope1,
            "n3_slope": slope3,
            "holder_c": config.holder_c,
            "holder_d": config.holder_d,
            "holder_gamma": config.holder_gamma,
            "alpha": config.alpha,
            "delta": config.delta,
            "m": m,
            "M": M,
        }
    )
    return Report(meta, ("eps", "n1", "n3"), rows)


def run_bounds_calculator(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    cls = build_class(config)
    pi_hat = invariant_measure(chain, config.pi_grid)
    net = build_epsilon_net(cls, config.net_radius)
    m, M = class_error_range(net, pi_hat)
    if config.m_override is not None:
        m = config.m_override
    if config.M_override is not None:
        M = config.M_override
    consts = model_constants(
        config, chain, cls, m=m if m > 0 else None, M=M if m > 0 else None
    )

    n_values = config.n_list or (config.n,)
    eps_values = config.eps_list or (config.eps,)
    rows: list[tuple] = []
    for eps in eps_values:
        for n in n_values:
            sh = bd.single_h_tail_bound(eps, int(n), consts)
            rows.append((float(eps), int(n), "single_h", sh.value, sh.valid))
            cov_u = covering_count(cls, eps / (4.0 * consts.L_bar))
            un = bd.uniform_tail_bound(eps, int(n), consts, covering_number=cov_u)
            rows.append((float(eps), int(n), "uniform", un.value, un.valid))
            if consts.m is not None:
                cov_r = covering_count(cls, eps / consts.L_bar)
                rel = bd.relative_tail_bound(eps, int(n), consts, covering_number=cov_r)
                rows.append((float(eps), int(n), "relative", rel.value, rel.epsilon_prime_ok))
    meta = _base_metadata(config)
    meta.update(
        {
            "eta": consts.eta,
            "c1": consts.C1,
            "c2": consts.C2,
            "L": consts.L,
            "L_bar": consts.L_bar,
            "B": consts.B,
            "m": m,
            "M": M,
        }
    )
    return Report(meta, ("eps", "n", "bound_kind", "bound", "valid"), rows)


def run_poisson_check(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    cls = build_class(config)
    consts = model_constants(config, chain, cls)
    pi_hat = invariant_measure(chain, config.pi_grid)
    h = Hypothesis((config.poisson_h_const,))
    truncation = bd.truncation_for_tolerance(consts, config.truncation_tol)
    estimate = bd.poisson_estimate(
        h,
        chain,
        pi_hat,
        consts,
        config.poisson_grid,
        truncation,
        config.poisson_rollouts,
        config.master_seed,
        config.truncation_tol,
    )
    residual = bd.poisson_residual_check(estimate, chain, h, pi_hat)
    norm_bound = consts.C1 * consts.L / consts.one_minus_exp_neg_c2
    sup_g = float(np.abs(estimate.values).max())
    norm_ok = sup_g <= norm_bound + estimate.mc_tolerance
    residual_ok = residual.max_residual <= residual.threshold
    rows = [(float(x), float(g)) for x, g in zip(estimate.xs, estimate.values)]
    meta = _base_metadata(config)
    meta.update(
        {
            "truncation": truncation,
            "rollouts": config.poisson_rollouts,
            "mc_tolerance": estimate.mc_tolerance,
            "norm_bound": norm_bound,
            "sup_g": sup_g,
            "norm_ok": norm_ok,
            "max_residual": residual.max_residual,
            "residual_threshold": residual.threshold,
            "interpolation_slack": residual.interpolation_slack,
            "residual_ok": residual_ok,
            "violations": int((not norm_ok) + (not residual_ok)),
        }
    )
    return Report(meta, ("x", "g_hat"), rows)


def run_lemma_check(config: ExperimentConfig) -> Report:
    chain = build_chain(config)
    report = lemma_atom_check(
        chain,
        config.lemma_probes,
        config.lemma_tolerance,
        seed=config.master_seed,
        preimage_grid=config.lemma_grid,
    )
    meta = _base_metadata(config)
    meta.update(
        {
            "passed": report.passed,
            "worst_violation": report.worst_violation,
            "worst_y": report.worst_y if report.worst_y is not None else "",
            "violations": int(not report.passed),
        }
    )
    rows = []
    if report.worst_preimages is not None:
        rows.append(
            (
                float(report.worst_y),
                float(report.worst_preimages[0]),
                float(report.worst_preimages[1]),
                float(report.worst_violation),
            )
        )
    return Report(meta, ("y", "x1", "x2", "w1_gap"), rows)


RUNNERS = {
    "contraction": run_contraction_audit,
    "concentration": run_concentration_experiment,
    "asem": run_asem_experiment,
    "relative": run_relative_experiment,
    "scaling": run_scaling_experiment,
    "bounds": run_bounds_calculator,
    "poisson": run_poisson_check,
    "lemma": run_lemma_check,
}


def run_experiment(config: ExperimentConfig) -> Report:
    return RUNNERS[config.kind](config)
