"""Monte Carlo driver: experiment config, paired replications, aggregation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from spatial_ab import __version__
from spatial_ab.design import (
    SPATIAL_LEVELS,
    TEMPORAL_POLICIES,
    DesignSpec,
    assign,
    cluster_design,
    global_design,
    individual_design,
)
from spatial_ab.dgp import (
    make_noise,
    make_nonparam_dynamic_spec,
    make_param_dynamic_spec,
    make_param_static_spec,
    make_semiparam_static_spec,
    simulate,
    true_ate,
)
from spatial_ab.dr import dr_crossfit
from spatial_ab.drl import drl_estimate
from spatial_ab.inference import DegenerateVarianceError, wald
from spatial_ab.lattice import build_clusters, build_layout, diagnostics
from spatial_ab.ols import tau_ols, tau_ols_dynamic
from spatial_ab.rng import derive_seed

DGP_KINDS = ("param_static", "semiparam_static", "param_dynamic",
             "nonparam_dynamic")
NOISE_KINDS = ("exponential", "lowrank", "zero")
METHODS = ("ols", "dr", "drl")

_COEFF_SALT = 0xC0EFF
_NOISE_SALT = 0x2015E
_ASSIGN_SALT = 0xA5516
_EST_SALT = 0xE57
_BOOT_SALT = 0xB005


class ConfigError(ValueError):
    """Invalid experiment configuration."""


_GRID_FIELDS = {"R", "s", "spatial", "temporal", "p", "methods"}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    tiling: str
    R: tuple
    kind: str
    s: tuple
    rho: float
    N: int
    replications: int
    seed: int
    cluster_size: int | None = None
    spatial: tuple = ("global", "individual", "cluster")
    temporal: tuple = ("constant",)
    p: tuple = (0.5,)
    M: int = 1
    d: int = 1
    noise: str | None = None
    methods: tuple = ("ols",)
    K: int = 2
    clip_weights: bool = False
    bootstrap_B: int = 200
    delta: float = 0.05
    out_dir: str | None = None

    def __post_init__(self):
        for name in _GRID_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, tuple):
                value = tuple(value) if isinstance(value, (list, set)) \
                    else (value,)
                object.__setattr__(self, name, value)
            if len(value) == 0:
                raise ConfigError(f"grid '{name}' is empty")
        _validate(self)

    @property
    def noise_kind(self) -> str:
        return self.noise if self.noise is not None \
            else default_noise(self.kind)


def default_noise(kind: str) -> str:
    return "lowrank" if kind == "nonparam_dynamic" else "exponential"


def _validate(cfg: ExperimentConfig) -> None:
    def bad(msg):
        raise ConfigError(msg)

    if cfg.kind not in DGP_KINDS:
        bad(f"unknown dgp kind {cfg.kind!r}")
    if cfg.noise is not None and cfg.noise not in NOISE_KINDS:
        bad(f"unknown noise kind {cfg.noise!r}")
    for m in cfg.methods:
        if m not in METHODS:
            bad(f"unknown method {m!r}")
    for sp in cfg.spatial:
        if sp not in SPATIAL_LEVELS:
            bad(f"unknown spatial level {sp!r}")
    for tp in cfg.temporal:
        if tp not in TEMPORAL_POLICIES:
            bad(f"unknown temporal policy {tp!r}")
    if cfg.replications < 1:
        bad("replications must be >= 1")
    if not 0.0 <= cfg.rho < 1.0:
        bad("rho must lie in [0, 1)")
    for pv in cfg.p:
        if not 0.0 < pv < 1.0:
            bad("p must lie in (0, 1)")
    for sv in cfg.s:
        if sv < 0:
            bad("s must be >= 0")
    if cfg.M < 1:
        bad("M must be >= 1")
    if cfg.N < 1:
        bad("N must be >= 1")
    if cfg.d != 1:
        bad("only d=1 covariates are supported")
    static = cfg.kind in ("param_static", "semiparam_static")
    if static and cfg.M != 1:
        bad(f"{cfg.kind} requires M=1")
    if "dr" in cfg.methods and cfg.M != 1:
        bad("method 'dr' requires M=1")
    if "drl" in cfg.methods and cfg.M > 1 and "switchback" in cfg.temporal:
        bad("method 'drl' cannot evaluate switchback designs with M>1")
    if "cluster" in cfg.spatial and cfg.cluster_size is None:
        bad("cluster designs need cluster_size")


def config_from_mapping(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:  # missing required keys
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_mapping(data)


# ---------------------------------------------------------------------------
# experiment plan


@dataclasses.dataclass(frozen=True)
class DesignPlan:
    index: int
    spatial: str
    temporal: str
    p: float
    design: DesignSpec


@dataclasses.dataclass(frozen=True)
class CellPlan:
    index: int
    R: int
    s: float
    layout: object
    diag: object
    spec: object
    noise: object
    true_tau: float
    draw_key: int
    designs: tuple


def _draw_key(cfg: ExperimentConfig, R: int) -> int:
    # identifies the draw stream; deliberately excludes s and the design
    # axes so comparisons across them are paired
    canon = "|".join([
        cfg.tiling, f"R={R}", f"c={cfg.cluster_size}", f"kind={cfg.kind}",
        f"rho={cfg.rho!r}", f"M={cfg.M}", f"N={cfg.N}", f"d={cfg.d}",
        f"noise={cfg.noise_kind}",
    ])
    return int.from_bytes(hashlib.sha256(canon.encode()).digest()[:8], "big")


def _make_spec(kind, layout, s, M, rho, rng):
    if kind == "param_static":
        return make_param_static_spec(layout, s, rng)
    if kind == "semiparam_static":
        return make_semiparam_static_spec(layout, s)
    if kind == "param_dynamic":
        return make_param_dynamic_spec(layout, s, M, rng)
    return make_nonparam_dynamic_spec(layout, s, M, rho, rng)


def build_plans(cfg: ExperimentConfig) -> list:
    plans = []
    index = 0
    for R in cfg.R:
        try:
            layout = build_layout(cfg.tiling, R)
            partition = build_clusters(layout, cfg.cluster_size or 1)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        diag = diagnostics(layout, partition)
        designs = []
        for i, (sp, tp, pv) in enumerate(
            (sp, tp, pv)
            for sp in cfg.spatial for tp in cfg.temporal for pv in cfg.p
        ):
            if sp == "global":
                d = global_design(tp, pv)
            elif sp == "individual":
                d = individual_design(tp, pv)
            else:
                d = cluster_design(partition, tp, pv)
            designs.append(DesignPlan(i, sp, tp, pv, d))
        key = _draw_key(cfg, R)
        noise = make_noise(
            cfg.noise_kind, cfg.rho, layout,
            rng=np.random.default_rng(derive_seed(cfg.seed, key, _NOISE_SALT)),
        )
        for s in cfg.s:
            # one coefficient draw per (R, noise) stream: identical Fourier
            # coefficients across the whole s grid
            rng = np.random.default_rng(
                derive_seed(cfg.seed, key, _COEFF_SALT))
            spec = _make_spec(cfg.kind, layout, s, cfg.M, cfg.rho, rng)
            plans.append(CellPlan(index, R, s, layout, diag, spec, noise,
                                  true_ate(spec), key, tuple(designs)))
            index += 1
    return plans


# ---------------------------------------------------------------------------
# replication execution


@dataclasses.dataclass(frozen=True)
class RepRecord:
    cell: int
    R: int
    s: float
    spatial: str
    temporal: str
    p: float
    method: str
    rep: int
    seed: int
    tau_hat: float
    var_hat: float
    reject: bool
    runtime: float


@dataclasses.dataclass(frozen=True)
class FailureRecord:
    cell: int
    R: int
    s: float
    rep: int
    seed: int
    error: str


def _estimate(method, panel, plan, dp, cfg, seed):
    if method == "ols":
        if panel.M == 1:
            return tau_ols(panel, dp.design, plan.layout, plan.diag)
        return tau_ols_dynamic(panel, dp.design, plan.layout, plan.diag,
                               bootstrap_B=cfg.bootstrap_B,
                               seed=derive_seed(seed, _BOOT_SALT))
    if method == "dr":
        return dr_crossfit(panel, dp.design, plan.layout, plan.diag,
                           K=cfg.K, seed=seed,
                           clip_weights=cfg.clip_weights)
    return drl_estimate(panel, dp.design, plan.layout, plan.diag,
                        K=cfg.K, seed=seed)


def _run_rep(plan: CellPlan, rep: int, cfg: ExperimentConfig):
    """One paired replication: every design and method on shared draws."""
    rep_seed = derive_seed(cfg.seed, plan.draw_key, rep)
    records = []
    try:
        for dp in plan.designs:
            a_seed = derive_seed(rep_seed, _ASSIGN_SALT, dp.index)
            A = assign(plan.layout, dp.design, cfg.N, cfg.M, seed=a_seed)
            panel = simulate(plan.spec, A, plan.noise, cfg.N, seed=rep_seed)
            for j, method in enumerate(cfg.methods):
                e_seed = derive_seed(rep_seed, _EST_SALT, dp.index, j)
                t0 = time.perf_counter()
                est = _estimate(method, panel, plan, dp, cfg, e_seed)
                try:
                    reject = wald(est, delta=cfg.delta).reject
                except DegenerateVarianceError:
                    reject = est.tau_hat > 0
                records.append(RepRecord(
                    plan.index, plan.R, plan.s, dp.spatial, dp.temporal,
                    dp.p, method, rep, rep_seed, est.tau_hat, est.var_hat,
                    bool(reject), time.perf_counter() - t0))
    except (ValueError, ArithmeticError, RuntimeError,
            np.linalg.LinAlgError) as exc:
        failure = FailureRecord(plan.index, plan.R, plan.s, rep, rep_seed,
                                f"{type(exc).__name__}: {exc}")
        return rep, None, failure
    return rep, records, None


def _run_rep_task(args):
    return _run_rep(*args)


# ---------------------------------------------------------------------------
# aggregation


@dataclasses.dataclass(frozen=True)
class CellStats:
    R: int
    r: int
    rho: float
    s: float
    M: int
    N: int
    spatial: str
    temporal: str
    p: float
    method: str
    bias: float
    var: float
    mse: float
    reject_rate: float
    r1: float | None
    r2: float | None
    reps: int
    true_tau: float
    mean_runtime: float


@dataclasses.dataclass(frozen=True)
class MonteCarloReport:
    version: str
    seed: int
    config: ExperimentConfig
    rows: tuple
    rep_records: tuple
    failures: tuple
    failed_cells: tuple


def resolve_workers(threads=None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SPATIAL_AB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_mc(cfg: ExperimentConfig, threads=None) -> MonteCarloReport:
    plans = build_plans(cfg)
    tasks = [(plan, rep, cfg)
             for plan in plans for rep in range(cfg.replications)]
    workers = resolve_workers(threads)
    if workers == 1:
        outcomes = [_run_rep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_rep_task, tasks, chunksize=4))

    # deterministic fold over sorted (cell, rep), whatever the schedule did
    by_cell = {plan.index: {} for plan in plans}
    for (plan, rep, _), (rep_id, records, failure) in zip(tasks, outcomes):
        by_cell[plan.index][rep_id] = (records, failure)

    rows, rep_records, failures, failed = [], [], [], []
    for plan in plans:
        cell = by_cell[plan.index]
        cell_failures = []
        groups = {}
        for rep in sorted(cell):
            records, failure = cell[rep]
            if failure is not None:
                cell_failures.append(failure)
                continue
            rep_records.extend(records)
            for rec in records:
                key = (rec.spatial, rec.temporal, rec.p, rec.method)
                groups.setdefault(key, []).append(rec)
        failures.extend(cell_failures)
        if len(cell_failures) > 0.05 * cfg.replications:
            failed.append((plan.R, plan.s))
            continue
        mse_by = {}
        stats = {}
        for (sp, tp, pv, method), recs in groups.items():
            taus = np.array([r.tau_hat for r in recs])
            bias = float(taus.mean() - plan.true_tau)
            var = float(np.var(taus))
            mse = float(np.mean((taus - plan.true_tau) ** 2))
            mse_by[(sp, tp, pv, method)] = mse
            stats[(sp, tp, pv, method)] = (
                bias, var, mse,
                float(np.mean([r.reject for r in recs])), len(recs),
                float(np.mean([r.runtime for r in recs])))
        for dp in plan.designs:
            for method in cfg.methods:
                key = (dp.spatial, dp.temporal, dp.p, method)
                if key not in stats:
                    continue
                bias, var, mse, rate, n, rt = stats[key]
                base = mse_by.get(("global", dp.temporal, dp.p, method))
                r1 = r2 = None
                if base:
                    ind = mse_by.get(("individual", dp.temporal, dp.p, method))
                    clu = mse_by.get(("cluster", dp.temporal, dp.p, method))
                    r1 = None if ind is None else ind / base
                    r2 = None if clu is None else clu / base
                rows.append(CellStats(
                    plan.R, plan.layout.r, cfg.rho, plan.s, cfg.M, cfg.N,
                    dp.spatial, dp.temporal, dp.p, method, bias, var, mse,
                    rate, r1, r2, n, plan.true_tau, rt))
    return MonteCarloReport(__version__, cfg.seed, cfg, tuple(rows),
                            tuple(rep_records), tuple(failures),
                            tuple(failed))
