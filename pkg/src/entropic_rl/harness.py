"""Experiment orchestration: configs, metric logs, seed fan-out, CSV output."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """An experiment config failed validation."""


@dataclass
class MetricsLog:
    """Ordered per-run metric records with an abort marker.

    Steps must be strictly increasing; nothing may be recorded after an
    abort. ``config_hash`` ties the log back to the exact config that
    produced it.
    """

    columns: list
    seed: int | None = None
    config_hash: str = ""
    records: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    def add(self, step: int, **values) -> None:
        if self.aborted:
            raise RuntimeError("log is aborted; no further records allowed")
        if self.records and step <= self.records[-1][0]:
            raise ValueError(
                f"step {step} not greater than previous {self.records[-1][0]}")
        row = [step] + [float(values.get(c, np.nan)) for c in self.columns]
        self.records.append(tuple(row))

    def mark_abort(self, reason: str) -> None:
        self.aborted = True
        self.abort_reason = reason

    def last(self, column: str):
        idx = 1 + self.columns.index(column)
        return self.records[-1][idx] if self.records else None

    def column(self, column: str) -> np.ndarray:
        idx = 1 + self.columns.index(column)
        return np.array([r[idx] for r in self.records])

    @property
    def steps(self) -> np.ndarray:
        return np.array([r[0] for r in self.records], dtype=np.int64)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step"] + list(self.columns))
            for row in self.records:
                writer.writerow([int(row[0])] + [repr(v) for v in row[1:]])
            if self.aborted:
                writer.writerow([f"# aborted: {self.abort_reason}"])


def config_hash(cfg) -> str:
    """Stable short hash of a config dataclass or dict."""
    doc = dataclasses.asdict(cfg) if dataclasses.is_dataclass(cfg) else dict(cfg)
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def aggregate_logs(logs: list) -> list:
    """Mean and std per metric across same-schema seed logs.

    Returns rows [step, <col>_mean, <col>_std, ...] over the common step
    prefix of all logs.
    """
    if not logs:
        return []
    columns = logs[0].columns
    n = min(len(lg.records) for lg in logs)
    rows = []
    for i in range(n):
        step = logs[0].records[i][0]
        vals = np.array([lg.records[i][1:] for lg in logs])
        row = [int(step)]
        for j in range(len(columns)):
            row.append(float(np.mean(vals[:, j])))
            row.append(float(np.std(vals[:, j])))
        rows.append(row)
    return rows


def write_aggregate_csv(logs: list, path: str) -> None:
    columns = logs[0].columns
    header = ["step"]
    for c in columns:
        header += [f"{c}_mean", f"{c}_std"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in aggregate_logs(logs):
            writer.writerow([row[0]] + [repr(v) for v in row[1:]])


# Defaults follow the published hyperparameter tables for the continuous
# benchmarks; the CartPole table overrides gamma/buffer/hidden in configs.
@dataclass
class ExperimentConfig:
    """Flat experiment configuration shared by all subcommands."""

    kind: str = "rseac"
    env: str = "pointmass-risky"
    mode: str = "stabilized"
    beta: float = -1.0
    gamma: float = 0.99
    lr: float = 3e-4
    tau: float = 0.005
    sigma: float = 0.2
    target_noise: float = 0.2
    noise_clip: float = 0.5
    clip_c: float = 5.0
    delay: int = 2
    batch_size: int = 256
    warmup: int = 5000
    buffer_capacity: int = 1_000_000
    hidden: tuple = (256, 256)
    seeds: tuple = (0,)
    steps: int = 100_000
    eval_every: int = 10_000
    eval_episodes: int = 20
    epsilon: float = 0.1
    episodes: int = 10_000
    step_size: float = 0.1
    rollouts: int = 10_000
    out: str = "results"

    def __post_init__(self):
        if self.kind not in ("solve", "gridworld", "verify-gradients",
                             "train-critic", "rseac"):
            raise ConfigError(f"unknown kind {self.kind!r}")
        if self.mode not in ("stabilized", "unstable", "risk-neutral"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("gamma must lie in (0, 1]")
        for name in ("lr", "tau", "clip_c", "step_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("batch_size", "steps", "eval_every", "episodes",
                     "buffer_capacity", "delay"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @classmethod
    def from_json(cls, doc) -> "ExperimentConfig":
        if isinstance(doc, str):
            doc = json.loads(doc)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        for key in ("hidden", "seeds"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def fan_out_seeds(fn, seeds, max_workers: int | None = None) -> list:
    """Run ``fn(seed)`` for each seed on worker threads; ordered results."""
    if not seeds:
        return []
    with ThreadPoolExecutor(max_workers=max_workers or len(seeds)) as pool:
        return list(pool.map(fn, seeds))


def run(config: ExperimentConfig) -> int:
    """Dispatch a config: per-seed CSVs plus one aggregate CSV.

    Returns a process exit status: 0 success, 2 validation error,
    3 numerical abort.
    """
    from . import critic as critic_mod
    from . import gridworld as gw
    from . import rseac as rseac_mod
    from .environments import make_env
    from .oracle import SolverError

    os.makedirs(config.out, exist_ok=True)
    chash = config_hash(config)

    def one_seed(seed):
        rng = np.random.default_rng(seed)
        if config.kind == "train-critic":
            env = make_env(config.env)
            log = critic_mod.train_discrete_critic(
                env, config.mode, config.beta, config.steps,
                critic_mod.CriticTrainConfig(
                    gamma=config.gamma, lr=config.lr, tau=config.tau,
                    batch_size=config.batch_size, warmup=config.warmup,
                    buffer_capacity=config.buffer_capacity,
                    hidden=config.hidden, epsilon=config.epsilon,
                    clip_c=config.clip_c, eval_every=config.eval_every,
                    eval_episodes=config.eval_episodes), rng)
        elif config.kind == "rseac":
            env = make_env(config.env)
            _, log = rseac_mod.rseac_train(env, config, rng)
        elif config.kind == "gridworld":
            spec = gw.GridWorldSpec()
            mdp = gw.build_cliff_gridworld(spec)
            table = gw.exp_q_learning(mdp, config.beta, spec.discount,
                                      config.epsilon, config.episodes,
                                      config.step_size, rng)
            log = MetricsLog(columns=["episode_return"])
            for i, ret in enumerate(table.episode_returns):
                log.add(i + 1, episode_return=ret)
            grid = gw.log_value_grid(spec, table)
            np.savetxt(os.path.join(
                config.out, f"gridworld_values_beta{config.beta}_seed{seed}.csv"),
                grid, delimiter=",", fmt="%.6f")
        else:
            raise ConfigError(f"kind {config.kind!r} is not seed-driven")
        log.seed = seed
        log.config_hash = chash
        return log

    try:
        logs = fan_out_seeds(one_seed, list(config.seeds))
    except ConfigError:
        raise
    except SolverError as exc:
        print(f"numerical abort: {exc}")
        return 3
    for log in logs:
        log.to_csv(os.path.join(
            config.out, f"{config.kind}_{config.env}_beta{config.beta}"
            f"_seed{log.seed}.csv"))
    if logs and logs[0].records:
        write_aggregate_csv(logs, os.path.join(
            config.out, f"{config.kind}_{config.env}_beta{config.beta}"
            "_aggregate.csv"))
    if any(log.aborted for log in logs):
        return 3
    return 0


def verify_gradients(config: ExperimentConfig) -> list:
    """Check every gradient identity on seeded instances.

    Returns CSV-ready rows (seed, check, relative_error, passed) where
    the checks are the exact stochastic and deterministic on-policy
    gradients against finite differences, the off-policy reductions, and
    the two improvement properties.
    """
    from . import oracle
    from .mdp import (DeterministicTabularActionPolicy,
                      StochasticTabularPolicy)

    rows = []
    for seed in config.seeds:
        rng = np.random.default_rng(seed)
        mdp = oracle_random_mdp(rng)
        logits = rng.normal(size=(mdp.n_states, mdp.n_actions))
        beta = config.beta

        def j_stoch(theta):
            pol = StochasticTabularPolicy.from_logits(
                theta.reshape(logits.shape))
            return oracle.entropic_objective(mdp, pol, beta)

        exact = oracle.stochastic_pg_exact(mdp, logits, beta)
        fd = oracle.finite_difference_gradient(
            j_stoch, logits.ravel()).reshape(logits.shape)
        err = oracle.relative_error(exact, fd)
        rows.append((seed, "stoch-pg", err, err <= 1e-6))

        cmdp = oracle.random_continuous_mdp(rng)
        pol_d = DeterministicTabularActionPolicy(
            rng.uniform(-1.0, 1.0, size=cmdp.n_states))

        def j_det(a):
            return oracle.entropic_objective_det(
                cmdp, DeterministicTabularActionPolicy(a), beta)

        exact_d = oracle.deterministic_pg_exact(cmdp, pol_d, beta)
        fd_d = oracle.finite_difference_gradient(j_det, pol_d.action_param)
        err_d = oracle.relative_error(exact_d, fd_d)
        rows.append((seed, "det-pg", err_d, err_d <= 1e-6))

        # One-step instance: the behavior-weighted approximation with the
        # twisted initial distribution coincides with the exact gradient.
        cmdp1 = oracle.random_continuous_mdp(rng, horizon=1)
        pol1 = DeterministicTabularActionPolicy(
            rng.uniform(-1.0, 1.0, size=cmdp1.n_states))
        v0 = oracle.state_values_det(cmdp1, pol1, beta)
        log_w = np.log(cmdp1.initial_dist) + beta * v0
        rho1 = np.exp(log_w - logsumexp_1d(log_w))
        g12 = oracle.off_policy_grad_det(cmdp1, pol1, beta, rho1)
        exact1 = oracle.deterministic_pg_exact(cmdp1, pol1, beta)
        err12 = oracle.relative_error(g12, exact1)
        rows.append((seed, "offpolicy-det-onestep", err12, err12 <= 1e-8))

        pol = StochasticTabularPolicy.from_logits(logits)
        rho_b = rng.dirichlet(np.full(mdp.n_states, 5.0)) + 1e-3
        rho_b /= rho_b.sum()
        g_stoch = oracle.off_policy_grad_stoch(mdp, pol, beta, rho_b)
        ok = bool(np.all(np.isfinite(g_stoch)))
        rows.append((seed, "offpolicy-stoch", float(np.max(np.abs(g_stoch))), ok))

        res = oracle.improvement_check_det(cmdp, pol_d, beta, rho_b=np.full(
            cmdp.n_states, 1.0 / cmdp.n_states))
        rows.append((seed, "improvement-det", 0.0 if res.passed else 1.0, res.passed))

        res_s = oracle.improvement_check_stoch(mdp, pol, beta, rho_b)
        ok_s = res_s.passing_alpha_projected is not None
        rows.append((seed, "improvement-stoch", 0.0 if ok_s else 1.0, ok_s))
    return rows


def logsumexp_1d(x: np.ndarray) -> float:
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))


def oracle_random_mdp(rng):
    from .mdp import random_mdp
    return random_mdp(rng, n_states=int(rng.integers(3, 6)),
                      n_actions=int(rng.integers(2, 4)), horizon=3)


def write_gradient_report(rows, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "check", "relative_error", "passed"])
        for seed, check, err, ok in rows:
            writer.writerow([seed, check, repr(float(err)), int(bool(ok))])
