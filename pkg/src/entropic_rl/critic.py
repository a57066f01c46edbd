"""Log-domain exponential-TD critic with mini-batch gradient stabilization.

The critic network outputs Q_psi with Z_psi = e^{Q_psi} left implicit. The
raw gradient of the squared exponential TD error factors as
e^{Q}(e^{Q} - e^{y}) = e^{Q + max(Q, y)} * f(Q, y) with f bounded in
[-1, 1]; subtracting a per-mini-batch normalizer z from the exponent and
clipping it to [-c, c] keeps every per-sample coefficient finite. The
unstable direct-Z and risk-neutral TD baselines live here too for
comparison runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .harness import MetricsLog
from .mdp import is_risk_neutral
from .nets import AdamState, DenseNet, adam_step, backward, forward, soft_update


class NonFiniteOutputError(FloatingPointError):
    """The critic network produced a non-finite output for a sample."""


@dataclass
class CriticBatch:
    """Aligned transition arrays; actions are indices (discrete) or vectors."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        self.actions = np.asarray(self.actions)
        self.rewards = np.asarray(self.rewards, dtype=np.float64).ravel()
        self.next_states = np.atleast_2d(
            np.asarray(self.next_states, dtype=np.float64))
        self.dones = np.asarray(self.dones, dtype=bool).ravel()
        n = len(self.rewards)
        if n < 1:
            raise ValueError("batch must contain at least one sample")
        for name in ("states", "actions", "next_states", "dones"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match batch size {n}")
        if not (np.all(np.isfinite(self.states))
                and np.all(np.isfinite(self.rewards))
                and np.all(np.isfinite(self.next_states))):
            raise ValueError("batch contains non-finite entries")

    def __len__(self):
        return len(self.rewards)


def f_helper(x, y):
    """Bounded helper: (1 - e^{y-x}) if x >= y else (e^{x-y} - 1).

    Satisfies e^x (e^x - e^y) = e^{x + max(x, y)} f(x, y) and |f| <= 1.
    Vectorized over arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = np.minimum(x, y) - np.maximum(x, y)
    return np.where(x >= y, 1.0 - np.exp(diff), np.exp(diff) - 1.0)


def m_terms(q_online: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-sample exponent m = Q + max(Q, y)."""
    q_online = np.asarray(q_online, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    return q_online + np.maximum(q_online, targets)


def normalizer_z(m: np.ndarray, beta: float) -> float:
    """Mini-batch normalizer: max of m for beta > 0, min for beta < 0."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.max(m)) if beta > 0 else float(np.min(m))


@dataclass
class StabilizedGradReport:
    """Per-sample stabilization diagnostics plus the aggregated gradient."""

    m: np.ndarray
    z: float
    clipped_exponent: np.ndarray
    f_values: np.ndarray
    coefficients: np.ndarray
    q_values: np.ndarray
    targets: np.ndarray
    param_grads: list


def _critic_q_and_cache(net: DenseNet, batch: CriticBatch):
    """Forward pass returning per-sample Q(s, a) and the backward cache.

    Discrete critics map a state to one output per action (integer action
    indices select a column); continuous critics map the concatenated
    (state, action) vector to a scalar.
    """
    discrete = np.issubdtype(batch.actions.dtype, np.integer)
    if discrete:
        out, cache = forward(net, batch.states)
        q = out[np.arange(len(batch)), batch.actions]
    else:
        actions = np.atleast_2d(np.asarray(batch.actions, dtype=np.float64))
        out, cache = forward(net, np.concatenate([batch.states, actions], axis=1))
        q = out[:, 0]
    bad = np.flatnonzero(~np.isfinite(q))
    if bad.size:
        raise NonFiniteOutputError(
            f"non-finite critic output at sample {int(bad[0])}: {q[bad[0]]!r}")
    return q, cache, out.shape[1], discrete


def _accumulate(net: DenseNet, cache, coefficients, batch, out_width, discrete):
    """Mean over the batch of coefficient_i * grad Q(s_i, a_i)."""
    n = len(batch)
    grad_out = np.zeros((n, out_width))
    if discrete:
        grad_out[np.arange(n), batch.actions] = coefficients / n
    else:
        grad_out[:, 0] = coefficients / n
    param_grads, _ = backward(net, cache, grad_out)
    return param_grads


def stabilized_critic_grad(batch: CriticBatch, online_net: DenseNet,
                           targets: np.ndarray, beta: float,
                           clip_c: float = 5.0) -> StabilizedGradReport:
    """Normalized, clipped gradient of the squared exponential TD error.

    ``targets`` are the per-sample y values (beta * r for terminal samples,
    bootstrapped otherwise), computed by the caller. The returned gradient
    is a descent direction for the loss: subtract lr * grad.
    """
    if is_risk_neutral(beta):
        raise ValueError("beta is below the risk-neutral floor")
    if clip_c <= 0:
        raise ValueError("clip_c must be positive")
    targets = np.asarray(targets, dtype=np.float64).ravel()
    q, cache, width, discrete = _critic_q_and_cache(online_net, batch)
    m = m_terms(q, targets)
    z = normalizer_z(m, beta)
    clipped = np.clip(m - z, -clip_c, clip_c)
    f_values = f_helper(q, targets)
    coefficients = np.exp(clipped) * f_values
    param_grads = _accumulate(online_net, cache, coefficients, batch,
                              width, discrete)
    return StabilizedGradReport(m=m, z=z, clipped_exponent=clipped,
                                f_values=f_values, coefficients=coefficients,
                                q_values=q, targets=targets,
                                param_grads=param_grads)


def unstable_z_grad(batch: CriticBatch, z_net: DenseNet,
                    targets_z: np.ndarray, beta: float) -> list:
    """Raw gradient of the squared TD error in the exponential domain.

    The network predicts Z directly and nothing guards the magnitudes;
    overflow here is the observable the stabilized path exists to prevent.
    """
    targets_z = np.asarray(targets_z, dtype=np.float64).ravel()
    discrete = np.issubdtype(batch.actions.dtype, np.integer)
    if discrete:
        out, cache = forward(z_net, batch.states)
        z_pred = out[np.arange(len(batch)), batch.actions]
        width = out.shape[1]
    else:
        actions = np.atleast_2d(np.asarray(batch.actions, dtype=np.float64))
        out, cache = forward(z_net, np.concatenate([batch.states, actions], axis=1))
        z_pred = out[:, 0]
        width = 1
    coefficients = z_pred - targets_z
    return _accumulate(z_net, cache, coefficients, batch, width, discrete)


def risk_neutral_td_grad(batch: CriticBatch, q_net: DenseNet,
                         targets: np.ndarray) -> list:
    """Gradient of the ordinary squared TD error (the comparison baseline)."""
    targets = np.asarray(targets, dtype=np.float64).ravel()
    q, cache, width, discrete = _critic_q_and_cache(q_net, batch)
    coefficients = q - targets
    return _accumulate(q_net, cache, coefficients, batch, width, discrete)


# ---------------------------------------------------------------------------
# Discrete-action critic training (pole balancing stability comparison)
# ---------------------------------------------------------------------------

@dataclass
class CriticTrainConfig:
    gamma: float = 0.99
    lr: float = 3e-4
    tau: float = 0.005
    batch_size: int = 256
    warmup: int = 1000
    buffer_capacity: int = 10_000
    hidden: tuple = (128, 128)
    epsilon: float = 0.1
    clip_c: float = 5.0
    eval_every: int = 1000
    eval_episodes: int = 10


def _beta_aware_opt(values: np.ndarray, beta: float, axis=-1):
    """Greedy continuation: max over actions for beta > 0, min for beta < 0."""
    return values.max(axis=axis) if beta > 0 else values.min(axis=axis)


def _select_action(net, state, beta, mode, rng, epsilon, n_actions):
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    out, _ = forward(net, state)
    if not np.all(np.isfinite(out)):
        return int(rng.integers(n_actions))
    if mode in ("risk-neutral", "unstable"):
        # The direct-Z baseline always takes max over Z, even for beta < 0
        # where Z reverses the ordering of Q -- that is one of its flaws.
        return int(np.argmax(out))
    return int(np.argmax(out)) if beta > 0 else int(np.argmin(out))


def _eval_policy(env, net, beta, mode, rng, episodes):
    """Greedy (no exploration) evaluation; non-finite nets act uniformly."""
    returns = []
    init_values = []
    for _ in range(episodes):
        s = env.reset(rng)
        out, _ = forward(net, s)
        if np.all(np.isfinite(out)):
            if mode == "risk-neutral":
                init_values.append(float(np.max(out)))
            elif mode == "unstable":
                with np.errstate(invalid="ignore", divide="ignore"):
                    opt = float(np.max(out))
                    init_values.append(np.log(opt) / beta if opt > 0 else np.nan)
            else:
                opt = float(np.max(out) if beta > 0 else np.min(out))
                init_values.append(opt / beta)
        else:
            init_values.append(np.nan)
        total = 0.0
        for _ in range(env.max_steps):
            a = _select_action(net, s, beta, mode, rng, 0.0, env.n_actions)
            s, r, done = env.step(s, a, rng)
            total += r
            if done:
                break
        returns.append(total)
    return (float(np.mean(returns)), float(np.std(returns)),
            float(np.mean(init_values)))


def _grad_norm(param_grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in param_grads)))


def train_discrete_critic(env, mode: str, beta: float, steps: int,
                          config: CriticTrainConfig,
                          rng: np.random.Generator) -> MetricsLog:
    """Q-learning-style training loop for the three critic variants.

    Modes: "stabilized" (log-domain critic, normalized clipped gradient),
    "unstable" (direct Z critic, raw gradient; may diverge -- metrics keep
    logging sentinel values), "risk-neutral" (ordinary TD). Logs evaluation
    return, mean initial value estimate, and log10 gradient norm.
    """
    if mode not in ("stabilized", "unstable", "risk-neutral"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "risk-neutral" and is_risk_neutral(beta):
        raise ValueError("beta is below the risk-neutral floor")
    sizes = (env.state_dim,) + tuple(config.hidden) + (env.n_actions,)
    net = DenseNet.init(sizes, rng)
    target = net.copy()
    opt = AdamState.for_params(net.params, lr=config.lr)
    cap = config.buffer_capacity
    buf_s = np.zeros((cap, env.state_dim))
    buf_a = np.zeros(cap, dtype=np.int64)
    buf_r = np.zeros(cap)
    buf_s2 = np.zeros((cap, env.state_dim))
    buf_d = np.zeros(cap, dtype=bool)
    count = 0

    log = MetricsLog(columns=["eval_return_mean", "eval_return_std",
                              "init_value_mean", "grad_norm_log10"])
    report_batches = []
    s = env.reset(rng)
    ep_steps = 0
    for t in range(1, steps + 1):
        a = _select_action(net, s, beta, mode, rng, config.epsilon,
                           env.n_actions)
        s2, r, done = env.step(s, a, rng)
        ep_steps += 1
        truncated = ep_steps >= env.max_steps
        i = (count % cap)
        buf_s[i], buf_a[i], buf_r[i], buf_s2[i] = s, a, r, s2
        # Time-limit truncation is not a real terminal: keep bootstrapping.
        buf_d[i] = done
        count += 1
        if done or truncated:
            s = env.reset(rng)
            ep_steps = 0
        else:
            s = s2

        grad_norm = np.nan
        if count >= config.warmup:
            idx = rng.integers(min(count, cap), size=config.batch_size)
            batch = CriticBatch(buf_s[idx], buf_a[idx], buf_r[idx],
                                buf_s2[idx], buf_d[idx])
            tgt_out, _ = forward(target, batch.next_states)
            if mode == "risk-neutral":
                cont = tgt_out.max(axis=1)
                y = batch.rewards + config.gamma * cont * ~batch.dones
                grads = risk_neutral_td_grad(batch, net, y)
            elif mode == "stabilized":
                cont = _beta_aware_opt(tgt_out, beta)
                y = beta * batch.rewards + config.gamma * cont * ~batch.dones
                report = stabilized_critic_grad(batch, net, y, beta,
                                                config.clip_c)
                grads = report.param_grads
                report.param_grads = []  # keep diagnostics, drop the bulk
                report_batches.append(report)
                if len(report_batches) > 64:
                    report_batches.pop(0)
            else:
                with np.errstate(over="ignore", invalid="ignore"):
                    # Direct-Z bootstrap: max over Z irrespective of the
                    # sign of beta, matching the baseline being critiqued.
                    cont = tgt_out.max(axis=1)
                    y = np.exp(beta * batch.rewards) * np.where(
                        batch.dones, 1.0,
                        np.sign(cont) * np.abs(cont) ** config.gamma)
                grads = unstable_z_grad(batch, net, y, beta)
            grad_norm = _grad_norm(grads)
            params = adam_step(opt, net.params, grads)
            if mode != "unstable" and not all(
                    np.all(np.isfinite(p)) for p in params):
                raise FloatingPointError(
                    f"non-finite parameter after update at step {t}")
            net.set_params(params)
            target.set_params(soft_update(target.params, net.params,
                                          config.tau))

        if t % config.eval_every == 0:
            eval_rng = np.random.default_rng(rng.integers(2 ** 63))
            mean, std, init_v = _eval_policy(env, net, beta, mode, eval_rng,
                                             config.eval_episodes)
            with np.errstate(divide="ignore", invalid="ignore"):
                gn = np.log10(grad_norm) if grad_norm > 0 else -np.inf
            log.add(t, eval_return_mean=mean, eval_return_std=std,
                    init_value_mean=init_v, grad_norm_log10=gn)
    log.extra = {"reports": report_batches}
    return log
