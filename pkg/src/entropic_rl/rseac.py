"""Risk-sensitive exponential actor-critic for continuous actions.

Twin log-domain critics trained with the stabilized exponential-TD
gradient and sign-aware twin targets (min over twins for beta > 0, max
for beta < 0), a deterministic actor ascending (1/beta) Q through the
first critic, target networks with soft updates, and delayed policy
updates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .critic import CriticBatch, stabilized_critic_grad
from .harness import MetricsLog
from .mdp import is_risk_neutral
from .nets import AdamState, DenseNet, adam_step, backward, forward, soft_update


@dataclass
class ReplayBuffer:
    """Preallocated FIFO ring of transitions with uniform sampling."""

    capacity: int
    state_dim: int
    action_dim: int
    warmup: int
    states: np.ndarray = field(init=False)
    actions: np.ndarray = field(init=False)
    rewards: np.ndarray = field(init=False)
    next_states: np.ndarray = field(init=False)
    dones: np.ndarray = field(init=False)
    count: int = 0

    def __post_init__(self):
        if self.capacity < 1 or self.warmup < 1:
            raise ValueError("capacity and warmup must be >= 1")
        self.states = np.zeros((self.capacity, self.state_dim))
        self.actions = np.zeros((self.capacity, self.action_dim))
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, self.state_dim))
        self.dones = np.zeros(self.capacity, dtype=bool)

    def __len__(self):
        return min(self.count, self.capacity)

    @property
    def ready(self) -> bool:
        return self.count >= self.warmup

    def add(self, s, a, r, s2, done) -> None:
        i = self.count % self.capacity
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.dones[i] = done
        self.count += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> CriticBatch:
        if not self.ready:
            raise RuntimeError("buffer sampled before warmup count reached")
        idx = rng.integers(len(self), size=batch_size)
        return CriticBatch(self.states[idx], self.actions[idx],
                           self.rewards[idx], self.next_states[idx],
                           self.dones[idx])


@dataclass
class RsEacAgent:
    """Actor, twin critics, their targets, and the noise/update settings."""

    actor: DenseNet
    critic1: DenseNet
    critic2: DenseNet
    actor_target: DenseNet
    critic1_target: DenseNet
    critic2_target: DenseNet
    beta: float
    gamma: float
    sigma: float
    target_noise: float
    noise_clip: float
    delay: int
    clip_c: float
    tau: float
    action_low: float
    action_high: float

    @classmethod
    def init(cls, state_dim, action_dim, hidden, beta, config,
             rng: np.random.Generator) -> "RsEacAgent":
        if is_risk_neutral(beta):
            raise ValueError("beta is below the risk-neutral floor")
        actor = DenseNet.init((state_dim,) + tuple(hidden) + (action_dim,), rng)
        c_sizes = (state_dim + action_dim,) + tuple(hidden) + (1,)
        critic1 = DenseNet.init(c_sizes, rng)
        critic2 = DenseNet.init(c_sizes, rng)
        return cls(actor=actor, critic1=critic1, critic2=critic2,
                   actor_target=actor.copy(), critic1_target=critic1.copy(),
                   critic2_target=critic2.copy(), beta=beta,
                   gamma=config.gamma, sigma=config.sigma,
                   target_noise=config.target_noise,
                   noise_clip=config.noise_clip, delay=config.delay,
                   clip_c=config.clip_c, tau=config.tau,
                   action_low=-1.0, action_high=1.0)

    def act(self, state, rng: np.random.Generator | None = None) -> np.ndarray:
        """Policy action; exploration noise added when a generator is given."""
        a, _ = forward(self.actor, state)
        if rng is not None:
            a = a + rng.normal(0.0, self.sigma, size=a.shape)
        return np.clip(a, self.action_low, self.action_high)


def critic_target(batch: CriticBatch, agent: RsEacAgent,
                  rng: np.random.Generator) -> np.ndarray:
    """Sign-aware twin target: y = beta*r + gamma * min/max_i Q_i'(s', a').

    The next action comes from the target actor plus clipped Gaussian
    smoothing noise; terminal samples use y = beta * r.
    """
    a2, _ = forward(agent.actor_target, batch.next_states)
    noise = np.clip(rng.normal(0.0, agent.target_noise, size=a2.shape),
                    -agent.noise_clip, agent.noise_clip)
    a2 = np.clip(a2 + noise, agent.action_low, agent.action_high)
    x = np.concatenate([batch.next_states, a2], axis=1)
    q1, _ = forward(agent.critic1_target, x)
    q2, _ = forward(agent.critic2_target, x)
    pair = np.concatenate([q1, q2], axis=1)
    cont = pair.min(axis=1) if agent.beta > 0 else pair.max(axis=1)
    return agent.beta * batch.rewards + agent.gamma * cont * ~batch.dones


def actor_grad(batch: CriticBatch, agent: RsEacAgent) -> list:
    """Ascent gradient of mean_i (1/beta) Q_1(s_i, mu(s_i)) w.r.t. actor params.

    Components that would push an already-out-of-bounds action further out
    are zeroed, since acting clamps to the bounds.
    """
    if is_risk_neutral(agent.beta):
        raise ValueError("beta is below the risk-neutral floor")
    n = len(batch)
    mu, actor_cache = forward(agent.actor, batch.states)
    mu = np.atleast_2d(mu)
    x = np.concatenate([batch.states, mu], axis=1)
    _, critic_cache = forward(agent.critic1, x)
    grad_out = np.full((n, 1), 1.0 / (agent.beta * n))
    _, input_grad = backward(agent.critic1, critic_cache, grad_out)
    dq_da = input_grad[:, batch.states.shape[1]:]
    blocked = ((mu >= agent.action_high) & (dq_da > 0)) | \
              ((mu <= agent.action_low) & (dq_da < 0))
    dq_da = np.where(blocked, 0.0, dq_da)
    param_grads, _ = backward(agent.actor, actor_cache, dq_da)
    return param_grads


def _grad_norm(param_grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in param_grads)))


def _evaluate(env, agent, rng: np.random.Generator, episodes: int):
    """Noiseless policy rollouts: return stats and risky-region visit rate."""
    returns = []
    risky = 0
    visited = 0
    for _ in range(episodes):
        s = env.reset(rng)
        total = 0.0
        for _ in range(env.max_steps):
            s, r, done = env.step(s, agent.act(s), rng)
            total += r
            visited += 1
            risky += int(env.risky(s))
            if done:
                break
        returns.append(total)
    return (float(np.mean(returns)), float(np.std(returns)),
            risky / max(visited, 1))


def rseac_train(env, config, rng: np.random.Generator):
    """Training loop: explore, store, stabilized critic steps, delayed actor.

    Returns (agent, MetricsLog). A non-finite parameter aborts the run
    with a diagnostic recorded on the log.
    """
    agent = RsEacAgent.init(env.state_dim, env.action_dim, config.hidden,
                            config.beta, config, rng)
    buffer = ReplayBuffer(capacity=config.buffer_capacity,
                          state_dim=env.state_dim, action_dim=env.action_dim,
                          warmup=config.warmup)
    opt_actor = AdamState.for_params(agent.actor.params, lr=config.lr)
    opt_c1 = AdamState.for_params(agent.critic1.params, lr=config.lr)
    opt_c2 = AdamState.for_params(agent.critic2.params, lr=config.lr)
    log = MetricsLog(columns=["eval_return_mean", "eval_return_std",
                              "risky_visit_rate", "critic_grad_norm_log10",
                              "actor_grad_norm_log10"])

    s = env.reset(rng)
    ep_steps = 0
    critic_norm = np.nan
    actor_norm = np.nan
    for t in range(1, config.steps + 1):
        a = agent.act(s, rng)
        s2, r, done = env.step(s, a, rng)
        ep_steps += 1
        truncated = ep_steps >= env.max_steps
        buffer.add(s, a, r, s2, done)
        if done or truncated:
            s = env.reset(rng)
            ep_steps = 0
        else:
            s = s2

        if buffer.ready:
            batch = buffer.sample(config.batch_size, rng)
            y = critic_target(batch, agent, rng)
            rep1 = stabilized_critic_grad(batch, agent.critic1, y,
                                          agent.beta, agent.clip_c)
            rep2 = stabilized_critic_grad(batch, agent.critic2, y,
                                          agent.beta, agent.clip_c)
            critic_norm = _grad_norm(rep1.param_grads + rep2.param_grads)
            agent.critic1.set_params(
                adam_step(opt_c1, agent.critic1.params, rep1.param_grads))
            agent.critic2.set_params(
                adam_step(opt_c2, agent.critic2.params, rep2.param_grads))
            if t % agent.delay == 0:
                ascent = actor_grad(batch, agent)
                actor_norm = _grad_norm(ascent)
                agent.actor.set_params(adam_step(
                    opt_actor, agent.actor.params, [-g for g in ascent]))
                agent.actor_target.set_params(soft_update(
                    agent.actor_target.params, agent.actor.params, agent.tau))
                agent.critic1_target.set_params(soft_update(
                    agent.critic1_target.params, agent.critic1.params,
                    agent.tau))
                agent.critic2_target.set_params(soft_update(
                    agent.critic2_target.params, agent.critic2.params,
                    agent.tau))
            for net in (agent.actor, agent.critic1, agent.critic2):
                if not all(np.all(np.isfinite(p)) for p in net.params):
                    log.mark_abort(f"non-finite parameter at step {t}")
                    return agent, log

        if t % config.eval_every == 0:
            eval_rng = np.random.default_rng(rng.integers(2 ** 63))
            mean, std, visit = _evaluate(env, agent, eval_rng,
                                         config.eval_episodes)
            with np.errstate(divide="ignore", invalid="ignore"):
                log.add(t, eval_return_mean=mean, eval_return_std=std,
                        risky_visit_rate=visit,
                        critic_grad_norm_log10=np.log10(critic_norm),
                        actor_grad_norm_log10=np.log10(actor_norm))
    return agent, log
