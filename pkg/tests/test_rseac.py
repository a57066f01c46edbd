import numpy as np
import pytest

from entropic_rl.critic import CriticBatch
from entropic_rl.environments import make_env
from entropic_rl.harness import ExperimentConfig
from entropic_rl.nets import DenseNet, forward
from entropic_rl.rseac import (
    ReplayBuffer,
    RsEacAgent,
    actor_grad,
    critic_target,
    rseac_train,
)


def small_config(**kw):
    base = dict(kind="rseac", env="bandit-risky", beta=-1.0, hidden=(8, 8),
                batch_size=16, warmup=32, buffer_capacity=256, steps=300,
                eval_every=100, eval_episodes=3)
    base.update(kw)
    return ExperimentConfig(**base)


def constant_net(sizes, value, rng):
    """Net that outputs ``value`` everywhere (zero weights, output bias)."""
    net = DenseNet.init(sizes, rng)
    net.set_params([np.zeros_like(p) for p in net.params])
    net.biases[-1][:] = value
    return net


def make_agent(beta, q1=2.0, q2=3.0, state_dim=2, action_dim=1):
    rng = np.random.default_rng(0)
    config = small_config(beta=beta)
    agent = RsEacAgent.init(state_dim, action_dim, (4,), beta, config, rng)
    agent.critic1_target = constant_net((state_dim + action_dim, 4, 1), q1, rng)
    agent.critic2_target = constant_net((state_dim + action_dim, 4, 1), q2, rng)
    return agent


def make_batch(n=5, state_dim=2, action_dim=1, rewards=None, dones=None):
    rng = np.random.default_rng(1)
    return CriticBatch(
        rng.normal(size=(n, state_dim)),
        rng.uniform(-1, 1, size=(n, action_dim)),
        np.zeros(n) if rewards is None else np.asarray(rewards, float),
        rng.normal(size=(n, state_dim)),
        np.zeros(n, dtype=bool) if dones is None else np.asarray(dones, bool))


def test_twin_target_takes_min_for_risk_seeking():
    agent = make_agent(beta=1.0)
    batch = make_batch(rewards=[0.5] * 5)
    y = critic_target(batch, agent, np.random.default_rng(2))
    np.testing.assert_allclose(y, 1.0 * 0.5 + agent.gamma * 2.0)


def test_twin_target_takes_max_for_risk_averse():
    agent = make_agent(beta=-1.0)
    batch = make_batch(rewards=[0.5] * 5)
    y = critic_target(batch, agent, np.random.default_rng(2))
    np.testing.assert_allclose(y, -1.0 * 0.5 + agent.gamma * 3.0)


def test_twin_target_terminal_drops_bootstrap():
    agent = make_agent(beta=-1.0)
    batch = make_batch(n=2, rewards=[2.0, 2.0], dones=[True, False])
    y = critic_target(batch, agent, np.random.default_rng(3))
    assert y[0] == pytest.approx(-2.0)
    assert y[1] == pytest.approx(-2.0 + agent.gamma * 3.0)


def test_actor_gradient_matches_linear_critic_closed_form():
    # Single-layer critic Q(s, a) = w_s . s + w_a . a + b and actor mu = V s + c:
    # the objective mean_i (1/beta) Q(s_i, mu(s_i)) has bias gradient
    # (1/beta) w_a and weight gradient (1/beta) w_a * mean_i s_i.
    for beta in (-1.0, 1.0):
        rng = np.random.default_rng(4)
        agent = make_agent(beta=beta)
        agent.actor = constant_net((2, 1), 0.0, rng)
        critic = DenseNet.init((3, 1), rng)
        w = np.array([0.3, -0.2, 0.7])
        critic.set_params([np.array([[0.3], [-0.2], [0.7]]), np.zeros(1)])
        agent.critic1 = critic
        batch = make_batch()
        grads = actor_grad(batch, agent)
        w_a = w[2]
        np.testing.assert_allclose(grads[1], w_a / beta, atol=1e-12)
        np.testing.assert_allclose(
            grads[0], np.outer(batch.states.mean(axis=0), [w_a / beta]),
            atol=1e-12)


def test_actor_gradient_blocked_at_action_bound():
    rng = np.random.default_rng(5)
    agent = make_agent(beta=1.0)
    agent.actor = constant_net((2, 1), agent.action_high, rng)  # mu pinned high
    critic = DenseNet.init((3, 1), rng)
    critic.set_params([np.array([[0.0], [0.0], [1.0]]), np.zeros(1)])  # dQ/da = 1
    agent.critic1 = critic
    grads = actor_grad(make_batch(), agent)
    for g in grads:
        np.testing.assert_array_equal(g, 0.0)


def test_risk_neutral_beta_rejected():
    config = small_config()
    with pytest.raises(ValueError, match="floor"):
        RsEacAgent.init(2, 1, (4,), 0.0, config, np.random.default_rng(0))


def test_act_respects_bounds_under_large_noise():
    agent = make_agent(beta=1.0)
    agent.sigma = 50.0
    rng = np.random.default_rng(6)
    for _ in range(100):
        a = agent.act(np.zeros(2), rng)
        assert np.all(a >= agent.action_low) and np.all(a <= agent.action_high)


def test_replay_buffer_fifo_overwrite():
    buf = ReplayBuffer(capacity=4, state_dim=1, action_dim=1, warmup=2)
    for i in range(6):
        buf.add([float(i)], [0.0], float(i), [0.0], False)
    assert len(buf) == 4
    # Items 4 and 5 overwrote slots 0 and 1.
    np.testing.assert_allclose(buf.states[:, 0], [4.0, 5.0, 2.0, 3.0])


def test_replay_buffer_warmup_guard():
    buf = ReplayBuffer(capacity=8, state_dim=1, action_dim=1, warmup=4)
    buf.add([0.0], [0.0], 0.0, [0.0], False)
    assert not buf.ready
    with pytest.raises(RuntimeError, match="warmup"):
        buf.sample(2, np.random.default_rng(0))


def test_training_is_deterministic_given_seed():
    env = make_env("bandit-risky")
    config = small_config()
    _, log1 = rseac_train(env, config, np.random.default_rng(7))
    _, log2 = rseac_train(env, config, np.random.default_rng(7))
    assert log1.records == log2.records
    assert not log1.aborted


def test_training_logs_expected_columns():
    env = make_env("pointmass-risky")
    config = small_config(env="pointmass-risky", beta=1.0, steps=200,
                          eval_every=100, warmup=32)
    agent, log = rseac_train(env, config, np.random.default_rng(8))
    assert log.columns == ["eval_return_mean", "eval_return_std",
                           "risky_visit_rate", "critic_grad_norm_log10",
                           "actor_grad_norm_log10"]
    assert len(log.records) == 2
    assert 0.0 <= log.last("risky_visit_rate") <= 1.0
    assert np.isfinite(log.last("eval_return_mean"))
