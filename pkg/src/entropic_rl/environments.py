"""Desk-scale environments for critic-stability and risk-sensitivity runs.

Envs are stateless: ``reset(rng) -> state`` and
``step(state, action, rng) -> (next_state, reward, done)``. The risky-region
predicate is a pure function of state and matches the reward-noise
activation exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Classic published pole-balancing constants.
GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
POLE_HALF_LENGTH = 0.5
FORCE_MAG = 10.0
TAU = 0.02
X_LIMIT = 2.4
THETA_LIMIT = 12.0 * np.pi / 180.0


def _cartpole_dynamics(state, force):
    x, x_dot, theta, theta_dot = state
    total_mass = MASS_CART + MASS_POLE
    pole_ml = MASS_POLE * POLE_HALF_LENGTH
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    temp = (force + pole_ml * theta_dot ** 2 * sin_t) / total_mass
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t ** 2 / total_mass))
    x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
    return np.array([
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    ])


def _pole_failed(state) -> bool:
    return bool(abs(state[0]) > X_LIMIT or abs(state[2]) > THETA_LIMIT)


@dataclass
class CartPoleEnv:
    """Pole balancing with two discrete push directions; +1 per step."""

    max_steps: int = 200
    state_dim: int = 4
    n_actions: int = 2

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-0.05, 0.05, size=4)

    def step(self, state, action: int, rng: np.random.Generator):
        force = FORCE_MAG if action == 1 else -FORCE_MAG
        nxt = _cartpole_dynamics(state, force)
        return nxt, 1.0, _pole_failed(nxt)

    def risky(self, state) -> bool:
        return False


@dataclass
class ContinuousEnv:
    """Continuous-action env wrapper with a risky-region predicate."""

    state_dim: int
    action_dim: int
    action_low: float
    action_high: float
    max_steps: int
    reset_fn: object
    step_fn: object
    risky_fn: object
    name: str = ""

    def reset(self, rng):
        return self.reset_fn(rng)

    def step(self, state, action, rng):
        return self.step_fn(state, action, rng)

    def risky(self, state) -> bool:
        return bool(self.risky_fn(state))


def risky_pendulum_env(noise_sigma: float = 1.0, threshold: float = 0.01,
                       max_steps: int = 200) -> ContinuousEnv:
    """Continuous-torque pole balancing; reward noise switches on for x > threshold."""

    def reset(rng):
        return rng.uniform(-0.05, 0.05, size=4)

    def risky(state):
        return state[0] > threshold

    def step(state, action, rng):
        force = float(np.clip(action[0], -1.0, 1.0)) * FORCE_MAG
        nxt = _cartpole_dynamics(state, force)
        reward = 1.0
        if risky(nxt):
            reward += rng.normal(0.0, noise_sigma)
        return nxt, reward, _pole_failed(nxt)

    return ContinuousEnv(state_dim=4, action_dim=1, action_low=-1.0,
                         action_high=1.0, max_steps=max_steps,
                         reset_fn=reset, step_fn=step, risky_fn=risky,
                         name="pendulum-risky")


@dataclass(frozen=True)
class PointMassSpec:
    start: tuple = (0.0, 0.0)
    goal: tuple = (3.0, 0.0)
    # Noise rectangle straddles the straight start-goal line.
    rect_x: tuple = (1.0, 2.0)
    rect_y: tuple = (-0.8, 0.8)
    noise_sigma: float = 3.0
    speed: float = 0.2
    goal_radius: float = 0.3
    max_steps: int = 60


def risky_pointmass_env(spec: PointMassSpec = PointMassSpec()) -> ContinuousEnv:
    """2D point with velocity control; reward -distance plus noise in the rectangle.

    The through-path crosses the rectangle and is shorter than any detour
    around it.
    """
    goal = np.asarray(spec.goal)

    def reset(rng):
        return np.asarray(spec.start, dtype=np.float64).copy()

    def risky(state):
        return (spec.rect_x[0] <= state[0] <= spec.rect_x[1]
                and spec.rect_y[0] <= state[1] <= spec.rect_y[1])

    def step(state, action, rng):
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        nxt = state + spec.speed * a
        dist = float(np.linalg.norm(nxt - goal))
        reward = -dist
        if risky(nxt):
            reward += rng.normal(0.0, spec.noise_sigma)
        return nxt, reward, dist < spec.goal_radius

    return ContinuousEnv(state_dim=2, action_dim=2, action_low=-1.0,
                         action_high=1.0, max_steps=spec.max_steps,
                         reset_fn=reset, step_fn=step, risky_fn=risky,
                         name="pointmass-risky")


def risky_bandit_env(safe_r: float = 1.0, risky_mean: float = 1.0,
                     risky_sigma: float = 2.0) -> ContinuousEnv:
    """One-step bandit with closed-form entropic value.

    Action a in [-1, 1] mixes the safe arm (weight (1-w)) and the risky arm
    (weight w = (a+1)/2). J^beta(a) = (1-w)*safe_r + w*risky_mean
    + beta*(w*risky_sigma)^2/2.
    """

    def reset(rng):
        return np.zeros(1)

    def risky(state):
        return False

    def step(state, action, rng):
        w = (float(np.clip(action[0], -1.0, 1.0)) + 1.0) / 2.0
        reward = (1.0 - w) * safe_r + w * rng.normal(risky_mean, risky_sigma)
        return np.zeros(1), reward, True

    env = ContinuousEnv(state_dim=1, action_dim=1, action_low=-1.0,
                        action_high=1.0, max_steps=1,
                        reset_fn=reset, step_fn=step, risky_fn=risky,
                        name="bandit-risky")
    return env


def bandit_entropic_value(action: float, beta: float, safe_r: float = 1.0,
                          risky_mean: float = 1.0, risky_sigma: float = 2.0) -> float:
    """Closed-form J^beta for the one-step bandit (Gaussian entropic risk)."""
    w = (np.clip(action, -1.0, 1.0) + 1.0) / 2.0
    return float((1.0 - w) * safe_r + w * risky_mean
                 + 0.5 * beta * (w * risky_sigma) ** 2)


def make_env(name: str):
    """Environment registry used by configs and the CLI."""
    if name == "cartpole":
        return CartPoleEnv()
    if name == "pendulum-risky":
        return risky_pendulum_env()
    if name == "pointmass-risky":
        return risky_pointmass_env()
    if name == "bandit-risky":
        return risky_bandit_env()
    raise ValueError(f"unknown environment {name!r}")
