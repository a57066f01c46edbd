"""Finite tabular MDPs, tabular policies, and trajectory sampling."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Probability rows must sum to one within this tolerance.
PROB_ATOL = 1e-12
# Risk parameters with |beta| below this floor route to risk-neutral code paths.
BETA_FLOOR = 1e-6


class MdpValidationError(ValueError):
    """A tabular model failed its shape or probability checks."""


def _check_prob_rows(arr, name):
    sums = arr.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > 1e-9)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise MdpValidationError(
            f"{name} row {idx} sums to {sums[tuple(bad[0])]:.17g}, expected 1"
        )
    if np.any(arr < 0):
        idx = tuple(int(i) for i in np.argwhere(arr < 0)[0])
        raise MdpValidationError(f"{name} entry {idx} is negative")


@dataclass(frozen=True)
class RiskParameter:
    """Risk preference beta; magnitudes below ``floor`` mean risk-neutral."""

    beta: float
    floor: float = BETA_FLOOR

    def __post_init__(self):
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")

    @property
    def risk_neutral(self) -> bool:
        return abs(self.beta) < self.floor


def is_risk_neutral(beta: float, floor: float = BETA_FLOOR) -> bool:
    return abs(float(beta)) < floor


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with transition tensor ``[s, a, s']`` and reward table ``[s, a]``.

    Terminal states self-loop with zero reward; episode termination is
    signaled by landing on a terminal state. ``horizon`` and ``discount``
    may both be present; solvers name which one they use.
    """

    n_states: int
    n_actions: int
    transition: np.ndarray
    reward: np.ndarray
    initial_dist: np.ndarray
    terminal: np.ndarray
    horizon: int | None = None
    discount: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=np.float64))
        object.__setattr__(self, "reward", np.asarray(self.reward, dtype=np.float64))
        object.__setattr__(self, "initial_dist", np.asarray(self.initial_dist, dtype=np.float64))
        object.__setattr__(self, "terminal", np.asarray(self.terminal, dtype=bool))
        S, A = self.n_states, self.n_actions
        if self.transition.shape != (S, A, S):
            raise MdpValidationError(
                f"transition shape {self.transition.shape} != {(S, A, S)}"
            )
        if self.reward.shape != (S, A):
            raise MdpValidationError(f"reward shape {self.reward.shape} != {(S, A)}")
        if self.initial_dist.shape != (S,):
            raise MdpValidationError(
                f"initial_dist shape {self.initial_dist.shape} != {(S,)}"
            )
        if self.terminal.shape != (S,):
            raise MdpValidationError(f"terminal shape {self.terminal.shape} != {(S,)}")
        _check_prob_rows(self.transition, "transition")
        _check_prob_rows(self.initial_dist[None, :], "initial_dist")
        if not np.all(np.isfinite(self.reward)):
            raise MdpValidationError("reward table contains non-finite entries")
        for s in np.flatnonzero(self.terminal):
            for a in range(A):
                if self.transition[s, a, s] != 1.0:
                    raise MdpValidationError(
                        f"terminal state {s} must self-loop (action {a})"
                    )
                if self.reward[s, a] != 0.0:
                    raise MdpValidationError(
                        f"terminal state {s} must have zero reward (action {a})"
                    )
        if self.horizon is not None and self.horizon < 1:
            raise MdpValidationError("horizon must be >= 1 when set")
        if self.discount is not None and not (0.0 < self.discount <= 1.0):
            raise MdpValidationError("discount must lie in (0, 1]")

    # -- JSON wire format ---------------------------------------------------

    @classmethod
    def from_json(cls, doc) -> "TabularMDP":
        """Build from a dict or JSON string; see README for the schema."""
        if isinstance(doc, str):
            doc = json.loads(doc)
        known = {"n_states", "n_actions", "transition", "reward", "initial",
                 "terminal", "horizon", "discount"}
        unknown = set(doc) - known
        if unknown:
            raise MdpValidationError(f"unknown MDP keys: {sorted(unknown)}")
        n = int(doc["n_states"])
        return cls(
            n_states=n,
            n_actions=int(doc["n_actions"]),
            transition=np.array(doc["transition"], dtype=np.float64),
            reward=np.array(doc["reward"], dtype=np.float64),
            initial_dist=np.array(doc["initial"], dtype=np.float64),
            terminal=np.array(doc.get("terminal", [False] * n), dtype=bool),
            horizon=doc.get("horizon"),
            discount=doc.get("discount"),
        )

    def to_json(self) -> str:
        return json.dumps({
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "initial": self.initial_dist.tolist(),
            "terminal": self.terminal.astype(int).tolist(),
            "horizon": self.horizon,
            "discount": self.discount,
        })


@dataclass(frozen=True)
class StochasticTabularPolicy:
    """Tabular stochastic policy: ``probs[s, a]`` rows sum to one."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64))
        if self.probs.ndim != 2:
            raise MdpValidationError("policy probs must be a [s, a] table")
        _check_prob_rows(self.probs, "policy")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "StochasticTabularPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "StochasticTabularPolicy":
        logits = np.asarray(logits, dtype=np.float64)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return cls(e / e.sum(axis=1, keepdims=True))

    @classmethod
    def greedy(cls, actions: np.ndarray, n_actions: int) -> "StochasticTabularPolicy":
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)


@dataclass(frozen=True)
class DeterministicTabularActionPolicy:
    """One continuous action parameter per state."""

    action_param: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "action_param", np.asarray(self.action_param, dtype=np.float64))
        if not np.all(np.isfinite(self.action_param)):
            raise MdpValidationError("action parameters must be finite")


@dataclass
class Trajectory:
    states: list
    actions: list
    rewards: list
    next_states: list
    dones: list
    seed: int | None = None

    def __len__(self):
        return len(self.states)


def sample_transition(mdp: TabularMDP, s: int, a: int, rng: np.random.Generator):
    """Draw ``(next_state, reward, done)`` for one step from ``(s, a)``."""
    if not (0 <= s < mdp.n_states and 0 <= a < mdp.n_actions):
        raise IndexError(f"state/action ({s}, {a}) out of range")
    if mdp.terminal[s]:
        return s, 0.0, True
    s2 = int(rng.choice(mdp.n_states, p=mdp.transition[s, a]))
    return s2, float(mdp.reward[s, a]), bool(mdp.terminal[s2])


def rollout(mdp: TabularMDP, policy: StochasticTabularPolicy,
            rng: np.random.Generator, max_steps: int, seed: int | None = None) -> Trajectory:
    """Sample a trajectory; stops at a terminal state or after ``max_steps``."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if mdp.horizon is not None:
        max_steps = min(max_steps, mdp.horizon)
    traj = Trajectory([], [], [], [], [], seed=seed)
    s = int(rng.choice(mdp.n_states, p=mdp.initial_dist))
    for _ in range(max_steps):
        a = int(rng.choice(mdp.n_actions, p=policy.probs[s]))
        s2, r, done = sample_transition(mdp, s, a, rng)
        traj.states.append(s)
        traj.actions.append(a)
        traj.rewards.append(r)
        traj.next_states.append(s2)
        traj.dones.append(done)
        if done:
            break
        s = s2
    return traj


def trajectory_return(traj: Trajectory, discount: float = 1.0) -> float:
    """Discounted return sum_t discount^(t-1) * r_t."""
    if not (0.0 < discount <= 1.0):
        raise ValueError("discount must lie in (0, 1]")
    total = 0.0
    g = 1.0
    for r in traj.rewards:
        total += g * r
        g *= discount
    return total


def random_mdp(rng: np.random.Generator, n_states: int = 3, n_actions: int = 2,
               horizon: int | None = 3, discount: float | None = None,
               reward_scale: float = 1.0) -> TabularMDP:
    """Random dense MDP used by seeded oracle checks."""
    trans = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    reward = rng.normal(0.0, reward_scale, size=(n_states, n_actions))
    p1 = rng.dirichlet(np.ones(n_states))
    return TabularMDP(
        n_states=n_states, n_actions=n_actions, transition=trans,
        reward=reward, initial_dist=p1,
        terminal=np.zeros(n_states, dtype=bool),
        horizon=horizon, discount=discount,
    )
