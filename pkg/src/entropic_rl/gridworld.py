"""Exponential Q-learning on a slippery cliff gridworld.

The learner keeps a table of exponential values Z(s, a) = e^{beta Q(s, a)}
and updates them with multiplicative Bellman targets. Greedy action
selection must account for the sign of beta: for beta < 0 the map
Q = (1/beta) log Z reverses order, so the greedy action minimizes Z.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMDP, MdpValidationError, is_risk_neutral

# Actions: up, left, down, right (dy, dx with y increasing upward).
ACTION_DELTAS = ((1, 0), (0, -1), (-1, 0), (0, 1))
ACTION_NAMES = ("up", "left", "down", "right")


@dataclass(frozen=True)
class GridWorldSpec:
    """Slippery gridworld with a penalty strip between start and goal.

    Coordinates are (x, y) with (0, 0) the bottom-left cell. A move into a
    cliff cell costs one extra forced step that collects
    ``step_reward + cliff_reward`` before the episode ends, so the total
    price of falling exceeds the bare cliff penalty; this keeps the
    magnitude of log-domain values above |beta * cliff_reward| for
    strongly risk-averse runs.
    """

    width: int = 10
    height: int = 10
    start: tuple = (0, 1)
    goal: tuple = (9, 0)
    cliff: tuple = tuple((x, 0) for x in range(1, 9))
    slip: float = 0.2
    step_reward: float = -1.0
    cliff_reward: float = -10.0
    discount: float = 0.85

    def __post_init__(self):
        if self.width < 2 or self.height < 1:
            raise MdpValidationError("grid must be at least 2x1")
        if not (0.0 <= self.slip < 1.0):
            raise MdpValidationError("slip must lie in [0, 1)")
        cells = set(self.cliff)
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if cell in cells:
                raise MdpValidationError(f"{name} cell {cell} lies in the cliff")
            if not self._in_bounds(cell):
                raise MdpValidationError(f"{name} cell {cell} out of bounds")
        for cell in self.cliff:
            if not self._in_bounds(cell):
                raise MdpValidationError(f"cliff cell {cell} out of bounds")

    def _in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def cell_index(self, cell) -> int:
        return cell[1] * self.width + cell[0]

    @property
    def n_cells(self) -> int:
        return self.width * self.height


def build_cliff_gridworld(spec: GridWorldSpec) -> TabularMDP:
    """Tabular MDP: grid cells plus one absorbing sink after the cliff.

    The chosen direction is taken with probability 1 - slip; the slip mass
    is split uniformly over the four directions. Walls clamp movement.
    Cliff cells forward deterministically to the sink while paying
    ``step_reward + cliff_reward``; goal and sink are terminal.
    """
    n_cells = spec.n_cells
    sink = n_cells
    n_states = n_cells + 1
    goal = spec.cell_index(spec.goal)
    cliff_idx = {spec.cell_index(c) for c in spec.cliff}

    trans = np.zeros((n_states, 4, n_states))
    reward = np.full((n_states, 4), spec.step_reward)
    terminal = np.zeros(n_states, dtype=bool)
    terminal[goal] = True
    terminal[sink] = True

    def moved(cell, delta):
        nx, ny = cell[0] + delta[1], cell[1] + delta[0]
        if 0 <= nx < spec.width and 0 <= ny < spec.height:
            return (nx, ny)
        return cell

    for y in range(spec.height):
        for x in range(spec.width):
            s = spec.cell_index((x, y))
            if s == goal:
                continue
            if s in cliff_idx:
                trans[s, :, sink] = 1.0
                reward[s, :] = spec.step_reward + spec.cliff_reward
                continue
            for a, delta in enumerate(ACTION_DELTAS):
                trans[s, a, spec.cell_index(moved((x, y), delta))] += 1.0 - spec.slip
                for d2 in ACTION_DELTAS:
                    trans[s, a, spec.cell_index(moved((x, y), d2))] += spec.slip / 4.0
    for t in (goal, sink):
        trans[t, :, t] = 1.0
        reward[t, :] = 0.0

    initial = np.zeros(n_states)
    initial[spec.cell_index(spec.start)] = 1.0
    return TabularMDP(n_states=n_states, n_actions=4, transition=trans,
                      reward=reward, initial_dist=initial, terminal=terminal,
                      discount=spec.discount)


class NonFiniteValueError(ValueError):
    """A value-table row required for action selection is not finite."""


@dataclass
class ExpQTable:
    """Exponential action-value table Z(s, a) = e^{beta Q(s, a)}."""

    z_q: np.ndarray
    beta: float
    visits: np.ndarray
    frozen: bool = False
    freeze_diagnostic: str = ""
    episode_returns: list = field(default_factory=list)

    @classmethod
    def ones(cls, n_states: int, n_actions: int, beta: float) -> "ExpQTable":
        return cls(z_q=np.ones((n_states, n_actions)), beta=beta,
                   visits=np.zeros((n_states, n_actions), dtype=np.int64))

    def log_values(self) -> np.ndarray:
        """log Z per (s, a); this is beta * Q."""
        with np.errstate(divide="ignore"):
            return np.log(self.z_q)

    def q_values(self) -> np.ndarray:
        return self.log_values() / self.beta


def greedy_action(table: ExpQTable, s: int, beta: float | None = None) -> int:
    """Sign-aware greedy action; ties break toward the lowest index."""
    beta = table.beta if beta is None else beta
    row = table.z_q[s]
    if not np.all(np.isfinite(row)):
        raise NonFiniteValueError(f"value row for state {s} is not finite: {row}")
    return int(np.argmax(row)) if beta > 0 else int(np.argmin(row))


def exp_q_learning(mdp: TabularMDP, beta: float, gamma: float, epsilon: float,
                   episodes: int, step_size: float, rng: np.random.Generator,
                   max_episode_steps: int = 400) -> ExpQTable:
    """Model-free learning of exponential values with epsilon-greedy rollouts.

    Update: Z(s,a) <- (1-alpha) Z(s,a) + alpha * target, with
    target = e^{beta r} at termination and e^{beta r} * Z(s', a*)^gamma
    otherwise, a* the sign-aware greedy action at s'. A non-finite target
    freezes the table (no further updates) and records a diagnostic instead
    of raising -- divergence is an observable outcome, not a crash.
    """
    if is_risk_neutral(beta):
        raise ValueError("beta is below the risk-neutral floor; use a plain learner")
    table = ExpQTable.ones(mdp.n_states, mdp.n_actions, beta)
    start_states = np.flatnonzero(mdp.initial_dist)
    for ep in range(episodes):
        s = int(rng.choice(start_states, p=mdp.initial_dist[start_states]))
        ep_return = 0.0
        for _ in range(max_episode_steps):
            if rng.random() < epsilon:
                a = int(rng.integers(mdp.n_actions))
            else:
                a = greedy_action(table, s)
            s2 = int(rng.choice(mdp.n_states, p=mdp.transition[s, a]))
            r = float(mdp.reward[s, a])
            done = bool(mdp.terminal[s2])
            ep_return += r
            if not table.frozen:
                if done:
                    target = np.exp(beta * r)
                else:
                    a2 = greedy_action(table, s2)
                    target = np.exp(beta * r) * table.z_q[s2, a2] ** gamma
                if not np.isfinite(target):
                    table.frozen = True
                    table.freeze_diagnostic = (
                        f"non-finite target at episode {ep}, state {s}, "
                        f"action {a}: {target!r}")
                else:
                    table.z_q[s, a] += step_size * (target - table.z_q[s, a])
                    table.visits[s, a] += 1
            if done:
                break
            s = s2
        table.episode_returns.append(ep_return)
    return table


def greedy_policy_matrix(mdp: TabularMDP, table: ExpQTable) -> np.ndarray:
    """Deterministic greedy policy as a one-hot [s, a] table."""
    probs = np.zeros((mdp.n_states, mdp.n_actions))
    for s in range(mdp.n_states):
        probs[s, greedy_action(table, s)] = 1.0
    return probs


def exact_absorption(mdp: TabularMDP, policy_probs: np.ndarray):
    """Absorption probabilities and expected steps under a fixed policy.

    Returns (absorb[(S_terminal,) per transient start], expected_steps),
    as dicts keyed by terminal state plus a vector of expected path
    lengths from each transient state. Uses the standard fundamental
    matrix of the induced chain.
    """
    p_pol = np.einsum("sa,sat->st", policy_probs, mdp.transition)
    transient = np.flatnonzero(~mdp.terminal)
    absorbing = np.flatnonzero(mdp.terminal)
    q = p_pol[np.ix_(transient, transient)]
    r = p_pol[np.ix_(transient, absorbing)]
    n = np.linalg.solve(np.eye(len(transient)) - q, np.eye(len(transient)))
    b = n @ r
    steps = n.sum(axis=1)
    absorb = {int(t): b[:, j] for j, t in enumerate(absorbing)}
    return absorb, steps, transient


def policy_risk_profile(mdp: TabularMDP, table: ExpQTable, beta: float,
                        rollouts: int, rng: np.random.Generator,
                        max_steps: int = 400):
    """Monte Carlo greedy-policy evaluation cross-checked by exact absorption.

    Returns a dict with goal_rate, cliff_rate, mean_path_length (Monte
    Carlo) and exact_goal_rate, exact_cliff_rate, exact_mean_path_length
    from the linear absorption solve. The sink state (highest index) is
    the post-cliff absorber; any other terminal is counted as goal.
    """
    sink = mdp.n_states - 1
    probs = greedy_policy_matrix(mdp, table)
    goals = cliffs = 0
    lengths = []
    start_states = np.flatnonzero(mdp.initial_dist)
    for _ in range(rollouts):
        s = int(rng.choice(start_states, p=mdp.initial_dist[start_states]))
        for t in range(max_steps):
            a = int(np.argmax(probs[s]))
            s = int(rng.choice(mdp.n_states, p=mdp.transition[s, a]))
            if mdp.terminal[s]:
                lengths.append(t + 1)
                if s == sink:
                    cliffs += 1
                else:
                    goals += 1
                break

    absorb, steps, transient = exact_absorption(mdp, probs)
    start_w = mdp.initial_dist[transient]
    start_w = start_w / start_w.sum()
    exact_cliff = float(start_w @ absorb[sink]) if sink in absorb else 0.0
    exact_goal = sum(float(start_w @ v) for t, v in absorb.items() if t != sink)
    return {
        "goal_rate": goals / rollouts,
        "cliff_rate": cliffs / rollouts,
        "mean_path_length": float(np.mean(lengths)) if lengths else float(max_steps),
        "exact_goal_rate": exact_goal,
        "exact_cliff_rate": exact_cliff,
        "exact_mean_path_length": float(start_w @ steps),
        "completed": len(lengths),
    }


def log_value_grid(spec: GridWorldSpec, table: ExpQTable) -> np.ndarray:
    """Per-cell max-over-actions log Z, shaped (height, width), row 0 at top."""
    logs = table.log_values()[:spec.n_cells]
    best = logs.max(axis=1) if table.beta > 0 else logs.min(axis=1)
    return best.reshape(spec.height, spec.width)[::-1]
