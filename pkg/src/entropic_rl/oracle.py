"""Exact solvers and gradient oracles for the entropic risk objective.

Finite-horizon tables are stage-indexed: values depend on the remaining
horizon, so ``v`` has shape ``(T+1, n_states)`` (``v[T] = 0``) and ``q``
has shape ``(T, n_states, n_actions)``. Discounted tables are stationary
with shapes ``(n_states,)`` and ``(n_states, n_actions)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .mdp import (
    BETA_FLOOR,
    DeterministicTabularActionPolicy,
    StochasticTabularPolicy,
    TabularMDP,
    is_risk_neutral,
)

FINITE_HORIZON = "finite-horizon"
DISCOUNTED = "discounted"


class SolverError(RuntimeError):
    """Fixed-point iteration failed to converge."""


class ExpOverflowError(FloatingPointError):
    """An exponential-domain table entry left the finite positive range."""

    def __init__(self, state: int, value: float):
        super().__init__(
            f"exponential value at state {state} is {value!r}; "
            "magnitude left the representable range"
        )
        self.state = state


class EnumerationBudgetError(RuntimeError):
    """Trajectory enumeration would exceed the configured budget."""


class ActionDomainError(ValueError):
    """A continuous action left the declared action interval."""


# ---------------------------------------------------------------------------
# Soft (log-domain) and exponential value solvers
# ---------------------------------------------------------------------------

@dataclass
class SoftValueTable:
    """Entropic-risk state and state-action values for a fixed policy."""

    v: np.ndarray
    q: np.ndarray
    beta: float
    backup_mode: str
    gamma: float | None = None


@dataclass
class ExpValueTable:
    """Exponential-domain counterparts z = exp(beta * value)."""

    z_v: np.ndarray
    z_q: np.ndarray
    beta: float
    backup_mode: str
    gamma: float | None = None


def _resolve_mode(mdp, mode, gamma):
    if mode == FINITE_HORIZON:
        if mdp.horizon is None:
            raise ValueError("finite-horizon solve requires mdp.horizon")
        return mdp.horizon, None
    if mode == DISCOUNTED:
        g = mdp.discount if gamma is None else gamma
        if g is None or not (0.0 < g < 1.0):
            raise ValueError("discounted solve requires discount in (0, 1)")
        return None, g
    raise ValueError(f"unknown backup mode {mode!r}")


def _neutral_values(mdp, policy, mode, gamma):
    """Risk-neutral policy evaluation (the beta -> 0 route)."""
    if mode == FINITE_HORIZON:
        T = mdp.horizon
        v = np.zeros((T + 1, mdp.n_states))
        q = np.zeros((T, mdp.n_states, mdp.n_actions))
        for t in range(T - 1, -1, -1):
            q[t] = mdp.reward + mdp.transition @ v[t + 1]
            v[t] = np.einsum("sa,sa->s", policy.probs, q[t])
        return v, q
    p_pi = np.einsum("sa,sab->sb", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    v = np.linalg.solve(np.eye(mdp.n_states) - gamma * p_pi, r_pi)
    q = mdp.reward + gamma * (mdp.transition @ v)
    return v, q


def soft_value_dp(mdp: TabularMDP, policy: StochasticTabularPolicy, beta: float,
                  mode: str = FINITE_HORIZON, gamma: float | None = None,
                  max_iter: int = 200_000, tol: float = 1e-13) -> SoftValueTable:
    """Exact soft values V^beta, Q^beta; all logs via log-sum-exp."""
    T, g = _resolve_mode(mdp, mode, gamma)
    if is_risk_neutral(beta):
        v, q = _neutral_values(mdp, policy, mode, g)
        return SoftValueTable(v=v, q=q, beta=beta, backup_mode=mode, gamma=g)

    if mode == FINITE_HORIZON:
        v = np.zeros((T + 1, mdp.n_states))
        q = np.zeros((T, mdp.n_states, mdp.n_actions))
        for t in range(T - 1, -1, -1):
            q[t] = mdp.reward + logsumexp(
                beta * v[t + 1][None, None, :], b=mdp.transition, axis=2) / beta
            v[t] = logsumexp(beta * q[t], b=policy.probs, axis=1) / beta
        return SoftValueTable(v=v, q=q, beta=beta, backup_mode=mode)

    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        q = mdp.reward + logsumexp(
            beta * g * v[None, None, :], b=mdp.transition, axis=2) / beta
        v_new = logsumexp(beta * q, b=policy.probs, axis=1) / beta
        resid = np.max(np.abs(v_new - v))
        v = v_new
        if resid < tol:
            return SoftValueTable(v=v, q=q, beta=beta, backup_mode=mode, gamma=g)
    raise SolverError(f"soft value iteration did not converge; residual {resid:.3e}")


def _check_exp_finite(z):
    # First index is the state for both (S,) and (S, A) tables.
    ok = np.isfinite(z) & (z > 0.0)
    if not np.all(ok):
        idx = np.argwhere(~ok)[0]
        raise ExpOverflowError(int(idx[0]), float(z[tuple(idx)]))


def exp_value_dp(mdp: TabularMDP, policy: StochasticTabularPolicy, beta: float,
                 mode: str = FINITE_HORIZON, gamma: float | None = None,
                 max_iter: int = 200_000, tol: float = 1e-13) -> ExpValueTable:
    """Exponential Bellman solve in the raw exp domain; overflow is observable."""
    T, g = _resolve_mode(mdp, mode, gamma)
    if is_risk_neutral(beta):
        v, q = _neutral_values(mdp, policy, mode, g)
        return ExpValueTable(z_v=np.exp(beta * v), z_q=np.exp(beta * q),
                             beta=beta, backup_mode=mode, gamma=g)
    e_br = np.exp(beta * mdp.reward)

    if mode == FINITE_HORIZON:
        z_v = np.ones((T + 1, mdp.n_states))
        z_q = np.ones((T, mdp.n_states, mdp.n_actions))
        for t in range(T - 1, -1, -1):
            z_q[t] = e_br * (mdp.transition @ z_v[t + 1])
            z_v[t] = np.einsum("sa,sa->s", policy.probs, z_q[t])
            _check_exp_finite(z_q[t])
            _check_exp_finite(z_v[t])
        return ExpValueTable(z_v=z_v, z_q=z_q, beta=beta, backup_mode=mode)

    z_v = np.ones(mdp.n_states)
    for _ in range(max_iter):
        z_q = e_br * (mdp.transition @ np.power(z_v, g))
        z_v_new = np.einsum("sa,sa->s", policy.probs, z_q)
        _check_exp_finite(z_q)
        _check_exp_finite(z_v_new)
        resid = np.max(np.abs(np.log(z_v_new) - np.log(z_v)))
        z_v = z_v_new
        if resid < tol:
            return ExpValueTable(z_v=z_v, z_q=z_q, beta=beta, backup_mode=mode, gamma=g)
    raise SolverError(f"exp value iteration did not converge; residual {resid:.3e}")


# ---------------------------------------------------------------------------
# Enumeration oracles
# ---------------------------------------------------------------------------

def return_distribution(mdp: TabularMDP, policy: StochasticTabularPolicy,
                        budget: int = 5_000_000):
    """Exact finite-horizon distribution over trajectory returns.

    Returns ``(log_probs, returns)`` arrays, one entry per trajectory
    prefix that either reaches the horizon or a terminal state.
    """
    if mdp.horizon is None:
        raise ValueError("enumeration requires a finite horizon")
    T = mdp.horizon
    est = mdp.n_states * (mdp.n_actions * mdp.n_states) ** T
    if est > budget:
        raise EnumerationBudgetError(
            f"enumeration would visit ~{est} paths, budget is {budget}")
    logps, rets = [], []
    logpi = np.log(np.where(policy.probs > 0, policy.probs, 1.0))
    logtr = np.log(np.where(mdp.transition > 0, mdp.transition, 1.0))

    def descend(s, t, logp, ret):
        if t == T or mdp.terminal[s]:
            logps.append(logp)
            rets.append(ret)
            return
        for a in range(mdp.n_actions):
            if policy.probs[s, a] == 0.0:
                continue
            lp_a = logp + logpi[s, a]
            r = mdp.reward[s, a]
            for s2 in range(mdp.n_states):
                if mdp.transition[s, a, s2] == 0.0:
                    continue
                descend(s2, t + 1, lp_a + logtr[s, a, s2], ret + r)

    for s0 in range(mdp.n_states):
        if mdp.initial_dist[s0] > 0.0:
            descend(s0, 0, np.log(mdp.initial_dist[s0]), 0.0)
    return np.array(logps), np.array(rets)


def entropic_risk_enumerate(mdp: TabularMDP, policy: StochasticTabularPolicy,
                            beta: float, budget: int = 5_000_000) -> float:
    """J^beta by full trajectory enumeration, in the log domain throughout."""
    logps, rets = return_distribution(mdp, policy, budget=budget)
    if is_risk_neutral(beta):
        return float(np.sum(np.exp(logps) * rets))
    return float(logsumexp(logps + beta * rets) / beta)


def taylor_gap(mdp: TabularMDP, policy: StochasticTabularPolicy, beta: float,
               budget: int = 5_000_000):
    """Both sides of J^beta ~ mean + (beta/2) * variance of the return."""
    logps, rets = return_distribution(mdp, policy, budget=budget)
    p = np.exp(logps)
    mean = float(np.sum(p * rets))
    var = float(np.sum(p * rets ** 2) - mean ** 2)
    if is_risk_neutral(beta):
        j = mean
    else:
        j = float(logsumexp(logps + beta * rets) / beta)
    return j, mean + 0.5 * beta * var


def entropic_objective(mdp: TabularMDP, policy: StochasticTabularPolicy,
                       beta: float, mode: str = FINITE_HORIZON,
                       gamma: float | None = None) -> float:
    """J^beta via the exact DP solve (independent of the enumeration route)."""
    table = soft_value_dp(mdp, policy, beta, mode=mode, gamma=gamma)
    v0 = table.v[0] if mode == FINITE_HORIZON else table.v
    if is_risk_neutral(beta):
        return float(mdp.initial_dist @ v0)
    return float(logsumexp(beta * v0, b=mdp.initial_dist) / beta)


# ---------------------------------------------------------------------------
# Exponential twisting
# ---------------------------------------------------------------------------

@dataclass
class TwistedModel:
    """Stage-indexed exponentially twisted dynamics, policy, and occupancy.

    ``p_star[t]``, ``pi_star[t]`` are the twisted kernels acting at stage
    ``t``; ``state_occupancy[t]`` is the twisted state distribution at stage
    ``t``; ``rho_star`` accumulates the occupancy over all stages including
    the post-horizon state (unnormalized, sums to T+1).
    """

    p_star: np.ndarray
    pi_star: np.ndarray
    p1_star: np.ndarray
    state_occupancy: np.ndarray
    rho_star: np.ndarray


def _normalized_exp(log_w, axis=-1):
    log_norm = logsumexp(log_w, axis=axis, keepdims=True)
    return np.exp(log_w - log_norm)


def twist(mdp: TabularMDP, policy: StochasticTabularPolicy,
          soft_values: SoftValueTable) -> TwistedModel:
    """Twisted model p* ~ p e^{beta V'}, pi* ~ pi e^{beta Q} (finite horizon)."""
    if soft_values.backup_mode != FINITE_HORIZON:
        raise ValueError("twisting is defined for finite-horizon tables")
    beta, v, q = soft_values.beta, soft_values.v, soft_values.q
    T = q.shape[0]
    with np.errstate(divide="ignore"):
        log_p = np.log(mdp.transition)
        log_pi = np.log(policy.probs)
        log_p1 = np.log(mdp.initial_dist)

    if is_risk_neutral(beta):
        p_star = np.broadcast_to(mdp.transition, (T,) + mdp.transition.shape).copy()
        pi_star = np.broadcast_to(policy.probs, (T,) + policy.probs.shape).copy()
        p1_star = mdp.initial_dist.copy()
    else:
        p_star = np.empty((T,) + mdp.transition.shape)
        pi_star = np.empty((T,) + policy.probs.shape)
        for t in range(T):
            p_star[t] = _normalized_exp(log_p + beta * v[t + 1][None, None, :])
            pi_star[t] = _normalized_exp(log_pi + beta * q[t])
        p1_star = _normalized_exp(log_p1 + beta * v[0])

    occ = np.empty((T, mdp.n_states))
    occ[0] = p1_star
    for t in range(T - 1):
        occ[t + 1] = np.einsum("s,sa,saz->z", occ[t], pi_star[t], p_star[t])
    final = np.einsum("s,sa,saz->z", occ[T - 1], pi_star[T - 1], p_star[T - 1])
    rho = occ.sum(axis=0) + final
    return TwistedModel(p_star=p_star, pi_star=pi_star, p1_star=p1_star,
                        state_occupancy=occ, rho_star=rho)


# ---------------------------------------------------------------------------
# Policy gradients: stochastic tabular policies
# ---------------------------------------------------------------------------

def _state_occupancy_plain(mdp, policy):
    """Untwisted stage occupancies under pi (risk-neutral weighting)."""
    T = mdp.horizon
    occ = np.empty((T, mdp.n_states))
    occ[0] = mdp.initial_dist
    kern = np.einsum("sa,saz->sz", policy.probs, mdp.transition)
    for t in range(T - 1):
        occ[t + 1] = occ[t] @ kern
    return occ


def risk_neutral_pg_exact(mdp: TabularMDP, logits: np.ndarray) -> np.ndarray:
    """Exact finite-horizon policy gradient of the expected return."""
    policy = StochasticTabularPolicy.from_logits(logits)
    table = soft_value_dp(mdp, policy, 0.0, mode=FINITE_HORIZON)
    occ = _state_occupancy_plain(mdp, policy)
    grad = np.zeros_like(policy.probs)
    for t in range(mdp.horizon):
        adv = table.q[t] - table.v[t][:, None]
        grad += occ[t][:, None] * policy.probs * adv
    return grad


def stochastic_pg_exact(mdp: TabularMDP, logits: np.ndarray, beta: float) -> np.ndarray:
    """Exact risk-sensitive stochastic policy gradient w.r.t. softmax logits."""
    if is_risk_neutral(beta):
        return risk_neutral_pg_exact(mdp, logits)
    policy = StochasticTabularPolicy.from_logits(logits)
    table = soft_value_dp(mdp, policy, beta, mode=FINITE_HORIZON)
    twisted = twist(mdp, policy, table)
    grad = np.zeros_like(policy.probs)
    for t in range(mdp.horizon):
        w = policy.probs * np.exp(beta * (table.q[t] - table.v[t][:, None]))
        row_sum = w.sum(axis=1, keepdims=True)
        grad += twisted.state_occupancy[t][:, None] * (w - policy.probs * row_sum) / beta
    return grad


def off_policy_grad_stoch(mdp: TabularMDP, policy: StochasticTabularPolicy,
                          beta: float, rho_b: np.ndarray) -> np.ndarray:
    """Off-policy gradient approximation for per-(s,a) probability parameters."""
    rho_b = np.asarray(rho_b, dtype=np.float64)
    if np.any(rho_b < 0) or abs(rho_b.sum() - 1.0) > 1e-9:
        raise ValueError("rho_b must be a distribution over states")
    table = soft_value_dp(mdp, policy, beta, mode=FINITE_HORIZON)
    if is_risk_neutral(beta):
        return rho_b[:, None] * table.q[0]
    return rho_b[:, None] * np.exp(beta * table.q[0]) / beta


# ---------------------------------------------------------------------------
# Finite-state continuous-action test MDP and deterministic gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteStateContinuousActionMDP:
    """Smooth finite-state MDP with one scalar action dimension.

    Transitions are softmax over per-(s, s') affine scores in the action;
    rewards are per-state quadratics. Both are analytically differentiable
    in the action.
    """

    score_slope: np.ndarray   # (S, S)
    score_offset: np.ndarray  # (S, S)
    reward_c0: np.ndarray     # (S,)
    reward_c1: np.ndarray     # (S,)
    reward_c2: np.ndarray     # (S,)
    initial_dist: np.ndarray  # (S,)
    horizon: int
    action_low: float = -2.0
    action_high: float = 2.0

    @property
    def n_states(self) -> int:
        return len(self.reward_c0)

    def check_actions(self, actions):
        actions = np.asarray(actions, dtype=np.float64)
        if np.any(actions < self.action_low) or np.any(actions > self.action_high):
            raise ActionDomainError(
                f"actions must lie in [{self.action_low}, {self.action_high}]")
        return actions

    def transition_matrix(self, actions):
        """Row s: distribution over s' when taking actions[s] in s."""
        actions = self.check_actions(actions)
        scores = self.score_slope * actions[:, None] + self.score_offset
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        return e / e.sum(axis=1, keepdims=True)

    def dtransition_da(self, actions):
        p = self.transition_matrix(actions)
        mean_slope = np.einsum("sz,sz->s", p, self.score_slope)
        return p * (self.score_slope - mean_slope[:, None])

    def rewards(self, actions):
        actions = self.check_actions(actions)
        return self.reward_c0 + self.reward_c1 * actions + self.reward_c2 * actions ** 2

    def drewards_da(self, actions):
        actions = self.check_actions(actions)
        return self.reward_c1 + 2.0 * self.reward_c2 * actions


def default_continuous_mdp(n_states: int = 4, horizon: int = 3) -> FiniteStateContinuousActionMDP:
    """Deterministic default instance (seeded for reproducibility)."""
    return random_continuous_mdp(np.random.default_rng(0), n_states, horizon)


def random_continuous_mdp(rng: np.random.Generator, n_states: int = 4,
                          horizon: int = 3) -> FiniteStateContinuousActionMDP:
    """Random smooth instance; rewards concave so improvement steps behave."""
    return FiniteStateContinuousActionMDP(
        score_slope=rng.normal(0.0, 0.3, size=(n_states, n_states)),
        score_offset=rng.normal(0.0, 1.0, size=(n_states, n_states)),
        reward_c0=rng.normal(0.0, 1.0, size=n_states),
        reward_c1=rng.normal(0.0, 0.5, size=n_states),
        reward_c2=-(0.3 + np.abs(rng.normal(0.0, 0.3, size=n_states))),
        initial_dist=rng.dirichlet(np.ones(n_states)),
        horizon=horizon,
    )


def _det_backward(cmdp: FiniteStateContinuousActionMDP, actions, beta: float):
    """Backward recursion for a fixed deterministic policy.

    Returns stage values ``v`` (T+1, S), action derivatives ``dq`` (T, S)
    of the stage Q at the policy's action, and the (twisted) step kernels
    ``kappa`` (T, S, S) used to propagate state occupancies.
    """
    actions = cmdp.check_actions(actions)
    T, S = cmdp.horizon, cmdp.n_states
    P = cmdp.transition_matrix(actions)
    dP = cmdp.dtransition_da(actions)
    r = cmdp.rewards(actions)
    dr = cmdp.drewards_da(actions)
    v = np.zeros((T + 1, S))
    dq = np.zeros((T, S))
    kappa = np.zeros((T, S, S))
    neutral = is_risk_neutral(beta)
    for t in range(T - 1, -1, -1):
        if neutral:
            cont = P @ v[t + 1]
            v[t] = r + cont
            dq[t] = dr + dP @ v[t + 1]
            kappa[t] = P
        else:
            u = beta * v[t + 1]
            m = u.max()
            ex = np.exp(u - m)
            den = P @ ex
            v[t] = r + (m + np.log(den)) / beta
            dq[t] = dr + (dP @ ex) / (beta * den)
            kappa[t] = P * ex[None, :] / den[:, None]
    return v, dq, kappa


def entropic_objective_det(cmdp: FiniteStateContinuousActionMDP,
                           policy: DeterministicTabularActionPolicy,
                           beta: float) -> float:
    v, _, _ = _det_backward(cmdp, policy.action_param, beta)
    if is_risk_neutral(beta):
        return float(cmdp.initial_dist @ v[0])
    return float(logsumexp(beta * v[0], b=cmdp.initial_dist) / beta)


def state_values_det(cmdp: FiniteStateContinuousActionMDP,
                     policy: DeterministicTabularActionPolicy,
                     beta: float) -> np.ndarray:
    """Per-state soft value V^beta(s) over the full horizon."""
    v, _, _ = _det_backward(cmdp, policy.action_param, beta)
    return v[0]


def deterministic_pg_exact(cmdp: FiniteStateContinuousActionMDP,
                          policy: DeterministicTabularActionPolicy,
                          beta: float) -> np.ndarray:
    """Exact risk-sensitive deterministic policy gradient (per-state params)."""
    theta = policy.action_param
    v, dq, kappa = _det_backward(cmdp, theta, beta)
    if is_risk_neutral(beta):
        occ = cmdp.initial_dist.copy()
    else:
        u = beta * v[0]
        occ = _normalized_exp(np.log(cmdp.initial_dist) + u)
    grad = np.zeros(cmdp.n_states)
    for t in range(cmdp.horizon):
        grad += occ * dq[t]
        occ = occ @ kappa[t]
    return grad


def off_policy_grad_det(cmdp: FiniteStateContinuousActionMDP,
                        policy: DeterministicTabularActionPolicy,
                        beta: float, rho_b: np.ndarray) -> np.ndarray:
    """Behavior-weighted gradient approximation (dropped-term variant)."""
    rho_b = np.asarray(rho_b, dtype=np.float64)
    if np.any(rho_b < 0) or abs(rho_b.sum() - 1.0) > 1e-9:
        raise ValueError("rho_b must be a distribution over states")
    _, dq, _ = _det_backward(cmdp, policy.action_param, beta)
    return rho_b * dq[0]


# ---------------------------------------------------------------------------
# Policy improvement checks
# ---------------------------------------------------------------------------

@dataclass
class ImprovementResult:
    passing_alpha: float | None
    deltas: dict
    gradient: np.ndarray

    @property
    def passed(self) -> bool:
        return self.passing_alpha is not None


def improvement_check_det(cmdp: FiniteStateContinuousActionMDP,
                          policy: DeterministicTabularActionPolicy,
                          beta: float, rho_b: np.ndarray,
                          alpha_schedule=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                          tol: float = 1e-12) -> ImprovementResult:
    """Smallest step size making V^beta improve at every state, if any."""
    rho_b = np.asarray(rho_b, dtype=np.float64)
    if np.any(rho_b <= 0):
        raise ValueError("rho_b must be strictly positive")
    g = off_policy_grad_det(cmdp, policy, beta, rho_b / rho_b.sum())
    v0 = state_values_det(cmdp, policy, beta)
    deltas = {}
    passing = None
    for alpha in sorted(alpha_schedule, reverse=True):
        theta2 = policy.action_param + alpha * g
        try:
            v1 = state_values_det(cmdp, DeterministicTabularActionPolicy(theta2), beta)
        except ActionDomainError:
            deltas[alpha] = None
            continue
        deltas[alpha] = v1 - v0
        if np.all(v1 - v0 >= -tol):
            passing = alpha
    return ImprovementResult(passing_alpha=passing, deltas=deltas, gradient=g)


def project_rows_to_simplex(mat: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    mat = np.asarray(mat, dtype=np.float64)
    out = np.empty_like(mat)
    for i, y in enumerate(mat):
        u = np.sort(y)[::-1]
        css = np.cumsum(u)
        ks = np.arange(1, len(y) + 1)
        cond = u + (1.0 - css) / ks > 0
        k = ks[cond][-1]
        tau = (css[k - 1] - 1.0) / k
        out[i] = np.maximum(y - tau, 0.0)
    return out


@dataclass
class StochImprovementResult:
    passing_alpha: float | None            # unprojected step stayed in simplex
    passing_alpha_projected: float | None  # improvement held after projection
    records: dict
    gradient: np.ndarray


def improvement_check_stoch(mdp: TabularMDP, policy: StochasticTabularPolicy,
                            beta: float, rho_b: np.ndarray,
                            alpha_schedule=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                            tol: float = 1e-12) -> StochImprovementResult:
    """Stochastic improvement step with per-(s,a) probability parameters.

    The raw step generally leaves the simplex (the gradient rows do not
    sum to zero), so both the projected outcome and the in-simplex flag of
    the raw step are recorded.
    """
    rho_b = np.asarray(rho_b, dtype=np.float64)
    if np.any(rho_b <= 0):
        raise ValueError("rho_b must be strictly positive")
    g = off_policy_grad_stoch(mdp, policy, beta, rho_b / rho_b.sum())
    v0 = soft_value_dp(mdp, policy, beta, mode=FINITE_HORIZON).v[0]
    records = {}
    passing = None
    passing_proj = None
    for alpha in sorted(alpha_schedule, reverse=True):
        raw = policy.probs + alpha * g
        in_simplex = bool(np.all(raw >= 0)
                          and np.all(np.abs(raw.sum(axis=1) - 1.0) <= 1e-9))
        projected = project_rows_to_simplex(raw)
        v1 = soft_value_dp(mdp, StochasticTabularPolicy(projected), beta,
                           mode=FINITE_HORIZON).v[0]
        improved = bool(np.all(v1 - v0 >= -tol))
        records[alpha] = {"raw_in_simplex": in_simplex, "improved": improved,
                          "delta_v": v1 - v0}
        if improved:
            passing_proj = alpha
            if in_simplex:
                passing = alpha
    return StochImprovementResult(passing_alpha=passing,
                                  passing_alpha_projected=passing_proj,
                                  records=records, gradient=g)


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

def finite_difference_gradient(fn, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function of a flat parameter array."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    flat = grad.ravel()
    th = theta.copy()
    tf = th.ravel()
    for i in range(tf.size):
        orig = tf[i]
        tf[i] = orig + h
        fp = fn(th)
        tf[i] = orig - h
        fm = fn(th)
        tf[i] = orig
        flat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(approx: np.ndarray, ref: np.ndarray) -> float:
    num = np.linalg.norm(np.asarray(approx) - np.asarray(ref))
    den = max(np.linalg.norm(np.asarray(ref)), 1e-300)
    return float(num / den)
