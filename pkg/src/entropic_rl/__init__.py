"""Risk-sensitive RL toolkit built around the entropic risk measure.

Modules:
    mdp          -- finite tabular MDPs, policies, rollouts
    oracle       -- exact solvers, twisted distributions, exact policy gradients
    gridworld    -- exponential Q-learning on the stochastic cliff gridworld
    nets         -- dense nets with manual forward/backward, Adam, soft updates
    critic       -- stabilized exponential-TD critic and baselines
    rseac        -- risk-sensitive exponential actor-critic
    environments -- desk-scale discrete/continuous environments
    harness      -- experiment configs, metric logs, seed fan-out
"""

__version__ = "0.1.0"
