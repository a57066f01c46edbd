"""Compare critic training stability on the pole-balancing task.

Trains the stabilized log-domain critic, the raw exponential-domain
baseline, and the risk-neutral TD baseline, and writes one metrics CSV
per (mode, beta) pair.
"""
import argparse
import csv
import os

import numpy as np

from entropic_rl.critic import CriticTrainConfig, train_discrete_critic
from entropic_rl.environments import CartPoleEnv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--betas", type=float, nargs="+",
                        default=[-1.0, -0.1, 0.1, 1.0])
    parser.add_argument("--modes", nargs="+",
                        default=["stabilized", "unstable", "risk-neutral"])
    parser.add_argument("--steps", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    parser.add_argument("--out", default="results/critic")
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    config = CriticTrainConfig(hidden=tuple(args.hidden), batch_size=128,
                               warmup=1000, eval_every=5000, eval_episodes=10)
    for mode in args.modes:
        betas = args.betas if mode != "risk-neutral" else [0.0]
        for beta in betas:
            env = CartPoleEnv()
            rng = np.random.default_rng(args.seed)
            log = train_discrete_critic(env, mode, beta, args.steps,
                                        config, rng)
            if log.records:
                final = log.records[-1]
                print(f"{mode:13s} beta={beta:+.2f}  return={final[1]:7.1f}  "
                      f"init_value={final[3]:9.2f}  grad_log10={final[4]:6.2f}")
            else:
                print(f"{mode:13s} beta={beta:+.2f}  aborted={log.aborted} "
                      f"({log.abort_reason or 'no evaluations recorded'})")
            log.to_csv(os.path.join(args.out, f"{mode}_beta{beta}.csv"))
            if mode == "stabilized":
                write_stabilization_report(
                    log.extra["reports"],
                    os.path.join(args.out,
                                 f"stabilization_report_beta{beta}.csv"))


def write_stabilization_report(reports, path):
    """Mini-batch stabilization samples in the plotting CSV schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "m_minus_z", "clipped_exponent"])
        for rep in reports:
            for m, d, c in zip(rep.m, rep.m - rep.z, rep.clipped_exponent):
                writer.writerow([repr(float(m)), repr(float(d)),
                                 repr(float(c))])


if __name__ == "__main__":
    main()
