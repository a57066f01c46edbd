"""Train rsEAC on a risky continuous-control environment across seeds.

Writes per-seed metrics CSVs plus an aggregate mean/std CSV, and prints
the final risky-region visit rate per beta -- the ordering
visit(beta < 0) < visit(beta > 0) is the headline risk result.
"""
import argparse

from entropic_rl.harness import ExperimentConfig, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env", default="pointmass-risky",
                        choices=["pointmass-risky", "pendulum-risky",
                                 "bandit-risky"])
    parser.add_argument("--betas", type=float, nargs="+", default=[-1.0, 1.0])
    parser.add_argument("--steps", type=int, default=100_000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    parser.add_argument("--out", default="results/rseac")
    args = parser.parse_args()

    for beta in args.betas:
        config = ExperimentConfig(
            kind="rseac", env=args.env, beta=beta, steps=args.steps,
            seeds=tuple(args.seeds), hidden=tuple(args.hidden),
            batch_size=128, warmup=1000, buffer_capacity=100_000,
            eval_every=10_000, out=args.out)
        status = run(config)
        print(f"beta={beta:+.2f} -> exit status {status}")


if __name__ == "__main__":
    main()
