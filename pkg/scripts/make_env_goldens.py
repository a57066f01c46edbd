"""Regenerate the golden rollout fixtures used by tests/test_envs.py."""
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "tests"))

from test_envs import FIXTURES, GOLDEN_ENVS, GOLDEN_SEEDS, golden_path, golden_rollout  # noqa: E402

from entropic_rl.environments import make_env  # noqa: E402


def main():
    FIXTURES.mkdir(exist_ok=True)
    for name in GOLDEN_ENVS:
        for seed in GOLDEN_SEEDS:
            rows = golden_rollout(make_env(name), seed)
            np.savetxt(golden_path(name, seed), rows, delimiter=",", fmt="%.17g")
            print(f"wrote {golden_path(name, seed)} ({rows.shape[0]} rows)")


if __name__ == "__main__":
    main()
