"""Run one campaign per seed and print rolling success rates every 250 rounds.

Usage: python scripts/run_learning_curves.py scripts/configs/attack.cfg --seeds 0 1 2
"""

import argparse

import numpy as np

from fraudrla.harness import load_config, rolling_rate, run_attack


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--window", type=int, default=250)
    args = p.parse_args()

    curves = []
    for seed in args.seeds:
        r = run_attack(load_config(args.config, seed=seed))
        curves.append(rolling_rate(r.rewards, args.window))
        print(f"seed {seed}: {r.attacker} vs {r.engine_kind} [{r.setting}] checkpoints {r.checkpoints}")
    curve = np.mean(curves, axis=0)
    for t in range(args.window, len(curve) + 1, args.window):
        print(f"round {t:>5}: {curve[t - 1]:.3f}")


if __name__ == "__main__":
    main()
