"""Print CV-tuned classifier test metrics for each scenario and engine kind.

Usage: python scripts/run_classifier_table.py [--seeds 0 1 2] [--scenarios 1 2 3]
"""

import argparse
import time

import numpy as np

from fraudrla.harness import from_flat, trained_engine


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--scenarios", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--kinds", nargs="+", default=["forest", "network"])
    args = p.parse_args()

    print(f"{'scenario':>8} {'engine':>8} {'accuracy':>9} {'precision':>9} {'recall':>7} {'f1':>6} {'secs':>6}")
    for sc in args.scenarios:
        for kind in args.kinds:
            rows, t = [], time.perf_counter()
            for seed in args.seeds:
                metrics = trained_engine(from_flat({"data.scenario": sc, "engine.kind": kind, "seed": seed}))[4]
                rows.append([metrics["model"][k] for k in ("accuracy", "precision", "recall", "f1")])
            m = np.mean(rows, axis=0)
            secs = (time.perf_counter() - t) / len(args.seeds)
            print(f"{sc:>8} {kind:>8} {m[0]:>9.3f} {m[1]:>9.3f} {m[2]:>7.3f} {m[3]:>6.3f} {secs:>6.0f}")


if __name__ == "__main__":
    main()
