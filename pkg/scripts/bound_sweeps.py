"""Run the three bound-transfer sweeps and print their summaries as JSON."""

from __future__ import annotations

import argparse
import json
from dataclasses import replace

from youngint.experiments import harness
from youngint.experiments.config import ExperimentConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    base = ExperimentConfig(seed=args.seed, threads=args.threads)
    sizes = {"bounded_24": (100, 100), "linear_growth_25": (100, 100), "stability_32": (50, 50)}
    for kind, (n_train, n_holdout) in sizes.items():
        cfg = replace(base, kind=kind, n_train=n_train, n_holdout=n_holdout)
        print(json.dumps(harness.run_bound_sweep(kind, cfg)["summary"], sort_keys=True))


if __name__ == "__main__":
    main()
