"""Riemann-Stieltjes vs fractional-representation campaign at n = 2^12."""

from __future__ import annotations

import argparse
import json

from youngint.experiments import harness
from youngint.experiments.config import ExperimentConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--n-pairs", type=int, default=50)
    parser.add_argument("--n-steps", type=int, default=4096)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    cfg = ExperimentConfig(seed=args.seed, n_pairs=args.n_pairs, n_steps=args.n_steps, threads=args.threads)
    print(json.dumps(harness.run_crossval(cfg)["summary"], indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
