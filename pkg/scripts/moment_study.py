"""Sup-moment and exponential-moment estimates at 10^3 and 10^4 paths."""

from __future__ import annotations

import argparse

from youngint.experiments import harness
from youngint.experiments.config import ExperimentConfig, make_field


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=12345)
    parser.add_argument("--field", default="bounded_sine")
    parser.add_argument("--gamma", type=float, default=1.0)
    args = parser.parse_args()
    cfg = ExperimentConfig(seed=args.seed, gamma=args.gamma)
    sigma = make_field(args.field)
    for n in (1_000, 10_000):
        sample = harness.simulate_sups(sigma, cfg.x0, cfg, n)
        for p in (2.0, 4.0, 6.0):
            e = harness.moment_estimate(sample, p, cfg)
            print(f"n={n:6d} p={p:g}  {e.point_estimate:.5g}  [{e.ci_low:.5g}, {e.ci_high:.5g}]")
        if sigma.meta.sup_f is not None:
            e = harness.mc_exp_moments(sigma, cfg.x0, cfg, n).estimate
            print(f"n={n:6d} exp γ={cfg.gamma:g}  {e.point_estimate:.5g}  [{e.ci_low:.5g}, {e.ci_high:.5g}]")


if __name__ == "__main__":
    main()
