"""Mean limit distances at the cutoff under scaled flows.

Shows how the stationary spread depends on the limit-order and cancellation
rates, for diagnosing calibration gaps.

    python scripts/spread_sensitivity.py --runs 1000
"""

import argparse
from dataclasses import replace

from sparselob.config import load_config
from sparselob.engine import run_monte_carlo


def variants(p):
    a = p.ask
    yield "reference", p
    yield "limit rate / 10", p.replace_blocks(limit=replace(a.limit, lambda_bar=a.limit.lambda_bar / 10))
    yield "cancel rate x 5", p.replace_blocks(cancel=replace(a.cancel, lambda_bar=a.cancel.lambda_bar * 5))
    yield "distance rate A / 10", p.replace_blocks(limit=replace(a.limit, A=a.limit.A / 10))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    c = load_config(args.config)
    for name, params in variants(c.params):
        ens = run_monte_carlo(replace(c, params=params), args.runs, workers=args.workers)
        means = [ens.limit_distances(k, c.cutoff_time).mean() for k in (1, 2, 3)]
        print(f"{name:22s} " + "  ".join(f"k={k}: {m:7.2f}" for k, m in zip((1, 2, 3), means)))


if __name__ == "__main__":
    main()
