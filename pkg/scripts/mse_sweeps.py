#!/usr/bin/env python3
"""MSE versus displacement ratio and versus NER, written as long-format CSV.

    python3 scripts/mse_sweeps.py --out results/ [--trials 200] [--n 10000]

Full-scale settings (M = 1e4 trials, N = 1e5 shots) are available with
--full, which takes hours on one core.
"""
from __future__ import annotations

import argparse
import logging
from pathlib import Path

import numpy as np

from stokescov.bench import TrialConfig, sweep, sweep_csv
from stokescov.sampler import SeedSpec

log = logging.getLogger("mse_sweeps")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--full", action="store_true", help="full-scale M=1e4, N=1e5")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.full:
        args.trials, args.n = 10_000, 100_000

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gammas = np.round(np.linspace(0.0, 1.0, 11), 3).tolist()
    deltas = np.logspace(-1, 3, 9).tolist()

    # left panel: fixed NER, varying displacement ratio
    for delta in (1.0, 10.0):
        cfg = TrialConfig(delta=delta, trials=args.trials, n_states=args.n, seed=SeedSpec(args.seed))
        path = out / f"sweep_gamma_delta{delta:g}.csv"
        path.write_text(sweep_csv(sweep(cfg, "gamma", gammas)))
        log.info("wrote %s", path)

    # right panel: varying NER for a displaced and a displaced+squeezed reference
    for gamma in (1.0, 0.5):
        cfg = TrialConfig(gamma=gamma, trials=args.trials, n_states=args.n, seed=SeedSpec(args.seed, 100))
        path = out / f"sweep_delta_gamma{gamma:g}.csv"
        path.write_text(sweep_csv(sweep(cfg, "delta", deltas)))
        log.info("wrote %s", path)


if __name__ == "__main__":
    main()
