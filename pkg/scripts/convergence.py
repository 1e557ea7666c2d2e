#!/usr/bin/env python3
"""Single-experiment estimates of all five parameters as shots accumulate."""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from stokescov.bench import TrialConfig, convergence_study
from stokescov.sampler import SeedSpec


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/convergence.csv")
    ap.add_argument("--delta", type=float, default=10.0)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-max", type=float, default=1e6)
    args = ap.parse_args()

    ns = np.unique(np.logspace(2, np.log10(args.n_max), 25).astype(int)).tolist()
    rep = convergence_study(TrialConfig(delta=args.delta, gamma=args.gamma, seed=SeedSpec(args.seed)), ns)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(rep.to_csv())
    for name, row in rep.at(ns[-1]).items():
        print(f"{name:>5} = {row.estimate:10.4f} +- {row.stderr:.4f}   (truth {row.truth:g})")


if __name__ == "__main__":
    main()
