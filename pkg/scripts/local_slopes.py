"""Decade-by-decade regret slopes, showing how far each run is from its asymptotic rate.

Example:
    python3 scripts/local_slopes.py --family plateau --algorithm paco --max-exp 6
"""
import argparse

import numpy as np

from lipbandits.config import parse_config
from lipbandits.harness import execute


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--family", default="plateau")
    p.add_argument("--algorithm", default="paco")
    p.add_argument("--max-exp", type=int, default=6)
    p.add_argument("--seeds", type=int, default=3)
    args = p.parse_args()
    T = 10 ** args.max_exp
    cfg = parse_config(f"[experiment]\nfamily = {args.family}\nalgorithm = {args.algorithm}\n"
                       f"horizons = {T}\nseeds = " + ", ".join(map(str, range(args.seeds))))
    # one long run per seed; regret at 10^j read off the cumulative curve
    curves = np.array([execute(cfg, T, s).cumulative_regret() for s in cfg.seeds])
    marks = [10 ** j for j in range(2, args.max_exp + 1)]
    means = [curves[:, m - 1].mean() for m in marks]
    print(f"{'T':>10} {'regret':>12} {'local slope':>12}")
    for i, (m, r) in enumerate(zip(marks, means)):
        slope = "" if i == 0 else f"{np.log10(r / means[i - 1]):.3f}"
        print(f"{m:>10} {r:>12.1f} {slope:>12}")


if __name__ == "__main__":
    main()
