"""Fit regret exponents for one algorithm/instance pair over a horizon grid.

Example:
    python3 scripts/rate_sweep.py --family plateau --algorithm paco --seeds 10
"""
import argparse
import json
import time

from lipbandits.analysis import fit_exponent
from lipbandits.config import parse_config
from lipbandits.harness import regret_table


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--family", default="plateau")
    p.add_argument("--algorithm", default="paco")
    p.add_argument("--horizons", default="1000, 10000, 100000, 1000000")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--noise", default="gaussian_unit")
    p.add_argument("--extra", action="append", default=[], help="section.key=value")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    sections = {"experiment": [f"family = {args.family}", f"algorithm = {args.algorithm}",
                               f"horizons = {args.horizons}", f"noise = {args.noise}",
                               "seeds = " + ", ".join(str(s) for s in range(args.seeds))]}
    for item in args.extra:
        key, value = item.split("=", 1)
        sec, name = key.split(".", 1)
        sections.setdefault(sec, []).append(f"{name} = {value}")
    text = "\n".join(f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items())
    cfg = parse_config(text)
    t0 = time.time()
    table = regret_table(cfg, args.workers)
    fit = fit_exponent(cfg.horizons, table)
    print(json.dumps({"family": args.family, "algorithm": args.algorithm,
                      "mean_regret": fit.means, "slope": fit.slope,
                      "ci90": [fit.ci_low, fit.ci_high], "seconds": round(time.time() - t0, 1)},
                     indent=2))


if __name__ == "__main__":
    main()
