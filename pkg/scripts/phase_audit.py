"""Replay PACO and print the per-phase structural audit.

Example:
    python3 scripts/phase_audit.py --family plateau --T 100000 --noise zero
"""
import argparse

import numpy as np

from lipbandits.bandit import audit_phases, run_paco, run_paco_one_sided
from lipbandits.instances import NoiseModel, make_instance


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--family", default="cone")
    p.add_argument("--T", type=int, default=100000)
    p.add_argument("--noise", default="zero")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--one-sided", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    inst = make_instance(args.family)
    run = run_paco_one_sided if args.one_sided else run_paco
    tr = run(inst, NoiseModel(args.noise), args.T, delta=args.delta,
             rng=np.random.default_rng(args.seed))
    audits = {row["k"]: row for row in audit_phases(tr, inst, np.random.default_rng(1))}
    for s in tr.phase_summaries():
        print(s | audits.get(s["k"], {}))
    print(f"regret {tr.regret:.1f} over T={args.T}")


if __name__ == "__main__":
    main()
