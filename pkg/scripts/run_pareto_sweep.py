"""Pareto and balance checks of the Bayes policy over random small classes.

    python scripts/run_pareto_sweep.py --classes 20 --horizon 3
"""
import argparse

import numpy as np

from bayesmix import BayesAgent, Planning
from bayesmix.analysis import (balance_from_values, class_values, extract_policy_table,
                               random_class)
from bayesmix.valuation import enumerate_policies


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--classes", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=3)
    ap.add_argument("--seed", type=int, default=77)
    args = ap.parse_args()

    m = args.horizon
    print(f"{'class':>5} {'envs':>4} {'rivals':>7} {'dominated':>9} {'min delta':>11}")
    for i in range(args.classes):
        cls = random_class(np.random.default_rng([args.seed, i]), 2 + i % 2, 2, 2, 0.3 * (i % 3 == 0))
        subject = extract_policy_table(BayesAgent(cls, Planning.finite(m)), m, cls.percepts)
        caches = [{} for _ in cls.envs]
        sv = class_values(cls, subject, m, caches)
        n, dominated, worst = 0, False, np.inf
        for p in enumerate_policies(cls.n_actions, len(cls.percepts), m, percepts=cls.percepts):
            pv = class_values(cls, p, m, caches)
            dominated |= bool(np.all(pv >= sv - 1e-9) and np.any(pv > sv + 1e-9))
            worst = min(worst, balance_from_values(cls.weights, sv, pv).total)
            n += 1
        print(f"{i:>5} {len(cls):>4} {n:>7} {str(dominated):>9} {worst:11.2e}")


if __name__ == "__main__":
    main()
