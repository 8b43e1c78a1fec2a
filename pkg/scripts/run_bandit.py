"""Bayes agent on a two-hypothesis bandit: posterior concentration and reward.

    python scripts/run_bandit.py --seeds 20 --cycles 200
"""
import argparse

import numpy as np

from bayesmix import BayesAgent, DiscountSequence, Planning
from bayesmix.analysis import martingale_trace
from bayesmix.classfile import parse_class_file


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--class", dest="cls", default="configs/mirror_bandits.json")
    ap.add_argument("--truth", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--cycles", type=int, default=200)
    ap.add_argument("--eps", type=float, default=0.5)
    args = ap.parse_args()

    cls = parse_class_file(args.cls)
    planning = Planning.discounted(DiscountSequence.quadratic(), args.eps)
    late, post, ok = [], [], 0
    for seed in range(args.seeds):
        trace = martingale_trace(cls, args.truth, BayesAgent(cls, planning), args.cycles,
                                 np.random.default_rng([9, seed]))
        rewards = [x.reward for _, x in trace.history]
        late.append(np.mean(rewards[len(rewards) // 2:]))
        post.append(trace.final_posterior[args.truth])
        ok += trace.ok
    print(f"mean reward, second half : {np.mean(late):.4f}")
    print(f"posterior on truth       : min {np.min(post):.4f}, median {np.median(post):.4f}")
    print(f"supermartingale holds    : {ok}/{args.seeds} runs")


if __name__ == "__main__":
    main()
