"""Median-over-seeds suite accuracy of ClusterP3S against the heuristic and random-cluster baselines."""
import argparse
import json
import time
from pathlib import Path

from clusterp3s.datasets import BUNDLED
from clusterp3s.experiments import compare_methods
from clusterp3s.search import SearchConfig

METHODS = ("heuristic", "clusterp3s", "randcluster", "kmeans-variant")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--datasets", nargs="+", default=["tic-tac-toe", "car-style", "planted-mixed"])
    ap.add_argument("--methods", nargs="+", default=list(METHODS))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--reward-learner", default="DecisionTree")
    ap.add_argument("--out", default="results/compare_baselines.json")
    args = ap.parse_args()

    cfg = SearchConfig(reward_learner=args.reward_learner)
    report = {}
    for name in args.datasets:
        t0 = time.perf_counter()
        scores = compare_methods(BUNDLED[name](), args.methods, args.seeds, cfg)
        report[name] = {m: s.to_dict() for m, s in scores.items()}
        cells = "  ".join(f"{m} {s.median_suite:.4f}" for m, s in scores.items())
        print(f"{name:14s} {cells}  ({time.perf_counter() - t0:.0f}s)", flush=True)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps({"config": cfg.to_dict(), "seeds": args.seeds, "results": report}, indent=2) + "\n")


if __name__ == "__main__":
    main()
