"""LR (iswf d'=1) against PFA (swf d'=1) on a random student subsample.

Point ``--data`` at any long-format log; without it a large synthetic
log with item effects is generated.
"""
import argparse

import numpy as np

from knowtrace.data import load_dataset
from knowtrace.evaluation import cross_validate
from knowtrace.model import ModelSpec
from knowtrace.synthetic import SyntheticSpec, generate
from knowtrace.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data")
    ap.add_argument("--fraction", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    if args.data:
        full = load_dataset(args.data)
    else:
        full, _ = generate(SyntheticSpec(kind="mixed", num_students=10000, num_items=200, num_skills=20,
                                         min_length=5, max_length=60, multi_skill_prob=0.2, seed=args.seed))
    rng = np.random.default_rng(args.seed)
    n = max(5, int(round(full.num_students * args.fraction)))
    ds = full.subset(rng.choice(full.num_students, size=n, replace=False).tolist())
    print(f"{ds.num_students} students, {ds.num_interactions} interactions")
    for label, dec in (("LR", "iswf d'=1"), ("PFA", "swf d'=1")):
        r = cross_validate(ModelSpec.parse("none", dec), ds, 5, TrainConfig())
        print(f"{label:4s} {dec:10s} ACC {r.acc:.3f} AUC {r.auc:.3f}")


if __name__ == "__main__":
    main()
