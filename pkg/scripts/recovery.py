"""Fit the logistic-regression configuration to synthetic PFA data and compare
the learned win/fail slopes with the generating ones.

    python3 scripts/recovery.py --students 2000 --steps 50 --skills 10 --out recovery.csv
"""
import argparse
import csv
import time

import numpy as np

from knowtrace.data import split_folds
from knowtrace.evaluation import auc, predict_students
from knowtrace.model import ModelSpec
from knowtrace.synthetic import SyntheticSpec, generate, true_probabilities
from knowtrace.training import TrainConfig, fit


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--students", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--items", type=int, default=50)
    ap.add_argument("--skills", type=int, default=10)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--out", help="optional CSV of learned vs true slopes")
    args = ap.parse_args()

    t0 = time.perf_counter()
    ds, truth = generate(SyntheticSpec(kind="pfa", num_students=args.students, num_items=args.items,
                                       num_skills=args.skills, min_length=args.steps, max_length=args.steps,
                                       seed=args.seed))
    folds = split_folds(ds, 5, seed=0)
    test = ds.subset(folds.members(0))
    train = ds.subset(s.student for s in ds.sequences if folds.fold_of_student[s.student] != 0)
    model, trace = fit(ModelSpec.parse("none", "iswf d'=1"), train, TrainConfig(epochs=args.epochs))

    labels = np.concatenate([s.outcomes for s in test.sequences])
    print(f"train loss {trace[0]:.4f} -> {trace[-1]:.4f}")
    print(f"test AUC: learned {auc(predict_students(model, test.sequences)):.4f}, "
          f"generating {auc(labels, np.concatenate(true_probabilities(ds, truth, test.sequences))):.4f}")
    names = ds.skills.names
    rows = []
    for param in ("gamma", "delta"):
        true = np.array([truth[param][k] for k in names])
        print(f"r({param}) = {np.corrcoef(model.params[param], true)[0, 1]:.3f}")
        rows += [(param, k, t, l) for k, t, l in zip(names, true, model.params[param])]
    both = np.array([r[2:] for r in rows])
    print(f"r(gamma and delta pooled) = {np.corrcoef(both[:, 0], both[:, 1])[0, 1]:.3f}")
    print(f"{time.perf_counter() - t0:.1f} s")
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["parameter", "skill", "true", "learned"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
