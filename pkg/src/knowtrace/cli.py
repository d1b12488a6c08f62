"""Command-line entry point: ``knowtrace {run,generate,export,metrics,features}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigValidationError, load_config
from .counters import design_matrix
from .data import load_dataset, write_interactions
from .evaluation import PredictionLog, UndefinedMetricError, accuracy, auc
from .experiment import export_parameters, run_experiment
from .synthetic import generate, load_spec, write_truth
from .training import CheckpointFormatError


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigValidationError as e:
        print(e, file=sys.stderr)
        return 2
    out = args.out or config.output
    if out is None:
        print("no output directory: pass --out or set 'output' in the config", file=sys.stderr)
        return 2
    reports, status = run_experiment(config, out, args.workers)
    print((Path(out) / "results.txt").read_text(encoding="utf-8"), end="")
    return status


def cmd_generate(args) -> int:
    spec = load_spec(args.spec)
    dataset, truth = generate(spec)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="") as f:
        write_interactions(dataset, f)
    write_truth(truth, out.with_suffix(".truth.json"))
    print(f"wrote {dataset.num_interactions} interactions to {out}")
    return 0


def cmd_export(args) -> int:
    try:
        paths = export_parameters(args.checkpoint, args.out)
    except CheckpointFormatError as e:
        print(e, file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


def cmd_metrics(args) -> int:
    with open(args.predictions, encoding="utf-8", newline="") as f:
        log = PredictionLog.from_csv(f)
    with open(args.predictions, encoding="utf-8", newline="") as f:
        folds = [r.get("fold") for r in csv.DictReader(f)]

    def line(name, labels, preds):
        try:
            a = f"{auc(labels, preds):.6f}"
        except UndefinedMetricError:
            a = "undefined"
        print(f"{name:>8}  rows {len(labels):>8}  ACC {accuracy(labels, preds):.6f}  AUC {a}")

    if all(f is not None for f in folds):
        folds = np.array(folds)
        for f in sorted(set(folds), key=lambda x: int(x)):
            sel = folds == f
            line(f"fold {f}", log.label[sel], log.prediction[sel])
    line("pooled", log.label, log.prediction)
    return 0


def cmd_features(args) -> int:
    dataset = load_dataset(args.data, args.format, args.qmatrix)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["row", "col", "value"])
        for r, c, v in design_matrix(dataset.sequences, dataset.qmatrix, args.metadata):
            w.writerow([r, c, repr(v)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knowtrace", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="cross-validate a model grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="write a synthetic long-format dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("export", help="dump decoder parameters from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("metrics", help="recompute ACC/AUC from a prediction log")
    p.add_argument("--predictions", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("features", help="export the sparse design matrix as row,col,value triplets")
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="long", choices=("long", "wide"))
    p.add_argument("--qmatrix")
    p.add_argument("--metadata", default="iswf")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
