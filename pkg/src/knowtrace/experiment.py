"""Grid runs, result tables and parameter export."""
from __future__ import annotations

import csv
import json
import logging
import re
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .data import Dataset, load_dataset
from .evaluation import MetricReport, PredictionLog, cross_validate
from .training import load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

RESULTS_HEADER = ["model", "encoder", "decoder", "fold", "acc", "auc"]


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-").lower()


def entry_slug(index: int, report: MetricReport) -> str:
    s = report.spec
    return f"{index:02d}_{_slug(s.name or 'model')}_{_slug(s.encoder_label)}_{_slug(s.decoder_label)}"


def results_rows(reports: list[MetricReport]) -> list[list[str]]:
    rows = []
    for r in reports:
        label = [r.spec.name, r.spec.encoder_label, r.spec.decoder_label]
        for f in r.folds:
            rows.append(label + [str(f.fold), _fmt(f.acc), _fmt(f.auc)])
        rows.append(label + ["mean", _fmt(r.acc), _fmt(r.auc)])
    return rows


def write_results_csv(reports: list[MetricReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        w.writerows(results_rows(reports))


def format_table(reports: list[MetricReport]) -> str:
    """Plain-text table with the Model / Encoder / Decoder / ACC / AUC columns."""
    head = ["Model", "Encoder", "Decoder", "ACC", "AUC"]
    body = [[r.spec.name, r.spec.encoder_label, r.spec.decoder_label,
             "-" if r.acc is None else f"{r.acc:.3f}", "-" if r.auc is None else f"{r.auc:.3f}"]
            for r in reports]
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [head] + body]
    return "\n".join(lines) + "\n"


def model_vocab(dataset: Dataset, spec) -> dict:
    skills = dataset.with_combined_skills().skills if spec.combined_skills else dataset.skills
    return {"items": list(dataset.items.names), "skills": list(skills.names)}


def run_experiment(config: ExperimentConfig, out_dir, workers: int | None = None) -> tuple[list[MetricReport], int]:
    """Cross-validate every grid entry; write results, checkpoints and prediction logs.

    Returns the reports and an exit status (1 if any entry failed).
    """
    out = Path(out_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "predictions").mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(config.dataset, config.format, config.qmatrix)
    log.info("dataset: %d students, %d items, %d skills, %d interactions", dataset.num_students,
             dataset.num_items, dataset.num_skills, dataset.num_interactions)
    workers = config.workers if workers is None else workers

    reports = []
    for i, spec in enumerate(config.grid):
        log.info("[%d/%d] %s | %s | %s", i + 1, len(config.grid), spec.name, spec.encoder_label, spec.decoder_label)
        report = cross_validate(spec, dataset, config.folds, config.train, workers=workers, keep_models=True)
        reports.append(report)
        slug = entry_slug(i, report)
        for f in report.folds:
            if f.error:
                log.error("%s fold %d: %s", slug, f.fold, f.error)
                continue
            save_checkpoint(out / "checkpoints" / f"{slug}_fold{f.fold}.npz", f.model, config.train,
                            model_vocab(dataset, spec))
            f.model = None
        logs = [f.log for f in report.folds if f.log is not None]
        if logs:
            folds = np.concatenate([np.full(len(f.log), f.fold) for f in report.folds if f.log is not None])
            with open(out / "predictions" / f"{slug}.csv", "w", encoding="utf-8", newline="") as fh:
                PredictionLog.concat(logs).to_csv(fh, dataset.students, dataset.items, fold=folds)
        log.info("  ACC %s  AUC %s", _fmt(report.acc), _fmt(report.auc))

    write_results_csv(reports, out / "results.csv")
    (out / "results.txt").write_text(format_table(reports), encoding="utf-8")
    echo = {
        "dataset": str(config.dataset), "format": config.format, "folds": config.folds,
        "train": config.train.__dict__,
        "models": [{**r.spec.to_dict(), "acc": r.acc, "auc": r.auc,
                    "fold_acc": [f.acc for f in r.folds], "fold_auc": [f.auc for f in r.folds],
                    "errors": [f.error for f in r.folds if f.error]} for r in reports],
    }
    (out / "report.json").write_text(json.dumps(echo, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return reports, int(any(r.failed for r in reports))


def _write_table(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def export_parameters(checkpoint, out_dir) -> list[Path]:
    """Write the decoder's item/skill tables (and projection, if any) as CSV."""
    model, _, vocab = load_checkpoint(checkpoint)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = model.params
    items = vocab.get("items") or [str(j) for j in range(model.num_items)]
    skills = vocab.get("skills") or [str(k) for k in range(model.qmatrix.num_skills)]
    written = []

    if model.form == "dot":
        names = items if model.spec.decoder.metadata == "i" else skills
        kind = "item" if model.spec.decoder.metadata == "i" else "skill"
        dp = p["V"].shape[1]
        header = [kind, "w"] + [f"v_{j + 1}" for j in range(dp)]
        path = out / f"{kind}s.csv"
        _write_table(path, header, [[n, p["w"][j], *p["V"][j]] for j, n in enumerate(names)])
        written.append(path)
    else:
        if "w" in p:
            path = out / "items.csv"
            _write_table(path, ["item", "w"], [[n, p["w"][j]] for j, n in enumerate(items)])
            written.append(path)
        cols = [c for c in ("beta", "gamma", "delta") if c in p]
        if cols:
            path = out / "skills.csv"
            _write_table(path, ["skill"] + cols, [[n] + [p[c][k] for c in cols] for k, n in enumerate(skills)])
            written.append(path)
    if "A" in p:
        path = out / "projection.csv"
        d = p["A"].shape[1]
        _write_table(path, ["output", "b"] + [f"a_{j + 1}" for j in range(d)],
                     [[str(i), p["b"][i], *p["A"][i]] for i in range(p["A"].shape[0])])
        written.append(path)
    return written


def import_parameter_tables(directory) -> dict[str, np.ndarray]:
    """Read back what :func:`export_parameters` wrote, as decoder tensors."""
    directory = Path(directory)
    params = {}
    for kind in ("item", "skill"):
        path = directory / f"{kind}s.csv"
        if not path.exists():
            continue
        with open(path, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
        header, body = rows[0], rows[1:]
        cols = {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header) if i > 0}
        vs = [c for c in header if c.startswith("v_")]
        if vs:
            params["V"] = np.stack([cols[c] for c in vs], axis=1)
        for name in ("w", "beta", "gamma", "delta"):
            if name in cols:
                params[name] = cols[name]
    path = directory / "projection.csv"
    if path.exists():
        with open(path, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
        body = rows[1:]
        params["b"] = np.array([float(r[1]) for r in body])
        params["A"] = np.array([[float(x) for x in r[2:]] for r in body])
    return params
