"""Metrics, test-time unrolling and k-fold cross-validation."""
from __future__ import annotations

import csv
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, split_folds
from .model import Model, ModelSpec
from .training import TrainConfig, fit

log = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    pass


@dataclass
class PredictionLog:
    student: np.ndarray
    step: np.ndarray
    item: np.ndarray
    label: np.ndarray
    prediction: np.ndarray

    def __len__(self):
        return len(self.label)

    @classmethod
    def concat(cls, logs: list["PredictionLog"]) -> "PredictionLog":
        return cls(*(np.concatenate([getattr(l, f) for l in logs]) for f in
                     ("student", "step", "item", "label", "prediction")))

    def to_csv(self, stream, students=None, items=None, fold=None) -> None:
        """One row per interaction; names are used when vocabularies are given."""
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["student", "step", "item", "label", "prediction"] + (["fold"] if fold is not None else []))
        for i in range(len(self)):
            s = students.name(int(self.student[i])) if students is not None else int(self.student[i])
            q = items.name(int(self.item[i])) if items is not None else int(self.item[i])
            row = [s, int(self.step[i]), q, int(self.label[i]), repr(float(self.prediction[i]))]
            if fold is not None:
                row.append(int(fold[i]))
            w.writerow(row)

    @classmethod
    def from_csv(cls, stream) -> "PredictionLog":
        reader = csv.DictReader(stream)
        rows = list(reader)
        if not rows:
            raise ValueError("empty prediction log")
        return cls(np.array([r["student"] for r in rows]), np.array([int(r["step"]) for r in rows]),
                   np.array([r["item"] for r in rows]), np.array([int(r["label"]) for r in rows]),
                   np.array([float(r["prediction"]) for r in rows]))


def predict_students(model: Model, sequences) -> PredictionLog:
    """Unroll the model on each student's own history; one prediction per step."""
    sequences = list(sequences)
    preds = model.predict(sequences)
    students, steps, items, labels = [], [], [], []
    for seq in sequences:
        T = len(seq)
        students.append(np.full(T, seq.student))
        steps.append(np.arange(1, T + 1))
        items.append(np.asarray(seq.items))
        labels.append(np.asarray(seq.outcomes))
    cat = np.concatenate
    return PredictionLog(cat(students), cat(steps), cat(items), cat(labels), cat(preds))


def _unpack(labels, predictions):
    if isinstance(labels, PredictionLog):
        return labels.label, labels.prediction
    return labels, predictions


def accuracy(labels, predictions=None) -> float:
    """Fraction of rows where ``p >= 0.5`` agrees with the label.

    Takes either a :class:`PredictionLog` or parallel label/prediction arrays.
    """
    labels, predictions = _unpack(labels, predictions)
    a = np.asarray(labels)
    if a.size == 0:
        raise ValueError("accuracy of an empty log")
    return float(np.mean((np.asarray(predictions) >= 0.5) == (a == 1)))


def auc(labels, predictions=None) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    labels, predictions = _unpack(labels, predictions)
    a = np.asarray(labels) == 1
    n1 = int(a.sum())
    n0 = a.size - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(np.asarray(predictions, dtype=float))
    u = ranks[a].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


@dataclass
class FoldResult:
    fold: int
    acc: float | None = None
    auc: float | None = None
    log: PredictionLog | None = None
    model: Model | None = None
    trace: list | None = None
    error: str | None = None


@dataclass
class MetricReport:
    spec: ModelSpec
    config: TrainConfig
    folds: list[FoldResult] = field(default_factory=list)

    def _mean(self, attr):
        vals = [getattr(f, attr) for f in self.folds if getattr(f, attr) is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def acc(self) -> float | None:
        return self._mean("acc")

    @property
    def auc(self) -> float | None:
        return self._mean("auc")

    @property
    def failed(self) -> bool:
        return any(f.error is not None for f in self.folds)


def _run_fold(spec, dataset, test_students, fold, config, keep_model):
    train = dataset.subset(s.student for s in dataset.sequences if s.student not in test_students)
    test = dataset.subset(test_students)
    res = FoldResult(fold)
    try:
        model, trace = fit(spec, train, config)
        res.log = predict_students(model, test.sequences)
        res.trace = trace
        res.acc = accuracy(res.log)
        try:
            res.auc = auc(res.log)
        except UndefinedMetricError:
            warnings.warn(f"fold {fold}: single-class test labels, AUC left out of the mean")
        if keep_model:
            res.model = model
    except Exception as e:  # recorded per fold, surfaced by the caller
        res.error = f"{type(e).__name__}: {e}"
        log.error("fold %d failed: %s", fold, res.error)
    return res


def cross_validate(spec: ModelSpec, dataset: Dataset, k: int = 5, config: TrainConfig = TrainConfig(),
                   workers: int = 1, keep_models: bool = False) -> MetricReport:
    """Fit on k-1 folds of students, predict the held-out fold, average per-fold metrics."""
    folds = split_folds(dataset, k, config.seed)
    members = [set(folds.members(f)) for f in range(k)]
    report = MetricReport(spec, config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_fold, spec, dataset, members[f], f, config, keep_models)
                       for f in range(k)]
            report.folds = [fu.result() for fu in futures]
    else:
        report.folds = [_run_fold(spec, dataset, members[f], f, config, keep_models) for f in range(k)]
    return report
