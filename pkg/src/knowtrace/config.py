"""Experiment configuration files.

Flat ``key = value`` lines; ``#`` starts a comment. ``model`` may repeat and
each occurrence adds one grid entry, in order::

    dataset = fraction.csv
    format = wide                 # long | wide
    qmatrix = fraction_qmatrix.csv
    folds = 5
    seed = 0
    epochs = 200
    model = Ours | GRU d=2 | iswf d'=1
    model = DKT  | GRU d=2 | s d'=1 | skills=combined

A model line is ``label | encoder | decoder`` optionally followed by
``skills=combined`` (one token per skill combination) and ``action=skill``
(GRU inputs keyed by skill instead of item). Relative paths resolve against
the config file's directory.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .decoder import ConfigError
from .model import ModelSpec
from .training import TrainConfig


class ConfigValidationError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


def read_key_values(path):
    """Yield ``(key, value, line_number)`` from a flat key-value file."""
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigValidationError([f"line {lineno}: expected 'key = value'"])
            key, value = line.split("=", 1)
            yield key.strip(), value.strip(), lineno


@dataclass
class ExperimentConfig:
    dataset: Path
    format: str = "long"
    qmatrix: Path | None = None
    folds: int = 5
    workers: int = 1
    output: Path | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    grid: list[ModelSpec] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.train.seed


def parse_model_line(text: str) -> ModelSpec:
    parts = [p.strip() for p in text.split("|")]
    if len(parts) < 3:
        raise ConfigError(f"model line {text!r} needs 'label | encoder | decoder'")
    label, enc, dec, *opts = parts
    kw = {}
    for opt in opts:
        key, _, value = opt.partition("=")
        key, value = key.strip(), value.strip()
        if key == "skills" and value in ("combined", "raw"):
            kw["combined_skills"] = value == "combined"
        elif key == "action" and value in ("item", "skill"):
            kw["action"] = value
        else:
            raise ConfigError(f"unknown model option {opt!r}")
    return ModelSpec.parse(enc, dec, name=label, **kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    base = path.parent
    train_fields = {f.name: f.type for f in fields(TrainConfig)}
    train_kw: dict = {}
    top: dict = {}
    grid: list[ModelSpec] = []
    problems: list[str] = []
    for key, value, lineno in read_key_values(path):
        try:
            if key == "model":
                grid.append(parse_model_line(value))
            elif key in train_fields:
                train_kw[key] = float(value) if key in ("learning_rate", "weight_decay") else int(value)
            elif key in ("dataset", "qmatrix", "output"):
                top[key] = base / value
            elif key == "format":
                if value not in ("long", "wide"):
                    raise ValueError(f"format must be 'long' or 'wide', got {value!r}")
                top[key] = value
            elif key in ("folds", "workers"):
                top[key] = int(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as e:
            problems.append(f"line {lineno} ({key}): {e}")

    if "dataset" not in top:
        problems.append("dataset: missing")
    elif not top["dataset"].exists():
        problems.append(f"dataset: {top['dataset']} does not exist")
    if top.get("format") == "wide":
        if "qmatrix" not in top:
            problems.append("qmatrix: required for the wide format")
        elif not top["qmatrix"].exists():
            problems.append(f"qmatrix: {top['qmatrix']} does not exist")
    if not grid:
        problems.append("model: the grid is empty")
    if top.get("folds", 5) < 2:
        problems.append("folds: need at least 2")
    try:
        train = TrainConfig(**train_kw)
    except ValueError as e:
        problems.append(f"training: {e}")
    if problems:
        raise ConfigValidationError(problems)
    return ExperimentConfig(train=train, grid=grid, **top)
