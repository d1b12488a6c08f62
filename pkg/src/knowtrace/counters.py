"""Prior win/fail counts per skill and the sparse feature layout built on them.

Step indices are 0-based here: the counts at step ``t`` cover steps
``0..t-1`` only, so step 0 always sees zero counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import QMatrix, StudentSequence

LETTERS = "iswf"


@dataclass(frozen=True)
class CounterTable:
    """Sparse per-step counts. ``wins[t]`` maps skill -> successes before step t."""

    wins: tuple[dict[int, int], ...]
    fails: tuple[dict[int, int], ...]

    def __len__(self):
        return len(self.wins)

    def win(self, t: int, k: int) -> int:
        return self.wins[t].get(k, 0)

    def fail(self, t: int, k: int) -> int:
        return self.fails[t].get(k, 0)


def _skills(qmatrix: QMatrix, item: int) -> tuple[int, ...]:
    if not 0 <= item < len(qmatrix.rows):
        raise KeyError(f"item {item} has no Q-matrix row")
    return qmatrix.rows[item]


def compute_counters(sequence: StudentSequence, qmatrix: QMatrix) -> CounterTable:
    wins: dict[int, int] = {}
    fails: dict[int, int] = {}
    w_steps, f_steps = [], []
    for q, a in zip(sequence.items, sequence.outcomes):
        skills = _skills(qmatrix, q)
        w_steps.append(dict(wins))
        f_steps.append(dict(fails))
        target = wins if a else fails
        for k in skills:
            target[k] = target.get(k, 0) + 1
    return CounterTable(tuple(w_steps), tuple(f_steps))


def normalize_metadata(metadata) -> str:
    """Canonical ordered n-gram, e.g. ``{"w", "s"}`` -> ``"sw"``."""
    letters = set(metadata)
    if not letters:
        raise ValueError("metadata must select at least one of i, s, w, f")
    bad = letters - set(LETTERS)
    if bad:
        raise ValueError(f"unknown metadata letters {sorted(bad)}")
    return "".join(c for c in LETTERS if c in letters)


def feature_width(num_items: int, num_skills: int) -> int:
    return num_items + 3 * num_skills


def assemble_features(t: int, item: int, qmatrix: QMatrix, counters: CounterTable, metadata) -> dict[int, float]:
    """Sparse regressors for step ``t`` in the global item|skill|wins|fails layout.

    Zero-valued count entries are dropped.
    """
    meta = normalize_metadata(metadata)
    n_items, n_skills = len(qmatrix.rows), qmatrix.num_skills
    skills = _skills(qmatrix, item)
    out: dict[int, float] = {}
    if "i" in meta:
        out[item] = 1.0
    for k in skills:
        if "s" in meta:
            out[n_items + k] = 1.0
        if "w" in meta and counters.win(t, k):
            out[n_items + n_skills + k] = float(counters.win(t, k))
        if "f" in meta and counters.fail(t, k):
            out[n_items + 2 * n_skills + k] = float(counters.fail(t, k))
    return out


def design_matrix(sequences, qmatrix: QMatrix, metadata) -> list[tuple[int, int, float]]:
    """(row, col, value) triplets, one row per interaction in sequence order."""
    triplets = []
    row = 0
    for seq in sequences:
        table = compute_counters(seq, qmatrix)
        for t, q in enumerate(seq.items):
            for col, value in sorted(assemble_features(t, q, qmatrix, table, metadata).items()):
                triplets.append((row, col, value))
            row += 1
    return triplets


def kc_arrays(sequence: StudentSequence, qmatrix: QMatrix, width: int | None = None):
    """Dense per-step skill slots for the vectorized decoder.

    Returns ``(kc, wins, fails)``, each of shape ``(T, width)``. Unused slots
    hold skill -1 and zero counts.
    """
    width = width or qmatrix.max_skills_per_item
    T = len(sequence)
    kc = np.full((T, width), -1, dtype=np.int64)
    wins = np.zeros((T, width))
    fails = np.zeros((T, width))
    w_run = np.zeros(qmatrix.num_skills)
    f_run = np.zeros(qmatrix.num_skills)
    for t, (q, a) in enumerate(zip(sequence.items, sequence.outcomes)):
        skills = _skills(qmatrix, q)
        n = len(skills)
        kc[t, :n] = skills
        wins[t, :n] = w_run[list(skills)]
        fails[t, :n] = f_run[list(skills)]
        if a:
            w_run[list(skills)] += 1
        else:
            f_run[list(skills)] += 1
    return kc, wins, fails
