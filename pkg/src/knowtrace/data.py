"""Interaction logs, Q-matrices, vocabularies and fold assignments.

Two on-disk layouts are understood:

* long: ``student,item,outcome,skills`` with one row per attempt, skills
  separated by ``~``;
* wide: a students x items table of 0/1 cells plus a companion
  ``item,skills`` Q-matrix file.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConsistencyError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Vocab:
    """Bidirectional raw-string <-> dense integer map."""

    names: tuple[str, ...]
    index: dict[str, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(self, "index", {n: i for i, n in enumerate(self.names)})
        if len(self.index) != len(self.names):
            raise ConsistencyError("duplicate names in vocabulary")

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name: str) -> int:
        return self.index[name]

    def name(self, i: int) -> str:
        return self.names[i]


@dataclass(frozen=True)
class QMatrix:
    rows: tuple[tuple[int, ...], ...]
    num_skills: int

    def __post_init__(self):
        for item, skills in enumerate(self.rows):
            if not skills:
                raise ConsistencyError(f"item {item} has no skill")
            for k in skills:
                if not 0 <= k < self.num_skills:
                    raise ConsistencyError(f"item {item} references skill {k} outside 0..{self.num_skills - 1}")

    def skills_of(self, item: int) -> tuple[int, ...]:
        try:
            return self.rows[item]
        except IndexError:
            raise KeyError(f"item {item} has no Q-matrix row") from None

    @property
    def max_skills_per_item(self) -> int:
        return max(len(r) for r in self.rows)

    def dense(self) -> np.ndarray:
        q = np.zeros((len(self.rows), self.num_skills), dtype=np.int8)
        for j, skills in enumerate(self.rows):
            q[j, list(skills)] = 1
        return q


@dataclass(frozen=True)
class StudentSequence:
    student: int
    items: tuple[int, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        if len(self.items) == 0:
            raise ConsistencyError(f"student {self.student} has an empty sequence")
        if len(self.items) != len(self.outcomes):
            raise ConsistencyError("items and outcomes differ in length")
        if any(a not in (0, 1) for a in self.outcomes):
            raise ConsistencyError("outcomes must be 0 or 1")

    def __len__(self):
        return len(self.items)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.items, self.outcomes))


@dataclass(frozen=True)
class Dataset:
    sequences: tuple[StudentSequence, ...]
    qmatrix: QMatrix
    students: Vocab
    items: Vocab
    skills: Vocab

    def __post_init__(self):
        if len(self.qmatrix.rows) != len(self.items):
            raise DimensionError("Q-matrix rows do not match item vocabulary")
        if len(self.skills) != self.qmatrix.num_skills:
            raise DimensionError("skill vocabulary does not match Q-matrix width")

    @property
    def num_students(self) -> int:
        return len(self.sequences)

    @property
    def num_items(self) -> int:
        return len(self.items)

    @property
    def num_skills(self) -> int:
        return self.qmatrix.num_skills

    @property
    def num_interactions(self) -> int:
        return sum(len(s) for s in self.sequences)

    def subset(self, students: Iterable[int]) -> "Dataset":
        """Restrict to the given student ids; vocabularies are kept whole."""
        wanted = set(students)
        seqs = tuple(s for s in self.sequences if s.student in wanted)
        return Dataset(seqs, self.qmatrix, self.students, self.items, self.skills)

    def with_combined_skills(self) -> "Dataset":
        """Replace each item's skill set by one token for the whole combination.

        Lets single-skill decoders run on multi-skill items.
        """
        combos: dict[tuple[int, ...], int] = {}
        rows = []
        for skills in self.qmatrix.rows:
            key = tuple(sorted(skills))
            rows.append((combos.setdefault(key, len(combos)),))
        names = tuple("~".join(self.skills.name(k) for k in key) for key in combos)
        q = QMatrix(tuple(rows), len(names))
        return Dataset(self.sequences, q, self.students, self.items, Vocab(names))


def _split_skills(field_: str, line: int) -> list[str]:
    names = [s.strip() for s in field_.split("~")]
    if not field_.strip() or any(not s for s in names):
        raise ParseError("empty skill list", line)
    return names


def parse_interactions(stream: TextIO) -> Dataset:
    """Read the long ``student,item,outcome,skills`` format.

    Dense ids follow first appearance. Rows of one student keep file order.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise ParseError("no interactions")
    header = [h.strip().lstrip("\ufeff") for h in header]
    if header != ["student", "item", "outcome", "skills"]:
        raise ParseError(f"unexpected header {header}", 1)

    student_ids: dict[str, int] = {}
    item_ids: dict[str, int] = {}
    skill_ids: dict[str, int] = {}
    item_skills: dict[int, tuple[int, ...]] = {}
    item_skill_names: dict[int, tuple[str, ...]] = {}
    per_student: dict[int, tuple[list[int], list[int]]] = {}

    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, got {len(row)}", lineno)
        student, item, outcome, skills = (c.strip() for c in row)
        if outcome not in ("0", "1"):
            raise ParseError(f"outcome must be 0 or 1, got {outcome!r}", lineno)
        names = tuple(_split_skills(skills, lineno))
        s = student_ids.setdefault(student, len(student_ids))
        q = item_ids.setdefault(item, len(item_ids))
        if q in item_skill_names:
            if set(item_skill_names[q]) != set(names):
                raise ConsistencyError(f"item {item!r} listed with inconsistent skills")
        else:
            item_skill_names[q] = names
            item_skills[q] = tuple(skill_ids.setdefault(k, len(skill_ids)) for k in names)
        items_, outcomes_ = per_student.setdefault(s, ([], []))
        items_.append(q)
        outcomes_.append(int(outcome))

    if not per_student:
        raise ParseError("no interactions")

    seqs = tuple(StudentSequence(s, tuple(v[0]), tuple(v[1])) for s, v in per_student.items())
    q = QMatrix(tuple(item_skills[j] for j in range(len(item_ids))), len(skill_ids))
    return Dataset(seqs, q, Vocab(tuple(student_ids)), Vocab(tuple(item_ids)), Vocab(tuple(skill_ids)))


def parse_qmatrix(stream: TextIO, item_names: list[str] | None = None) -> tuple[Vocab, Vocab, QMatrix]:
    """Read an ``item,skills`` file. Returns (items, skills, qmatrix)."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip().lstrip("\ufeff") for h in header] != ["item", "skills"]:
        raise ParseError("Q-matrix header must be 'item,skills'", 1)
    rows: dict[str, list[str]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", lineno)
        name = row[0].strip()
        if name in rows:
            raise ParseError(f"duplicate Q-matrix row for item {name!r}", lineno)
        rows[name] = _split_skills(row[1], lineno)

    order = list(rows) if item_names is None else item_names
    if item_names is not None:
        if len(rows) != len(item_names):
            raise DimensionError(f"Q-matrix has {len(rows)} rows for {len(item_names)} items")
        missing = [n for n in item_names if n not in rows]
        if missing:
            raise DimensionError(f"items without Q-matrix row: {missing}")
    skill_ids: dict[str, int] = {}
    qrows = tuple(tuple(skill_ids.setdefault(k, len(skill_ids)) for k in rows[n]) for n in order)
    return Vocab(tuple(order)), Vocab(tuple(skill_ids)), QMatrix(qrows, len(skill_ids))


def parse_wide_matrix(responses: TextIO, qmatrix: TextIO) -> Dataset:
    """Read a fully specified students x items 0/1 table.

    Every student attempts every item, in column order. Students are named by
    their 1-based row number.
    """
    reader = csv.reader(responses)
    header = next(reader, None)
    if header is None:
        raise ParseError("no interactions")
    item_names = [h.strip().lstrip("\ufeff") for h in header]
    if len(set(item_names)) != len(item_names):
        raise ParseError("duplicate item names in header", 1)

    seqs = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(item_names):
            raise ParseError(f"ragged row: {len(row)} cells for {len(item_names)} items", lineno)
        cells = [c.strip() for c in row]
        bad = [c for c in cells if c not in ("0", "1")]
        if bad:
            raise ParseError(f"cell must be 0 or 1, got {bad[0]!r}", lineno)
        seqs.append(StudentSequence(len(seqs), tuple(range(len(item_names))), tuple(int(c) for c in cells)))
    if not seqs:
        raise ParseError("no interactions")

    items, skills, q = parse_qmatrix(qmatrix, item_names)
    students = Vocab(tuple(str(i + 1) for i in range(len(seqs))))
    return Dataset(tuple(seqs), q, students, items, skills)


def load_dataset(path, fmt: str = "long", qmatrix_path=None) -> Dataset:
    if fmt == "long":
        with open(path, encoding="utf-8", newline="") as f:
            return parse_interactions(f)
    if fmt == "wide":
        if qmatrix_path is None:
            raise ValueError("wide format needs a Q-matrix file")
        with open(path, encoding="utf-8", newline="") as f, open(qmatrix_path, encoding="utf-8", newline="") as g:
            return parse_wide_matrix(f, g)
    raise ValueError(f"unknown dataset format {fmt!r}")


def write_interactions(dataset: Dataset, stream: TextIO) -> None:
    """Serialize in the long format (inverse of :func:`parse_interactions`)."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["student", "item", "outcome", "skills"])
    for seq in dataset.sequences:
        sname = dataset.students.name(seq.student)
        for q, a in zip(seq.items, seq.outcomes):
            skills = "~".join(dataset.skills.name(k) for k in dataset.qmatrix.rows[q])
            w.writerow([sname, dataset.items.name(q), a, skills])


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_student: dict[int, int]
    k: int

    def members(self, fold: int) -> list[int]:
        return sorted(s for s, f in self.fold_of_student.items() if f == fold)

    def sizes(self) -> list[int]:
        return [len(self.members(f)) for f in range(self.k)]


def split_folds(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Shuffle students with a seeded generator and deal them round-robin."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    students = [s.student for s in dataset.sequences]
    if k > len(students):
        raise ValueError(f"cannot split {len(students)} students into {k} folds")
    order = np.random.default_rng(seed).permutation(len(students))
    return FoldAssignment({students[j]: pos % k for pos, j in enumerate(order)}, k)
