"""Synthetic interaction logs drawn from closed-form response models.

``irt`` draws outcomes from sigmoid(ability + easiness). ``pfa`` simulates
each student step by step so that win/fail counts evolve and outcomes follow
sigmoid(sum over skills of beta + gamma * wins + delta * fails). ``mixed``
adds both IRT terms to the PFA logit, giving data with item effects and
learning dynamics at once.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, QMatrix, StudentSequence, Vocab
from .encoder import sigmoid

KINDS = ("irt", "pfa", "mixed")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = "pfa"
    num_students: int = 100
    num_items: int = 20
    num_skills: int = 5
    min_length: int = 20
    max_length: int = 20
    multi_skill_prob: float = 0.0
    ability_sd: float = 1.0
    easiness_sd: float = 1.0
    beta_sd: float = 1.0
    gamma_low: float = 0.0
    gamma_high: float = 0.4
    delta_low: float = -0.3
    delta_high: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("num_students", "num_items", "num_skills", "min_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_length < self.min_length:
            raise ValueError("max_length < min_length")
        if self.num_items < self.num_skills:
            raise ValueError("need at least one item per skill")


def _qmatrix(spec: SyntheticSpec, rng) -> QMatrix:
    rows = []
    for j in range(spec.num_items):
        skills = {j % spec.num_skills}
        while len(skills) < spec.num_skills and rng.random() < spec.multi_skill_prob:
            skills.add(int(rng.integers(spec.num_skills)))
        rows.append(tuple(sorted(skills)))
    return QMatrix(tuple(rows), spec.num_skills)


def generate(spec: SyntheticSpec) -> tuple[Dataset, dict]:
    """Returns the dataset and the generating parameters keyed by raw names."""
    rng = np.random.default_rng(spec.seed)
    q = _qmatrix(spec, rng)
    theta = rng.normal(0.0, spec.ability_sd, spec.num_students)
    easiness = rng.normal(0.0, spec.easiness_sd, spec.num_items)
    beta = rng.normal(0.0, spec.beta_sd, spec.num_skills)
    gamma = rng.uniform(spec.gamma_low, spec.gamma_high, spec.num_skills)
    delta = rng.uniform(spec.delta_low, spec.delta_high, spec.num_skills)
    use_irt = spec.kind in ("irt", "mixed")
    use_pfa = spec.kind in ("pfa", "mixed")

    seqs = []
    for i in range(spec.num_students):
        T = int(rng.integers(spec.min_length, spec.max_length + 1))
        wins = np.zeros(spec.num_skills)
        fails = np.zeros(spec.num_skills)
        items = rng.integers(spec.num_items, size=T)
        outcomes = []
        for j in items:
            ks = list(q.rows[j])
            logit = 0.0
            if use_irt:
                logit += theta[i] + easiness[j]
            if use_pfa:
                logit += float(np.sum(beta[ks] + gamma[ks] * wins[ks] + delta[ks] * fails[ks]))
            a = int(rng.random() < sigmoid(logit))
            outcomes.append(a)
            (wins if a else fails)[ks] += 1
        seqs.append(StudentSequence(i, tuple(int(j) for j in items), tuple(outcomes)))

    students = Vocab(tuple(f"s{i}" for i in range(spec.num_students)))
    item_names = Vocab(tuple(f"q{j}" for j in range(spec.num_items)))
    skill_names = Vocab(tuple(f"k{k}" for k in range(spec.num_skills)))
    dataset = Dataset(tuple(seqs), q, students, item_names, skill_names)

    truth = {"spec": asdict(spec)}
    if use_irt:
        truth["ability"] = dict(zip(students.names, theta.tolist()))
        truth["easiness"] = dict(zip(item_names.names, easiness.tolist()))
    if use_pfa:
        truth["beta"] = dict(zip(skill_names.names, beta.tolist()))
        truth["gamma"] = dict(zip(skill_names.names, gamma.tolist()))
        truth["delta"] = dict(zip(skill_names.names, delta.tolist()))
    return dataset, truth


def true_probabilities(dataset: Dataset, truth: dict, sequences=None) -> list[np.ndarray]:
    """The generating model's p_t for every step, looked up by raw names."""
    sequences = dataset.sequences if sequences is None else sequences
    out = []
    for seq in sequences:
        wins: dict[str, float] = {}
        fails: dict[str, float] = {}
        sname = dataset.students.name(seq.student)
        ps = []
        for j, a in zip(seq.items, seq.outcomes):
            ks = [dataset.skills.name(k) for k in dataset.qmatrix.rows[j]]
            logit = 0.0
            if "ability" in truth:
                logit += truth["ability"][sname] + truth["easiness"][dataset.items.name(j)]
            if "beta" in truth:
                for k in ks:
                    logit += truth["beta"][k] + truth["gamma"][k] * wins.get(k, 0) + truth["delta"][k] * fails.get(k, 0)
            ps.append(float(sigmoid(logit)))
            target = wins if a else fails
            for k in ks:
                target[k] = target.get(k, 0) + 1
        out.append(np.array(ps))
    return out


def load_spec(path) -> SyntheticSpec:
    """Flat ``key = value`` file; keys are :class:`SyntheticSpec` fields."""
    from .config import read_key_values

    fields_ = SyntheticSpec.__dataclass_fields__
    kwargs = {}
    for key, value, lineno in read_key_values(path):
        if key not in fields_:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        kwargs[key] = value if key == "kind" else type(getattr(SyntheticSpec(), key))(value)
    return SyntheticSpec(**kwargs)


def write_truth(truth: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(truth, f, indent=1, sort_keys=True)
