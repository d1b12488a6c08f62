"""Finite-difference comparison shared by the training and acceptance tests."""
import numpy as np

from conftest import long_csv
from knowtrace.data import parse_interactions
from knowtrace.model import Model, ModelSpec
from oracles import central_difference


def random_dataset(seed, students=3, steps=6, items=5, skills=3):
    rng = np.random.default_rng(seed)
    skill_sets = [sorted({j % skills} | set(rng.integers(0, skills, size=rng.integers(0, 2)).tolist()))
                  for j in range(items)]
    rows = []
    for s in range(students):
        for _ in range(steps):
            j = int(rng.integers(0, items))
            rows.append((f"u{s}", f"q{j}", int(rng.integers(0, 2)), "~".join(f"k{k}" for k in skill_sets[j])))
    return parse_interactions(long_csv(rows))


def randomized_model(spec: ModelSpec, dataset, seed, scale=0.5):
    model = Model.build(spec, dataset, seed)
    rng = np.random.default_rng(seed + 100)
    for v in model.params.values():
        v[...] = rng.normal(scale=scale, size=v.shape)
    return model


def max_relative_error(model, batch, h0=None, floor=1e-6):
    """Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over all parameters."""
    _, grads, _ = model.window_loss_grad(batch, h0)
    numeric = central_difference(lambda: model.window_loss(batch, h0), model.params)
    worst = 0.0
    for name, g in grads.items():
        a = g.reshape(-1)
        n = np.array(numeric[name])
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(rel.max()) if rel.size else 0.0)
    return worst
