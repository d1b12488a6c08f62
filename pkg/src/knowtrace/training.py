"""Loss, Adam with weight decay, minibatch/BPTT training loop and checkpoints."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, QMatrix
from .model import EPS, Model, ModelSpec

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "knowtrace-checkpoint/1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    weight_decay: float = 0.0005
    minibatch_count: int = 100
    bptt_window: int = 100
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "minibatch_count", "bptt_window", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


def nll(labels, predictions, mask=None) -> float:
    """Mean of ``-log(1 - |a - p|)`` over unmasked entries, p clamped to [eps, 1-eps]."""
    a = np.asarray(labels, dtype=float)
    p = np.clip(np.asarray(predictions, dtype=float), EPS, 1.0 - EPS)
    m = np.ones(a.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    n = int(m.sum())
    if n == 0:
        raise ValueError("degenerate batch: no unmasked entries")
    terms = np.log(np.where(m, 1.0 - np.abs(a - p), 1.0))
    return -float(terms.sum()) / n


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_update(params: dict, grads: dict, state: AdamState, lr: float = 0.005,
                weight_decay: float = 0.0005, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8):
    """One Adam step in place. Decay is added to the gradient (L2 form), not decoupled."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        p = params[name]
        g = g + weight_decay * p
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def deal_minibatches(n_students: int, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle indices and deal them round-robin into ``min(count, n)`` batches."""
    count = min(count, n_students)
    perm = rng.permutation(n_students)
    return [perm[i::count] for i in range(count)]


def fit(spec: ModelSpec, dataset: Dataset, config: TrainConfig = TrainConfig(), progress=None):
    """Train on every student of ``dataset``. Returns (model, per-epoch mean loss)."""
    if dataset.num_students == 0:
        raise ValueError("empty training set")
    model = Model.build(spec, dataset, config.seed)
    model.mark_seen(dataset.sequences)
    arrays = model.prepare(list(dataset.sequences))
    rng = np.random.default_rng([config.seed, 2])
    state = AdamState()
    trace = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for b, members in enumerate(deal_minibatches(len(arrays), config.minibatch_count, rng)):
            batch = model.batch([arrays[i] for i in members])
            h = model.initial_state(len(members))
            for t0 in range(0, batch.max_len, config.bptt_window):
                win = batch.window(t0, t0 + config.bptt_window)
                try:
                    loss, grads, h = model.window_loss_grad(win, h)
                except FloatingPointError as e:
                    raise FloatingPointError(f"epoch {epoch}, batch {b}, window at {t0}: {e}") from e
                adam_update(model.params, grads, state, config.learning_rate, config.weight_decay)
                n = int(win.mask.sum())
                total += loss * n
                count += n
        trace.append(total / count)
        if progress is not None:
            progress(epoch, trace[-1])
    return model, trace


def save_checkpoint(path, model: Model, config: TrainConfig, vocab: dict | None = None) -> None:
    """Write one ``.npz`` holding tensors plus a JSON header with everything else."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "spec": model.spec.to_dict(),
        "config": asdict(config),
        "seed": model.seed,
        "table_seed": model.table.seed if model.table is not None else None,
        "num_items": model.num_items,
        "qmatrix": [list(r) for r in model.qmatrix.rows],
        "num_skills": model.qmatrix.num_skills,
        "num_action_keys": model.table.num_keys if model.table is not None else model.num_items,
        "vocab": vocab or {},
    }
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays["seen_items"] = model.seen_items
    arrays["seen_skills"] = model.seen_skills
    arrays["action_tokens"] = model.action_tokens
    with open(path, "wb") as f:
        np.savez(f, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


class CheckpointFormatError(ValueError):
    pass


def load_checkpoint(path):
    """Returns (model, config, vocab)."""
    with np.load(path, allow_pickle=False) as z:
        if "__meta__" not in z:
            raise CheckpointFormatError(f"{path}: not a checkpoint")
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointFormatError(f"{path}: format {meta.get('format')!r}, expected {CHECKPOINT_FORMAT!r}")
        params = {k.split("/", 1)[1]: z[k].copy() for k in z.files if k.startswith("param/")}
        seen_items, seen_skills = z["seen_items"].copy(), z["seen_skills"].copy()
        tokens = z["action_tokens"].copy()
    spec = ModelSpec.from_dict(meta["spec"])
    q = QMatrix(tuple(tuple(r) for r in meta["qmatrix"]), meta["num_skills"])
    model = Model(spec, meta["num_items"], q, meta["seed"], tokens, meta["num_action_keys"], params)
    model.seen_items, model.seen_skills = seen_items, seen_skills
    return model, TrainConfig(**meta["config"]), meta["vocab"]
