"""Encoder-decoder models: specification, parameter store, batched windows."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import decoder as dec
from .counters import kc_arrays
from .data import Dataset, QMatrix, StudentSequence
from .decoder import ConfigError, DecoderSpec
from .encoder import GRU_NAMES, ActionEmbeddingTable, GruParams, gru_backward, gru_forward, sigmoid

EPS = 1e-7


@dataclass(frozen=True)
class ModelSpec:
    encoder: str
    d: int
    decoder: DecoderSpec
    action: str = "item"
    combined_skills: bool = False
    name: str = ""

    def __post_init__(self):
        if self.encoder not in ("none", "gru"):
            raise ConfigError(f"unknown encoder {self.encoder!r}")
        if self.encoder == "none" and self.d != 0:
            raise ConfigError("encoder 'none' has no hidden dimension")
        if self.encoder == "gru" and self.d < 1:
            raise ConfigError("GRU encoder needs d >= 1")
        if self.action not in ("item", "skill"):
            raise ConfigError(f"action key must be 'item' or 'skill', got {self.action!r}")
        self.decoder.form(self.d)

    @classmethod
    def parse(cls, encoder: str, decoder: str, name: str = "", **kw) -> "ModelSpec":
        """Build from table-style names: ``"GRU d=2"``/``"none"`` and ``"iswf d'=1"``."""
        enc = encoder.strip()
        if enc.lower() == "none":
            return cls("none", 0, DecoderSpec.parse(decoder), name=name, **kw)
        m = re.fullmatch(r"(?i)gru\s+d\s*=\s*(\d+)", enc)
        if not m:
            raise ConfigError(f"cannot parse encoder {encoder!r}; expected 'none' or 'GRU d=<n>'")
        return cls("gru", int(m.group(1)), DecoderSpec.parse(decoder), name=name, **kw)

    @property
    def encoder_label(self) -> str:
        return "None" if self.encoder == "none" else f"GRU d={self.d}"

    @property
    def decoder_label(self) -> str:
        return str(self.decoder)

    @property
    def form(self) -> str:
        return self.decoder.form(self.d)

    def to_dict(self) -> dict:
        return {"encoder": self.encoder, "d": self.d, "metadata": self.decoder.metadata,
                "d_prime": self.decoder.d_prime, "action": self.action,
                "combined_skills": self.combined_skills, "name": self.name}

    @classmethod
    def from_dict(cls, m: dict) -> "ModelSpec":
        return cls(m["encoder"], m["d"], DecoderSpec(m["metadata"], m["d_prime"]), m["action"],
                   m["combined_skills"], m["name"])


@dataclass
class StudentArrays:
    student: int
    keys: np.ndarray
    items: np.ndarray
    outcomes: np.ndarray
    targets: np.ndarray
    kc: np.ndarray
    wins: np.ndarray
    fails: np.ndarray

    def __len__(self):
        return len(self.items)


@dataclass
class Batch:
    """Padded (B, L) block. ``mask`` is true exactly on real interactions."""

    students: list[int]
    keys: np.ndarray
    items: np.ndarray
    outcomes: np.ndarray
    targets: np.ndarray
    kc: np.ndarray
    wins: np.ndarray
    fails: np.ndarray
    mask: np.ndarray
    lengths: np.ndarray = field(default=None)

    @property
    def max_len(self) -> int:
        return self.mask.shape[1]

    def window(self, t0: int, t1: int) -> "Batch":
        s = slice(t0, t1)
        return Batch(self.students, self.keys[:, s], self.items[:, s], self.outcomes[:, s],
                     self.targets[:, s], self.kc[:, s], self.wins[:, s], self.fails[:, s],
                     self.mask[:, s], np.clip(self.lengths - t0, 0, t1 - t0))


def make_batch(arrays: list[StudentArrays], width: int) -> Batch:
    B = len(arrays)
    lengths = np.array([len(a) for a in arrays])
    L = int(lengths.max())
    keys = np.full((B, L), -1, dtype=np.int64)
    items = np.zeros((B, L), dtype=np.int64)
    outcomes = np.zeros((B, L))
    targets = np.zeros((B, L), dtype=np.int64)
    kc = np.full((B, L, width), -1, dtype=np.int64)
    wins = np.zeros((B, L, width))
    fails = np.zeros((B, L, width))
    mask = np.zeros((B, L), dtype=bool)
    for b, a in enumerate(arrays):
        T = len(a)
        keys[b, :T] = a.keys
        items[b, :T] = a.items
        outcomes[b, :T] = a.outcomes
        targets[b, :T] = a.targets
        kc[b, :T] = a.kc
        wins[b, :T] = a.wins
        fails[b, :T] = a.fails
        mask[b, :T] = True
    return Batch([a.student for a in arrays], keys, items, outcomes, targets, kc, wins, fails, mask, lengths)


def loss_and_dlogit(z: np.ndarray, labels: np.ndarray, mask: np.ndarray):
    """Masked mean negative log-likelihood and its gradient w.r.t. the logits."""
    n = int(mask.sum())
    if n == 0:
        raise ValueError("degenerate batch: no unmasked entries")
    p = sigmoid(z)
    pc = np.clip(p, EPS, 1.0 - EPS)
    ll = np.where(labels > 0.5, np.log(pc), np.log1p(-pc))
    loss = -float((ll * mask).sum()) / n
    inside = (p > EPS) & (p < 1.0 - EPS)
    dz = np.where(mask & inside, (p - labels) / n, 0.0)
    return loss, dz


class Model:
    """Trainable tensors, the fixed action table and the forward/backward passes."""

    def __init__(self, spec: ModelSpec, num_items: int, qmatrix: QMatrix, seed: int,
                 action_tokens: np.ndarray | None = None, num_action_keys: int | None = None,
                 params: dict | None = None):
        self.spec = spec
        self.num_items = num_items
        self.qmatrix = qmatrix
        self.seed = seed
        if spec.decoder.metadata == "s" and spec.form == "dot" and qmatrix.max_skills_per_item > 1:
            raise ConfigError(
                "the 's' dot-product decoder needs one skill per item; enable combined skill tokens "
                "or use a scalar decoder such as \"iswf d'=1\"")
        if action_tokens is None:
            action_tokens = np.arange(num_items)
            num_action_keys = num_items
        self.action_tokens = np.asarray(action_tokens, dtype=np.int64)
        self.table = ActionEmbeddingTable(num_action_keys, spec.d, seed) if spec.encoder == "gru" else None
        self.form = spec.form
        self.projected = spec.decoder.projected(spec.d)
        if params is None:
            rng = np.random.default_rng([seed, 1])
            params = {}
            if spec.encoder == "gru":
                params.update(GruParams.init(spec.d, rng).as_dict())
            params.update(dec.init_params(spec.decoder, spec.d, num_items, qmatrix.num_skills, rng))
        self.params = params
        self.seen_items = np.ones(num_items, dtype=bool)
        self.seen_skills = np.ones(qmatrix.num_skills, dtype=bool)

    @classmethod
    def build(cls, spec: ModelSpec, dataset: Dataset, seed: int) -> "Model":
        qmatrix = dataset.with_combined_skills().qmatrix if spec.combined_skills else dataset.qmatrix
        tokens, n_keys = None, None
        if spec.action == "skill":
            combined = dataset.with_combined_skills().qmatrix
            tokens = np.array([r[0] for r in combined.rows])
            n_keys = combined.num_skills
        return cls(spec, dataset.num_items, qmatrix, seed, tokens, n_keys)

    @property
    def gru(self) -> GruParams | None:
        return GruParams.from_dict(self.params) if self.spec.encoder == "gru" else None

    def prepare(self, sequences: list[StudentSequence]) -> list[StudentArrays]:
        width = self.qmatrix.max_skills_per_item
        out = []
        for seq in sequences:
            items = np.asarray(seq.items, dtype=np.int64)
            kc, wins, fails = kc_arrays(seq, self.qmatrix, width)
            targets = items if self.spec.decoder.metadata == "i" else kc[:, 0]
            out.append(StudentArrays(seq.student, self.action_tokens[items], items,
                                     np.asarray(seq.outcomes, dtype=float), targets, kc, wins, fails))
        return out

    def batch(self, arrays: list[StudentArrays]) -> Batch:
        return make_batch(arrays, self.qmatrix.max_skills_per_item)

    def _forward(self, batch: Batch, h0, params):
        """Logits for every (student, step) of the batch plus what backward needs."""
        H = cache = hp = None
        if self.spec.encoder == "gru":
            X = self.table.lookup(batch.keys, batch.outcomes.astype(np.int64))
            H, cache = gru_forward(h0, X, GruParams.from_dict(params))
            hp = H[:, :-1]
            if self.projected:
                hp = hp @ params["A"].T + params["b"]
        z = dec.forward_logits(self.spec.decoder, self.form, params, hp, batch.items, batch.targets,
                               batch.kc, batch.wins, batch.fails)
        return z, (H, cache, hp)

    def initial_state(self, batch_size: int) -> np.ndarray:
        return np.zeros((batch_size, self.spec.d))

    def window_loss_grad(self, batch: Batch, h0=None, params=None):
        """Loss, gradients and outgoing carry for one BPTT window.

        ``h0`` enters as a constant; no gradient crosses the window boundary.
        """
        params = self.params if params is None else params
        if h0 is None:
            h0 = self.initial_state(len(batch.students))
        z, (H, cache, hp) = self._forward(batch, h0, params)
        if not batch.mask.any():
            zero = {k: np.zeros_like(v) for k, v in params.items()}
            return 0.0, zero, (H[:, -1] if H is not None else None)
        loss, dz = loss_and_dlogit(z, batch.outcomes, batch.mask)
        grads, dhp = dec.backward_logits(self.spec.decoder, self.form, params, dz, hp, batch.items,
                                         batch.targets, batch.kc, batch.wins, batch.fails)
        carry = None
        if self.spec.encoder == "gru":
            carry = H[:, -1]
            hstates = H[:, :-1]
            if self.projected:
                grads["A"] = np.einsum("blj,bli->ji", dhp, hstates)
                grads["b"] = dhp.sum((0, 1))
                dH = dhp @ params["A"]
            else:
                dH = dhp
            grads.update(gru_backward(dH, H, cache, GruParams.from_dict(params)))
        for name, g in grads.items():
            if not (np.all(np.isfinite(g)) and np.all(np.isfinite(params[name]))):
                raise FloatingPointError(f"non-finite value or gradient for parameter {name!r}")
        return loss, grads, carry

    def window_loss(self, batch: Batch, h0=None, params=None) -> float:
        params = self.params if params is None else params
        if h0 is None:
            h0 = self.initial_state(len(batch.students))
        z, _ = self._forward(batch, h0, params)
        return loss_and_dlogit(z, batch.outcomes, batch.mask)[0]

    def mark_seen(self, sequences) -> None:
        """Record which items and skills have training data; others fall back to zero terms."""
        self.seen_items[:] = False
        self.seen_skills[:] = False
        for seq in sequences:
            for q in seq.items:
                self.seen_items[q] = True
                self.seen_skills[list(self.qmatrix.rows[q])] = True

    def effective_params(self) -> dict:
        """Parameters with unseen items/skills zeroed for cold-start prediction."""
        p = dict(self.params)
        if self.form == "dot":
            seen = self.seen_items if self.spec.decoder.metadata == "i" else self.seen_skills
            p["V"] = p["V"] * seen[:, None]
            p["w"] = p["w"] * seen
            return p
        if "w" in p:
            p["w"] = p["w"] * self.seen_items
        for name in ("beta", "gamma", "delta"):
            if name in p:
                p[name] = p[name] * self.seen_skills
        return p

    def predict_arrays(self, arrays: list[StudentArrays], chunk: int = 256) -> list[np.ndarray]:
        params = self.effective_params()
        out = []
        for i in range(0, len(arrays), chunk):
            part = arrays[i:i + chunk]
            batch = self.batch(part)
            z, _ = self._forward(batch, self.initial_state(len(part)), params)
            p = sigmoid(z)
            out.extend(p[b, :len(a)].copy() for b, a in enumerate(part))
        return out

    def predict(self, sequences) -> list[np.ndarray]:
        return self.predict_arrays(self.prepare(list(sequences)))

    def trainable_names(self) -> list[str]:
        order = [n for n in GRU_NAMES if n in self.params]
        return order + [n for n in self.params if n not in GRU_NAMES]
