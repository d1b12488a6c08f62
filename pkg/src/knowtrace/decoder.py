"""Decoders turning a student state and assessment metadata into p_t.

Two shapes are covered:

* dot-product: ``sigmoid(<h', v_target> + w_target)`` with the target an item
  ("i") or a skill ("s"); ``h'`` is ``h`` itself when the embedding sizes
  match, otherwise an affine projection of it;
* scalar (d' = 1): ``sigmoid(h' + w_item + sum_k beta_k + gamma_k W_k + delta_k F_k)``
  with any subset of the four terms switched on by the "iswf" letters.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .counters import normalize_metadata
from .encoder import sigmoid


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderSpec:
    metadata: str
    d_prime: int

    def __post_init__(self):
        object.__setattr__(self, "metadata", normalize_metadata(self.metadata))
        if self.d_prime < 1:
            raise ConfigError("d' must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "DecoderSpec":
        """Read names such as ``iswf d'=1`` or ``i d' = 50``."""
        m = re.fullmatch(r"\s*([iswf]+)\s+d'\s*=\s*(\d+)\s*", text)
        if not m:
            raise ConfigError(f"cannot parse decoder {text!r}; expected e.g. \"iswf d'=1\"")
        return cls(m.group(1), int(m.group(2)))

    def form(self, encoder_d: int) -> str:
        """``"dot"`` or ``"scalar"`` for an encoder of size ``encoder_d`` (0 = none)."""
        if encoder_d == 0 or self.metadata not in ("i", "s"):
            if self.d_prime != 1:
                raise ConfigError(
                    f"decoder '{self}' needs d'=1: only single-metadata decoders over a recurrent "
                    "encoder may use larger embeddings")
            return "scalar"
        return "dot"

    def projected(self, encoder_d: int) -> bool:
        if encoder_d == 0:
            return False
        return self.form(encoder_d) == "scalar" or self.d_prime != encoder_d

    def __str__(self):
        return f"{self.metadata} d'={self.d_prime}"


def project(h, A, b):
    return np.asarray(A) @ np.asarray(h) + np.asarray(b)


def decode_dot(h, target: int, V, w) -> float:
    # same elementwise-product reduction as the full readout, so the two agree bit for bit
    return float(sigmoid(np.sum(V[target] * np.asarray(h)) + w[target]))


def full_output_vector(h, V, w) -> np.ndarray:
    """Every target's probability at once: the usual DKT readout layer."""
    return sigmoid(np.sum(V * np.asarray(h), axis=-1) + w)


def scalar_logit(h_prime: float, item: int, skills, wins, fails, metadata: str, params: dict,
                 seen_items=None, seen_skills=None) -> float:
    """Logit of the scalar decoder for one step.

    ``wins``/``fails`` are aligned with ``skills``. Items or skills flagged as
    unseen (or out of range) contribute nothing.
    """
    meta = normalize_metadata(metadata)
    logit = float(h_prime)
    if "i" in meta:
        w = params["w"]
        if 0 <= item < len(w) and (seen_items is None or seen_items[item]):
            logit += w[item]
    n_skills = next((len(params[n]) for n in ("beta", "gamma", "delta") if n in params), 0)
    for k, W, F in zip(skills, wins, fails):
        if not 0 <= k < n_skills or (seen_skills is not None and not seen_skills[k]):
            continue
        if "s" in meta:
            logit += params["beta"][k]
        if "w" in meta:
            logit += params["gamma"][k] * W
        if "f" in meta:
            logit += params["delta"][k] * F
    return logit


def decode_scalar(h_prime: float, item: int, skills, wins, fails, metadata: str, params: dict,
                  seen_items=None, seen_skills=None) -> float:
    return float(sigmoid(scalar_logit(h_prime, item, skills, wins, fails, metadata, params,
                                      seen_items, seen_skills)))


def init_params(spec: DecoderSpec, encoder_d: int, num_items: int, num_skills: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Dot embeddings ~ N(0, 1/d'); every bias, slope and projection starts at 0."""
    params = {}
    if spec.projected(encoder_d):
        params["A"] = np.zeros((spec.d_prime, encoder_d))
        params["b"] = np.zeros(spec.d_prime)
    if spec.form(encoder_d) == "dot":
        n = num_items if spec.metadata == "i" else num_skills
        params["V"] = rng.normal(0.0, 1.0 / np.sqrt(spec.d_prime), size=(n, spec.d_prime))
        params["w"] = np.zeros(n)
        return params
    if "i" in spec.metadata:
        params["w"] = np.zeros(num_items)
    for letter, name in (("s", "beta"), ("w", "gamma"), ("f", "delta")):
        if letter in spec.metadata:
            params[name] = np.zeros(num_skills)
    return params


def _gather_skills(vec, kc_safe, valid):
    return (vec[kc_safe] * valid).sum(-1)


def _scatter(values, index, n):
    return np.bincount(index.ravel(), weights=values.ravel(), minlength=n)


def forward_logits(spec: DecoderSpec, form: str, params: dict, hp, items, targets, kc, wins, fails):
    """Vectorized logits over a (B, L) block.

    ``hp`` is the (possibly projected) state, shape (B, L, d'), or None when
    there is no encoder.
    """
    if form == "dot":
        return np.einsum("bld,bld->bl", hp, params["V"][targets]) + params["w"][targets]
    meta = spec.metadata
    z = np.zeros(items.shape) if hp is None else hp[..., 0].copy()
    if "i" in meta:
        z += params["w"][items]
    valid = kc >= 0
    kc_safe = np.where(valid, kc, 0)
    if "s" in meta:
        z += _gather_skills(params["beta"], kc_safe, valid)
    if "w" in meta:
        z += _gather_skills(params["gamma"], kc_safe, valid * wins)
    if "f" in meta:
        z += _gather_skills(params["delta"], kc_safe, valid * fails)
    return z


def backward_logits(spec: DecoderSpec, form: str, params: dict, dz, hp, items, targets, kc, wins, fails):
    """Gradients of the decoder tables plus d(loss)/d(hp) (None without encoder)."""
    grads = {}
    if form == "dot":
        V = params["V"]
        n, dp = V.shape
        grads["w"] = _scatter(dz, targets, n)
        grads["V"] = np.stack([_scatter(dz * hp[..., j], targets, n) for j in range(dp)], axis=1)
        return grads, dz[..., None] * V[targets]
    meta = spec.metadata
    if "i" in meta:
        grads["w"] = _scatter(dz, items, params["w"].shape[0])
    valid = kc >= 0
    kc_safe = np.where(valid, kc, 0)
    for letter, name, scale in (("s", "beta", 1.0), ("w", "gamma", wins), ("f", "delta", fails)):
        if letter in meta:
            grads[name] = _scatter(dz[..., None] * valid * scale, kc_safe, params[name].shape[0])
    dhp = None if hp is None else dz[..., None]
    return grads, dhp
