"""Student-state encoders: the empty encoder and a one-layer GRU.

The GRU reads fixed Gaussian embeddings of (key, outcome) pairs. The state
used to predict step t has consumed steps 0..t-1 only, so the first state is
always zero.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

GRU_NAMES = ("Wz", "Wr", "Wn", "Uz", "Ur", "Un", "bz", "br", "bn")


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


class ActionEmbeddingTable:
    """Fixed standard-normal vectors, one per (key, outcome) pair.

    Never trained. Keys outside ``0..num_keys-1`` map to the zero vector.
    """

    def __init__(self, num_keys: int, d: int, seed: int):
        self.num_keys = num_keys
        self.d = d
        self.seed = seed
        self.table = np.random.default_rng(seed).standard_normal((2 * num_keys, d))

    def __call__(self, key: int, outcome: int) -> np.ndarray:
        if outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
        if not 0 <= key < self.num_keys:
            return np.zeros(self.d)
        return self.table[2 * key + outcome].copy()

    def lookup(self, keys: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        """Vectorized lookup for arrays of keys/outcomes of any shape."""
        keys = np.asarray(keys)
        known = (keys >= 0) & (keys < self.num_keys)
        rows = np.where(known, 2 * keys + np.asarray(outcomes), 0)
        return self.table[rows] * known[..., None]


def action_embedding(item: int, outcome: int, table: ActionEmbeddingTable) -> np.ndarray:
    return table(item, outcome)


@dataclass
class GruParams:
    Wz: np.ndarray
    Wr: np.ndarray
    Wn: np.ndarray
    Uz: np.ndarray
    Ur: np.ndarray
    Un: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bn: np.ndarray

    @classmethod
    def init(cls, d: int, rng: np.random.Generator) -> "GruParams":
        bound = 1.0 / np.sqrt(d)
        mats = {n: rng.uniform(-bound, bound, size=(d, d)) for n in GRU_NAMES[:6]}
        vecs = {n: rng.uniform(-bound, bound, size=d) for n in GRU_NAMES[6:]}
        return cls(**mats, **vecs)

    @classmethod
    def zeros(cls, d: int) -> "GruParams":
        return cls(**{n: np.zeros((d, d)) for n in GRU_NAMES[:6]}, **{n: np.zeros(d) for n in GRU_NAMES[6:]})

    @classmethod
    def from_dict(cls, params: dict) -> "GruParams":
        return cls(**{n: params[n] for n in GRU_NAMES})

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def d(self) -> int:
        return self.bz.shape[0]


def gru_step(h_prev, x, params: GruParams, cache: bool = False):
    """One GRU transition; ``h_prev`` and ``x`` are (d,) or (batch, d)."""
    h_prev = np.asarray(h_prev, dtype=float)
    x = np.asarray(x, dtype=float)
    if h_prev.shape[-1] != params.d or x.shape[-1] != params.d:
        raise ValueError(f"dimension mismatch: h {h_prev.shape}, x {x.shape}, d={params.d}")
    if not (np.all(np.isfinite(h_prev)) and np.all(np.isfinite(x))):
        raise FloatingPointError("non-finite input to gru_step")
    return _step(h_prev, x, params, cache)


def _step(h_prev, x, params: GruParams, cache: bool = False):
    z = sigmoid(x @ params.Wz.T + h_prev @ params.Uz.T + params.bz)
    r = sigmoid(x @ params.Wr.T + h_prev @ params.Ur.T + params.br)
    n = np.tanh(x @ params.Wn.T + (r * h_prev) @ params.Un.T + params.bn)
    h = (1.0 - z) * n + z * h_prev
    if cache:
        return h, (z, r, n)
    return h


def encode_sequence(keys, outcomes, table: ActionEmbeddingTable, params: GruParams, window: int = 100,
                    h0=None):
    """States for every step of one student, plus the state after the last step.

    ``states[t]`` has seen steps ``0..t-1``. Windows only mark where gradients
    would be cut during training; forward values do not depend on them.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    h = np.zeros(params.d) if h0 is None else np.asarray(h0, dtype=float)
    states = []
    T = len(keys)
    for start in range(0, T, window):
        for t in range(start, min(start + window, T)):
            states.append(h)
            h = gru_step(h, table(keys[t], outcomes[t]), params)
    return states, h


def encode_none(sequence) -> list[np.ndarray]:
    return [np.zeros(0) for _ in range(len(sequence))]


def gru_forward(h0: np.ndarray, X: np.ndarray, params: GruParams):
    """Unroll over a window. ``X`` is (B, L, d); returns states (B, L+1, d) and a cache.

    ``states[:, t]`` is the state before consuming step t; ``states[:, L]``
    is the carry handed to the next window.
    """
    B, L, d = X.shape
    H = np.empty((B, L + 1, d))
    Z = np.empty((B, L, d))
    R = np.empty((B, L, d))
    N = np.empty((B, L, d))
    H[:, 0] = h0
    # input projections do not depend on the recurrence
    xz = X @ params.Wz.T + params.bz
    xr = X @ params.Wr.T + params.br
    xn = X @ params.Wn.T + params.bn
    UzT, UrT, UnT = params.Uz.T, params.Ur.T, params.Un.T
    for t in range(L):
        h = H[:, t]
        z = sigmoid(xz[:, t] + h @ UzT)
        r = sigmoid(xr[:, t] + h @ UrT)
        n = np.tanh(xn[:, t] + (r * h) @ UnT)
        H[:, t + 1] = n + z * (h - n)
        Z[:, t], R[:, t], N[:, t] = z, r, n
    return H, (X, Z, R, N)


def gru_backward(dH: np.ndarray, H: np.ndarray, cache, params: GruParams) -> dict[str, np.ndarray]:
    """Backpropagate ``dH`` (B, L, d), the loss gradient w.r.t. ``H[:, :L]``.

    The incoming state ``H[:, 0]`` is treated as a constant, so nothing flows
    out of the window.
    """
    X, Z, R, N = cache
    B, L, d = X.shape
    Hp = H[:, :L]
    # pre-activation gradients per step; weight gradients are summed afterwards
    DAZ = np.empty((B, L, d))
    DAR = np.empty((B, L, d))
    DAN = np.empty((B, L, d))
    dh_next = np.zeros((B, d))
    Uz, Ur, Un = params.Uz, params.Ur, params.Un
    for t in range(L - 1, -1, -1):
        h, z, r, n = Hp[:, t], Z[:, t], R[:, t], N[:, t]
        dan = dh_next * (1.0 - z) * (1.0 - n * n)
        daz = dh_next * (h - n) * z * (1.0 - z)
        drh = dan @ Un
        dar = drh * h * r * (1.0 - r)
        DAZ[:, t], DAR[:, t], DAN[:, t] = daz, dar, dan
        dh_next = dh_next * z + drh * r + daz @ Uz + dar @ Ur + dH[:, t]
    RH = R * Hp
    return {
        "Wz": np.einsum("bti,btj->ij", DAZ, X),
        "Wr": np.einsum("bti,btj->ij", DAR, X),
        "Wn": np.einsum("bti,btj->ij", DAN, X),
        "Uz": np.einsum("bti,btj->ij", DAZ, Hp),
        "Ur": np.einsum("bti,btj->ij", DAR, Hp),
        "Un": np.einsum("bti,btj->ij", DAN, RH),
        "bz": DAZ.sum((0, 1)),
        "br": DAR.sum((0, 1)),
        "bn": DAN.sum((0, 1)),
    }
