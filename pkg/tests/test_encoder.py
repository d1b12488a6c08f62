import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knowtrace.encoder import (ActionEmbeddingTable, GruParams, action_embedding, encode_none,
                               encode_sequence, gru_forward, gru_step, sigmoid)
from oracles import scalar_gru_step


def test_table_is_deterministic():
    table = ActionEmbeddingTable(10, 4, seed=0)
    assert np.array_equal(action_embedding(3, 1, table), action_embedding(3, 1, table))
    assert np.array_equal(ActionEmbeddingTable(10, 4, seed=0).table, table.table)


def test_seeds_differ():
    assert not np.allclose(ActionEmbeddingTable(10, 4, 1)(3, 1), ActionEmbeddingTable(10, 4, 2)(3, 1))


def test_gaussian_mean():
    table = ActionEmbeddingTable(500, 50, seed=11)
    entries = table.table.ravel()
    assert entries.size == 1000 * 50
    assert abs(entries.mean()) < 4 / np.sqrt(entries.size)


def test_unknown_key_is_zero():
    table = ActionEmbeddingTable(3, 4, 0)
    assert np.array_equal(table(7, 1), np.zeros(4))
    assert np.array_equal(table.lookup(np.array([[-1, 2]]), np.array([[0, 1]]))[0, 0], np.zeros(4))
    assert np.array_equal(table.lookup(np.array([2]), np.array([1]))[0], table(2, 1))


def test_zero_params_halve_the_state():
    h = np.array([0.3, -1.2, 2.0])
    x = np.array([5.0, -4.0, 1.0])
    assert np.allclose(gru_step(h, x, GruParams.zeros(3)), 0.5 * h, rtol=0, atol=1e-15)
    assert np.array_equal(gru_step(np.zeros(3), x, GruParams.zeros(3)), np.zeros(3))


def _params(d, seed, scale=1.0):
    p = GruParams.init(d, np.random.default_rng(seed))
    return GruParams(**{k: v * scale for k, v in p.as_dict().items()})


def test_step_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    P = _params(3, 5, scale=2.0)
    h, x = rng.normal(size=3), rng.normal(size=3)
    expected = scalar_gru_step(h.tolist(), x.tolist(), {k: v.tolist() for k, v in P.as_dict().items()})
    assert np.allclose(gru_step(h, x, P), expected, rtol=0, atol=1e-12)


def test_step_rejects_bad_input():
    P = GruParams.zeros(2)
    with pytest.raises(FloatingPointError):
        gru_step(np.array([np.nan, 0.0]), np.zeros(2), P)
    with pytest.raises(ValueError):
        gru_step(np.zeros(3), np.zeros(2), P)


def test_encode_first_state_is_zero():
    table = ActionEmbeddingTable(4, 2, 0)
    states, _ = encode_sequence([1, 2], [1, 0], table, _params(2, 1))
    assert np.array_equal(states[0], np.zeros(2))


def test_window_does_not_change_forward_values():
    table = ActionEmbeddingTable(5, 3, 0)
    keys, outs = [0, 3, 1, 4, 2, 2, 0], [1, 0, 0, 1, 1, 0, 1]
    P = _params(3, 2)
    full, c1 = encode_sequence(keys, outs, table, P, window=len(keys))
    cut, c2 = encode_sequence(keys, outs, table, P, window=2)
    assert all(np.array_equal(a, b) for a, b in zip(full, cut))
    assert np.array_equal(c1, c2)


def test_encode_is_composition_of_steps():
    table = ActionEmbeddingTable(4, 2, seed=9)
    P = _params(2, 4, scale=1.5)
    keys, outs = [0, 1, 3, 3, 2], [1, 1, 0, 1, 0]
    states, last = encode_sequence(keys, outs, table, P, window=100)
    lists = {k: v.tolist() for k, v in P.as_dict().items()}
    h = [0.0, 0.0]
    for t in range(5):
        assert np.allclose(states[t], h, rtol=0, atol=1e-12)
        h = scalar_gru_step(h, table(keys[t], outs[t]).tolist(), lists)
    assert np.allclose(last, h, rtol=0, atol=1e-12)


def test_batched_forward_matches_per_student():
    table = ActionEmbeddingTable(6, 3, 0)
    P = _params(3, 8)
    rng = np.random.default_rng(3)
    keys = rng.integers(0, 6, size=(4, 7))
    outs = rng.integers(0, 2, size=(4, 7))
    H, _ = gru_forward(np.zeros((4, 3)), table.lookup(keys, outs), P)
    for b in range(4):
        states, last = encode_sequence(keys[b], outs[b], table, P)
        assert np.allclose(H[b, :7], np.array(states), atol=1e-14)
        assert np.allclose(H[b, 7], last, atol=1e-14)


def test_encode_none():
    assert [s.shape for s in encode_none([(0, 1)] * 4)] == [(0,)] * 4


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.data())
def test_causality(T, data):
    table = ActionEmbeddingTable(5, 2, 0)
    P = _params(2, 6, scale=2.0)
    keys = data.draw(st.lists(st.integers(0, 4), min_size=T, max_size=T))
    outs = data.draw(st.lists(st.integers(0, 1), min_size=T, max_size=T))
    t = data.draw(st.integers(0, T - 1))
    keys2 = keys[:t] + data.draw(st.lists(st.integers(0, 4), min_size=T - t, max_size=T - t))
    outs2 = outs[:t] + data.draw(st.lists(st.integers(0, 1), min_size=T - t, max_size=T - t))
    a, _ = encode_sequence(keys, outs, table, P)
    b, _ = encode_sequence(keys2, outs2, table, P)
    for tau in range(t + 1):
        assert np.array_equal(a[tau], b[tau])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 20.0))
def test_gates_bounded(seed, scale):
    rng = np.random.default_rng(seed)
    P = _params(4, seed, scale=scale)
    h = rng.uniform(-1, 1, size=(3, 4))
    x = rng.normal(size=(3, 4)) * scale
    h_new, (z, r, n) = gru_step(h, x, P, cache=True)
    assert np.all((z >= 0) & (z <= 1)) and np.all((r >= 0) & (r <= 1))
    assert np.all(np.abs(n) <= 1)
    lo, hi = np.minimum(n, h), np.maximum(n, h)
    assert np.all((h_new >= lo - 1e-15) & (h_new <= hi + 1e-15))


def test_sigmoid_extremes():
    assert sigmoid(0.0) == 0.5
    assert np.isfinite(sigmoid(np.array([-1e4, 1e4]))).all()
