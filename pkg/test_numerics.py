"""
Tests for the gradient tape, parameter store, AdaDelta and the gradient checker.
"""

import sys

import numpy as np
import pytest

sys.path.insert(0, '.')

from numerics.adadelta import AdaDeltaState, adadelta_step
from numerics.gradcheck import analytic_gradients, grad_check, relative_error
from numerics.params import ParamStore, decode_tensors, encode_tensors, identity_init
from numerics.tape import Tape, masked_log_softmax, masked_softmax
from utils.errors import CheckpointError, ShapeError


def _store(seed=0, **shapes):
    rng = np.random.default_rng(seed)
    store = ParamStore()
    for name, shape in shapes.items():
        store.add(name, rng.uniform(-0.5, 0.5, size=shape))
    return store


# ----------------------------------------------------------------------
# Softmax helpers
# ----------------------------------------------------------------------

def test_masked_softmax_zeroes_masked_entries():
    x = np.array([[1.0, 2.0, 3.0], [0.5, -1.0, 4.0]])
    mask = np.array([[True, False, True], [False, True, True]])
    p = masked_softmax(x, mask)
    assert np.all(p[~mask] == 0.0)
    assert np.allclose(p.sum(axis=1), 1.0)
    logp = masked_log_softmax(x, mask)
    assert np.allclose(np.exp(logp[mask]), p[mask])
    assert np.all(np.isneginf(logp[~mask]))


def test_masked_softmax_rejects_fully_masked_row():
    with pytest.raises(ValueError):
        masked_softmax(np.zeros((2, 3)), np.array([[True, True, True], [False, False, False]]))


def test_masked_softmax_is_shift_invariant():
    x = np.array([[1000.0, 1001.0, 999.0]])
    mask = np.ones_like(x, dtype=bool)
    assert np.allclose(masked_softmax(x, mask), masked_softmax(x - 1000.0, mask))


# ----------------------------------------------------------------------
# Tape
# ----------------------------------------------------------------------

def test_matmul_shape_mismatch():
    tape = Tape()
    with pytest.raises(ShapeError):
        tape.matmul(tape.constant(np.ones((2, 3))), tape.constant(np.ones((4, 2))))


def test_backward_requires_scalar_and_enabled_tape():
    tape = Tape()
    w = tape.param("w", np.ones((2, 2)))
    out = tape.matmul(tape.constant(np.ones((1, 2))), w)
    with pytest.raises(ShapeError):
        tape.backward(out)

    disabled = Tape(enabled=False)
    loss = disabled.sum(disabled.param("w", np.ones(3)))
    with pytest.raises(RuntimeError):
        disabled.backward(loss)


def test_gather_rows_accumulates_repeated_ids():
    tape = Tape()
    table = tape.param("E", np.arange(6.0).reshape(3, 2))
    rows = tape.gather_rows(table, np.array([[1, 1], [0, 1]]))
    tape.backward(tape.sum(rows))
    assert np.array_equal(table.grad, np.array([[1.0, 1.0], [3.0, 3.0], [0.0, 0.0]]))


def test_param_leaf_is_shared_within_a_tape():
    tape = Tape()
    value = np.ones(3)
    a = tape.param("w", value)
    b = tape.param("w", value)
    assert a is b
    tape.backward(tape.sum(tape.add(a, b)))
    assert np.array_equal(a.grad, np.full(3, 2.0))


def test_primitives_pass_gradient_check():
    """A small graph touching every primitive the model uses."""
    store = _store(
        seed=1,
        E=(6, 3),
        W=(3, 4),
        U=(4, 4),
        b=(4,),
        v=(4, 1),
        O=(8, 5),
    )
    ids = np.array([[1, 4, 2], [3, 5, 0]])
    mask = np.array([[True, True, True], [True, True, False]])
    targets = np.array([3, 1])
    support = np.array([False, True, True, True, False])
    weights = np.array([0.5, 0.5])

    def objective(tape, store):
        E, W, U, b, v, O = (store.node(tape, n) for n in ("E", "W", "U", "b", "v", "O"))
        x = tape.gather_rows(E, ids)
        h_prev = tape.constant(np.zeros((2, 4)))
        states = []
        for t in range(3):
            xt = tape.reshape(tape.slice_cols(tape.reshape(x, (2, 9)), 3 * t, 3 * t + 3), (2, 3))
            pre = tape.add_bias(tape.add(tape.matmul(xt, W), tape.matmul(h_prev, U)), b)
            z = tape.sigmoid(pre)
            cand = tape.tanh(pre)
            h = tape.add(tape.mul(tape.one_minus(z), h_prev), tape.mul(z, cand))
            h_prev = tape.blend(h, h_prev, mask[:, t])
            states.append(h_prev)
        seq = tape.stack_time(states)
        keys = tape.tanh(tape.expand_add(tape.matmul(seq, U), tape.sub(h_prev, tape.scale(h_prev, 0.5))))
        scores = tape.reshape(tape.matmul(keys, v), (2, 3))
        alpha = tape.masked_softmax(scores, mask)
        context = tape.weighted_sum(alpha, seq)
        logits = tape.matmul(tape.concat([context, h_prev]), O)
        return tape.softmax_nll(logits, targets, support, weights)

    report = grad_check(store, objective)
    print(report.summary())
    assert report.passed, report.summary()


def test_softmax_nll_ignores_zero_weight_rows():
    tape = Tape()
    logits = tape.param("L", np.array([[0.0, 1.0, 2.0], [5.0, -1.0, 0.0]]))
    support = np.array([True, True, False])
    loss = tape.softmax_nll(logits, np.array([1, 2]), support, np.array([1.0, 0.0]))
    expected = -masked_log_softmax(np.array([[0.0, 1.0, 2.0]]), support[None, :])[0, 1]
    assert float(loss.value) == pytest.approx(expected)
    tape.backward(loss)
    assert np.all(logits.grad[1] == 0.0)
    assert logits.grad[0, 2] == 0.0


def test_softmax_nll_rejects_unsupported_target():
    tape = Tape()
    logits = tape.constant(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        tape.softmax_nll(logits, np.array([2]), np.array([True, True, False]), np.array([1.0]))


# ----------------------------------------------------------------------
# Gradient checker
# ----------------------------------------------------------------------

def test_grad_check_flags_wrong_gradient():
    store = _store(seed=2, W=(3, 2))
    x = np.array([[0.3, -0.2, 0.9]])

    def objective(tape, store):
        return tape.sum(tape.tanh(tape.matmul(tape.constant(x), store.node(tape, "W"))))

    good = grad_check(store, objective)
    assert good.passed

    broken = {"W": analytic_gradients(store, objective)["W"] * 1.01}
    report = grad_check(store, objective, analytic=broken)
    assert not report.passed
    assert report.worst.name == "W"
    assert report.failures()


def test_relative_error_floor():
    assert relative_error(0.0, 0.0) == 0.0
    assert relative_error(1.0, 1.0 + 1e-6) == pytest.approx(1e-6, rel=1e-3)
    assert relative_error(0.0, 1e-12) == pytest.approx(1e-4)


def test_grad_check_restores_parameters():
    store = _store(seed=3, W=(2, 2))
    before = store.state()
    grad_check(store, lambda tape, s: tape.sum(tape.tanh(s.node(tape, "W"))))
    assert np.array_equal(store["W"], before["W"])


# ----------------------------------------------------------------------
# Parameter store and serialization
# ----------------------------------------------------------------------

def test_identity_init_is_truncated_identity():
    m = identity_init(3, 5)
    assert m.shape == (3, 5)
    assert np.array_equal(m[:, :3], np.eye(3))
    assert np.all(m[:, 3:] == 0.0)


def test_clip_grads_scales_to_max_norm():
    store = _store(a=(2,), b=(2,))
    store.grads["a"][...] = [3.0, 0.0]
    store.grads["b"][...] = [0.0, 4.0]
    assert store.clip_grads(1.0) == pytest.approx(5.0)
    assert store.grad_norm() == pytest.approx(1.0)


def test_load_state_rejects_mismatch():
    store = _store(a=(2, 2))
    with pytest.raises(CheckpointError):
        store.load_state({"a": np.zeros((3, 2))})
    with pytest.raises(CheckpointError):
        store.load_state({})


def test_tensor_segment_round_trip_is_exact():
    tensors = {"a": np.random.default_rng(0).normal(size=(3, 4)), "b": np.array([1.5, -2.0]), "c": np.array(7.0)}
    data = encode_tensors(tensors)
    decoded, offset = decode_tensors(data)
    assert offset == len(data)
    for name, value in tensors.items():
        assert np.array_equal(decoded[name], value)


def test_tensor_segment_float32_and_truncation():
    tensors = {"a": np.array([[0.1, 0.2], [0.3, 0.4]])}
    decoded, _ = decode_tensors(encode_tensors(tensors, "float32"), precision="float32")
    assert decoded["a"].dtype == np.float64
    assert np.allclose(decoded["a"], tensors["a"], atol=1e-7)

    data = encode_tensors(tensors)
    with pytest.raises(CheckpointError):
        decode_tensors(data[:-3])


# ----------------------------------------------------------------------
# AdaDelta
# ----------------------------------------------------------------------

def test_adadelta_first_step_matches_update_rule():
    rho, eps = 0.95, 1e-6
    params = {"x": np.array([1.0, -2.0])}
    grads = {"x": np.array([0.5, 0.0])}
    state = AdaDeltaState.for_params(params, rho, eps)
    adadelta_step(params, grads, state)

    g = 0.5
    eg2 = (1 - rho) * g * g
    dx = -np.sqrt(eps) / np.sqrt(eg2 + eps) * g
    assert params["x"][0] == pytest.approx(1.0 + dx, rel=1e-12)
    assert params["x"][1] == -2.0
    assert state.sq_grad["x"][0] == pytest.approx(eg2)
    assert state.sq_update["x"][0] == pytest.approx((1 - rho) * dx * dx)


def test_adadelta_all_zero_gradient_is_a_no_op():
    params = {"x": np.array([1.0, 2.0]), "y": np.array([[3.0]])}
    state = AdaDeltaState.for_params(params)
    adadelta_step(params, {"x": np.array([1.0, 1.0]), "y": np.array([[1.0]])}, state)
    snapshot = ({k: v.copy() for k, v in params.items()}, {k: v.copy() for k, v in state.tensors().items()})
    adadelta_step(params, {"x": np.zeros(2), "y": np.zeros((1, 1))}, state)
    assert all(np.array_equal(params[k], snapshot[0][k]) for k in params)
    assert all(np.array_equal(v, snapshot[1][k]) for k, v in state.tensors().items())


def test_adadelta_minimizes_a_quadratic():
    params = {"x": np.array([3.0, -4.0])}
    state = AdaDeltaState.for_params(params, rho=0.95, eps=1e-6)
    start = float(np.sum(params["x"] ** 2))
    for _ in range(2000):
        adadelta_step(params, {"x": 2.0 * params["x"]}, state)
    assert float(np.sum(params["x"] ** 2)) < start


def test_adadelta_rejects_bad_hyperparameters():
    with pytest.raises(ValueError):
        AdaDeltaState(rho=1.0)
    with pytest.raises(ValueError):
        AdaDeltaState(eps=0.0)


def test_adadelta_shape_mismatch():
    params = {"x": np.zeros(2)}
    with pytest.raises(ShapeError):
        adadelta_step(params, {"x": np.zeros(3)}, AdaDeltaState.for_params(params))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
