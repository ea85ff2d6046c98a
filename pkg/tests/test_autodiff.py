import json
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradcases import CASES
from monrec.autodiff import (CheckpointError, NonFiniteError, OptimizerState, Tape, Tensor, TrainControl,
                             adam_step, backward, control_step, dump_params, grad_check, load_params, ops)


def test_sum_grad_is_ones():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    backward(ops.sum(x))
    np.testing.assert_array_equal(x.grad, np.ones(3))


def test_sigmoid_grad_at_zero():
    x = Tensor(np.array(0.0), requires_grad=True)
    backward(ops.sigmoid(x))
    assert x.grad == pytest.approx(0.25)


def test_backward_needs_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(ops.mul(x, 2.0))


def test_tape_visits_each_op_once():
    x = Tensor(np.ones(2), requires_grad=True)
    y = ops.mul(x, x)
    z = ops.sum(ops.add(y, y))
    tape = Tape(z)
    outputs = [r.output for r in tape.records]
    assert len(outputs) == len(set(outputs)) == 3
    backward(z)
    np.testing.assert_allclose(x.grad, 4 * np.ones(2))


def test_grad_check_square():
    x = Tensor(np.array(3.0), requires_grad=True)
    assert grad_check(lambda: ops.square(x), [x]) < 1e-7
    assert x.grad == pytest.approx(6.0)


def test_grad_check_skips_relu_kink():
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    assert grad_check(lambda: ops.sum(ops.relu(x)), [x]) < 1e-7


def test_grad_check_rejects_nonfinite():
    x = Tensor(np.array([-1.0]), requires_grad=True)
    with np.errstate(all="ignore"), pytest.raises(NonFiniteError):
        grad_check(lambda: ops.sum(ops.log(x)), [x])


@pytest.mark.parametrize("name", sorted(CASES))
def test_grad_check_cases(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(10):
        f, params = CASES[name](rng)
        assert grad_check(f, params, max_coords=16) < 1e-4


def test_random_attention_layer_grad(small_dataset):
    from monrec.ranker import DIMENSION_TASK, RankerConfig, TaskGraph, node_features
    from monrec.ranker.model import init_params, mp_layer

    g = small_dataset.graph
    tg = TaskGraph(g, DIMENSION_TASK, node_features(g))
    cfg = RankerConfig(hidden=8, out=8, layers=1, metapaths=False)
    params = init_params(tg, cfg, np.random.default_rng(0))
    w = np.random.default_rng(1).normal(size=(len(tg), 8))
    x = Tensor(tg.x0 * 4.0)
    f = lambda: ops.sum(ops.mul(mp_layer(x, tg, params, 0, cfg.heads), w))  # noqa: E731
    watched = [params["l0.w"], params["l0.q.Monitor"], params["l0.k.MetricHasDimension"]]
    assert grad_check(f, watched, max_coords=8) < 1e-4


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-50, 50)))
def test_softmax_rows_sum_to_one(a):
    s = ops.softmax(Tensor(a), axis=-1).data
    assert np.all(s >= 0)
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-9)


def test_adam_identity_on_zero_grad():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    adam_step([p], [np.zeros(2)], OptimizerState(weight_decay=0.0))
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_magnitude():
    p = Tensor(np.array([1.0]), requires_grad=True)
    adam_step([p], [np.array([1.0])], OptimizerState(lr=1e-3, weight_decay=0.0))
    assert p.data[0] == pytest.approx(0.999, abs=1e-6)


def test_adam_shape_mismatch():
    p = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(ValueError):
        adam_step([p], [np.ones(3)], OptimizerState())


def test_adam_descends_quadratic():
    target = np.array([3.0, -1.0, 0.5])
    p = Tensor(np.zeros(3), requires_grad=True)
    state = OptimizerState(lr=0.05)
    losses = []
    for _ in range(100):
        p.grad = None
        loss = ops.sum(ops.square(ops.sub(p, target)))
        backward(loss)
        adam_step([p], [p.grad], state)
        losses.append(loss.item())
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_control_step_schedule():
    c = TrainControl(lr=1e-3)
    for v in range(5):
        lr, stop = control_step(c, float(v))
        assert lr == 1e-3 and not stop
    c = TrainControl(lr=1e-3)
    control_step(c, 1.0)
    lrs, stops = [], []
    for _ in range(10):
        lr, stop = control_step(c, 1.0)
        lrs.append(lr)
        stops.append(stop)
    assert lrs[4] == pytest.approx(5e-4)
    assert stops == [False] * 9 + [True]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_lr_never_increases(values):
    c = TrainControl(lr=1e-3)
    prev = c.lr
    for v in values:
        lr, _ = control_step(c, v)
        assert lr <= prev
        prev = lr


def test_control_step_needs_finite():
    with pytest.raises(ValueError):
        control_step(TrainControl(), float("nan"))


def test_checkpoint_round_trip():
    params = {"b": Tensor(np.arange(6.0).reshape(2, 3)), "a": Tensor(np.array([0.1]))}
    text = dump_params(params, {"note": "x"})
    assert list(json.loads(text)["params"]) == ["a", "b"]
    loaded, meta = load_params(text)
    assert meta == {"note": "x"}
    np.testing.assert_array_equal(loaded["b"].data, params["b"].data)
    with pytest.raises(CheckpointError):
        load_params(text[:-5])
