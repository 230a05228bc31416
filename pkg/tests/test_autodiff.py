import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsdegen import autodiff as ad
from tsdegen.autodiff import Adam, AdamState, Tape, Tensor, adam_step, check_gradients
from tsdegen.errors import ContractError, NumericError, ShapeError


def rand(shape, seed=0, lo=-2.0, hi=2.0):
    return Tensor(np.random.default_rng(seed).uniform(lo, hi, shape), requires_grad=True)


# ---------------------------------------------------------------- matmul

def test_matmul_identity():
    out = ad.matmul(Tensor(np.eye(2)), Tensor([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(out.data, [[1, 2], [3, 4]])


def test_matmul_projector_selects_row():
    out = ad.matmul(Tensor([[1.0, 0.0], [0.0, 0.0]]), Tensor([[5.0, 6.0], [7.0, 8.0]]))
    np.testing.assert_array_equal(out.data, [[5, 6], [0, 0]])


def test_matmul_gradient_vs_finite_differences():
    a, b = rand((3, 4), 1), rand((4, 2), 2)
    w = np.random.default_rng(3).normal(size=(3, 2))
    errs = check_gradients(lambda: ad.tsum(ad.mul(ad.matmul(a, b), w)), {"a": a, "b": b})
    assert max(errs.values()) < 1e-6


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(3, 4\).*\(3, 2\)"):
        ad.matmul(Tensor(np.ones((3, 4))), Tensor(np.ones((3, 2))))


# ---------------------------------------------------------------- softmax

def test_softmax_symmetric_row():
    np.testing.assert_allclose(ad.softmax_rows(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3, atol=1e-15)


def test_softmax_saturates_without_overflow():
    out = ad.softmax_rows(Tensor([1000.0, 0.0, 0.0])).data
    np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=1e-12)


def test_softmax_known_values():
    # exp/sum(exp) evaluated independently with math
    e = [math.exp(v) for v in (1.0, 2.0, 3.0)]
    oracle = [v / sum(e) for v in e]
    out = ad.softmax_rows(Tensor([1.0, 2.0, 3.0])).data
    np.testing.assert_allclose(out, oracle, rtol=1e-14)
    np.testing.assert_allclose(out, [0.09003057, 0.24472847, 0.66524096], atol=5e-9)


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericError):
        ad.softmax_rows(Tensor([0.0, np.nan]))
    with pytest.raises(NumericError):
        ad.softmax_rows(Tensor([np.inf, 0.0]))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 7), elements=st.floats(-50, 50)))
def test_softmax_rows_are_distributions(x):
    out = ad.softmax_rows(Tensor(x)).data
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(out > 0)


# ---------------------------------------------------------------- layer norm

def test_layer_norm_constant_row_is_zero():
    out = ad.layer_norm(Tensor([1.0, 1.0, 1.0, 1.0]), Tensor(np.ones(4)), Tensor(np.zeros(4)))
    np.testing.assert_array_equal(out.data, np.zeros(4))


def test_layer_norm_two_points():
    out = ad.layer_norm(Tensor([0.0, 2.0]), Tensor(np.ones(2)), Tensor(np.zeros(2))).data
    expected = 1.0 / math.sqrt(1.0 + 1e-5)
    np.testing.assert_allclose(out, [-expected, expected], rtol=1e-12)
    np.testing.assert_allclose(out, [-1.0, 1.0], atol=1e-5)


def test_layer_norm_gradient():
    x, g, b = rand((4, 8), 4), rand(8, 5), rand(8, 6)
    w = np.random.default_rng(7).normal(size=(4, 8))
    errs = check_gradients(lambda: ad.tsum(ad.mul(ad.layer_norm(x, g, b), w)), {"x": x, "g": g, "b": b})
    assert max(errs.values()) < 1e-5


# ---------------------------------------------------------------- gelu

def test_gelu_values():
    assert ad.gelu(Tensor(0.0)).item() == 0.0
    assert abs(ad.gelu(Tensor(10.0)).item() - 10.0) < 1e-6
    # 0.5 * (1 + tanh(sqrt(2/pi) * (1 + 0.044715)))
    assert abs(ad.gelu(Tensor(1.0)).item() - 0.8412) < 1e-3


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 20), min_size=2, max_size=20))
def test_gelu_monotone_on_nonnegative(xs):
    xs = np.sort(np.asarray(xs))
    ys = ad.gelu(Tensor(xs)).data
    assert np.all(np.diff(ys) >= -1e-15)


# ---------------------------------------------------------------- every operator vs finite differences

def _weighted(t):
    # fixed non-uniform weights so every output entry gets a distinct cotangent
    return ad.tsum(ad.mul(t, np.cos(np.arange(t.size)).reshape(t.shape)))


OPERATORS = {
    "add": (lambda a, b: ad.add(a, b), [(3, 4), (4,)]),
    "sub": (lambda a, b: ad.sub(a, b), [(3, 4), (3, 1)]),
    "mul": (lambda a, b: ad.mul(a, b), [(2, 3), (2, 3)]),
    "div": (lambda a, b: ad.div(a, ad.add(ad.square(b), 1.0)), [(2, 3), (2, 3)]),
    "scale": (lambda a: ad.scale(a, -1.7), [(5,)]),
    "neg": (lambda a: ad.neg(a), [(5,)]),
    "gelu": (lambda a: ad.gelu(a), [(4, 5)]),
    "tanh": (lambda a: ad.tanh(a), [(4, 5)]),
    "exp": (lambda a: ad.exp(a), [(4, 5)]),
    "square": (lambda a: ad.square(a), [(4, 5)]),
    "sum_axis": (lambda a: ad.tsum(a, axis=1, keepdims=False), [(3, 4, 2)]),
    "mean_axis": (lambda a: ad.tmean(a, axis=-1, keepdims=True), [(3, 4)]),
    "reshape": (lambda a: ad.reshape(a, (6, 2)), [(3, 4)]),
    "transpose": (lambda a: ad.transpose(a, (2, 0, 1)), [(2, 3, 4)]),
    "swapaxes": (lambda a: ad.swapaxes(a, -1, -2), [(2, 3, 4)]),
    "take": (lambda a: ad.take(a, [2, 0, 2, 1], axis=1), [(2, 3, 2)]),
    "concat": (lambda a, b: ad.concat([a, b], axis=-1), [(2, 3), (2, 2)]),
    "matmul_batched": (lambda a, b: ad.matmul(a, b), [(2, 3, 4, 5), (2, 3, 5, 2)]),
    "matmul_broadcast_rhs": (lambda a, b: ad.matmul(a, b), [(2, 3, 4), (4, 5)]),
    "matmul_broadcast_lhs": (lambda a, b: ad.matmul(a, b), [(3, 4, 4), (2, 3, 4, 2)]),
    "linear": (lambda x, w, b: ad.linear(x, w, b), [(2, 3, 4), (4, 5), (5,)]),
    "softmax": (lambda a: ad.softmax_rows(a), [(3, 6)]),
    "layer_norm": (lambda x, g, b: ad.layer_norm(x, g, b), [(3, 6), (6,), (6,)]),
}


@pytest.mark.parametrize("name", sorted(OPERATORS))
def test_operator_gradients(name):
    fn, shapes = OPERATORS[name]
    inputs = {f"in{i}": rand(s, seed=10 + i) for i, s in enumerate(shapes)}
    errs = check_gradients(lambda: _weighted(fn(*inputs.values())), inputs)
    assert max(errs.values()) < 1e-4, errs


def test_relu_gradient_away_from_kink():
    x = Tensor(np.array([-1.5, -0.3, 0.4, 1.9]), requires_grad=True)
    errs = check_gradients(lambda: ad.tsum(ad.mul(ad.relu(x), [1.0, 2.0, 3.0, 4.0])), {"x": x})
    assert errs["x"] < 1e-8


# ---------------------------------------------------------------- backward

def test_backward_of_sum_is_ones():
    x = rand((2, 3, 4))
    ad.tsum(x).backward()
    np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))


def test_backward_of_half_square_is_identity():
    x = rand((5, 2))
    ad.scale(ad.tsum(ad.mul(x, x)), 0.5).backward()
    np.testing.assert_allclose(x.grad, x.data, rtol=1e-15)


def test_backward_needs_scalar():
    x = rand((3,))
    with pytest.raises(ContractError):
        ad.scale(x, 2.0).backward()


def test_shared_parent_accumulates_both_paths():
    x = rand((4,))
    y = ad.add(ad.mul(x, 3.0), ad.square(x))
    ad.tsum(y).backward()
    np.testing.assert_allclose(x.grad, 3.0 + 2.0 * x.data, rtol=1e-15)


def test_duplicated_input_sums_contributions():
    w = rand((3, 3), 1)
    x = rand((2, 3), 2)
    ad.tsum(ad.matmul(ad.matmul(x, w), w)).backward()
    g_twice = w.grad.copy()
    # oracle: finite differences see both uses of w
    errs = check_gradients(lambda: ad.tsum(ad.matmul(ad.matmul(x, w), w)), {"w": w})
    assert errs["w"] < 1e-6
    assert not np.allclose(g_twice, 0.0)


def test_tape_is_topological():
    a = rand((2,), 1)
    b = ad.mul(a, 2.0)
    c = ad.add(b, a)
    d = ad.tsum(ad.mul(c, b))
    tape = Tape.from_output(d)
    pos = {id(n): i for i, n in enumerate(tape)}
    for node in tape:
        for p in node._parents:
            assert pos[id(p)] < pos[id(node)]
    assert len({id(n) for n in tape}) == len(tape)


def test_backward_is_deterministic():
    def run():
        x = rand((3, 5), 4)
        w = rand((5, 5), 5)
        ad.tsum(ad.softmax_rows(ad.matmul(ad.gelu(x), w))).backward()
        return x.grad, w.grad

    g1, g2 = run(), run()
    assert all(np.array_equal(a, b) for a, b in zip(g1, g2))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-2, 2)))
def test_composite_gradient_property(x0):
    x = Tensor(x0.copy(), requires_grad=True)
    g = Tensor(np.linspace(0.5, 1.5, 4), requires_grad=True)
    b = Tensor(np.linspace(-0.2, 0.2, 4), requires_grad=True)

    def loss():
        h = ad.gelu(ad.layer_norm(x, g, b))
        return ad.tsum(ad.mul(ad.softmax_rows(h), np.arange(12.0).reshape(3, 4)))

    errs = check_gradients(loss, {"x": x, "g": g, "b": b})
    assert max(errs.values()) < 1e-4


# ---------------------------------------------------------------- adam

def test_adam_zero_gradient_leaves_params():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    st_ = AdamState.for_params({"p": p}, lr=0.1)
    adam_step({"p": p}, {"p": np.zeros(2)}, st_)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert st_.step == 1


def test_adam_first_step_is_lr():
    p = Tensor(np.array([0.5]), requires_grad=True)
    st_ = AdamState.for_params({"p": p}, lr=0.1)
    adam_step({"p": p}, {"p": np.ones(1)}, st_)
    # bias correction cancels at t=1: delta = -lr * 1 / (1 + eps)
    assert abs((p.data[0] - 0.5) - (-0.1)) < 1e-9


def test_adam_converges_on_quadratic():
    theta = Tensor(np.array([0.0]), requires_grad=True)
    opt = Adam({"theta": theta}, lr=0.05)
    for _ in range(500):
        opt.zero_grad()
        ad.tsum(ad.square(ad.sub(theta, 3.0))).backward()
        opt.step()
    assert abs(theta.data[0] - 3.0) < 1e-3


def test_adam_step_counter_and_moment_shapes():
    params = {"a": rand((2, 3)), "b": rand((4,))}
    st_ = AdamState.for_params(params)
    for k in range(1, 4):
        adam_step(params, {n: np.ones(p.shape) for n, p in params.items()}, st_)
        assert st_.step == k
    assert all(st_.m[n].shape == p.shape and st_.v[n].shape == p.shape for n, p in params.items())


def test_adam_rejects_nan_gradient_with_name():
    p = Tensor(np.zeros(2), requires_grad=True)
    with pytest.raises(NumericError, match="weight_x"):
        adam_step({"weight_x": p}, {"weight_x": np.array([np.nan, 0.0])}, AdamState.for_params({"weight_x": p}))
