import numpy as np
import pytest
from hypothesis import given, strategies as st

from equinet import autodiff as ad
from equinet.autodiff import Var
from equinet.gradcheck import check_gradients


def _params(rng, *shapes):
    return [ad.parameter(rng.standard_normal(s)) for s in shapes]


def test_elementwise_and_broadcast_grads(rng):
    a, b = _params(rng, (3, 4), (4,))
    fn = lambda: ((a * b + a / (2.0 + b * b) - b) ** 2).sum()  # noqa: E731
    assert check_gradients(fn, [a, b]) < 1e-7


def test_matmul_and_reductions(rng):
    a, b = _params(rng, (2, 3, 4), (4, 5))
    fn = lambda: (a @ b).mean(axis=(0, 2)).sum() + (a.sum(axis=1, keepdims=True) * 0.3).sum()  # noqa: E731
    assert check_gradients(fn, [a, b]) < 1e-7


def test_shape_ops(rng):
    (a,) = _params(rng, (2, 3, 4))
    w = rng.standard_normal((4, 3, 2))
    fn = lambda: (a.transpose(2, 1, 0) * w).sum() + (a.swapaxes(0, 1).reshape(3, 8)[1:, ::2] ** 2).sum()  # noqa: E731
    assert check_gradients(fn, [a]) < 1e-7


def test_fancy_index_accumulates(rng):
    (a,) = _params(rng, (4,))
    out = a[np.array([0, 0, 2])].sum()
    out.backward()
    np.testing.assert_array_equal(a.grad, [2, 0, 1, 0])


def test_concat_stack_channel_mix(rng):
    a, b, w = _params(rng, (2, 3, 2), (2, 1, 2), (5, 4))
    fn = lambda: (ad.channel_mix(w, ad.concat([a, b], axis=1)) ** 2).sum() + ad.stack([a, a], 0).sum()  # noqa: E731
    assert check_gradients(fn, [a, b, w]) < 1e-7


def test_nonlinearities(rng):
    (a,) = _params(rng, (6,))
    a.data = np.abs(a.data) + 0.5
    fn = lambda: (ad.log2(a) + ad.sqrt(a) + ad.sigmoid(a) * ad.relu(a - 1.0)).sum()  # noqa: E731
    assert check_gradients(fn, [a]) < 1e-7


def test_unit_phase_grad(rng):
    re, im = _params(rng, (3,), (3,))
    fn = lambda: sum(((c * np.arange(1.0, 4.0)).sum() for c in ad.unit_phase(re, im)), Var(0.0))  # noqa: E731
    assert check_gradients(fn, [re, im]) < 1e-7


def test_unit_phase_zero_maps_to_one():
    re, im = ad.unit_phase(Var(np.zeros(2)), Var(np.zeros(2)))
    np.testing.assert_array_equal(re.data, 1.0)
    np.testing.assert_array_equal(im.data, 0.0)


def test_relu_subgradient_zero_at_zero():
    a = ad.parameter(np.array([-1.0, 0.0, 2.0]))
    ad.relu(a).sum().backward()
    np.testing.assert_array_equal(a.grad, [0, 0, 1])


def test_float32_stays_float32():
    a = ad.parameter(np.ones(3, dtype=np.float32))
    out = (a * 2.0 + 1.0) / 3.0 - ad.log(a + 1.0)
    assert out.data.dtype == np.float32


@given(st.integers(0, 10**6))
def test_float32_sum_is_order_independent(seed):
    rng = np.random.default_rng(seed)
    pi = rng.permutation(37)
    # exact in float64, so the float32 result is bitwise order independent
    x = (rng.integers(-2**20, 2**20, (3, 37)) / 2**10).astype(np.float32)
    s = Var(x).sum(axis=1).data
    assert s.dtype == np.float32
    np.testing.assert_array_equal(s, Var(x[:, pi]).sum(axis=1).data)
    # otherwise one float32 ulp plus the float64 rounding of the accumulation
    y = rng.standard_normal((3, 37)).astype(np.float32) * np.float32(10.0) ** rng.integers(-3, 4, (3, 37))
    a, b = Var(y).sum(axis=1).data, Var(y[:, pi]).sum(axis=1).data
    f64_err = 37 * np.finfo(np.float64).eps * np.abs(y).astype(np.float64).sum(axis=1)
    assert np.all(np.abs(a - b) <= np.spacing(np.maximum(np.abs(a), np.abs(b))) + f64_err)


def test_no_grad_records_nothing():
    a = ad.parameter(np.ones(2))
    with ad.no_grad():
        out = (a * 2).sum()
    assert not out.requires_grad


def test_numpy_left_operand_defers():
    a = ad.parameter(np.ones((2, 2)))
    out = np.eye(2) @ a + np.ones(2) * a
    assert isinstance(out, Var)


def test_backward_needs_scalar():
    with pytest.raises(ValueError):
        ad.parameter(np.ones(3)).backward()


def test_value_and_grad_shared_subexpression():
    a = ad.parameter(np.array(3.0))
    val, (g,) = ad.value_and_grad(lambda: a * a + a, [a])
    assert val == 12.0 and g == 7.0
