from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from core.tensor import Parameter, Tensor, backward, is_grad_enabled, no_grad
from models.error_models import ContractError


def test_default_dtype_is_float32_for_python_values():
    assert Tensor([1.0, 2.0]).dtype == np.float32
    assert Tensor(np.zeros(3)).dtype == np.float64


def test_arithmetic_gradients():
    a = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    b = Tensor(np.array([4.0, 5.0, 6.0]), requires_grad=True)
    loss = ((a * b) + a - b * 2.0).sum()
    loss.backward()
    np.testing.assert_allclose(a.grad, [5.0, 6.0, 7.0])
    np.testing.assert_allclose(b.grad, [-1.0, 0.0, 1.0])


def test_broadcast_gradient_is_summed_back():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    (a * b).sum().backward()
    np.testing.assert_allclose(b.grad, [2.0, 2.0, 2.0])
    np.testing.assert_allclose(a.grad, [[1.0, 2.0, 3.0]] * 2)


def test_exp_square_mean_gradients():
    x = Tensor(np.array([0.0, 1.0, -2.0]), requires_grad=True)
    (x.exp() + x.square()).mean().backward()
    np.testing.assert_allclose(x.grad, (np.exp([0.0, 1.0, -2.0]) + 2 * np.array([0.0, 1.0, -2.0])) / 3)


def test_reused_node_accumulates_within_one_pass():
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = x * x
    (y + y).sum().backward()
    np.testing.assert_allclose(x.grad, [12.0])


def test_leaf_grads_are_overwritten_between_passes():
    x = Tensor(np.array([2.0]), requires_grad=True)
    for _ in range(2):
        (x * 3.0).sum().backward()
    np.testing.assert_allclose(x.grad, [3.0])


def test_backward_needs_a_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()


def test_backward_needs_a_trainable_input():
    with pytest.raises(ContractError):
        Tensor(np.ones(1)).sum().backward()


def test_division_by_tensor_is_rejected():
    with pytest.raises(ContractError):
        Tensor(np.ones(2)) / Tensor(np.ones(2))


def test_module_level_backward():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    backward(x.square().sum())
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_graph_is_not_recorded_without_trainable_parents():
    y = Tensor(np.ones(2)) * 2.0
    assert not y.requires_grad
    assert y._parents == ()


def test_parameter_buffers_match_value():
    p = Parameter("w", Tensor(np.ones((2, 3))))
    assert p.value.requires_grad
    assert p.adam_m.shape == (2, 3) and p.adam_v.shape == (2, 3)
    assert p.step_count == 0 and p.grad is None
    with pytest.raises(ContractError):
        Parameter("bad", Tensor(np.ones(2)), adam_m=Tensor(np.zeros(3)))


def test_scalar_results_keep_double_precision():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    half = x.sum() * 0.5
    assert half.dtype == np.float64
    assert ((half + x.sum()) * -0.5).dtype == np.float64
    assert Tensor(np.float64(1.5)).dtype == np.float64
    assert Tensor(np.float32(1.5)).dtype == np.float32


def test_no_grad_records_no_graph():
    w = Parameter("w", Tensor(np.ones(3)))
    with no_grad():
        assert not is_grad_enabled()
        y = (w.value * 2.0).sum()
    assert not y.requires_grad
    assert y._parents == ()
    assert is_grad_enabled()
    assert (w.value * 2.0).sum().requires_grad


def test_no_grad_is_per_thread():
    with no_grad():
        with ThreadPoolExecutor(max_workers=1) as pool:
            assert pool.submit(is_grad_enabled).result()
        assert not is_grad_enabled()
