import numpy as np
import pytest

from lvseg.autograd import Tensor, backward, grad_check
from lvseg.errors import ContractViolation


def test_backward_sum_gives_ones():
    w = Tensor(np.array([1.5, -2.0, 7.0]), requires_grad=True)
    backward(w.sum())
    assert np.array_equal(w.grad, np.ones(3))


def test_backward_square_hand_derivative():
    w = Tensor(np.array([2.0, -3.0]), requires_grad=True)
    backward((w * w).sum())
    assert np.allclose(w.grad, [4.0, -6.0])


def test_backward_fanout_accumulates():
    w = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    backward(w.sum() + w.sum())
    assert np.array_equal(w.grad, np.full(3, 2.0))


def test_fanout_equals_sum_of_single_consumer_gradients():
    rng = np.random.default_rng(0)
    for _ in range(10):
        data = rng.normal(size=4)
        k = int(rng.integers(2, 6))
        w = Tensor(data.copy(), requires_grad=True)
        loss = (w * w).sum()
        for _ in range(k - 1):
            loss = loss + (w * w).sum()
        backward(loss)
        single = Tensor(data.copy(), requires_grad=True)
        backward((single * single).sum())
        assert np.allclose(w.grad, k * single.grad)


def test_backward_rejects_non_scalar():
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with pytest.raises(ContractViolation):
        backward(w * 2.0)


def test_grad_check_linear_is_nearly_exact():
    theta = Tensor(np.array([0.3, -1.2, 5.0]), requires_grad=True)
    assert grad_check(lambda: theta.sum(), theta, eps=1e-5) < 1e-9


def test_grad_check_rejects_bad_eps():
    theta = Tensor(np.array([1.0]), requires_grad=True)
    with pytest.raises(ContractViolation):
        grad_check(lambda: theta.sum(), theta, eps=0.0)
    with pytest.raises(ContractViolation):
        grad_check(lambda: theta.sum(), theta, eps=-1e-6)


def test_grad_check_softmax_cross_entropy_small_map():
    from lvseg.layers import softmax_cross_entropy

    rng = np.random.default_rng(3)
    logits = Tensor(rng.normal(size=(2, 4, 4)), requires_grad=True)
    target = rng.integers(0, 2, size=(4, 4))
    err = grad_check(lambda: softmax_cross_entropy(logits, target), logits)
    assert err < 1e-6


def test_forward_deterministic():
    data = np.random.default_rng(5).normal(size=(3, 3))
    a = (Tensor(data) * Tensor(data)).sum().item()
    b = (Tensor(data) * Tensor(data)).sum().item()
    assert a == b


def test_grad_slots_lazy():
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    x = Tensor(np.array([3.0, 4.0]))  # constant input
    backward((w * x).sum())
    assert w.grad is not None
    assert x.grad is None
