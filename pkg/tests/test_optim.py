import numpy as np
import pytest

from latentmc import autodiff as ad
from latentmc.errors import NumericError
from latentmc.optim import Adam, clip_global_norm


def test_zero_gradients_are_a_fixed_point():
    p = ad.Tensor([1.0, -2.0], requires_grad=True)
    opt = Adam([p])
    before = p.data.copy()
    opt.zero_grad()
    opt.step()
    assert np.array_equal(p.data, before)
    assert np.array_equal(opt.first_moment[0], np.zeros(2))
    assert np.array_equal(opt.second_moment[0], np.zeros(2))


def test_first_step_moves_by_learning_rate_times_sign():
    p = ad.Tensor([0.0, 0.0], requires_grad=True)
    opt = Adam([p], learning_rate=0.1)
    p.grad = np.array([0.5, -3.0])
    opt.step()
    # bias correction makes m_hat/sqrt(v_hat) ~ sign(g) at t=1
    assert np.allclose(p.data, [-0.1, 0.1], atol=1e-6)


def test_converges_on_quadratic():
    p = ad.Tensor([0.0], requires_grad=True)
    opt = Adam([p], learning_rate=0.05)
    for _ in range(2000):
        opt.zero_grad()
        loss = ad.square(p - 5.0).sum()
        ad.backward(loss)
        opt.step()
    assert abs(p.data[0] - 5.0) < 0.01


def test_non_finite_gradient_leaves_params_untouched():
    p1 = ad.Tensor([1.0], requires_grad=True)
    p2 = ad.Tensor([2.0], requires_grad=True)
    opt = Adam([p1, p2])
    p1.grad = np.array([1.0])
    p2.grad = np.array([np.nan])
    with pytest.raises(NumericError):
        opt.step()
    assert p1.data[0] == 1.0 and p2.data[0] == 2.0
    assert opt.step_count == 0


def test_clip_global_norm():
    p1 = ad.Tensor([3.0], requires_grad=True)
    p2 = ad.Tensor([4.0], requires_grad=True)
    p1.grad = np.array([3.0])
    p2.grad = np.array([4.0])
    norm = clip_global_norm([p1, p2], 1.0)
    assert abs(norm - 5.0) < 1e-12
    assert abs(np.sqrt(p1.grad[0] ** 2 + p2.grad[0] ** 2) - 1.0) < 1e-12


def test_state_roundtrip():
    p = ad.Tensor([1.0, 2.0], requires_grad=True)
    opt = Adam([p])
    p.grad = np.array([0.3, -0.7])
    opt.step()
    state = opt.state_arrays()
    opt2 = Adam([p])
    opt2.load_state_arrays(state)
    assert opt2.step_count == opt.step_count
    assert np.array_equal(opt2.first_moment[0], opt.first_moment[0])
    assert np.array_equal(opt2.second_moment[0], opt.second_moment[0])
