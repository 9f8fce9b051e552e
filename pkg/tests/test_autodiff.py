import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentmc import autodiff as ad
from latentmc.errors import ContractError, DimensionError, DomainError, NumericError

from conftest import check_grads, rel_err


class TestMatmul:
    def test_identity(self):
        b = np.array([[3.0, 1.0], [2.0, 4.0]])
        out = ad.matmul(ad.Tensor(np.eye(2)), ad.Tensor(b))
        assert np.array_equal(out.data, b)

    def test_hand_case(self):
        out = ad.matmul(ad.Tensor([[1.0, 2.0]]), ad.Tensor([[3.0], [4.0]]))
        assert np.array_equal(out.data, [[11.0]])

    def test_gradient_hand_case(self):
        a = ad.Tensor([[1.0, 2.0]], requires_grad=True)
        b = ad.Tensor([[3.0], [4.0]])
        ad.zero_grad([a])
        ad.backward(ad.matmul(a, b).sum())
        assert np.array_equal(a.grad, [[3.0, 4.0]])

    def test_gradient_matches_finite_differences(self, rng):
        a = ad.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = ad.Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        check_grads(lambda: ad.tsum(ad.square(ad.matmul(a, b))), [a, b])

    def test_shape_mismatch_reports_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3))))


class TestElementwise:
    def test_tanh_at_zero(self):
        assert np.array_equal(ad.tanh(ad.Tensor(np.zeros(4))).data, np.zeros(4))

    def test_exp_log_inverse_pair(self):
        x = np.array([0.5, 2.0])
        out = ad.exp(ad.log(ad.Tensor(x)))
        assert np.allclose(out.data, x, atol=1e-15)

    def test_sigmoid_derivative_at_zero(self):
        x = ad.Tensor([0.0], requires_grad=True)
        ad.zero_grad([x])
        ad.backward(ad.sigmoid(x).sum())
        assert abs(x.grad[0] - 0.25) < 1e-15

    def test_log_domain_error(self):
        with pytest.raises(DomainError):
            ad.log(ad.Tensor([1.0, 0.0]))

    def test_div_by_zero(self):
        with pytest.raises(DomainError):
            ad.Tensor([1.0]) / ad.Tensor([0.0])

    def test_broadcast_row_bias(self):
        x = ad.Tensor(np.ones((3, 2)), requires_grad=True)
        b = ad.Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        ad.zero_grad([x, b])
        ad.backward(ad.tsum(x + b))
        assert np.array_equal(b.grad, [[3.0, 3.0]])

    @pytest.mark.parametrize("op", [ad.exp, ad.tanh, ad.sigmoid, ad.square, ad.softplus])
    def test_unary_gradients(self, op, rng):
        x = ad.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        check_grads(lambda: ad.tsum(op(x)), [x])

    def test_binary_gradients(self, rng):
        a = ad.Tensor(rng.standard_normal((2, 3)) + 3.0, requires_grad=True)
        b = ad.Tensor(rng.standard_normal((2, 3)) + 3.0, requires_grad=True)
        check_grads(lambda: ad.tsum(a * b + a / b - b), [a, b])


class TestSoftmax:
    def test_constant_vector_is_uniform(self):
        out = ad.softmax(ad.Tensor([7.3, 7.3, 7.3, 7.3]))
        assert np.allclose(out.data, 0.25, atol=1e-15)

    def test_shift_invariance(self, rng):
        x = rng.standard_normal(5)
        a = ad.softmax(ad.Tensor(x)).data
        b = ad.softmax(ad.Tensor(x + 1000.0)).data
        assert np.max(np.abs(a - b)) < 1e-12

    def test_closed_form(self):
        out = ad.softmax(ad.Tensor([0.0, np.log(3.0)]))
        assert np.allclose(out.data, [0.25, 0.75], atol=1e-15)

    def test_empty_input(self):
        with pytest.raises(DimensionError):
            ad.softmax(ad.Tensor(np.zeros(0)))

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_sums_to_one(self, vals):
        out = ad.softmax(ad.Tensor(np.array(vals))).data
        assert abs(out.sum() - 1.0) < 1e-12
        assert np.all(out > 0) and np.all(out < 1 + 1e-12)

    def test_gradient(self, rng):
        x = ad.Tensor(rng.standard_normal(6), requires_grad=True)
        w = ad.Tensor(rng.standard_normal(6))
        check_grads(lambda: ad.tsum(ad.softmax(x) * w), [x])


class TestLogsumexp:
    def test_single_element(self):
        assert ad.logsumexp(ad.Tensor([4.2])).item() == 4.2

    def test_k_copies(self):
        out = ad.logsumexp(ad.Tensor(np.full(5, 1.7)))
        assert abs(out.item() - (1.7 + np.log(5))) < 1e-12

    def test_closed_form(self):
        out = ad.logsumexp(ad.Tensor([0.0, np.log(3.0)]))
        assert abs(out.item() - np.log(4.0)) < 1e-15

    def test_empty(self):
        with pytest.raises(DimensionError):
            ad.logsumexp(ad.Tensor(np.zeros(0)))

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=10))
    @settings(max_examples=60, deadline=None)
    def test_bounds(self, vals):
        x = np.array(vals)
        out = ad.logsumexp(ad.Tensor(x)).item()
        assert out >= x.max() - 1e-12
        assert out <= x.max() + np.log(len(vals)) + 1e-12

    def test_gradient(self, rng):
        x = ad.Tensor(rng.standard_normal(5), requires_grad=True)
        check_grads(lambda: ad.logsumexp(x), [x])


class TestBackward:
    def test_square_at_three(self):
        x = ad.Tensor([3.0], requires_grad=True)
        ad.zero_grad([x])
        ad.backward(ad.square(x).sum())
        assert x.grad[0] == 6.0

    def test_softmax_cross_entropy_closed_form(self, rng):
        logits = ad.Tensor(rng.standard_normal(5), requires_grad=True)
        k = 2
        ad.zero_grad([logits])
        # -log softmax(logits)[k]
        loss = ad.logsumexp(logits) - logits[k]
        ad.backward(loss)
        expected = ad.softmax(logits).data.copy()
        expected[k] -= 1.0
        assert rel_err(logits.grad, expected) < 1e-12

    def test_non_scalar_loss_rejected(self):
        x = ad.Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            ad.backward(x + 1.0)

    def test_unreached_parameter_gets_exact_zero(self):
        x = ad.Tensor([1.0], requires_grad=True)
        other = ad.Tensor([5.0], requires_grad=True)
        ad.zero_grad([x, other])
        ad.backward(ad.square(x).sum())
        assert np.array_equal(other.grad, [0.0])

    def test_grad_accumulates_across_calls(self):
        x = ad.Tensor([2.0], requires_grad=True)
        ad.zero_grad([x])
        ad.backward(ad.square(x).sum())
        ad.backward(ad.square(x).sum())
        assert x.grad[0] == 8.0

    def test_composite_matches_finite_differences(self, rng):
        a = ad.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        b = ad.Tensor(rng.standard_normal((3, 3)), requires_grad=True)

        def loss():
            h = ad.tanh(ad.matmul(a, b))
            p = ad.softmax(h, axis=-1)
            return ad.tsum(ad.square(p)) + ad.logsumexp(ad.reshape(h, (-1,)))

        worst = check_grads(loss, [a, b])
        assert worst < 1e-5

    def test_nan_fails_fast_with_op_name(self):
        x = ad.Tensor([700.0, 710.0])
        with pytest.raises(NumericError, match="exp"):
            ad.exp(ad.exp(x))


class TestShapeOps:
    def test_getitem_stack_concat_grads(self, rng):
        x = ad.Tensor(rng.standard_normal((4, 3)), requires_grad=True)

        def loss():
            parts = [x[i, :] * float(i + 1) for i in range(4)]
            s = ad.stack(parts, axis=0)
            c = ad.concat([s, s], axis=1)
            return ad.tsum(ad.square(c))

        check_grads(loss, [x])

    def test_no_grad_suspends_tape(self):
        x = ad.Tensor([1.0], requires_grad=True)
        with ad.no_grad():
            y = ad.square(x)
        assert not y.requires_grad and y._parents == ()
