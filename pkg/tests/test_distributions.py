import math

import numpy as np
import pytest
from scipy import stats

from latentmc import autodiff as ad
from latentmc import distributions as dist
from latentmc.errors import DomainError

from conftest import check_grads


class TestGaussianLogPdf:
    def test_at_mean_1d_unit_sigma(self):
        out = dist.gaussian_log_pdf(np.zeros(1), np.zeros(1), 1.0)
        assert abs(out.item() - (-0.5 * math.log(2 * math.pi))) < 1e-12

    def test_at_mean_general_d(self):
        for d in (2, 5):
            out = dist.gaussian_log_pdf(np.zeros(d), np.zeros(d), 1.0)
            assert abs(out.item() - (-d / 2 * math.log(2 * math.pi))) < 1e-12

    def test_closed_form_substitution(self):
        out = dist.gaussian_log_pdf(np.array([1.0]), np.array([0.0]), 2.0)
        expected = -0.5 * math.log(8 * math.pi) - 1.0 / 8.0
        assert abs(out.item() - expected) < 1e-12

    def test_sigma_domain_error(self):
        with pytest.raises(DomainError):
            dist.gaussian_log_pdf(np.zeros(1), np.zeros(1), 0.0)

    def test_differentiable_in_all_arguments(self, rng):
        x = ad.Tensor(rng.standard_normal(3), requires_grad=True)
        mu = ad.Tensor(rng.standard_normal(3), requires_grad=True)
        sigma = ad.Tensor(1.3, requires_grad=True)
        check_grads(lambda: dist.gaussian_log_pdf(x, mu, sigma), [x, mu, sigma])


class TestGumbelNoise:
    def test_inverse_cdf_fixed_point(self):
        # U = 1/e maps to exactly zero
        u = 1.0 / math.e
        assert abs(-math.log(-math.log(u))) < 1e-12

    def test_moments(self, rng):
        s = dist.sample_gumbel(10**6, rng)
        assert abs(s.mean() - 0.5772156649) < 0.01
        assert abs(s.var() - math.pi**2 / 6) < 0.02


class TestGumbelArgmax:
    def test_point_mass(self, rng):
        log_probs = np.full(5, -1e9)
        log_probs[3] = 0.0
        draws = {dist.gumbel_argmax(log_probs, rng) for _ in range(200)}
        assert draws == {3}

    def test_uniform_chi_square(self, rng):
        K, n = 4, 10**5
        counts = np.zeros(K)
        g = dist.sample_gumbel((n, K), rng)
        idx = np.argmax(np.log(np.full(K, 1.0 / K)) + g, axis=1)
        for k in range(K):
            counts[k] = np.sum(idx == k)
        p = stats.chisquare(counts).pvalue
        assert p > 0.01

    def test_biased_frequencies(self, rng):
        q = np.array([0.7, 0.3])
        n = 10**5
        idx = np.array([dist.gumbel_argmax(np.log(q), rng) for _ in range(n)])
        freq = np.bincount(idx, minlength=2) / n
        assert np.all(np.abs(freq - q) < 0.01)

    @pytest.mark.parametrize("K", [2, 4, 8])
    def test_chi_square_against_random_targets(self, K, rng):
        q = rng.dirichlet(np.ones(K) * 5)
        n = 10**5
        g = dist.sample_gumbel((n, K), rng)
        idx = np.argmax(np.log(q) + g, axis=1)
        counts = np.bincount(idx, minlength=K)
        p = stats.chisquare(counts, f_exp=q * n).pvalue
        assert p > 0.01


class TestGumbelSoftmax:
    def _codebooks(self, rng, K=4, D=3):
        return ad.Tensor(rng.standard_normal((K, D)), requires_grad=True)

    def test_high_temperature_limit(self, rng):
        e = self._codebooks(rng)
        log_q = ad.Tensor(np.log(rng.dirichlet(np.ones(4))))
        rs = dist.gumbel_softmax(log_q, 1e4, e, rng)
        assert np.max(np.abs(rs.weights.data - 0.25)) < 1e-3

    def test_low_temperature_limit(self, rng):
        e = self._codebooks(rng)
        log_q = ad.Tensor(np.log(rng.dirichlet(np.ones(4))))
        noise = dist.sample_gumbel(4, rng)
        rs = dist.gumbel_softmax(log_q, 1e-4, e, noise=noise)
        assert rs.weights.data.max() > 1 - 1e-6
        assert np.argmax(rs.weights.data) == np.argmax(log_q.data + noise)

    def test_weights_normalized(self, rng):
        e = self._codebooks(rng)
        for _ in range(20):
            log_q = ad.Tensor(np.log(rng.dirichlet(np.ones(4))))
            rs = dist.gumbel_softmax(log_q, 1.0, e, rng)
            assert abs(rs.weights.data.sum() - 1.0) < 1e-12

    def test_tau_domain_error(self, rng):
        with pytest.raises(DomainError):
            dist.gumbel_softmax(ad.Tensor(np.log([0.5, 0.5])), 0.0, self._codebooks(rng, 2), rng)

    def test_max_weight_monotone_in_decreasing_tau(self, rng):
        e = self._codebooks(rng, K=4)
        log_q = ad.Tensor(np.log(rng.dirichlet(np.ones(4))))
        means = []
        for tau in (10.0, 1.0, 0.1, 0.01):
            draws = [
                dist.gumbel_softmax(log_q, tau, e, rng).weights.data.max() for _ in range(10**4 // 10)
            ]
            means.append(np.mean(draws))
        assert all(means[i] <= means[i + 1] + 1e-9 for i in range(len(means) - 1))

    def test_mixed_code_gradient_is_weights(self, rng):
        e = self._codebooks(rng, K=3, D=2)
        log_q = ad.Tensor(np.log(rng.dirichlet(np.ones(3))), requires_grad=True)
        noise = dist.sample_gumbel(3, rng)
        direction = rng.standard_normal(2)

        def loss():
            rs = dist.gumbel_softmax(log_q, 1.0, e, noise=noise)
            return ad.tsum(rs.mixed_code * ad.Tensor(direction))

        check_grads(loss, [e, log_q], tol=1e-5)
        # grad of sum(mixed_code) w.r.t. codebook e_k is pi_k per output coord
        ad.zero_grad([e])
        rs = dist.gumbel_softmax(log_q, 1.0, e, noise=noise)
        ad.backward(ad.tsum(rs.mixed_code))
        expected = np.repeat(rs.weights.data[:, None], 2, axis=1)
        assert np.max(np.abs(e.grad - expected)) < 1e-12


class TestPosteriorLogits:
    def test_equidistant_is_uniform(self):
        e = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        out = dist.posterior_logits(np.zeros(2), ad.Tensor(e))
        assert np.max(np.abs(np.exp(out.data) - 0.25)) < 1e-12

    def test_closed_form_two_codebooks(self):
        e = np.array([[0.0], [math.sqrt(math.log(3.0))]])
        out = dist.posterior_logits(np.zeros(1), ad.Tensor(e))
        assert np.max(np.abs(np.exp(out.data) - [0.75, 0.25])) < 1e-12

    def test_translation_invariance(self, rng):
        z = rng.standard_normal(3)
        e = rng.standard_normal((4, 3))
        shift = rng.standard_normal(3)
        a = dist.posterior_logits(z, ad.Tensor(e)).data
        b = dist.posterior_logits(z + shift, ad.Tensor(e + shift)).data
        assert np.max(np.abs(a - b)) < 1e-12

    def test_normalizes_exactly(self, rng):
        z = rng.standard_normal((6, 4))
        e = rng.standard_normal((5, 4))
        out = dist.posterior_logits(ad.Tensor(z), ad.Tensor(e)).data
        lse = np.log(np.exp(out).sum(axis=-1))
        assert np.max(np.abs(lse)) < 1e-9

    def test_gradients(self, rng):
        z = ad.Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        e = ad.Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        w = rng.standard_normal((2, 4))
        check_grads(lambda: ad.tsum(dist.posterior_logits(z, e) * ad.Tensor(w)), [z, e])


def test_categorical_entropy_uniform():
    T, K = 7, 5
    log_q = np.full((T, K), -math.log(K))
    ent = dist.categorical_entropy(ad.Tensor(log_q)).item()
    assert abs(ent - T * math.log(K)) < 1e-9


def test_rng_determinism():
    a = dist.make_rng(42).random(5)
    b = dist.make_rng(42).random(5)
    assert np.array_equal(a, b)
    streams = dist.spawn_rngs(7, 3)
    streams2 = dist.spawn_rngs(7, 3)
    for s1, s2 in zip(streams, streams2):
        assert np.array_equal(s1.random(4), s2.random(4))
