import numpy as np
import pytest

from latentmc import autodiff as ad
from latentmc.autodiff import Tensor
from latentmc.data import make_windows, synth_regime_data
from latentmc.errors import ContractError, DimensionError
from latentmc.model import GenerativeModel, ModelConfig
from latentmc.training import TrainConfig
from latentmc.vqvae import (
    COMMITMENT_WEIGHT,
    straight_through,
    vq_posterior,
    vqvae_stage1_train,
    vqvae_stage2_train,
)


def tiny_model(seed=0, K=3, D=4):
    cfg = ModelConfig(
        obs_dim=1, cmd_dim=2, K=K, D=D, enc_hidden=4, dec_hidden=4, kernel_hidden=4, seed=seed
    )
    return GenerativeModel(cfg)


def tiny_windows(seed=0, n_seq=6, T=10):
    data = synth_regime_data(n_seq=n_seq, T=T, seed=seed, train_frac=0.8)
    w = make_windows(data, T=T, stride=T, split="train")
    return w.x, w.u


class TestVqPosterior:
    def test_nearest_codebook_selected(self):
        codebooks = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        z = np.array([[0.1, 0.2], [9.0, 1.0], [1.0, 9.0]])
        idx, quant = vq_posterior(z, codebooks)
        assert idx.tolist() == [0, 1, 2]
        assert np.array_equal(quant, codebooks[idx])

    def test_tie_goes_to_lowest_index(self):
        codebooks = np.array([[1.0], [-1.0]])
        idx, _ = vq_posterior(np.array([[0.0]]), codebooks)
        assert idx.tolist() == [0]

    def test_batched_shapes(self, rng):
        z = rng.standard_normal((2, 5, 3))
        codebooks = rng.standard_normal((4, 3))
        idx, quant = vq_posterior(z, codebooks)
        assert idx.shape == (2, 5) and quant.shape == (2, 5, 3)
        # every quantized row is an exact codebook row
        flat = quant.reshape(-1, 3)
        for row in flat:
            assert any(np.array_equal(row, e) for e in codebooks)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            vq_posterior(rng.standard_normal((2, 3)), rng.standard_normal((4, 5)))


class TestStraightThrough:
    def test_forward_is_quantized_value(self, rng):
        z = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        q = rng.standard_normal((2, 3))
        out = straight_through(z, q)
        assert np.array_equal(out.data, q)

    def test_backward_is_identity_into_encoder_output(self, rng):
        z = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        q = rng.standard_normal((2, 3))
        out = straight_through(z, q)
        ad.backward(ad.tsum(out * Tensor(np.full((2, 3), 2.0))))
        assert np.array_equal(z.grad, np.full((2, 3), 2.0))

    def test_no_gradient_leaks_to_codebooks(self, rng):
        # the straight-through path must not touch codebook tensors at all
        codebooks = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        z = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        idx, quant = vq_posterior(z.data, codebooks.data)
        out = straight_through(z, quant)
        ad.backward(ad.tsum(ad.square(out)))
        assert codebooks.grad is None or np.array_equal(codebooks.grad, np.zeros((4, 3)))

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            straight_through(Tensor(np.zeros((2, 3))), np.zeros((3, 2)))


class TestStage1:
    def test_codebooks_move_toward_encodings(self):
        model = tiny_model(seed=1)
        x, u = tiny_windows(seed=1)
        with ad.no_grad():
            z_e = model.encode(Tensor(x)).data
        idx0, quant0 = vq_posterior(z_e, model.codebooks.data)
        d_before = float(np.mean(np.sum((z_e - quant0) ** 2, axis=-1)))

        cfg = TrainConfig(epochs=30, batch_size=8, learning_rate=5e-3, seed=2)
        vqvae_stage1_train(model, (x, u), cfg)

        with ad.no_grad():
            z_e2 = model.encode(Tensor(x)).data
        _, quant2 = vq_posterior(z_e2, model.codebooks.data)
        d_after = float(np.mean(np.sum((z_e2 - quant2) ** 2, axis=-1)))
        assert d_after < d_before

    def test_constant_signal_reconstructed(self):
        model = tiny_model(seed=3)
        x = np.full((8, 10, 1), 0.5)
        u = np.zeros((8, 10, 2))
        cfg = TrainConfig(epochs=150, batch_size=8, learning_rate=5e-3, seed=3)
        vqvae_stage1_train(model, (x, u), cfg)
        with ad.no_grad():
            z_e = model.encode(Tensor(x))
            _, quant = vq_posterior(z_e.data, model.codebooks.data)
            mu, _ = model.decode(Tensor(quant))
        assert float(np.mean(np.abs(mu.data - 0.5))) < 1e-2
        # all steps past the cold-start first one should be tight
        assert float(np.max(np.abs(mu.data[:, 1:] - 0.5))) < 1e-2

    def test_prior_parameters_untouched(self):
        model = tiny_model(seed=4)
        x, u = tiny_windows(seed=4)
        prior_params = model.param_groups()["prior"]
        prior_before = [p.data.copy() for p in prior_params]
        cfg = TrainConfig(epochs=2, batch_size=4, seed=4)
        vqvae_stage1_train(model, (x, u), cfg)
        for p, before in zip(prior_params, prior_before):
            assert np.array_equal(p.data, before)

    def test_empty_dataset_rejected(self):
        model = tiny_model()
        cfg = TrainConfig(epochs=1)
        with pytest.raises(ContractError):
            vqvae_stage1_train(model, (np.zeros((0, 5, 1)), np.zeros((0, 5, 2))), cfg)

    def test_loss_logged_and_decreasing(self):
        model = tiny_model(seed=5)
        x, u = tiny_windows(seed=5)
        cfg = TrainConfig(epochs=25, batch_size=8, learning_rate=3e-3, seed=5)
        log = vqvae_stage1_train(model, (x, u), cfg)
        assert len(log) == 25 and all(e["stage"] == "vqvae-stage1" for e in log)
        assert log[-1]["loss"] < log[0]["loss"]


class TestStage2:
    def test_autoencoder_untouched(self):
        model = tiny_model(seed=6)
        x, u = tiny_windows(seed=6)
        groups = model.param_groups()
        frozen_params = groups["codebooks"] + groups["encoder"] + groups["decoder"]
        frozen = [p.data.copy() for p in frozen_params]
        cfg = TrainConfig(epochs=3, batch_size=4, seed=6)
        vqvae_stage2_train(model, (x, u), cfg)
        for p, before in zip(frozen_params, frozen):
            assert np.array_equal(p.data, before)

    def test_constant_index_sequence_learned(self):
        # push the codebook so every encoding maps to index 1, then the prior
        # trained on those indices must put nearly all mass on state 1
        model = tiny_model(seed=7)
        x, u = tiny_windows(seed=7)
        with ad.no_grad():
            z_e = model.encode(Tensor(x)).data
        center = z_e.reshape(-1, z_e.shape[-1]).mean(axis=0)
        model.codebooks.data[:] = 100.0
        model.codebooks.data[1] = center

        cfg = TrainConfig(epochs=200, batch_size=8, learning_rate=1e-2, seed=7)
        vqvae_stage2_train(model, (x, u), cfg)

        with ad.no_grad():
            prior = model.prior_forward(Tensor(u[:1]))
        assert float(np.exp(prior.init_log.data[0, 1])) > 0.95
        # only transitions out of the observed state are constrained by the data
        assert float(np.min(np.exp(prior.trans_log.data[0, :, 1, 1]))) > 0.95

    def test_cross_entropy_decreases(self):
        model = tiny_model(seed=8)
        x, u = tiny_windows(seed=8)
        cfg = TrainConfig(epochs=40, batch_size=8, learning_rate=3e-3, seed=8)
        log = vqvae_stage2_train(model, (x, u), cfg)
        assert log[-1]["loss"] < log[0]["loss"]

    def test_empty_dataset_rejected(self):
        model = tiny_model()
        cfg = TrainConfig(epochs=1)
        with pytest.raises(ContractError):
            vqvae_stage2_train(model, (np.zeros((0, 5, 1)), np.zeros((0, 5, 2))), cfg)


def test_commitment_weight_constant():
    assert COMMITMENT_WEIGHT == 0.25
