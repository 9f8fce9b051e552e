"""VQ-VAE-style baseline: argmin posterior, straight-through gradients,
two-stage training.

Stage 1 fits encoder, decoder, and codebooks under a uniform prior
(reconstruction plus codebook and commitment losses); stage 2 freezes the
autoencoder, extracts argmin index sequences, and fits the same prior
architecture by categorical cross-entropy on those indices. The shared
``GenerativeModel`` supplies every sub-network, so generation is identical
to the joint model's.
"""

from __future__ import annotations

import time

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .distributions import gaussian_log_pdf
from .errors import ContractError, DimensionError, NumericError
from .model import GenerativeModel
from .optim import Adam, clip_global_norm
from .training import TrainConfig, _epoch_rng

__all__ = ["vq_posterior", "straight_through", "vqvae_stage1_train", "vqvae_stage2_train", "COMMITMENT_WEIGHT"]

COMMITMENT_WEIGHT = 0.25


def vq_posterior(z_e: np.ndarray, codebooks: np.ndarray):
    """Nearest codebook by squared distance; ties go to the lowest index.

    z_e: (..., D); codebooks: (K, D). Returns (indices (...), quantized (..., D)).
    """
    z_e = np.asarray(z_e, dtype=np.float64)
    codebooks = np.asarray(codebooks, dtype=np.float64)
    if z_e.shape[-1] != codebooks.shape[-1]:
        raise DimensionError(f"dimension mismatch: {z_e.shape} vs codebooks {codebooks.shape}")
    diff = z_e[..., None, :] - codebooks  # (..., K, D)
    dist = np.sum(diff * diff, axis=-1)
    idx = np.argmin(dist, axis=-1)  # argmin takes the first minimum
    return idx, codebooks[idx]


def straight_through(z_e: Tensor, quantized: np.ndarray) -> Tensor:
    """Forward the quantized vectors, backpropagate identity into z_e."""
    quantized = np.asarray(quantized, dtype=np.float64)
    if quantized.shape != z_e.data.shape:
        raise DimensionError(f"quantized shape {quantized.shape} != z_e shape {z_e.data.shape}")
    out = Tensor.__new__(Tensor)
    out.data = quantized
    out.requires_grad = z_e.requires_grad
    out.grad = None
    out._parents = (z_e,)
    out._backward = lambda g: (g,)
    out._op = "straight_through"
    return out


def _stage1_loss(model: GenerativeModel, x: Tensor):
    z_e = model.encode(x)
    idx, quant = vq_posterior(z_e.data, model.codebooks.data)
    z_q = straight_through(z_e, quant)
    mu, sigma = model.decode(z_q)
    recon = ad.tmean(ad.tsum(gaussian_log_pdf(x, mu, sigma), axis=1))
    # codebook pull: gradient reaches the codebooks only, through the gather
    e_sel = model.codebooks[idx]
    codebook_loss = ad.tmean(ad.tsum(ad.square(z_e.detach() - e_sel), axis=(1, 2)))
    commit_loss = ad.tmean(ad.tsum(ad.square(z_e - Tensor(quant)), axis=(1, 2)))
    loss = -recon + codebook_loss + COMMITMENT_WEIGHT * commit_loss
    return loss, recon


def _run_stage(params, step_fn, windows_x, windows_u, config: TrainConfig, stage: str, log: list):
    W = windows_x.shape[0]
    B = min(config.batch_size, W)
    optimizer = Adam(
        params,
        learning_rate=config.learning_rate,
        beta1=config.adam_beta1,
        beta2=config.adam_beta2,
        epsilon=config.adam_epsilon,
    )
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        rng = _epoch_rng(config.seed, epoch)
        perm = rng.permutation(W)
        total = 0.0
        n_batches = 0
        for lo in range(0, W, B):
            sel = perm[lo : lo + B]
            try:
                loss = step_fn(sel, optimizer)
            except NumericError as e:
                raise NumericError(f"{stage} epoch {epoch}, batch {n_batches}: {e}") from e
            total += loss
            n_batches += 1
        log.append(
            {
                "stage": stage,
                "epoch": epoch,
                "loss": total / n_batches,
                "seconds": time.perf_counter() - t0,
            }
        )
    return log


def vqvae_stage1_train(model: GenerativeModel, windows, config: TrainConfig, log: list | None = None):
    """Fit encoder/decoder/codebooks; prior parameters stay untouched."""
    x_all = np.asarray(windows[0], dtype=np.float64)
    if x_all.shape[0] == 0:
        raise ContractError("empty dataset")
    if log is None:
        log = []
    groups = model.param_groups()
    params = groups["codebooks"] + groups["encoder"] + groups["decoder"]

    def step(sel, optimizer):
        x = Tensor(x_all[sel])
        loss, _ = _stage1_loss(model, x)
        optimizer.zero_grad()
        ad.backward(loss)
        clip_global_norm(optimizer.params, config.clip_norm)
        optimizer.step()
        return loss.item()

    return _run_stage(params, step, x_all, None, config, "vqvae-stage1", log)


def vqvae_stage2_train(model: GenerativeModel, windows, config: TrainConfig, log: list | None = None):
    """Fit the prior on frozen argmin index sequences by cross-entropy."""
    x_all = np.asarray(windows[0], dtype=np.float64)
    u_all = np.asarray(windows[1], dtype=np.float64)
    if x_all.shape[0] == 0:
        raise ContractError("empty dataset")
    if log is None:
        log = []

    # freeze: indices are computed once, outside the tape
    with ad.no_grad():
        z_e = np.concatenate(
            [model.encode(Tensor(x_all[lo : lo + 64])).data for lo in range(0, x_all.shape[0], 64)]
        )
    idx_all, _ = vq_posterior(z_e, model.codebooks.data)  # (W, T)
    groups = model.param_groups()
    params = groups["prior"]

    T = x_all.shape[1]

    def step(sel, optimizer):
        u = Tensor(u_all[sel])
        idx = idx_all[sel]
        B = idx.shape[0]
        prior = model.prior_forward(u)
        ll = prior.init_log[np.arange(B), idx[:, 0]]
        if T > 1:
            b_ix = np.repeat(np.arange(B), T - 1)
            t_ix = np.tile(np.arange(T - 1), B)
            ll = ad.tsum(ll) + ad.tsum(
                prior.trans_log[b_ix, t_ix, idx[:, :-1].reshape(-1), idx[:, 1:].reshape(-1)]
            )
        else:
            ll = ad.tsum(ll)
        loss = -ll * (1.0 / B)
        optimizer.zero_grad()
        ad.backward(loss)
        clip_global_norm(optimizer.params, config.clip_norm)
        optimizer.step()
        return loss.item()

    return _run_stage(params, step, x_all, u_all, config, "vqvae-stage2", log)
