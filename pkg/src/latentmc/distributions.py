"""Sampling and log-density primitives.

Diagonal Gaussian log-densities, Gumbel(0,1) noise, exact categorical
sampling via the Gumbel-argmax trick, its temperature-controlled softmax
relaxation, and the squared-distance codebook posterior. Everything that
feeds the training objective is expressed in autodiff Tensors; noise draws
enter the tape as constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, DomainError

__all__ = [
    "make_rng",
    "spawn_rngs",
    "gaussian_log_pdf",
    "sample_gumbel",
    "gumbel_argmax",
    "gumbel_softmax",
    "posterior_logits",
    "categorical_entropy",
    "RelaxedSample",
]

_U_CLAMP = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic 64-bit-seeded generator (PCG64, platform independent)."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list:
    """n independent child streams derived from one seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class RelaxedSample:
    """Temperature-relaxed categorical draw and its codebook mixture."""

    weights: Tensor  # (..., K), rows sum to 1
    temperature: float
    mixed_code: Tensor  # (..., D) = weights @ codebooks


def gaussian_log_pdf(x, mu, sigma) -> Tensor:
    """log N(x; mu, sigma^2 I) for an isotropic Gaussian in d dimensions.

    x and mu are (..., d); sigma is a positive scalar (Tensor or float).
    Returns the summed log-density over the trailing axis, shape (...).
    """
    x = ad.constant(x) if not isinstance(x, Tensor) else x
    mu = ad.constant(mu) if not isinstance(mu, Tensor) else mu
    if not isinstance(sigma, Tensor):
        if sigma <= 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        sigma = ad.constant(sigma)
    elif np.any(sigma.data <= 0):
        raise DomainError("sigma must be positive")
    if x.shape[-1] != mu.shape[-1]:
        raise DimensionError(f"x and mu dimension mismatch: {x.shape} vs {mu.shape}")
    d = x.shape[-1]
    diff = x - mu
    sq = ad.tsum(ad.square(diff), axis=-1)
    var = ad.square(sigma)
    if var.ndim > 0 and var.size > 1 and var.shape[-1] == 1:
        var = ad.reshape(var, var.shape[:-1])
    return -0.5 * d * (math.log(2.0 * math.pi) + ad.log(var)) - sq / (2.0 * var)


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    """Gumbel(0,1) noise via inverse CDF, uniforms clamped away from {0,1}."""
    u = rng.random(shape)
    u = np.clip(u, _U_CLAMP, 1.0 - _U_CLAMP)
    return -np.log(-np.log(u))


def gumbel_argmax(log_probs: np.ndarray, rng: np.random.Generator) -> int:
    """Exact categorical draw: argmax_k(log q_k + g_k)."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    g = sample_gumbel(log_probs.shape, rng)
    return int(np.argmax(log_probs + g))


def gumbel_softmax(log_q, tau: float, codebooks, rng=None, noise=None) -> RelaxedSample:
    """Relaxed categorical sample mixed through the codebooks.

    log_q: Tensor (..., K) of log-probabilities; codebooks: Tensor (K, D).
    weights_k proportional to exp((log q_k + g_k)/tau); mixed_code is the
    convex combination of codebook vectors under those weights. The Gumbel
    draws g are constants on the tape, so the result is differentiable in
    log_q and the codebooks. Pass ``noise`` to pin the draws (tests).
    """
    if tau <= 0:
        raise DomainError(f"temperature must be positive, got {tau}")
    log_q = ad.constant(log_q) if not isinstance(log_q, Tensor) else log_q
    codebooks = ad.constant(codebooks) if not isinstance(codebooks, Tensor) else codebooks
    if noise is None:
        noise = sample_gumbel(log_q.shape, rng)
    weights = ad.softmax((log_q + ad.constant(noise)) * (1.0 / tau), axis=-1)
    if weights.ndim == 1:
        mixed = ad.reshape(ad.matmul(ad.reshape(weights, (1, -1)), codebooks), (-1,))
    else:
        mixed = ad.matmul(weights, codebooks)
    return RelaxedSample(weights=weights, temperature=tau, mixed_code=mixed)


def posterior_logits(z_e, codebooks) -> Tensor:
    """Normalized log q over codebooks from squared distances.

    z_e: Tensor (..., D); codebooks: Tensor (K, D). Returns (..., K) with
    log q_k = -||z_e - e_k||^2, normalized so logsumexp over k is 0.
    """
    z_e = ad.constant(z_e) if not isinstance(z_e, Tensor) else z_e
    codebooks = ad.constant(codebooks) if not isinstance(codebooks, Tensor) else codebooks
    if z_e.shape[-1] != codebooks.shape[-1]:
        raise DimensionError(
            f"latent dimension mismatch: z_e {z_e.shape} vs codebooks {codebooks.shape}"
        )
    # ||z - e_k||^2 = ||z||^2 - 2 z.e_k + ||e_k||^2
    z_sq = ad.tsum(ad.square(z_e), axis=-1, keepdims=True)
    e_sq = ad.reshape(ad.tsum(ad.square(codebooks), axis=-1), (1,) * (z_e.ndim - 1) + (-1,))
    cross = ad.matmul(z_e, ad.swapaxes(codebooks, 0, 1)) if z_e.ndim >= 2 else None
    if cross is None:
        cross = ad.reshape(ad.matmul(ad.reshape(z_e, (1, -1)), ad.swapaxes(codebooks, 0, 1)), (-1,))
        z_sq = ad.reshape(z_sq, (1,))
        e_sq = ad.reshape(e_sq, (-1,))
    neg_dist = 2.0 * cross - z_sq - e_sq
    return neg_dist - ad.logsumexp(neg_dist, axis=-1, keepdims=True)


def categorical_entropy(log_q) -> Tensor:
    """Exact entropy -sum q log q, summed over all categorical slots.

    log_q: (..., K) normalized log-probabilities; returns a scalar Tensor.
    For a (T, K) table of independent posteriors this is the full
    T-slot entropy, bounded by T log K.
    """
    log_q = ad.constant(log_q) if not isinstance(log_q, Tensor) else log_q
    q = ad.exp(log_q)
    return -ad.tsum(q * log_q)
