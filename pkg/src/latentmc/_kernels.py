"""Hot numeric kernels: scaled HMM recursions and latent-chain sampling.

Each kernel exists twice: a plain numpy implementation (``*_numpy``) and a
numba ``@njit`` compilation of the same source. The active set is chosen at
import time; set ``LATENTMC_NO_NUMBA=1`` to force the numpy path (the
fallback also engages automatically when numba is unavailable).
``benchmarks/bench_kernels.py`` times both paths side by side.

These functions stay off the autodiff tape: they serve the EM baseline and
ancestral sampling, where no gradients flow.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ACTIVE",
    "hmm_forward",
    "hmm_backward",
    "hmm_pairwise",
    "sample_markov_paths",
    "hmm_forward_numpy",
    "hmm_backward_numpy",
    "hmm_pairwise_numpy",
    "sample_markov_paths_numpy",
]

_DISABLED = os.environ.get("LATENTMC_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    NUMBA_ACTIVE = True
except ImportError:
    NUMBA_ACTIVE = False

    def njit(*args, **kwargs):  # identity decorator
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def hmm_forward_numpy(pi0, A, lik):
    """Scaled forward pass.

    pi0: (K,) initial law; A: (K, K) with A[j, k] = P(k | j); lik: (T, K)
    emission likelihoods. Returns (alpha_hat (T, K), c (T,)) where c_t is the
    per-step normalizer; log-likelihood = sum(log c).
    """
    T, K = lik.shape
    alpha = np.empty((T, K))
    c = np.empty(T)
    a = pi0 * lik[0]
    c[0] = a.sum()
    alpha[0] = a / c[0]
    for t in range(1, T):
        a = (alpha[t - 1] @ A) * lik[t]
        c[t] = a.sum()
        alpha[t] = a / c[t]
    return alpha, c


def hmm_backward_numpy(A, lik, c):
    """Scaled backward pass matching hmm_forward's normalizers."""
    T, K = lik.shape
    beta = np.empty((T, K))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (A @ (lik[t + 1] * beta[t + 1])) / c[t + 1]
    return beta


def hmm_pairwise_numpy(alpha, beta, A, lik, c):
    """Sum over t of pairwise posteriors xi_t[j, k]; shape (K, K)."""
    T, K = lik.shape
    xi = np.zeros((K, K))
    for t in range(1, T):
        outer = np.outer(alpha[t - 1], lik[t] * beta[t])
        xi += A * outer / c[t]
    return xi


def sample_markov_paths_numpy(init_logp, trans_logp, gumbel):
    """Ancestral Gumbel-argmax sampling of N chains.

    init_logp: (K,); trans_logp: (T-1, K, K) with [t, j, k] = log P(k | j);
    gumbel: (N, T, K) pre-drawn Gumbel(0,1) noise. Returns int64 (N, T).
    """
    N, T, K = gumbel.shape
    idx = np.empty((N, T), dtype=np.int64)
    state = np.argmax(init_logp + gumbel[:, 0, :], axis=1)
    idx[:, 0] = state
    for t in range(1, T):
        logits = trans_logp[t - 1][state] + gumbel[:, t, :]
        state = np.argmax(logits, axis=1)
        idx[:, t] = state
    return idx


def _sample_markov_paths_loop(init_logp, trans_logp, gumbel):
    N, T, K = gumbel.shape
    idx = np.empty((N, T), dtype=np.int64)
    for n in range(N):
        best = 0
        best_v = init_logp[0] + gumbel[n, 0, 0]
        for k in range(1, K):
            v = init_logp[k] + gumbel[n, 0, k]
            if v > best_v:
                best_v, best = v, k
        idx[n, 0] = best
        for t in range(1, T):
            prev = idx[n, t - 1]
            best = 0
            best_v = trans_logp[t - 1, prev, 0] + gumbel[n, t, 0]
            for k in range(1, K):
                v = trans_logp[t - 1, prev, k] + gumbel[n, t, k]
                if v > best_v:
                    best_v, best = v, k
            idx[n, t] = best
    return idx


if NUMBA_ACTIVE:
    hmm_forward = njit(cache=True)(hmm_forward_numpy)
    hmm_backward = njit(cache=True)(hmm_backward_numpy)
    hmm_pairwise = njit(cache=True)(hmm_pairwise_numpy)
    sample_markov_paths = njit(cache=True)(_sample_markov_paths_loop)
else:
    hmm_forward = hmm_forward_numpy
    hmm_backward = hmm_backward_numpy
    hmm_pairwise = hmm_pairwise_numpy
    sample_markov_paths = sample_markov_paths_numpy
