"""Gaussian-emission hidden Markov model fit by EM (Baum-Welch).

Discrete states with isotropic Gaussian emissions; scaled forward-backward
E-step, closed-form M-step. The exact data log-likelihood is returned per
iteration and is non-decreasing up to floating slack. Hot recursions live in
``_kernels`` (numba when available).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import hmm_backward, hmm_forward, hmm_pairwise, sample_markov_paths
from .distributions import make_rng, sample_gumbel
from .errors import ContractError

__all__ = ["HmmParams", "hmm_em_fit", "hmm_log_likelihood", "hmm_generate", "VAR_FLOOR"]

VAR_FLOOR = 1e-6


@dataclass
class HmmParams:
    pi0: np.ndarray  # (K,)
    A: np.ndarray  # (K, K), rows normalized, A[j, k] = P(k | j)
    means: np.ndarray  # (K, d)
    variances: np.ndarray  # (K,), isotropic

    @property
    def K(self) -> int:
        return self.pi0.shape[0]

    def to_arrays(self) -> dict:
        return {"hmm/pi0": self.pi0, "hmm/A": self.A, "hmm/means": self.means, "hmm/variances": self.variances}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "HmmParams":
        return cls(
            pi0=arrays["hmm/pi0"].copy(),
            A=arrays["hmm/A"].copy(),
            means=arrays["hmm/means"].copy(),
            variances=arrays["hmm/variances"].copy(),
        )


def _emission_scaled_lik(x: np.ndarray, params: HmmParams):
    """Per-step scaled likelihoods and the subtracted log offsets.

    Returns (lik (T, K), offsets (T,)) with log p(x_t | k) = log lik[t, k] + offsets[t].
    """
    T, d = x.shape
    diff = x[:, None, :] - params.means[None, :, :]  # (T, K, d)
    sq = np.sum(diff * diff, axis=-1)
    log_lik = -0.5 * d * (math.log(2.0 * math.pi) + np.log(params.variances))[None, :] - sq / (
        2.0 * params.variances[None, :]
    )
    offsets = log_lik.max(axis=1)
    return np.exp(log_lik - offsets[:, None]), offsets


def hmm_log_likelihood(x: np.ndarray, params: HmmParams) -> float:
    lik, offsets = _emission_scaled_lik(np.asarray(x, dtype=np.float64), params)
    _, c = hmm_forward(params.pi0, params.A, lik)
    return float(np.sum(np.log(c)) + offsets.sum())


def _as_sequences(data) -> list:
    if isinstance(data, np.ndarray) and data.ndim == 3:
        return [np.asarray(s, dtype=np.float64) for s in data]
    seqs = [np.asarray(s, dtype=np.float64) for s in data]
    if not seqs or any(s.ndim != 2 or s.shape[0] < 1 for s in seqs):
        raise ContractError("hmm_em_fit needs a non-empty list of (T, d) sequences")
    return seqs


def hmm_em_fit(data, K: int, iters: int, seed: int = 0):
    """Fit by EM; returns (HmmParams, per-iteration log-likelihoods).

    ``data``: (n, T, d) array or list of (T, d) sequences. The i-th reported
    log-likelihood is evaluated at the parameters entering iteration i, so
    the sequence is monotone under EM. A variance collapsing below the floor
    is clamped.
    """
    if K < 1 or iters < 1:
        raise ContractError("K and iters must be at least 1")
    seqs = _as_sequences(data)
    d = seqs[0].shape[1]
    allx = np.concatenate(seqs, axis=0)
    rng = make_rng(seed)

    pick = rng.choice(allx.shape[0], size=K, replace=allx.shape[0] < K)
    means = allx[pick].copy()
    variances = np.full(K, max(float(allx.var()), VAR_FLOOR))
    pi0 = np.full(K, 1.0 / K)
    A = np.full((K, K), 1.0 / K) + 0.05 * np.eye(K)
    A /= A.sum(axis=1, keepdims=True)
    params = HmmParams(pi0=pi0, A=A, means=means, variances=variances)

    loglik_history = []
    for _ in range(iters):
        total_ll = 0.0
        pi0_acc = np.zeros(K)
        xi_acc = np.zeros((K, K))
        gamma_sum = np.zeros(K)
        mean_acc = np.zeros((K, d))
        sq_acc = np.zeros(K)
        for x in seqs:
            lik, offsets = _emission_scaled_lik(x, params)
            alpha, c = hmm_forward(params.pi0, params.A, lik)
            beta = hmm_backward(params.A, lik, c)
            total_ll += float(np.sum(np.log(c)) + offsets.sum())
            gamma = alpha * beta  # rows already sum to 1
            pi0_acc += gamma[0]
            xi_acc += hmm_pairwise(alpha, beta, params.A, lik, c)
            gamma_sum += gamma.sum(axis=0)
            mean_acc += gamma.T @ x
            # E[||x - mu_k||^2] accumulated after the mean update needs both moments
            sq_acc += (gamma * np.sum(x * x, axis=1)[:, None]).sum(axis=0)
        loglik_history.append(total_ll)

        new_means = mean_acc / np.maximum(gamma_sum[:, None], 1e-300)
        new_var = (sq_acc - np.sum(new_means * mean_acc, axis=1)) / np.maximum(d * gamma_sum, 1e-300)
        clamped = new_var < VAR_FLOOR
        if np.any(clamped):
            new_var = np.maximum(new_var, VAR_FLOOR)
        row = xi_acc.sum(axis=1, keepdims=True)
        new_A = np.where(row > 0, xi_acc / np.maximum(row, 1e-300), 1.0 / K)
        params = HmmParams(
            pi0=pi0_acc / pi0_acc.sum(),
            A=new_A,
            means=new_means,
            variances=new_var,
        )
    return params, loglik_history


def hmm_generate(params: HmmParams, T: int, N: int, rng) -> np.ndarray:
    """Ancestral sampling: (N, T, d) trajectories."""
    if T < 1 or N < 1:
        raise ContractError("T and N must be at least 1")
    K = params.K
    init_logp = np.log(np.maximum(params.pi0, 1e-300))
    trans_logp = np.broadcast_to(np.log(np.maximum(params.A, 1e-300)), (max(T - 1, 0), K, K)).copy()
    g = sample_gumbel((N, T, K), rng)
    idx = sample_markov_paths(init_logp, trans_logp, g)
    sigma = np.sqrt(params.variances)[idx][:, :, None]
    return params.means[idx] + sigma * rng.standard_normal((N, T, params.means.shape[1]))
