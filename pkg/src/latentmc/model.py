"""The generative model: encoder, codebook posterior, command-conditioned
Markov prior, Gaussian autoregressive decoder, and the three-term ELBO.

Latent states live in a learned codebook of K vectors in R^D. Conditionally
on the commands the latent sequence is a (time-inhomogeneous) Markov chain;
conditionally on the latents the observations are Gaussian with recurrently
decoded mean and variance. Training relaxes the categorical posterior with
Gumbel-Softmax samples so the whole objective is differentiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from ._kernels import sample_markov_paths
from .autodiff import Tensor
from .distributions import (
    categorical_entropy,
    gaussian_log_pdf,
    gumbel_softmax,
    make_rng,
    posterior_logits,
    sample_gumbel,
)
from .errors import ContractError, DimensionError, DomainError
from .nets import CausalConv, Linear, StackedRecurrence

__all__ = ["ModelConfig", "PriorOutputs", "ElboComponents", "GenerativeModel", "SIGMA_FLOOR"]

SIGMA_FLOOR = 1e-4

KERNEL_KINDS = ("rnn", "gru", "cnn")


@dataclass
class ModelConfig:
    obs_dim: int
    cmd_dim: int
    K: int = 8
    D: int = 32
    M: int = 1
    delta: int = 24
    kernel_kind: str = "gru"
    enc_hidden: int = 64
    dec_hidden: int = 64
    kernel_hidden: int = 64
    num_layers: int = 3
    tau0: float = 1.0
    tau_decay: float = 1.0
    tau_min: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.kernel_kind not in KERNEL_KINDS:
            raise ContractError(f"kernel_kind must be one of {KERNEL_KINDS}, got {self.kernel_kind!r}")
        for name in ("obs_dim", "cmd_dim", "K", "D", "M", "enc_hidden", "dec_hidden", "kernel_hidden", "num_layers"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.K < 2:
            raise ContractError("at least two codebooks are required")
        if self.delta < 0:
            raise ContractError("delta must be non-negative")

    def tau_for_epoch(self, epoch: int) -> float:
        return max(self.tau_min, self.tau0 * self.tau_decay**epoch)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PriorOutputs:
    """Normalized log-probabilities of the latent chain given the commands.

    init_log: (B, K), log p(z_1 = k | u).
    trans_log: (B, T-1, K, K) with [b, t, j, k] = log p(z_{t+2} = k | z_{t+1} = j, u);
    normalized over the destination axis k.
    """

    init_log: Tensor
    trans_log: Tensor | None


@dataclass
class ElboComponents:
    """Batch-mean ELBO terms; objective = recon + beta * (prior + entropy)."""

    recon: Tensor
    prior_term: Tensor
    entropy_term: Tensor
    beta: float

    def objective(self) -> Tensor:
        return self.recon + self.beta * (self.prior_term + self.entropy_term)

    def as_floats(self) -> dict:
        return {
            "recon": self.recon.item(),
            "prior_term": self.prior_term.item(),
            "entropy_term": self.entropy_term.item(),
            "beta": self.beta,
        }


def _log_softmax(x: Tensor) -> Tensor:
    return x - ad.logsumexp(x, axis=-1, keepdims=True)


class GenerativeModel:
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = make_rng(config.seed)
        c = config
        bound = 1.0 / math.sqrt(c.D)
        self.codebooks = Tensor(rng.uniform(-bound, bound, size=(c.K, c.D)), requires_grad=True)

        self.encoder = StackedRecurrence("lstm", c.obs_dim, [c.enc_hidden] * c.num_layers, rng)
        self.enc_head = Linear(c.enc_hidden, c.D, rng)

        # input model: hidden size matches the command dimension
        self.input_model = StackedRecurrence("lstm", c.cmd_dim, [c.cmd_dim] * c.num_layers, rng)
        if c.kernel_kind == "cnn":
            self.kernel_conv = CausalConv(c.delta, c.cmd_dim, c.kernel_hidden, rng)
            self.kernel_rec = None
        else:
            self.kernel_conv = None
            self.kernel_rec = StackedRecurrence(c.kernel_kind, c.cmd_dim, [c.kernel_hidden], rng)
        self.init_head = Linear(c.kernel_hidden, c.K, rng)
        self.trans_head = Linear(c.kernel_hidden, c.K * c.K, rng)

        self.decoder = StackedRecurrence("lstm", c.D, [c.dec_hidden] * c.num_layers, rng)
        self.mu_head = Linear(c.dec_hidden, c.obs_dim, rng)
        self.sigma_head = Linear(c.dec_hidden, 1, rng)

    # -- parameters ----------------------------------------------------------

    def named_params(self) -> list:
        out = [("codebooks", self.codebooks)]
        out += self.encoder.params("encoder")
        out += self.enc_head.params("enc_head")
        out += self.input_model.params("input_model")
        if self.kernel_conv is not None:
            out += self.kernel_conv.params("kernel")
        else:
            out += self.kernel_rec.params("kernel")
        out += self.init_head.params("init_head")
        out += self.trans_head.params("trans_head")
        out += self.decoder.params("decoder")
        out += self.mu_head.params("mu_head")
        out += self.sigma_head.params("sigma_head")
        return out

    def params(self) -> list:
        return [p for _, p in self.named_params()]

    def param_groups(self) -> dict:
        """Parameter tensors keyed by component, for gradient diagnostics."""
        groups: dict = {"codebooks": [self.codebooks], "encoder": [], "prior": [], "decoder": []}
        for name, p in self.named_params():
            if name.startswith(("encoder", "enc_head")):
                groups["encoder"].append(p)
            elif name.startswith(("input_model", "kernel", "init_head", "trans_head")):
                groups["prior"].append(p)
            elif name.startswith(("decoder", "mu_head", "sigma_head")):
                groups["decoder"].append(p)
        return groups

    def set_param_arrays(self, arrays: dict) -> None:
        for name, p in self.named_params():
            if name not in arrays:
                raise ContractError(f"missing parameter '{name}' in checkpoint arrays")
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != p.data.shape:
                raise DimensionError(f"parameter '{name}' shape {a.shape} != expected {p.data.shape}")
            p.data = a.copy()

    # -- model pieces ----------------------------------------------------------

    def encode(self, x: Tensor) -> Tensor:
        """(B, T, obs_dim) observations -> (B, T, D) encodings."""
        if x.ndim != 3 or x.shape[-1] != self.config.obs_dim:
            raise DimensionError(f"encode expects (B, T, {self.config.obs_dim}), got {x.shape}")
        return self.enc_head(self.encoder.unroll(x))

    def prior_forward(self, u: Tensor) -> PriorOutputs:
        """(B, T, cmd_dim) commands -> initial and transition log-probabilities."""
        if u.ndim != 3 or u.shape[-1] != self.config.cmd_dim:
            raise DimensionError(f"prior_forward expects (B, T, {self.config.cmd_dim}), got {u.shape}")
        B, T, _ = u.shape
        K = self.config.K
        u_tilde = self.input_model.unroll(u)
        if self.kernel_conv is not None:
            h = ad.tanh(self.kernel_conv(u_tilde))
        else:
            h = self.kernel_rec.unroll(u_tilde)
        init_log = _log_softmax(self.init_head(h[:, 0, :]))
        if T == 1:
            return PriorOutputs(init_log=init_log, trans_log=None)
        trans_logits = ad.reshape(self.trans_head(h[:, 1:, :]), (B, T - 1, K, K))
        return PriorOutputs(init_log=init_log, trans_log=_log_softmax(trans_logits))

    def prior_log_prob_relaxed(self, weights: Tensor, prior: PriorOutputs) -> Tensor:
        """Bilinear relaxation of the chain log-probability.

        weights: (B, T, K) rows summing to 1 (one-hot rows recover the exact
        discrete path log-probability). Returns (B,).
        """
        if np.any(np.abs(weights.data.sum(axis=-1) - 1.0) > 1e-6):
            raise ContractError("relaxed weights must sum to 1 along the state axis")
        B, T, K = weights.shape
        first = ad.tsum(weights[:, 0, :] * prior.init_log, axis=-1)
        if T == 1:
            return first
        prev = ad.reshape(weights[:, : T - 1, :], (B, T - 1, K, 1))
        nxt = ad.reshape(weights[:, 1:, :], (B, T - 1, 1, K))
        rest = ad.tsum(prev * nxt * prior.trans_log, axis=(1, 2, 3))
        return first + rest

    def decode(self, z: Tensor) -> tuple:
        """(B, T, D) latent codes -> mean (B, T, obs_dim) and sigma (B, T, 1).

        The input sequence is shifted right by one (zero at t=1) so the
        emission at time t depends on codes strictly before t.
        """
        if z.ndim != 3 or z.shape[-1] != self.config.D:
            raise DimensionError(f"decode expects (B, T, {self.config.D}), got {z.shape}")
        B, T, D = z.shape
        shifted = ad.concat([ad.zeros(B, 1, D), z[:, : T - 1, :]], axis=1) if T > 1 else ad.zeros(B, 1, D)
        h = self.decoder.unroll(shifted)
        mu = self.mu_head(h)
        sigma = ad.softplus(self.sigma_head(h)) + SIGMA_FLOOR
        return mu, sigma

    # -- objective ------------------------------------------------------------

    def elbo(self, x: Tensor, u: Tensor, beta: float, rng=None, tau: float = 1.0,
             M: int | None = None, noise: np.ndarray | None = None) -> ElboComponents:
        """Monte Carlo ELBO components, averaged over the batch.

        ``noise``: optional pre-drawn Gumbel noise of shape (M, B, T, K) to pin
        the relaxed samples (gradient checks); otherwise drawn from ``rng``.
        """
        if not (0.0 <= beta <= 1.0):
            raise DomainError(f"beta must lie in [0, 1], got {beta}")
        M = self.config.M if M is None else M
        if M < 1:
            raise ContractError("M must be at least 1")
        B, T, _ = x.shape
        K = self.config.K

        z_e = self.encode(x)
        log_q = posterior_logits(z_e, self.codebooks)
        entropy = categorical_entropy(log_q) * (1.0 / B)

        prior = self.prior_forward(u)
        recon_terms = []
        prior_terms = []
        for i in range(M):
            g = noise[i] if noise is not None else sample_gumbel((B, T, K), rng)
            rs = gumbel_softmax(log_q, tau, self.codebooks, noise=g)
            mu, sigma = self.decode(rs.mixed_code)
            ll = gaussian_log_pdf(x, mu, sigma)  # (B, T)
            recon_terms.append(ad.tmean(ad.tsum(ll, axis=1)))
            prior_terms.append(ad.tmean(self.prior_log_prob_relaxed(rs.weights, prior)))
        inv_m = 1.0 / M
        recon = recon_terms[0] * inv_m
        prior_term = prior_terms[0] * inv_m
        for i in range(1, M):
            recon = recon + recon_terms[i] * inv_m
            prior_term = prior_term + prior_terms[i] * inv_m
        return ElboComponents(recon=recon, prior_term=prior_term, entropy_term=entropy, beta=beta)

    # -- generation -------------------------------------------------------------

    def sample_latent_paths(self, u: np.ndarray, N: int, rng) -> np.ndarray:
        """Exact ancestral sampling of N latent index paths given commands (T, q)."""
        u = np.asarray(u, dtype=np.float64)
        if u.ndim != 2:
            raise DimensionError(f"commands must be (T, q), got {u.shape}")
        T = u.shape[0]
        K = self.config.K
        with ad.no_grad():
            prior = self.prior_forward(Tensor(u[None]))
        init_logp = prior.init_log.data[0]
        if T > 1:
            trans_logp = np.ascontiguousarray(prior.trans_log.data[0])
        else:
            trans_logp = np.zeros((0, K, K))
        g = sample_gumbel((N, T, K), rng)
        return sample_markov_paths(init_logp, trans_logp, g)

    def generate(self, u: np.ndarray, N: int, rng, emit_noise: bool = False) -> np.ndarray:
        """Sample N observation trajectories conditioned on commands (T, q).

        Returns (N, T, obs_dim). With emit_noise off the decoder means are
        emitted; with it on, Gaussian observation noise is added.
        """
        if N < 1:
            raise ContractError("N must be at least 1")
        idx = self.sample_latent_paths(u, N, rng)
        codes = self.codebooks.data[idx]  # (N, T, D)
        with ad.no_grad():
            mu, sigma = self.decode(Tensor(codes))
        out = mu.data.copy()
        if emit_noise:
            out += sigma.data * rng.standard_normal(out.shape)
        return out
