"""Joint training of encoder, codebooks, prior, and decoder on the
beta-annealed ELBO: epoch loop, mini-batching, checkpointing, metrics log.

Determinism contract: every random draw comes from a generator derived from
(seed, epoch), so a run resumed from a checkpoint at epoch e follows exactly
the same trajectory as an unbroken run.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .errors import ContractError, NumericError
from .io import load_container, save_container
from .model import GenerativeModel, ModelConfig
from .optim import Adam, clip_global_norm

__all__ = [
    "TrainConfig",
    "beta_schedule",
    "train",
    "checkpoint_save",
    "checkpoint_load",
    "write_train_log",
]

CHECKPOINT_FORMAT = 1


@dataclass
class TrainConfig:
    epochs: int = 300
    beta_warmup_epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 0
    checkpoint_every: int = 0  # 0: final checkpoint only

    def __post_init__(self):
        if self.beta_warmup_epochs < 1:
            raise ContractError("beta_warmup_epochs must be at least 1")
        if self.epochs < 0:
            raise ContractError("epochs must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def beta_schedule(epoch: int, warmup: int) -> float:
    """Linear warmup: epoch/warmup, clamped at 1."""
    if epoch < 1:
        raise ContractError("epochs are 1-based")
    return min(1.0, epoch / warmup)


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, epoch))))


def train(model: GenerativeModel, windows, config: TrainConfig, optimizer: Adam | None = None,
          start_epoch: int = 0, checkpoint_path: str | None = None, log: list | None = None):
    """Optimize the model in place; returns (model, log).

    ``windows``: (x, u) arrays of shape (W, T, d) and (W, T, q). The log is a
    list of per-epoch records (dicts); pass an existing list to extend it on
    resume.
    """
    x_all, u_all = np.asarray(windows[0], dtype=np.float64), np.asarray(windows[1], dtype=np.float64)
    if x_all.ndim != 3 or u_all.ndim != 3 or x_all.shape[:2] != u_all.shape[:2]:
        raise ContractError(f"window arrays disagree: {x_all.shape} vs {u_all.shape}")
    W = x_all.shape[0]
    if W == 0:
        raise ContractError("empty dataset")
    if optimizer is None:
        optimizer = Adam(
            model.params(),
            learning_rate=config.learning_rate,
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
            epsilon=config.adam_epsilon,
        )
    if log is None:
        log = []

    B = min(config.batch_size, W)
    for epoch in range(start_epoch + 1, config.epochs + 1):
        t0 = time.perf_counter()
        rng = _epoch_rng(config.seed, epoch)
        beta = beta_schedule(epoch, config.beta_warmup_epochs)
        tau = model.config.tau_for_epoch(epoch)
        perm = rng.permutation(W)
        sums = {"recon": 0.0, "prior_term": 0.0, "entropy_term": 0.0}
        n_batches = 0
        for lo in range(0, W, B):
            sel = perm[lo : lo + B]
            x = ad.Tensor(x_all[sel])
            u = ad.Tensor(u_all[sel])
            try:
                comps = model.elbo(x, u, beta, rng=rng, tau=tau)
                loss = -comps.objective()
                optimizer.zero_grad()
                ad.backward(loss)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}, batch {n_batches}: {e}") from e
            clip_global_norm(optimizer.params, config.clip_norm)
            optimizer.step()
            vals = comps.as_floats()
            for k in sums:
                sums[k] += vals[k]
            n_batches += 1
        record = {
            "epoch": epoch,
            "recon": sums["recon"] / n_batches,
            "prior_term": sums["prior_term"] / n_batches,
            "entropy_term": sums["entropy_term"] / n_batches,
            "beta": beta,
            "tau": tau,
            "seconds": time.perf_counter() - t0,
        }
        log.append(record)
        if checkpoint_path and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            checkpoint_save(model, optimizer, epoch, checkpoint_path, train_config=config)
    if checkpoint_path:
        checkpoint_save(model, optimizer, config.epochs, checkpoint_path, train_config=config)
    return model, log


# -- checkpointing -----------------------------------------------------------


def checkpoint_save(model: GenerativeModel, optimizer: Adam | None, epoch: int, path: str,
                    kind: str = "joint", train_config: TrainConfig | None = None,
                    extra_meta: dict | None = None) -> None:
    arrays = {name: p.data for name, p in model.named_params()}
    arrays["epoch"] = np.array([float(epoch)])
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    meta = {
        "format": CHECKPOINT_FORMAT,
        "kind": kind,
        "model_config": model.config.to_dict(),
        "epoch": epoch,
        "has_optimizer": optimizer is not None,
    }
    if train_config is not None:
        meta["train_config"] = train_config.to_dict()
    if extra_meta:
        meta.update(extra_meta)
    save_container(path, meta, arrays)


def checkpoint_load(path: str, expect_kind: str | None = None):
    """Returns (model, optimizer_or_None, epoch, meta)."""
    meta, arrays = load_container(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        from .errors import CheckpointError

        raise CheckpointError(f"unsupported checkpoint format {meta.get('format')!r} in '{path}'")
    if expect_kind is not None and meta.get("kind") != expect_kind:
        from .errors import CheckpointError

        raise CheckpointError(f"expected a '{expect_kind}' checkpoint, found '{meta.get('kind')}'")
    model = GenerativeModel(ModelConfig(**meta["model_config"]))
    model.set_param_arrays(arrays)
    epoch = int(arrays["epoch"][0])
    optimizer = None
    if meta.get("has_optimizer"):
        tc = meta.get("train_config", {})
        optimizer = Adam(
            model.params(),
            learning_rate=tc.get("learning_rate", 1e-3),
            beta1=tc.get("adam_beta1", 0.9),
            beta2=tc.get("adam_beta2", 0.999),
            epsilon=tc.get("adam_epsilon", 1e-8),
        )
        optimizer.load_state_arrays(arrays)
    return model, optimizer, epoch, meta


def write_train_log(log: list, path: str) -> None:
    with open(path, "w") as f:
        for rec in log:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
