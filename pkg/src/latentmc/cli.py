"""Command-line entry point.

Subcommands: train, evaluate, sample, usage, synth, hmm-fit, vqvae-train.
A JSON config file describes the data source, windowing, model, and training
hyperparameters; a few common knobs (--seed, --kernel, --n) can be overridden
on the command line.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .data import Dataset, load_ett_csv, load_synth_csv, make_windows, save_synth_csv, synth_regime_data
from .distributions import make_rng
from .errors import LatentMcError
from .evaluate import codebook_usage, evaluate, report_to_json
from .hmm import HmmParams, hmm_em_fit
from .io import load_container, save_container
from .model import GenerativeModel, ModelConfig
from .training import TrainConfig, checkpoint_load, checkpoint_save, train, write_train_log
from .vqvae import vqvae_stage1_train, vqvae_stage2_train

__all__ = ["main", "cli"]


def _load_config(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise LatentMcError(f"cannot read config '{path}': {e}") from e
    except ValueError as e:
        raise LatentMcError(f"config '{path}' is not valid JSON: {e}") from e


def _load_dataset(cfg: dict) -> Dataset:
    data = cfg.get("data", {})
    kind = data.get("kind")
    if kind == "ett":
        return load_ett_csv(data["path"])
    if kind == "synth":
        return synth_regime_data(
            n_seq=int(data.get("n_seq", 100)),
            T=int(data.get("seq_len", 96)),
            seed=int(data.get("seed", 0)),
            train_frac=float(data.get("train_frac", 0.85)),
        )
    if kind == "synth_csv":
        return load_synth_csv(data["path"])
    raise LatentMcError(f"config data.kind must be 'ett', 'synth', or 'synth_csv', got {kind!r}")


def _windows(cfg: dict, dataset: Dataset, split: str):
    w = cfg.get("window", {})
    return make_windows(dataset, int(w.get("length", 168)), int(w.get("stride", 24)), split=split)


def _model_config(cfg: dict, dataset: Dataset, kernel=None, seed=None) -> ModelConfig:
    fields = {f.name for f in dataclasses.fields(ModelConfig)}
    kwargs = {k: v for k, v in cfg.get("model", {}).items() if k in fields}
    kwargs["obs_dim"] = dataset.obs_dim
    kwargs["cmd_dim"] = dataset.cmd_dim
    if kernel is not None:
        kwargs["kernel_kind"] = kernel
    if seed is not None:
        kwargs["seed"] = seed
    return ModelConfig(**kwargs)


def _train_config(cfg: dict, section: str = "train", seed=None) -> TrainConfig:
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    kwargs = {k: v for k, v in cfg.get(section, {}).items() if k in fields}
    if seed is not None:
        kwargs["seed"] = seed
    return TrainConfig(**kwargs)


def _load_any_checkpoint(path: str):
    """Returns (model_or_params, kind, meta)."""
    meta, arrays = load_container(path)
    kind = meta.get("kind")
    if kind == "hmm":
        return HmmParams.from_arrays(arrays), kind, meta
    model, _, _, meta = checkpoint_load(path)
    return model, kind, meta


# -- subcommand handlers -------------------------------------------------------


def _cmd_synth(args) -> int:
    cfg = _load_config(args.config) if args.config else {"data": {"kind": "synth"}}
    data = dict(cfg.get("data", {"kind": "synth"}))
    if args.seed is not None:
        data["seed"] = args.seed
    dataset = synth_regime_data(
        n_seq=int(data.get("n_seq", 100)),
        T=int(data.get("seq_len", 96)),
        seed=int(data.get("seed", 0)),
        train_frac=float(data.get("train_frac", 0.85)),
    )
    save_synth_csv(dataset, args.out)
    print(f"wrote {dataset.obs.shape[0]} rows to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(cfg)
    windows = _windows(cfg, dataset, "train")
    mc = _model_config(cfg, dataset, kernel=args.kernel, seed=args.seed)
    tc = _train_config(cfg, seed=args.seed)
    model = GenerativeModel(mc)
    _, log = train(model, (windows.x, windows.u), tc, checkpoint_path=args.out)
    if args.log:
        write_train_log(log, args.log)
    print(f"trained {tc.epochs} epochs; checkpoint at {args.out}")
    return 0


def _cmd_vqvae_train(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(cfg)
    windows = _windows(cfg, dataset, "train")
    mc = _model_config(cfg, dataset, kernel=args.kernel, seed=args.seed)
    tc1 = _train_config(cfg, section="vqvae_stage1" if "vqvae_stage1" in cfg else "train", seed=args.seed)
    tc2 = _train_config(cfg, section="vqvae_stage2" if "vqvae_stage2" in cfg else "train", seed=args.seed)
    model = GenerativeModel(mc)
    log = vqvae_stage1_train(model, (windows.x, windows.u), tc1)
    vqvae_stage2_train(model, (windows.x, windows.u), tc2, log=log)
    checkpoint_save(model, None, tc1.epochs + tc2.epochs, args.out, kind="vqvae")
    if args.log:
        write_train_log(log, args.log)
    print(f"two-stage training complete; checkpoint at {args.out}")
    return 0


def _cmd_hmm_fit(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(cfg)
    windows = _windows(cfg, dataset, "train")
    hc = cfg.get("hmm", {})
    K = int(cfg.get("model", {}).get("K", 8))
    params, ll = hmm_em_fit(
        windows.x, K=K, iters=int(hc.get("iters", 50)),
        seed=args.seed if args.seed is not None else int(hc.get("seed", 0)),
    )
    meta = {"format": 1, "kind": "hmm", "K": K, "obs_dim": dataset.obs_dim,
            "final_loglik": ll[-1]}
    save_container(args.out, meta, params.to_arrays())
    print(f"EM finished after {len(ll)} iterations, log-likelihood {ll[-1]:.3f}; checkpoint at {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(cfg)
    windows = _windows(cfg, dataset, "val")
    model, kind, _ = _load_any_checkpoint(args.checkpoint)
    ec = cfg.get("eval", {})
    n = args.n if args.n is not None else int(ec.get("n", 100))
    seed = args.seed if args.seed is not None else int(ec.get("seed", 0))
    denorm = dataset.denormalize_obs if args.raw_units else None
    report = evaluate(model, windows, N=n, seed=seed, model_kind=kind, denormalize=denorm)
    text = report_to_json(report)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    print(
        f"{kind}: RMSE {report.rmse_mean:.4f} +- {report.rmse_var:.4f}, "
        f"MAE {report.mae_mean:.4f} +- {report.mae_var:.4f}, "
        f"{report.seconds_per_window * 1e3:.1f} ms/window",
        file=sys.stderr,
    )
    return 0


def _pick_window(cfg, dataset, index):
    windows = _windows(cfg, dataset, "val")
    if not 0 <= index < len(windows):
        raise LatentMcError(f"window index {index} out of range (0..{len(windows) - 1})")
    return windows.x[index], windows.u[index]


def _cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(cfg)
    x, u = _pick_window(cfg, dataset, args.window_index)
    model, kind, _ = _load_any_checkpoint(args.checkpoint)
    rng = make_rng(args.seed if args.seed is not None else 0)
    from .evaluate import sample_trajectories

    preds = sample_trajectories(model, u, args.n, rng, emit_noise=args.emit_noise)
    if args.raw_units:
        preds = dataset.denormalize_obs(preds)
        x = dataset.denormalize_obs(x)
    mean = preds.mean(axis=0)
    lo = np.quantile(preds, 0.025, axis=0)
    hi = np.quantile(preds, 0.975, axis=0)
    with open(args.out, "w") as f:
        cols = ["t"] + [f"{s}{j}" for j in range(mean.shape[1]) for s in ("mean", "q025", "q975")] + [
            f"obs{j}" for j in range(mean.shape[1])
        ]
        f.write(",".join(cols) + "\n")
        for t in range(mean.shape[0]):
            row = [str(t)]
            for j in range(mean.shape[1]):
                row += [repr(float(mean[t, j])), repr(float(lo[t, j])), repr(float(hi[t, j]))]
            row += [repr(float(x[t, j])) for j in range(mean.shape[1])]
            f.write(",".join(row) + "\n")
    print(f"wrote {mean.shape[0]} rows to {args.out}")
    return 0


def _cmd_usage(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(cfg)
    _, u = _pick_window(cfg, dataset, args.window_index)
    model, kind, _ = _load_any_checkpoint(args.checkpoint)
    if not isinstance(model, GenerativeModel):
        raise LatentMcError("codebook usage requires a joint or VQ-VAE checkpoint")
    rng = make_rng(args.seed if args.seed is not None else 0)
    most, counts = codebook_usage(model, u, args.n, rng)
    with open(args.out, "w") as f:
        f.write("most_selected: " + " ".join(str(int(i)) for i in most) + "\n")
        f.write(f"counts: {counts.shape[0]} x {counts.shape[1]}\n")
        for k in range(counts.shape[0]):
            f.write(" ".join(str(int(c)) for c in counts[k]) + "\n")
    print(f"wrote usage matrix to {args.out}")
    return 0


# -- parser ---------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latentmc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="JSON config path")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", required=True, help="output path")

    sp = sub.add_parser("synth", help="generate a synthetic regime dataset CSV")
    common(sp, config_required=False)
    sp.set_defaults(fn=_cmd_synth)

    sp = sub.add_parser("train", help="train the joint model")
    common(sp)
    sp.add_argument("--kernel", choices=["rnn", "gru", "cnn"], default=None)
    sp.add_argument("--log", default=None, help="write per-epoch training log (ndjson)")
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("vqvae-train", help="two-stage VQ-VAE baseline training")
    common(sp)
    sp.add_argument("--kernel", choices=["rnn", "gru", "cnn"], default=None)
    sp.add_argument("--log", default=None)
    sp.set_defaults(fn=_cmd_vqvae_train)

    sp = sub.add_parser("hmm-fit", help="fit the HMM baseline by EM")
    common(sp)
    sp.set_defaults(fn=_cmd_hmm_fit)

    sp = sub.add_parser("evaluate", help="RMSE/MAE of a checkpoint on the validation split")
    sp.add_argument("--config", required=True)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--raw-units", action="store_true")
    sp.set_defaults(fn=_cmd_evaluate)

    sp = sub.add_parser("sample", help="sampled-trajectory confidence bands for one window")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--window-index", type=int, default=0)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--emit-noise", action="store_true")
    sp.add_argument("--raw-units", action="store_true")
    sp.set_defaults(fn=_cmd_sample)

    sp = sub.add_parser("usage", help="codebook usage counts for one window")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--window-index", type=int, default=0)
    sp.add_argument("--n", type=int, default=100)
    sp.set_defaults(fn=_cmd_usage)
    return p


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except LatentMcError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"file error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())
