"""Dataset ingestion, synthetic regime-switching generation, splitting,
normalization, and windowing.

The ETT loader expects the ETTh1 CSV schema (hourly rows, OT as the
observation, the six load columns as commands); the first 12 months form the
training split and the next 4 months the validation split. Normalization
statistics come from the training split only.

The synthetic generator stands in for a proprietary building-management
dataset: smooth 2-d command signals drive a known 3-state Markov chain, and
observations are AR(1) noise around regime-dependent means. Ground truth
(labels and per-step transition matrices) is kept for oracle tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .distributions import make_rng
from .errors import ContractError, DimensionError

__all__ = [
    "Dataset",
    "WindowSet",
    "load_ett_csv",
    "synth_regime_data",
    "make_windows",
    "save_synth_csv",
    "load_synth_csv",
    "ETT_COLUMNS",
    "SYNTH_REGIME_MEANS",
    "SYNTH_AR_COEFF",
    "SYNTH_NOISE_STD",
]

ETT_COLUMNS = ["date", "HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"]

SYNTH_REGIME_MEANS = np.array([-2.0, 0.0, 2.0])
SYNTH_AR_COEFF = 0.7
SYNTH_NOISE_STD = 0.25
_SYNTH_STAY_LOGIT = 2.0
# destination-state drive: logit_k += w_k . u_t
_SYNTH_W = np.array([[2.5, 0.0], [0.0, 2.5], [-2.5, -2.5]])


@dataclass
class Dataset:
    obs: np.ndarray  # (n, d), raw units
    cmd: np.ndarray  # (n, q), raw units
    split: np.ndarray  # (n,) int8: 0 train, 1 validation, -1 unused
    segment: np.ndarray  # (n,) contiguous-block id; windows never cross blocks
    obs_names: list
    cmd_names: list
    obs_mean: np.ndarray = None
    obs_std: np.ndarray = None
    cmd_mean: np.ndarray = None
    cmd_std: np.ndarray = None
    timestamps: list | None = None
    ground_truth: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.obs_mean is None:
            train = self.split == 0
            if not np.any(train):
                raise ContractError("dataset has no training rows")
            self.obs_mean = self.obs[train].mean(axis=0)
            self.obs_std = self.obs[train].std(axis=0)
            self.cmd_mean = self.cmd[train].mean(axis=0)
            self.cmd_std = self.cmd[train].std(axis=0)
            if np.any(self.obs_std == 0) or np.any(self.cmd_std == 0):
                raise ContractError("a column is constant on the training split; cannot z-score")

    @property
    def obs_dim(self):
        return self.obs.shape[1]

    @property
    def cmd_dim(self):
        return self.cmd.shape[1]

    def normalized_obs(self) -> np.ndarray:
        return (self.obs - self.obs_mean) / self.obs_std

    def normalized_cmd(self) -> np.ndarray:
        return (self.cmd - self.cmd_mean) / self.cmd_std

    def denormalize_obs(self, x: np.ndarray) -> np.ndarray:
        return x * self.obs_std + self.obs_mean


@dataclass
class WindowSet:
    x: np.ndarray  # (W, T, d)
    u: np.ndarray  # (W, T, q)
    length: int
    stride: int

    def __len__(self):
        return self.x.shape[0]


def _add_months(ts: datetime, months: int) -> datetime:
    month = ts.month - 1 + months
    year = ts.year + month // 12
    month = month % 12 + 1
    # clamp the day for short months
    for day in (ts.day, 30, 29, 28):
        try:
            return ts.replace(year=year, month=month, day=day)
        except ValueError:
            continue
    raise AssertionError("unreachable")


def load_ett_csv(path: str, train_months: int = 12, val_months: int = 4) -> Dataset:
    """Parse an ETTh1-schema CSV: OT is the observation, the six load
    columns are commands. Malformed rows fail with their line number."""
    rows = []
    stamps = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ContractError(f"'{path}' is empty") from None
        if [h.strip() for h in header] != ETT_COLUMNS:
            raise ContractError(f"'{path}' header {header} does not match the ETT schema {ETT_COLUMNS}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(ETT_COLUMNS):
                raise ContractError(f"{path}:{lineno}: expected {len(ETT_COLUMNS)} fields, got {len(row)}")
            try:
                ts = datetime.fromisoformat(row[0].strip())
                vals = [float(v) for v in row[1:]]
            except ValueError as e:
                raise ContractError(f"{path}:{lineno}: malformed row ({e})") from None
            if any(v != v for v in vals):
                raise ContractError(f"{path}:{lineno}: missing value (NaN)")
            stamps.append(ts)
            rows.append(vals)
    if not rows:
        raise ContractError(f"'{path}' contains no data rows")
    for i in range(1, len(stamps)):
        if stamps[i] <= stamps[i - 1]:
            raise ContractError(f"{path}: non-monotonic timestamp at data row {i + 1}")

    arr = np.asarray(rows, dtype=np.float64)
    obs = arr[:, 6:7]  # OT
    cmd = arr[:, 0:6]
    train_end = _add_months(stamps[0], train_months)
    val_end = _add_months(stamps[0], train_months + val_months)
    split = np.full(len(stamps), -1, dtype=np.int8)
    for i, ts in enumerate(stamps):
        if ts < train_end:
            split[i] = 0
        elif ts < val_end:
            split[i] = 1
    return Dataset(
        obs=obs,
        cmd=cmd,
        split=split,
        segment=np.zeros(len(stamps), dtype=np.int64),
        obs_names=["OT"],
        cmd_names=ETT_COLUMNS[1:7],
        timestamps=stamps,
    )


def synth_regime_data(n_seq: int, T: int, seed: int, train_frac: float = 0.85) -> Dataset:
    """Command-driven 3-regime synthetic dataset; see module docstring."""
    if n_seq < 1 or T < 1:
        raise ContractError("n_seq and T must be at least 1")
    rng = make_rng(seed)
    n = n_seq * T
    K = 3
    cmd = np.empty((n, 2))
    obs = np.empty((n, 1))
    labels = np.empty(n, dtype=np.int64)
    trans_truth = np.zeros((n, K, K))  # row t: P(z_t | z_{t-1}, u_t); zero at segment starts
    segment = np.repeat(np.arange(n_seq), T)

    for s in range(n_seq):
        base = s * T
        t_ax = np.arange(T)
        period = rng.uniform(20.0, 60.0, size=2)
        phase = rng.uniform(0.0, 2 * np.pi, size=2)
        rough = rng.standard_normal((T, 2))
        smooth = np.empty_like(rough)
        smooth[0] = rough[0]
        for t in range(1, T):
            smooth[t] = 0.9 * smooth[t - 1] + 0.1 * rough[t]
        u = np.stack(
            [np.sin(2 * np.pi * t_ax / period[j] + phase[j]) + 0.5 * smooth[:, j] for j in range(2)],
            axis=1,
        )
        cmd[base : base + T] = u

        drive = u @ _SYNTH_W.T  # (T, K)
        z = np.empty(T, dtype=np.int64)
        p0 = np.exp(drive[0] - drive[0].max())
        p0 /= p0.sum()
        z[0] = rng.choice(K, p=p0)
        for t in range(1, T):
            logits = drive[t].copy()
            logits[z[t - 1]] += _SYNTH_STAY_LOGIT
            p = np.exp(logits - logits.max())
            p /= p.sum()
            z[t] = rng.choice(K, p=p)
            full = drive[t][None, :] + _SYNTH_STAY_LOGIT * np.eye(K)
            full = np.exp(full - full.max(axis=1, keepdims=True))
            trans_truth[base + t] = full / full.sum(axis=1, keepdims=True)
        labels[base : base + T] = z

        v = np.empty(T)
        v[0] = SYNTH_NOISE_STD * rng.standard_normal()
        eps = rng.standard_normal(T)
        for t in range(1, T):
            v[t] = SYNTH_AR_COEFF * v[t - 1] + SYNTH_NOISE_STD * eps[t]
        obs[base : base + T, 0] = SYNTH_REGIME_MEANS[z] + v

    n_train = max(1, int(round(train_frac * n_seq)))
    if n_train >= n_seq and n_seq > 1:
        n_train = n_seq - 1
    split = np.where(segment < n_train, 0, 1).astype(np.int8)
    return Dataset(
        obs=obs,
        cmd=cmd,
        split=split,
        segment=segment,
        obs_names=["x0"],
        cmd_names=["u0", "u1"],
        ground_truth={
            "labels": labels,
            "transition_truth": trans_truth,
            "regime_means": SYNTH_REGIME_MEANS.copy(),
            "ar_coeff": SYNTH_AR_COEFF,
            "noise_std": SYNTH_NOISE_STD,
        },
    )


def make_windows(dataset: Dataset, T: int, stride: int, split: str = "train",
                 normalized: bool = True) -> WindowSet:
    """Sliding windows fully inside one split, never crossing segments."""
    if T < 1 or stride < 1:
        raise ContractError("window length and stride must be at least 1")
    code = {"train": 0, "val": 1, "validation": 1}.get(split)
    if code is None:
        raise ContractError(f"unknown split '{split}'")
    obs = dataset.normalized_obs() if normalized else dataset.obs
    cmd = dataset.normalized_cmd() if normalized else dataset.cmd
    ok = dataset.split == code

    xs, us = [], []
    n = len(ok)
    i = 0
    while i < n:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j < n and ok[j] and dataset.segment[j] == dataset.segment[i]:
            j += 1
        for lo in range(i, j - T + 1, stride):
            xs.append(obs[lo : lo + T])
            us.append(cmd[lo : lo + T])
        i = j
    if not xs:
        raise ContractError(f"window length {T} does not fit inside any '{split}' block")
    return WindowSet(x=np.stack(xs), u=np.stack(us), length=T, stride=stride)


def save_synth_csv(dataset: Dataset, path: str) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seq", "t", "u0", "u1", "x0", "regime", "split"])
        labels = dataset.ground_truth.get("labels")
        t_in_seq = 0
        prev_seg = None
        for i in range(dataset.obs.shape[0]):
            seg = int(dataset.segment[i])
            t_in_seq = 0 if seg != prev_seg else t_in_seq + 1
            prev_seg = seg
            w.writerow(
                [
                    seg,
                    t_in_seq,
                    repr(float(dataset.cmd[i, 0])),
                    repr(float(dataset.cmd[i, 1])),
                    repr(float(dataset.obs[i, 0])),
                    int(labels[i]) if labels is not None else "",
                    int(dataset.split[i]),
                ]
            )


def load_synth_csv(path: str) -> Dataset:
    segs, cmds, obs, labels, splits = [], [], [], [], []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or header[:5] != ["seq", "t", "u0", "u1", "x0"]:
            raise ContractError(f"'{path}' is not a synthetic dataset CSV")
        for lineno, row in enumerate(reader, start=2):
            try:
                segs.append(int(row[0]))
                cmds.append([float(row[2]), float(row[3])])
                obs.append([float(row[4])])
                labels.append(int(row[5]) if row[5] != "" else -1)
                splits.append(int(row[6]))
            except (ValueError, IndexError) as e:
                raise ContractError(f"{path}:{lineno}: malformed row ({e})") from None
    if not obs:
        raise ContractError(f"'{path}' contains no data rows")
    return Dataset(
        obs=np.asarray(obs),
        cmd=np.asarray(cmds),
        split=np.asarray(splits, dtype=np.int8),
        segment=np.asarray(segs, dtype=np.int64),
        obs_names=["x0"],
        cmd_names=["u0", "u1"],
        ground_truth={"labels": np.asarray(labels, dtype=np.int64)},
    )
