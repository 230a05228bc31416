"""Sliding-window supervised samples with chronological train/val/test splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError

SPLITS = ("train", "val", "test")
STD_FLOOR = 1e-5


@dataclass
class Split:
    """Materialized windows of one split.

    ``inputs`` is (N, L, C) and ``targets`` (N, H, C), both on the model's
    scale (normalized when ``mean``/``std`` are set). ``starts`` holds the
    absolute index of each window's first input step.
    """

    inputs: np.ndarray
    targets: np.ndarray
    starts: np.ndarray
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def normalized(self) -> bool:
        return self.mean is not None

    def denormalize(self, values: np.ndarray, idx=slice(None)) -> np.ndarray:
        """Map model-scale values of samples ``idx`` (shape (n, *, C)) back to the raw scale."""
        if self.mean is None:
            return values
        return values * self.std[idx] + self.mean[idx]

    def raw_inputs(self, idx=slice(None)) -> np.ndarray:
        return self.denormalize(self.inputs[idx], idx)

    def raw_targets(self, idx=slice(None)) -> np.ndarray:
        return self.denormalize(self.targets[idx], idx)


@dataclass
class WindowedDataset:
    lookback: int
    horizon: int
    channels: int
    splits: dict[str, Split] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Split:
        return self.splits[name]

    def sizes(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.splits.items()}

    @classmethod
    def from_arrays(cls, **splits: tuple[np.ndarray, np.ndarray]) -> "WindowedDataset":
        """Wrap pre-built (inputs, targets) arrays; missing splits are left out."""
        out = None
        built = {}
        for name, (x, y) in splits.items():
            x = np.asarray(x, dtype=np.float64)
            y = np.asarray(y, dtype=np.float64)
            if x.ndim == 2:
                x, y = x[..., None], y[..., None]
            built[name] = Split(x, y, np.arange(x.shape[0]))
            out = (x.shape[1], y.shape[1], x.shape[2])
        if out is None:
            raise ContractError("from_arrays needs at least one split")
        return cls(out[0], out[1], out[2], built)


def count_windows(length: int, lookback: int, horizon: int) -> int:
    return max(0, length - lookback - horizon + 1)


def split_window_starts(n_windows: int, horizon: int,
                        fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)) -> dict[str, np.ndarray]:
    """Chronologically partition window indices and purge target overlap at split borders.

    Windows are first cut into contiguous blocks by ``fractions``; each later
    block then drops leading windows whose targets would overlap those of the
    preceding non-empty block (``horizon - 1`` windows).
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ContractError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    b1 = int(np.floor(n_windows * fractions[0]))
    b2 = int(np.floor(n_windows * (fractions[0] + fractions[1])))
    blocks = {"train": (0, b1), "val": (b1, b2), "test": (b2, n_windows)}
    out = {}
    last_end = None
    for name in SPLITS:
        lo, hi = blocks[name]
        if last_end is not None:
            lo = max(lo, last_end + horizon)
        lo = min(lo, hi)
        out[name] = np.arange(lo, hi, dtype=np.int64)
        if hi > lo:
            last_end = hi - 1
    return out


def make_windows(series: np.ndarray, lookback: int = 336, horizon: int = 96,
                 split: tuple[float, float, float] = (0.7, 0.1, 0.2),
                 normalize: bool = False) -> WindowedDataset:
    """Stride-1 windows over a (T,) or (T, C) series."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    if series.ndim != 2:
        raise ContractError(f"series must be 1-D or 2-D, got shape {series.shape}")
    n = count_windows(series.shape[0], lookback, horizon)
    if lookback < 1 or horizon < 1 or n < 1:
        raise ContractError(
            f"series of length {series.shape[0]} too short for lookback {lookback} + horizon {horizon}")
    starts = split_window_starts(n, horizon, split)
    span = lookback + horizon
    view = np.lib.stride_tricks.sliding_window_view(series, span, axis=0)  # (n, C, span)
    ds = WindowedDataset(lookback, horizon, series.shape[1])
    for name, idx in starts.items():
        win = np.ascontiguousarray(view[idx].transpose(0, 2, 1))  # (N, span, C)
        x, y = win[:, :lookback], win[:, lookback:]
        if normalize and len(idx):
            mean = x.mean(axis=1, keepdims=True)
            std = np.maximum(x.std(axis=1, keepdims=True), STD_FLOOR)
            ds.splits[name] = Split((x - mean) / std, (y - mean) / std, idx, mean, std)
        else:
            ds.splits[name] = Split(x.copy(), y.copy(), idx)
    return ds
