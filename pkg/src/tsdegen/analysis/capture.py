"""Attention captured over a split, with the patch-to-time mapping needed to interpret it."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import container
from ..dataset.windows import Split
from ..errors import ContractError
from ..model.patching import patch_time_spans

KIND = "capture"
ROW_SUM_TOL = 1e-8


@dataclass
class AttentionCapture:
    """Attention of every captured sample.

    ``attention`` is (N, blocks, heads, T, T). ``spans`` holds the [start, stop)
    input-step range of each token relative to the window start, and ``starts``
    the absolute series index of each sample's window.
    """

    attention: np.ndarray
    spans: np.ndarray
    starts: np.ndarray
    channels: np.ndarray
    lookback: int

    def __post_init__(self):
        self.attention = np.asarray(self.attention, dtype=np.float64)
        self.spans = np.asarray(self.spans, dtype=np.int64).reshape(-1, 2)
        self.starts = np.asarray(self.starts, dtype=np.int64)
        self.channels = np.asarray(self.channels, dtype=np.int64)
        if self.attention.ndim != 5 or self.attention.shape[-1] != self.attention.shape[-2]:
            raise ContractError(f"capture must be (N, blocks, heads, T, T), got {self.attention.shape}")
        if self.spans.shape[0] != self.attention.shape[-1]:
            raise ContractError(f"{self.spans.shape[0]} token spans for {self.attention.shape[-1]} tokens")
        if self.starts.shape[0] != self.attention.shape[0] or self.channels.shape[0] != self.attention.shape[0]:
            raise ContractError("starts and channels need one entry per captured sample")

    def __len__(self) -> int:
        return self.attention.shape[0]

    @property
    def tokens(self) -> int:
        return self.attention.shape[-1]

    def head_mean(self) -> np.ndarray:
        """(N, blocks, T, T) attention pooled by arithmetic mean over heads."""
        return self.attention.mean(axis=2)

    def is_row_stochastic(self, tol: float = ROW_SUM_TOL) -> bool:
        return bool(np.all(np.abs(self.attention.sum(axis=-1) - 1.0) <= tol))

    def save(self, path: str | Path) -> None:
        meta = {"lookback": int(self.lookback), "shape": list(self.attention.shape)}
        arrays = {"attention": self.attention, "spans": self.spans.astype(np.float64),
                  "starts": self.starts.astype(np.float64), "channels": self.channels.astype(np.float64)}
        container.write(path, KIND, meta, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "AttentionCapture":
        meta, arrays = container.read(path, KIND)
        return cls(arrays["attention"], arrays["spans"].astype(np.int64), arrays["starts"].astype(np.int64),
                   arrays["channels"].astype(np.int64), int(meta["lookback"]))


def capture_attention(model, split: Split, max_samples: int | None = None, batch_size: int = 128) -> AttentionCapture:
    """Run ``model`` over the first ``max_samples`` windows of ``split`` and keep every attention map.

    Only patch-token models have a time mapping; channel-token captures are rejected.
    """
    cfg = model.config
    if cfg.architecture != "patch_token":
        raise ContractError("attention capture with a time mapping needs a patch-token model")
    n = len(split) if max_samples is None else min(max_samples, len(split))
    if n == 0:
        raise ContractError("cannot capture attention on an empty split")
    chunks = []
    for lo in range(0, n, batch_size):
        _, caps = model.forward(split.inputs[lo:min(n, lo + batch_size)], capture=True)
        # per block (B, C, heads, T, T) -> (B, C, blocks, heads, T, T)
        chunks.append(np.stack(caps, axis=2))
    att = np.concatenate(chunks, axis=0)
    B, C = att.shape[:2]
    att = att.reshape(B * C, *att.shape[2:])
    starts = np.repeat(split.starts[:n], C)
    channels = np.tile(np.arange(C), n)
    return AttentionCapture(att, np.array(patch_time_spans(cfg.patch_spec)), starts, channels, cfg.lookback)
