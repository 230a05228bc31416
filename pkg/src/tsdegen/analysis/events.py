"""How much attention lands on patches that overlap toy events."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset.toy import LabeledSeries
from ..errors import ContractError
from .capture import ROW_SUM_TOL, AttentionCapture

BOOTSTRAP_RESAMPLES = 1000


def bootstrap_ci(values: np.ndarray, resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95,
                 seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ContractError("bootstrap needs at least one value")
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    for i in range(resamples):
        means[i] = values[rng.integers(0, values.size, values.size)].mean()
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def event_patch_mask(capture: AttentionCapture, labels: LabeledSeries) -> np.ndarray:
    """(N, T) flags: token span intersects any event span in that sample's window."""
    if labels is None or labels.event_start_indices is None:
        raise ContractError("event attention needs event labels")
    ev = np.asarray(labels.event_start_indices, dtype=np.int64)
    span = int(labels.event_span)
    a = capture.starts[:, None] + capture.spans[None, :, 0]   # (N, T) absolute token starts
    b = capture.starts[:, None] + capture.spans[None, :, 1]
    if len(ev) == 0:
        return np.zeros(a.shape, dtype=bool)
    # the last event starting before the token ends is the only one that can overlap it
    k = np.searchsorted(ev, b, side="left") - 1
    valid = k >= 0
    return valid & (ev[np.maximum(k, 0)] + span > a)


def most_recent_event_patch(capture: AttentionCapture, labels: LabeledSeries) -> np.ndarray:
    """Per sample, the latest token overlapping an event that lies fully inside the lookback; -1 if none."""
    ev = np.asarray(labels.event_start_indices, dtype=np.int64)
    span = int(labels.event_span)
    out = np.full(len(capture), -1, dtype=np.int64)
    for n, s0 in enumerate(capture.starts):
        inside = ev[(ev >= s0) & (ev + span <= s0 + capture.lookback)]
        if inside.size == 0:
            continue
        e = int(inside[-1]) - s0
        hits = np.flatnonzero((capture.spans[:, 0] < e + span) & (capture.spans[:, 1] > e))
        out[n] = int(hits[-1])
    return out


@dataclass
class EventAttentionStats:
    """Attention mass on event patches per (sample, block, head, query).

    ``event_mass + non_event_mass == 1`` for every query row.
    """

    event_mass: np.ndarray           # (N, blocks, heads, T)
    event_fraction: np.ndarray       # (N,) share of tokens that are event patches
    recent_mass: np.ndarray          # (N, blocks) head-mean mass from the last query on the most recent event patch
    resamples: int = BOOTSTRAP_RESAMPLES

    @property
    def non_event_mass(self) -> np.ndarray:
        return 1.0 - self.event_mass

    def by_block_head(self) -> np.ndarray:
        return self.event_mass.mean(axis=(0, 3))

    def by_query(self) -> np.ndarray:
        """(blocks, T) head-pooled mass per query token."""
        return self.event_mass.mean(axis=(0, 2))

    def per_sample(self) -> np.ndarray:
        """Head-, block- and query-pooled mass of each sample."""
        return self.event_mass.mean(axis=(1, 2, 3))

    def pooled(self) -> float:
        return float(self.per_sample().mean())

    def pooled_ci(self, seed: int = 0) -> tuple[float, float]:
        return bootstrap_ci(self.per_sample(), self.resamples, seed=seed)

    def block_ci(self, seed: int = 0) -> list[tuple[float, float]]:
        per = self.event_mass.mean(axis=(2, 3))
        return [bootstrap_ci(per[:, b], self.resamples, seed=seed) for b in range(per.shape[1])]

    def recent(self) -> float:
        valid = self.recent_mass[~np.isnan(self.recent_mass[:, 0])]
        return float(valid.mean()) if valid.size else float("nan")

    def summary(self, seed: int = 0) -> dict:
        lo, hi = self.pooled_ci(seed)
        return {
            "pooled_event_mass": self.pooled(),
            "pooled_ci": [lo, hi],
            "uniform_baseline": float(self.event_fraction.mean()),
            "most_recent_event_patch_mass": self.recent(),
            "block_event_mass": [float(v) for v in self.event_mass.mean(axis=(0, 2, 3))],
            "block_ci": [list(c) for c in self.block_ci(seed)],
            "block_head_event_mass": self.by_block_head().tolist(),
            "samples": int(self.event_mass.shape[0]),
        }


def event_attention_mass(capture: AttentionCapture, labels: LabeledSeries,
                         resamples: int = BOOTSTRAP_RESAMPLES) -> EventAttentionStats:
    if labels is None:
        raise ContractError("event attention needs event labels")
    if not capture.is_row_stochastic(ROW_SUM_TOL):
        raise ContractError("captured attention rows do not sum to 1 (zero-mode attention has no mass to split)")
    mask = event_patch_mask(capture, labels).astype(np.float64)       # (N, T)
    mass = np.einsum("nbhqk,nk->nbhq", capture.attention, mask)
    recent_idx = most_recent_event_patch(capture, labels)
    pooled = capture.head_mean()[:, :, -1, :]                          # (N, blocks, T) last query
    recent = np.full(pooled.shape[:2], np.nan)
    ok = recent_idx >= 0
    recent[ok] = pooled[ok, :, recent_idx[ok]]
    return EventAttentionStats(mass, mask.mean(axis=1), recent, resamples)
