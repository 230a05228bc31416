"""Central finite-difference oracle for checking backward passes."""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .tensor import Tensor

DEFAULT_STEP = 1e-5
# denominators below this are treated as this value so tiny gradients do not
# blow the relative error up with finite-difference rounding noise
REL_ERR_FLOOR = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_ERR_FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_grad(loss_fn: Callable[[], Tensor], tensor: Tensor, h: float = DEFAULT_STEP,
                 indices: Sequence[int] | None = None) -> np.ndarray:
    """Central differences of the scalar ``loss_fn()`` w.r.t. flat ``indices`` of ``tensor``."""
    flat = tensor.data.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(flat.size)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        fp = loss_fn().item()
        flat[i] = orig - h
        fm = loss_fn().item()
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return out.reshape(tensor.shape)


def check_gradients(loss_fn: Callable[[], Tensor], tensors: Mapping[str, Tensor],
                    h: float = DEFAULT_STEP, max_entries: int | None = None,
                    rng: np.random.Generator | None = None) -> dict[str, float]:
    """Max relative error between backward and finite differences per tensor.

    With ``max_entries`` set, a random subset of entries (drawn across all
    tensors, proportionally to their size) is checked instead of every entry.
    """
    for t in tensors.values():
        t.grad = None
    loss_fn().backward()
    analytic = {k: (t.grad if t.grad is not None else np.zeros(t.shape)).copy() for k, t in tensors.items()}

    chosen: dict[str, np.ndarray | None] = {k: None for k in tensors}
    if max_entries is not None:
        rng = rng or np.random.default_rng(0)
        names = list(tensors)
        sizes = np.array([tensors[k].size for k in names])
        total = int(sizes.sum())
        picks = rng.choice(total, size=min(max_entries, total), replace=False)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        for j, k in enumerate(names):
            sel = picks[(picks >= offsets[j]) & (picks < offsets[j + 1])] - offsets[j]
            chosen[k] = np.sort(sel)

    errors = {}
    for k, t in tensors.items():
        idx = chosen[k]
        if idx is not None and idx.size == 0:
            continue
        num = numeric_grad(loss_fn, t, h, None if idx is None else idx.tolist())
        a = analytic[k].reshape(-1)
        n = num.reshape(-1)
        if idx is not None:
            a, n = a[idx], n[idx]
        errors[k] = float(relative_error(a, n).max())
    return errors
