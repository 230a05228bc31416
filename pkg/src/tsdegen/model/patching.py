from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class PatchSpec:
    patch_length: int
    stride: int
    lookback: int
    padding: bool = False

    def __post_init__(self):
        if self.patch_length < 1 or self.stride < 1:
            raise ContractError("patch length and stride must be >= 1")
        if self.patch_length > self.lookback:
            raise ContractError(f"patch length {self.patch_length} exceeds lookback {self.lookback}")

    @property
    def padded_length(self) -> int:
        """Input length after right-padding (replicating the last value) to cover the remainder."""
        rem = (self.lookback - self.patch_length) % self.stride
        if not self.padding or rem == 0:
            return self.lookback
        return self.lookback + self.stride - rem

    @property
    def tokens(self) -> int:
        return (self.padded_length - self.patch_length) // self.stride + 1


def count_tokens(spec: PatchSpec) -> int:
    return spec.tokens


def patchify(x: np.ndarray, spec: PatchSpec) -> np.ndarray:
    """Cut the time axis of ``x`` (..., L) into tokens (..., T, P).

    Token t covers ``x[t*S : t*S + P]``; steps past the last full token are
    dropped unless padding is enabled.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.lookback:
        raise ContractError(f"input length {x.shape[-1]} does not match lookback {spec.lookback}")
    extra = spec.padded_length - spec.lookback
    if extra:
        x = np.concatenate([x, np.repeat(x[..., -1:], extra, axis=-1)], axis=-1)
    starts = np.arange(spec.tokens) * spec.stride
    idx = starts[:, None] + np.arange(spec.patch_length)[None, :]
    return x[..., idx]


def patch_time_spans(spec: PatchSpec) -> list[tuple[int, int]]:
    """Half-open [start, stop) input-step range of every token, clipped to the real lookback."""
    out = []
    for t in range(spec.tokens):
        a = t * spec.stride
        out.append((a, min(a + spec.patch_length, spec.lookback)))
    return out
