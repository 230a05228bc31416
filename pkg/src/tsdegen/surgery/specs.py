"""Intervention descriptors consumed by the model's forward pass."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ContractError

ATTENTION_KINDS = ("raw", "zero", "eye", "mean", "fixed_trainable")
PERTURB_TARGETS = ("attention", "ffn")


@dataclass(frozen=True)
class AttentionMode:
    kind: str = "raw"

    def __post_init__(self):
        if self.kind not in ATTENTION_KINDS:
            raise ContractError(f"unknown attention mode {self.kind!r}; expected one of {ATTENTION_KINDS}")

    @property
    def uses_qk(self) -> bool:
        return self.kind == "raw"

    @property
    def row_stochastic(self) -> bool:
        return self.kind != "zero"


@dataclass(frozen=True)
class PerturbSpec:
    """Attenuation ``alpha`` toward the uniform/mean and relative noise scale ``eta``."""

    target: str = "attention"
    alpha: float = 0.0
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.target not in PERTURB_TARGETS:
            raise ContractError(f"perturbation target must be one of {PERTURB_TARGETS}, got {self.target!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.eta < 0.0:
            raise ContractError(f"eta must be >= 0, got {self.eta}")


@dataclass(frozen=True)
class SmoothingSpec:
    block_ids: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "block_ids", tuple(sorted(set(int(b) for b in self.block_ids))))
