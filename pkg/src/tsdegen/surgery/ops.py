"""Model-level interventions. Each returns a modified copy; the input model is never mutated."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..errors import ContractError, UnsupportedError
from .specs import AttentionMode, PerturbSpec, SmoothingSpec

if TYPE_CHECKING:
    from ..model.forecast import ForecastModel


def _as_mode(mode) -> AttentionMode:
    return mode if isinstance(mode, AttentionMode) else AttentionMode(mode)


def replace_attention(model: ForecastModel, mode, blocks=None, fixed_logits: np.ndarray | None = None) -> ForecastModel:
    """Substitute the attention matrix of ``blocks`` (default: all) with ``mode``.

    ``fixed_logits`` optionally seeds the (heads, T, T) table of a
    fixed_trainable mode; a mismatching T is a contract error.
    """
    mode = _as_mode(mode)
    out = model.copy()
    ids = range(len(out.blocks)) if blocks is None else blocks
    T = out.config.tokens
    for i in ids:
        attn = out.blocks[i].attn
        attn.set_mode(mode)
        if mode.kind == "fixed_trainable" and fixed_logits is not None:
            fixed_logits = np.asarray(fixed_logits, dtype=np.float64)
            if fixed_logits.shape[-2:] != (T, T):
                raise ContractError(f"fixed attention must be {T}x{T}, got {fixed_logits.shape[-2:]}")
            attn.fixed_logits.data = np.broadcast_to(fixed_logits, attn.fixed_logits.shape).copy()
    out._sync_config()
    return out


def perturb_model(model: ForecastModel, spec: PerturbSpec) -> ForecastModel:
    """Install ``spec`` on the attention or FFN of every block.

    Each block gets its own noise stream seeded from ``(spec.seed, block)`` and
    noise is redrawn on every forward pass.
    """
    out = model.copy()
    for i, block in enumerate(out.blocks):
        seeded = PerturbSpec(spec.target, spec.alpha, spec.eta,
                             int(np.random.SeedSequence([spec.seed, i]).generate_state(1)[0]))
        if spec.target == "attention":
            block.attn.set_perturbation(seeded)
        else:
            block.ffn.set_perturbation(seeded)
    return out


def perturb_ffn(model: ForecastModel, spec: PerturbSpec) -> ForecastModel:
    if spec.target != "ffn":
        spec = PerturbSpec("ffn", spec.alpha, spec.eta, spec.seed)
    return perturb_model(model, spec)


def perturb_attention_model(model: ForecastModel, spec: PerturbSpec) -> ForecastModel:
    if spec.target != "attention":
        spec = PerturbSpec("attention", spec.alpha, spec.eta, spec.seed)
    return perturb_model(model, spec)


def zero_positional_encoding(model: ForecastModel) -> ForecastModel:
    if model.config.architecture != "patch_token" or model.pos_enc is None:
        raise UnsupportedError("model has no positional encoding to zero")
    out = model.copy()
    out.pos_enc.data = np.zeros_like(out.pos_enc.data)
    return out


def smooth_blocks(model: ForecastModel, spec: SmoothingSpec | list | tuple) -> ForecastModel:
    """Evaluate the listed blocks with uniform (mean) attention."""
    if not isinstance(spec, SmoothingSpec):
        spec = SmoothingSpec(tuple(spec))
    n = len(model.blocks)
    bad = [b for b in spec.block_ids if not 0 <= b < n]
    if bad:
        raise ContractError(f"block ids {bad} out of range for a {n}-block model")
    if not spec.block_ids:
        return model.copy()
    return replace_attention(model, AttentionMode("mean"), blocks=spec.block_ids)
