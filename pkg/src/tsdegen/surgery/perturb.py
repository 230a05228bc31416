"""Noise-and-attenuation perturbations of attention logits and FFN activations."""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, softmax_rows
from ..autodiff.tensor import add, scale, tmean
from .specs import PerturbSpec


def row_noise(values: np.ndarray, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise whose variance per trailing row is ``eta * Var(row)``."""
    sigma = np.sqrt(eta * values.var(axis=-1, keepdims=True))
    return rng.standard_normal(values.shape) * sigma


def perturb_attention(logits, spec: PerturbSpec, rng: np.random.Generator) -> Tensor:
    """``(1 - alpha) * softmax(logits + noise) + alpha / T`` over each row of ``logits`` (..., T, T).

    Noise for row i is drawn i.i.d. with variance ``eta * Var(logits[i])``.
    Accepts a Tensor or an array; gradients flow through the softmax branch.
    """
    logits = logits if isinstance(logits, Tensor) else Tensor(logits)
    T = logits.shape[-1]
    noisy = add(logits, row_noise(logits.data, spec.eta, rng))
    attn = softmax_rows(noisy)
    return add(scale(attn, 1.0 - spec.alpha), spec.alpha / T)


def perturb_ffn_hidden(hidden: Tensor, spec: PerturbSpec, rng: np.random.Generator) -> Tensor:
    """Additive pre-activation noise with per-row variance ``eta * Var(row)``."""
    return add(hidden, row_noise(hidden.data, spec.eta, rng))


def smooth_ffn_output(out: Tensor, spec: PerturbSpec) -> Tensor:
    """Blend each row toward its own mean: ``(1 - alpha) * y + alpha * mean(y)``."""
    row_mean = tmean(out, axis=-1, keepdims=True)
    return add(scale(out, 1.0 - spec.alpha), scale(row_mean, spec.alpha))
