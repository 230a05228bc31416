"""Parameterized building blocks of the forecasters."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ..autodiff import Tensor, gelu, layer_norm, linear, relu, softmax_rows
from ..autodiff.tensor import add, concat, matmul, reshape, scale, swapaxes, take, transpose
from ..errors import ContractError, ShapeError
from ..surgery.perturb import perturb_attention, perturb_ffn_hidden, smooth_ffn_output
from ..surgery.specs import AttentionMode, PerturbSpec

ACTIVATIONS = {"gelu": gelu, "relu": relu}
EMBEDDING_KINDS = ("linear", "conv", "mlp", "residual")


def activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ContractError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


class Module:
    """Anything owning named parameters, possibly through child modules."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(val, Tensor):
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, list) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    yield from m.named_parameters(f"{prefix}{key}.{i}.")

    def set_trainable(self, flag: bool) -> None:
        for _, p in self.named_parameters():
            p.requires_grad = flag


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        bound = 1.0 / math.sqrt(d_in)
        self.weight = Tensor(rng.uniform(-bound, bound, (d_in, d_out)), requires_grad=True)
        self.bias = Tensor(rng.uniform(-bound, bound, d_out), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = Tensor(np.ones(d), requires_grad=True)
        self.bias = Tensor(np.zeros(d), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


class Embedding(Module):
    """Maps token vectors of width ``d_in`` to the model width.

    ``conv`` convolves along the token axis (kernel 3, circular padding), the
    token-embedding convolution used by Autoformer-family models.
    """

    def __init__(self, kind: str, d_in: int, d_model: int, rng: np.random.Generator, act: str = "gelu"):
        if kind not in EMBEDDING_KINDS:
            raise ContractError(f"unknown embedding kind {kind!r}; expected one of {EMBEDDING_KINDS}")
        self._kind = kind
        self._d_in = d_in
        self._act = activation(act)
        if kind == "linear":
            self.proj = Linear(d_in, d_model, rng)
        elif kind == "conv":
            self.proj = Linear(3 * d_in, d_model, rng)
        else:
            self.fc1 = Linear(d_in, d_model, rng)
            self.fc2 = Linear(d_model, d_model, rng)
            if kind == "residual":
                self.skip = Linear(d_in, d_model, rng)

    @property
    def kind(self) -> str:
        return self._kind

    def __call__(self, tokens: Tensor) -> Tensor:
        if tokens.shape[-1] != self._d_in:
            raise ShapeError(f"embedding expects token width {self._d_in}, got {tokens.shape[-1]}")
        if self._kind == "linear":
            return self.proj(tokens)
        if self._kind == "conv":
            T = tokens.shape[-2]
            t = np.arange(T)
            stacked = concat([take(tokens, (t - 1) % T, -2), tokens, take(tokens, (t + 1) % T, -2)], axis=-1)
            return self.proj(stacked)
        out = self.fc2(self._act(self.fc1(tokens)))
        if self._kind == "residual":
            out = add(out, self.skip(tokens))
        return out


class MultiHeadAttention(Module):
    def __init__(self, d_model: int, heads: int, tokens: int, rng: np.random.Generator,
                 mode: AttentionMode = AttentionMode()):
        if d_model % heads:
            raise ContractError(f"model width {d_model} is not divisible by {heads} heads")
        self._heads = heads
        self._d_k = d_model // heads
        self._tokens = tokens
        self.q = Linear(d_model, d_model, rng)
        self.k = Linear(d_model, d_model, rng)
        self.v = Linear(d_model, d_model, rng)
        self.o = Linear(d_model, d_model, rng)
        self.mode = AttentionMode()
        self.set_mode(mode)
        self.perturb: PerturbSpec | None = None
        self._rng: np.random.Generator | None = None
        self.last_attention: np.ndarray | None = None

    def named_parameters(self, prefix: str = ""):
        for name in ("q", "k", "v", "o"):
            mod = getattr(self, name)
            if mod is not None:
                yield from mod.named_parameters(f"{prefix}{name}.")
        if self.fixed_logits is not None:
            yield prefix + "fixed_logits", self.fixed_logits

    def set_mode(self, mode: AttentionMode, rng: np.random.Generator | None = None) -> None:
        """Switch attention kind; zero drops Q/K, fixed_trainable owns a (heads, T, T) logit table."""
        if mode.kind == "zero":
            self.q = self.k = None
        elif self.q is None:
            rng = rng or np.random.default_rng(0)
            d = self._heads * self._d_k
            self.q = Linear(d, d, rng)
            self.k = Linear(d, d, rng)
        if mode.kind == "fixed_trainable":
            if getattr(self, "fixed_logits", None) is None:
                self.fixed_logits = Tensor(np.zeros((self._heads, self._tokens, self._tokens)), requires_grad=True)
        else:
            self.fixed_logits = None
        self.mode = mode

    def set_perturbation(self, spec: PerturbSpec | None) -> None:
        if spec is not None and self.mode.kind not in ("raw", "fixed_trainable"):
            raise ContractError(f"attention perturbation needs logits; mode {self.mode.kind!r} has none")
        self.perturb = spec
        self._rng = None if spec is None else np.random.default_rng(spec.seed)

    def active_parameter_names(self) -> set[str]:
        kind = self.mode.kind
        if kind == "raw":
            return {"q.weight", "q.bias", "k.weight", "k.bias", "v.weight", "v.bias", "o.weight", "o.bias"}
        if kind == "zero":
            return {"o.bias"}
        names = {"v.weight", "v.bias", "o.weight", "o.bias"}
        if kind == "fixed_trainable":
            names.add("fixed_logits")
        return names

    def _split_heads(self, x: Tensor) -> Tensor:
        N, T, _ = x.shape
        return transpose(reshape(x, (N, T, self._heads, self._d_k)), (0, 2, 1, 3))

    def __call__(self, x: Tensor, capture: bool = False) -> Tensor:
        N, T, d = x.shape
        kind = self.mode.kind
        if kind in ("fixed_trainable",) and T != self._tokens:
            raise ShapeError(f"fixed attention was built for {self._tokens} tokens, got {T}")
        if kind == "zero":
            if capture:
                self.last_attention = np.zeros((N, self._heads, T, T))
            return add(Tensor(np.zeros((N, T, d))), self.o.bias)

        v = self._split_heads(self.v(x))
        if kind == "raw":
            q = self._split_heads(self.q(x))
            k = self._split_heads(self.k(x))
            logits = scale(matmul(q, swapaxes(k, -1, -2)), 1.0 / math.sqrt(self._d_k))
            attn = self._normalize(logits)
            ctx = matmul(attn, v)
        elif kind == "eye":
            attn = None
            ctx = v
        elif kind == "mean":
            attn = Tensor(np.full((T, T), 1.0 / T))
            ctx = matmul(attn, v)
        else:
            attn = self._normalize(self.fixed_logits)
            ctx = matmul(attn, v)

        if capture:
            if attn is None:
                a = np.broadcast_to(np.eye(T), (N, self._heads, T, T))
            else:
                a = np.broadcast_to(attn.data, (N, self._heads, T, T))
            self.last_attention = np.array(a)
        merged = reshape(transpose(ctx, (0, 2, 1, 3)), (N, T, d))
        return self.o(merged)

    def _normalize(self, logits: Tensor) -> Tensor:
        if self.perturb is None:
            return softmax_rows(logits)
        return perturb_attention(logits, self.perturb, self._rng)


class FeedForward(Module):
    def __init__(self, d_model: int, ffn_dim: int, rng: np.random.Generator, act: str = "gelu"):
        self.fc1 = Linear(d_model, ffn_dim, rng)
        self.fc2 = Linear(ffn_dim, d_model, rng)
        self._act = activation(act)
        self.perturb: PerturbSpec | None = None
        self._rng: np.random.Generator | None = None

    def set_perturbation(self, spec: PerturbSpec | None) -> None:
        self.perturb = spec
        self._rng = None if spec is None else np.random.default_rng(spec.seed)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.fc1(x)
        if self.perturb is not None:
            h = perturb_ffn_hidden(h, self.perturb, self._rng)
        y = self.fc2(self._act(h))
        if self.perturb is not None:
            y = smooth_ffn_output(y, self.perturb)
        return y


class Block(Module):
    """Pre-norm encoder block: x + MHA(LN(x)), then + FFN(LN(.))."""

    def __init__(self, d_model: int, heads: int, ffn_dim: int, tokens: int, rng: np.random.Generator,
                 mode: AttentionMode = AttentionMode(), act: str = "gelu"):
        self.norm1 = LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads, tokens, rng, mode)
        self.norm2 = LayerNorm(d_model)
        self.ffn = FeedForward(d_model, ffn_dim, rng, act)

    def __call__(self, x: Tensor, capture: bool = False) -> Tensor:
        x = add(x, self.attn(self.norm1(x), capture=capture))
        return add(x, self.ffn(self.norm2(x)))
