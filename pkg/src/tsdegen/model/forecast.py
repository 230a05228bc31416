"""Patch-token and channel-token forecasters."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from ..autodiff import Tensor
from ..autodiff.tensor import add, reshape, transpose
from ..errors import ContractError, NumericError, UnsupportedError
from ..surgery.specs import AttentionMode
from .layers import Block, Embedding, Linear, Module, activation
from .patching import PatchSpec, patchify

ARCHITECTURES = ("patch_token", "channel_token")
POS_ENC_KINDS = ("learned", "frozen_zero", "none")
POS_ENC_STD = 0.02


@dataclass
class ModelConfig:
    architecture: str = "patch_token"
    lookback: int = 336
    horizon: int = 96
    channels: int = 1
    patch_length: int = 16
    stride: int = 16
    padding: bool = False
    embedding: str = "linear"
    frozen_embedding: bool = False
    pos_enc: str = "learned"
    d_model: int = 64
    heads: int = 4
    ffn_dim: int = 128
    blocks: int = 3
    activation: str = "gelu"
    attention: Any = "raw"  # one kind for all blocks, or a per-block list
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ContractError(f"unknown architecture {self.architecture!r}; expected one of {ARCHITECTURES}")
        if self.pos_enc not in POS_ENC_KINDS:
            raise ContractError(f"unknown pos_enc {self.pos_enc!r}; expected one of {POS_ENC_KINDS}")
        if self.d_model % self.heads:
            raise ContractError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.blocks < 0:
            raise ContractError("blocks must be >= 0")
        activation(self.activation)
        modes = self.attention_modes
        if len(modes) != self.blocks:
            raise ContractError(f"{len(modes)} attention modes given for {self.blocks} blocks")
        if self.architecture == "patch_token":
            self.patch_spec  # validates P <= L

    @property
    def attention_modes(self) -> list[AttentionMode]:
        if isinstance(self.attention, str):
            return [AttentionMode(self.attention)] * self.blocks
        return [AttentionMode(k) for k in self.attention]

    @property
    def patch_spec(self) -> PatchSpec:
        return PatchSpec(self.patch_length, self.stride, self.lookback, self.padding)

    @property
    def tokens(self) -> int:
        if self.architecture == "patch_token":
            return self.patch_spec.tokens
        return self.channels

    def to_dict(self) -> dict:
        d = asdict(self)
        if not isinstance(d["attention"], str):
            d["attention"] = list(d["attention"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ContractError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)


class ForecastModel(Module):
    def __init__(self, config: ModelConfig):
        self._config = config
        rng = np.random.default_rng(config.seed)
        d = config.d_model
        T = config.tokens
        if config.architecture == "patch_token":
            self.embed = Embedding(config.embedding, config.patch_length, d, rng, config.activation)
            if config.pos_enc == "learned":
                self.pos_enc = Tensor(rng.normal(0.0, POS_ENC_STD, (T, d)), requires_grad=True)
            elif config.pos_enc == "frozen_zero":
                self.pos_enc = Tensor(np.zeros((T, d)))
            else:
                self.pos_enc = None
            head_in = T * d
        else:
            self.embed = Embedding(config.embedding, config.lookback, d, rng, config.activation)
            self.pos_enc = None
            head_in = d
        self.blocks = [Block(d, config.heads, config.ffn_dim, T, rng, mode, config.activation)
                       for mode in config.attention_modes]
        self.head = Linear(head_in, config.horizon, rng)
        if config.frozen_embedding:
            self.embed.set_trainable(False)

    @property
    def config(self) -> ModelConfig:
        return self._config

    def _sync_config(self) -> None:
        kinds = [b.attn.mode.kind for b in self.blocks]
        attention = kinds[0] if kinds and all(k == kinds[0] for k in kinds) else kinds
        self._config = ModelConfig(**{**self._config.to_dict(), "attention": attention})

    def parameters(self) -> dict[str, Tensor]:
        return dict(self.named_parameters())

    def trainable_parameters(self) -> dict[str, Tensor]:
        return {k: p for k, p in self.named_parameters() if p.requires_grad}

    def parameter_count(self) -> int:
        return int(sum(p.size for _, p in self.named_parameters()))

    def active_parameter_count(self) -> int:
        """Parameters that can influence the output under the current attention modes."""
        total = 0
        for name, p in self.named_parameters():
            if name.startswith("blocks.") and ".attn." in name:
                i, rest = name[len("blocks."):].split(".attn.", 1)
                if rest not in self.blocks[int(i)].attn.active_parameter_names():
                    continue
            total += p.size
        return int(total)

    def copy(self) -> "ForecastModel":
        return copy.deepcopy(self)

    def tokenize(self, x: np.ndarray) -> Tensor:
        """(B, L, C) input -> (B*C, T, P) patch tokens, or (B, C, L) channel tokens."""
        x = np.asarray(x, dtype=np.float64)
        cfg = self._config
        if x.ndim != 3 or x.shape[1] != cfg.lookback or x.shape[2] != cfg.channels:
            raise ContractError(f"expected input (B, {cfg.lookback}, {cfg.channels}), got {x.shape}")
        B, L, C = x.shape
        series = x.transpose(0, 2, 1)
        if cfg.architecture == "patch_token":
            return Tensor(patchify(series.reshape(B * C, L), cfg.patch_spec))
        return Tensor(series)

    def embed_tokens(self, tokens: Tensor) -> Tensor:
        z = self.embed(tokens)
        if self.pos_enc is not None:
            z = add(z, self.pos_enc)
        return z

    def run_blocks(self, z: Tensor, capture: bool = False) -> tuple[Tensor, list[np.ndarray]]:
        captures = []
        for i, block in enumerate(self.blocks):
            z = block(z, capture=capture)
            if not np.all(np.isfinite(z.data)):
                raise NumericError(f"non-finite activations after block {i}")
            if capture:
                captures.append(block.attn.last_attention)
                block.attn.last_attention = None
        return z, captures

    def forward(self, x: np.ndarray, capture: bool = False):
        """Forecast (B, H, C) from input (B, L, C).

        With ``capture`` the per-block attention is returned alongside, each of
        shape (B, C, heads, T, T) for patch tokens or (B, 1, heads, C, C) for
        channel tokens.
        """
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite model input")
        cfg = self._config
        B, _, C = x.shape if x.ndim == 3 else (None, None, None)
        z = self.embed_tokens(self.tokenize(x))
        z, caps = self.run_blocks(z, capture)
        if cfg.architecture == "patch_token":
            N, T, d = z.shape
            y = self.head(reshape(z, (N, T * d)))  # (B*C, H)
            y = transpose(reshape(y, (B, C, cfg.horizon)), (0, 2, 1))
            caps = [a.reshape(B, C, *a.shape[1:]) for a in caps]
        else:
            y = transpose(self.head(z), (0, 2, 1))
            caps = [a[:, None] for a in caps]
        if not np.all(np.isfinite(y.data)):
            raise NumericError("non-finite forecast from head")
        return (y, caps) if capture else y

    __call__ = forward

    def predict(self, x: np.ndarray, batch_size: int = 32) -> np.ndarray:
        outs = [self.forward(x[i:i + batch_size]).data for i in range(0, len(x), batch_size)]
        return np.concatenate(outs, axis=0)


def build_model(config: ModelConfig | dict | None = None, **overrides) -> ForecastModel:
    if config is None:
        config = ModelConfig(**overrides)
    elif isinstance(config, dict):
        config = ModelConfig.from_dict({**config, **overrides})
    elif overrides:
        config = ModelConfig.from_dict({**config.to_dict(), **overrides})
    return ForecastModel(config)


def posenc_similarity(model: ForecastModel) -> list[tuple[int, float]]:
    """Mean cosine similarity of positional-encoding rows, grouped by token distance.

    Zero-norm rows are given similarity 0 with everything.
    """
    if model.config.architecture != "patch_token":
        raise UnsupportedError("positional-encoding similarity needs a patch-token model")
    if model.pos_enc is None:
        raise UnsupportedError("model has no positional encoding")
    return similarity_by_distance(model.pos_enc.data)


def similarity_by_distance(rows: np.ndarray) -> list[tuple[int, float]]:
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = rows / safe[:, None]
    unit[norms == 0] = 0.0
    sim = unit @ unit.T
    T = rows.shape[0]
    i, j = np.triu_indices(T)
    dist = j - i
    return [(int(k), float(sim[i[dist == k], j[dist == k]].mean())) for k in range(T)]
