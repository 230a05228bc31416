"""Experiment configuration files (YAML) and their stable hash."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..analysis.report import config_hash
from ..dataset.toy import ToySeriesConfig
from ..errors import ConfigError, ContractError
from ..model.forecast import ModelConfig
from ..trainer.train import TrainConfig

KINDS = ("replace", "perturb-grid", "patch-sweep", "posenc-zero", "toy-attention", "freeze-emb",
         "embed-variants", "block-sweep", "smooth-blocks")

# Desk scale: each model trains for 10 epochs of 2048 sampled windows, about a minute on one CPU core.
DESK_DATASET = {"toy": {"length": 20000, "seed": 0}, "split": [0.7, 0.1, 0.2]}
DESK_TRAIN = {"epochs": 10, "batch_size": 64, "lr": 1e-4, "patience": 3, "samples_per_epoch": 2048}

DEFAULT_INTERVENTIONS: dict[str, dict[str, Any]] = {
    "replace": {"modes": ["raw", "zero", "eye", "mean", "fixed_trainable"]},
    "perturb-grid": {"alphas": [0.0, 0.25, 0.5, 0.75, 1.0], "etas": [0.0, 1.0, 2.0, 3.0, 4.0],
                     "targets": ["attention", "ffn"], "checkpoint": None, "train": True},
    "patch-sweep": {"patch_lengths": [16, 48, 112, 336]},
    "posenc-zero": {},
    "toy-attention": {"capture_samples": 512, "density_samples": 5120, "paper_density_samples": 51200},
    "freeze-emb": {},
    "embed-variants": {"modes": ["raw", "mean"], "embeddings": ["linear", "conv", "mlp", "residual"]},
    "block-sweep": {"block_counts": [1, 2, 3, 4, 6]},
    "smooth-blocks": {"subsets": None},
}


@dataclass
class ExperimentConfig:
    """One experiment: what to run, on which data, with which model and training setup."""

    kind: str
    dataset: dict = field(default_factory=lambda: copy.deepcopy(DESK_DATASET))
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=lambda: dict(DESK_TRAIN))
    intervention: dict = field(default_factory=dict)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.intervention = {**DEFAULT_INTERVENTIONS[self.kind], **(self.intervention or {})}
        unknown = set(self.intervention) - set(DEFAULT_INTERVENTIONS[self.kind])
        if unknown:
            raise ConfigError(f"unknown {self.kind} options {sorted(unknown)}")
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.validate()

    # ------------------------------------------------------------------ derived configs

    def toy_config(self) -> ToySeriesConfig | None:
        toy = self.dataset.get("toy")
        if toy is None:
            return None
        try:
            return ToySeriesConfig(**toy)
        except (TypeError, ContractError) as exc:
            raise ConfigError(f"invalid toy dataset config: {exc}") from None

    def model_config(self, **overrides) -> ModelConfig:
        try:
            return ModelConfig.from_dict({**self.model, **overrides})
        except (TypeError, ContractError) as exc:
            raise ConfigError(f"invalid model config: {exc}") from None

    def train_config(self, **overrides) -> TrainConfig:
        try:
            return TrainConfig.from_dict({**self.train, **overrides})
        except (TypeError, ContractError) as exc:
            raise ConfigError(f"invalid train config: {exc}") from None

    def validate(self) -> None:
        if ("toy" in self.dataset) == ("csv" in self.dataset):
            raise ConfigError("dataset needs exactly one of 'toy' or 'csv'")
        split = self.dataset.get("split", [0.7, 0.1, 0.2])
        if len(split) != 3 or abs(sum(split) - 1.0) > 1e-9 or min(split) < 0:
            raise ConfigError(f"dataset split must be three nonnegative fractions summing to 1, got {split}")
        self.toy_config()
        base = self.model_config()
        self.train_config()
        iv = self.intervention
        if self.kind == "patch-sweep":
            for P in iv["patch_lengths"]:
                if P > base.lookback or P < 1:
                    raise ConfigError(f"patch length {P} does not fit lookback {base.lookback}")
        if self.kind == "toy-attention" and "toy" not in self.dataset:
            raise ConfigError("toy-attention needs the toy dataset")
        if self.kind == "posenc-zero" and (base.architecture != "patch_token" or base.pos_enc != "learned"):
            raise ConfigError("posenc-zero needs a patch-token model with a learned positional encoding")
        if self.kind == "replace":
            for m in iv["modes"]:
                self.model_config(attention=m)
        if self.kind == "perturb-grid" and not iv["train"] and not iv["checkpoint"]:
            raise ConfigError("perturb-grid without training needs a checkpoint path")
        if self.kind == "smooth-blocks" and iv["subsets"] is not None:
            for sub in iv["subsets"]:
                if any(not 0 <= int(b) < base.blocks for b in sub):
                    raise ConfigError(f"smoothing subset {sub} out of range for {base.blocks} blocks")

    # ------------------------------------------------------------------ serialization

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dataset": copy.deepcopy(self.dataset),
            "model": copy.deepcopy(self.model),
            "train": copy.deepcopy(self.train),
            "intervention": copy.deepcopy(self.intervention),
            "seeds": list(self.seeds),
            "out": self.out,
        }

    def hash(self) -> str:
        """Stable across key order; the output directory does not affect it."""
        d = self.to_dict()
        d.pop("out")
        return config_hash(d)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a mapping")
        allowed = {"kind", "dataset", "model", "train", "intervention", "seeds", "out"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        kw = {k: v for k, v in d.items() if v is not None or k == "out"}
        if "dataset" in kw:
            kw["dataset"] = {**({} if "csv" in kw["dataset"] else {"split": DESK_DATASET["split"]}), **kw["dataset"]}
        if "train" in kw:
            kw["train"] = {**DESK_TRAIN, **kw["train"]}
        return cls(**kw)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=None)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_yaml(text)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml())
