"""Deterministic mini-batch training with early stopping, and split evaluation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..autodiff import Adam, clip_grad_norm
from ..autodiff.tensor import square, sub, tmean
from ..dataset.windows import Split, WindowedDataset
from ..errors import ContractError, TrainingError
from .metrics import MetricSet, compute_metrics

log = logging.getLogger(__name__)


# small inference batches keep activations cache-resident (about 1.5x faster than 256 on one core)
EVAL_BATCH = 32


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-4
    seed: int = 0
    patience: int = 3
    clip_norm: float | None = 1.0
    # "model": loss on whatever scale the dataset feeds the model (normalized if enabled)
    # "raw": loss on de-normalized values
    loss_scale: str = "model"
    eval_batch_size: int = EVAL_BATCH
    # draw this many training windows (without replacement) per epoch; None = all
    samples_per_epoch: int | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ContractError("epochs must be >= 0 and batch_size >= 1")
        if self.loss_scale not in ("model", "raw"):
            raise ContractError(f"loss_scale must be 'model' or 'raw', got {self.loss_scale!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ContractError(f"unknown train config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class History:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mse: float = float("inf")

    @property
    def train_mse(self) -> list[float]:
        return [e["train_mse"] for e in self.epochs]

    @property
    def val_mse(self) -> list[float]:
        return [e["val_mse"] for e in self.epochs]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_mse,val_mse\n")
            for e in self.epochs:
                fh.write(f"{e['epoch']},{e['train_mse']!r},{e['val_mse']!r}\n")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "best_epoch": self.best_epoch, "best_val_mse": self.best_val_mse}


def _batch_loss(model, split: Split, idx: np.ndarray, loss_scale: str):
    pred = model.forward(split.inputs[idx])
    target = split.targets[idx]
    if loss_scale == "raw" and split.normalized:
        pred = pred * split.std[idx] + split.mean[idx]
        target = split.raw_targets(idx)
    return tmean(square(sub(pred, target)))


def _snapshot(model) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in model.parameters().items()}


def _restore(model, snap: dict[str, np.ndarray]) -> None:
    for k, p in model.parameters().items():
        p.data[...] = snap[k]


def predict_split(model, split: Split, batch_size: int = EVAL_BATCH) -> np.ndarray:
    """Model-scale predictions for every window of ``split``."""
    out = [model.forward(split.inputs[i:i + batch_size]).data for i in range(0, len(split), batch_size)]
    return np.concatenate(out, axis=0)


def split_mse(model, split: Split, batch_size: int = EVAL_BATCH, loss_scale: str = "model") -> float:
    pred = predict_split(model, split, batch_size)
    if loss_scale == "raw":
        return float(np.mean((split.denormalize(pred) - split.raw_targets()) ** 2))
    return float(np.mean((pred - split.targets) ** 2))


def train(model, dataset: WindowedDataset, config: TrainConfig | None = None, adam=None):
    """Fit ``model`` by Adam on MSE; returns ``(model, history)`` with the best-validation weights loaded.

    Validation falls back to training loss when the dataset has no val windows.
    """
    config = config or TrainConfig()
    tr = dataset["train"]
    if len(tr) == 0:
        raise ContractError("training split is empty")
    val = dataset.splits.get("val")
    if val is not None and len(val) == 0:
        val = None
    params = model.trainable_parameters()
    opt = adam or Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    history = History()
    best = _snapshot(model)
    stale = 0
    n_all = len(tr)
    n = n_all if config.samples_per_epoch is None else min(config.samples_per_epoch, n_all)
    for epoch in range(config.epochs):
        order = rng.permutation(n_all)[:n]
        total = 0.0
        for step, lo in enumerate(range(0, n, config.batch_size)):
            idx = np.sort(order[lo:lo + config.batch_size])
            opt.zero_grad()
            loss = _batch_loss(model, tr, idx, config.loss_scale)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            loss.backward()
            if config.clip_norm is not None:
                clip_grad_norm(params, config.clip_norm)
            opt.step()
            total += value * len(idx)
        train_mse = total / n
        val_mse = split_mse(model, val, config.eval_batch_size, config.loss_scale) if val is not None else train_mse
        history.epochs.append({"epoch": epoch, "train_mse": train_mse, "val_mse": val_mse})
        log.info("epoch %d train_mse %.6f val_mse %.6f", epoch, train_mse, val_mse)
        if val_mse < history.best_val_mse:
            history.best_val_mse = val_mse
            history.best_epoch = epoch
            best = _snapshot(model)
            stale = 0
        else:
            stale += 1
            if config.patience and stale >= config.patience:
                break
    _restore(model, best)
    model.optimizer_state = opt.state
    return model, history


def evaluate(model, split: Split | WindowedDataset, name: str = "test", batch_size: int = EVAL_BATCH) -> MetricSet:
    """MSE / MAE / MDA on the raw (de-normalized) scale."""
    if isinstance(split, WindowedDataset):
        split = split[name]
    if len(split) == 0:
        raise ContractError("cannot evaluate on an empty split")
    pred = split.denormalize(predict_split(model, split, batch_size))
    raw_x = split.raw_inputs()
    return compute_metrics(pred, split.raw_targets(), raw_x[:, -1, :])
