from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import container
from ..autodiff import AdamState
from ..errors import CheckpointError, CompatibilityError
from ..model.forecast import ForecastModel, ModelConfig

KIND = "ckpt"


@dataclass
class Checkpoint:
    model: ForecastModel
    optimizer: AdamState | None = None
    epoch: int = 0
    history: list = field(default_factory=list)


def save_checkpoint(model: ForecastModel, path: str | Path, optimizer: AdamState | None = None,
                    epoch: int = 0, history: list | None = None) -> None:
    params = model.parameters()
    arrays = {f"param/{k}": p.data for k, p in params.items()}
    opt_meta = None
    if optimizer is not None:
        opt_meta = {"step": optimizer.step, "lr": optimizer.lr, "beta1": optimizer.beta1,
                    "beta2": optimizer.beta2, "eps": optimizer.eps}
        for k in sorted(optimizer.m):
            arrays[f"adam_m/{k}"] = optimizer.m[k]
            arrays[f"adam_v/{k}"] = optimizer.v[k]
    meta = {
        "model_config": model.config.to_dict(),
        "trainable": {k: bool(p.requires_grad) for k, p in params.items()},
        "optimizer": opt_meta,
        "epoch": int(epoch),
        "history": list(history or []),
    }
    container.write(path, KIND, meta, arrays)


def load_checkpoint(path: str | Path, config: ModelConfig | None = None) -> Checkpoint:
    """Rebuild the saved model; with ``config``, load into that architecture instead.

    Parameter names and shapes must match exactly, otherwise a
    CompatibilityError is raised and no model is returned.
    """
    meta, arrays = container.read(path, KIND)
    try:
        saved_cfg = ModelConfig.from_dict(meta["model_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: invalid model config in checkpoint ({exc})") from None
    model = ForecastModel(config or saved_cfg)
    params = model.parameters()
    saved = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    if set(saved) != set(params):
        missing = sorted(set(params) - set(saved))
        extra = sorted(set(saved) - set(params))
        raise CompatibilityError(f"{path}: parameter mismatch; missing {missing}, unexpected {extra}")
    for k, p in params.items():
        if saved[k].shape != p.shape:
            raise CompatibilityError(f"{path}: parameter {k!r} has shape {saved[k].shape}, model expects {p.shape}")
    for k, p in params.items():
        p.data = saved[k].copy()
        p.requires_grad = bool(meta.get("trainable", {}).get(k, p.requires_grad))

    opt = None
    if meta.get("optimizer"):
        o = meta["optimizer"]
        opt = AdamState(lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], step=o["step"])
        for k, v in arrays.items():
            if k.startswith("adam_m/"):
                opt.m[k[len("adam_m/"):]] = v.copy()
            elif k.startswith("adam_v/"):
                opt.v[k[len("adam_v/"):]] = v.copy()
    return Checkpoint(model, opt, int(meta.get("epoch", 0)), list(meta.get("history", [])))


def load_model(path: str | Path, config: ModelConfig | None = None) -> ForecastModel:
    return load_checkpoint(path, config).model
