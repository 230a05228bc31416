from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class MetricSet:
    mse: float
    mae: float
    mda: float

    def to_dict(self) -> dict:
        return asdict(self)


def directional_accuracy(pred: np.ndarray, target: np.ndarray, last_input: np.ndarray) -> float:
    """Fraction of (step, channel) pairs where forecast and truth move the same way.

    Direction is taken against the previous true value; the first horizon step
    uses the last observed input. Zero moves only match zero moves.
    """
    ref = np.concatenate([last_input[:, None, :], target[:, :-1, :]], axis=1)
    return float(np.mean(np.sign(pred - ref) == np.sign(target - ref)))


def compute_metrics(pred: np.ndarray, target: np.ndarray, last_input: np.ndarray) -> MetricSet:
    """Metrics over (N, H, C) arrays; ``last_input`` is (N, C)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ContractError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise ContractError("cannot compute metrics on an empty split")
    err = pred - target
    return MetricSet(float(np.mean(err * err)), float(np.mean(np.abs(err))),
                     directional_accuracy(pred, target, np.asarray(last_input, dtype=np.float64)))
