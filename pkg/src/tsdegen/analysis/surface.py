"""Test MSE over an (alpha, eta) perturbation grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset.windows import Split
from ..errors import ContractError
from ..surgery import PerturbSpec, perturb_model
from ..trainer import evaluate

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_ETAS = (0.0, 1.0, 2.0, 3.0, 4.0)


@dataclass
class PerturbationSurface:
    target: str
    alphas: tuple[float, ...]
    etas: tuple[float, ...]
    mse: np.ndarray          # (len(alphas), len(etas))
    baseline: float

    def max(self) -> float:
        return float(self.mse.max())

    def worst_ratio(self) -> float:
        return self.max() / self.baseline

    def rows(self) -> list[tuple[str, float, float, float]]:
        return [(self.target, float(a), float(e), float(self.mse[i, j]))
                for i, a in enumerate(self.alphas) for j, e in enumerate(self.etas)]


def cell_seed(seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])


def perturbation_surface(model, split: Split, alphas=DEFAULT_ALPHAS, etas=DEFAULT_ETAS, target: str = "attention",
                         seed: int = 0, baseline: float | None = None) -> PerturbationSurface:
    """Evaluate every grid cell with its own fixed noise seed so surfaces are reproducible."""
    alphas, etas = tuple(float(a) for a in alphas), tuple(float(e) for e in etas)
    if not alphas or not etas:
        raise ContractError("perturbation grids must be nonempty")
    if baseline is None:
        baseline = evaluate(model, split).mse
    grid = np.empty((len(alphas), len(etas)))
    for i, a in enumerate(alphas):
        for j, e in enumerate(etas):
            perturbed = perturb_model(model, PerturbSpec(target, a, e, cell_seed(seed, i, j)))
            grid[i, j] = evaluate(perturbed, split).mse
    return PerturbationSurface(target, alphas, etas, grid, float(baseline))


def asymmetry(ffn: PerturbationSurface, attention: PerturbationSurface) -> float:
    """Worst FFN-perturbed MSE over worst attention-perturbed MSE."""
    return ffn.max() / attention.max()
