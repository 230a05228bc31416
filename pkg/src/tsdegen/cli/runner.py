"""Run directories, dataset loading and the (variant, seed) training cells shared by all experiments."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ..analysis.report import canonical_json
from ..dataset import LabeledSeries, WindowedDataset, generate_toy, load_csv, make_windows
from ..errors import ConfigError
from ..trainer import evaluate, load_model, save_checkpoint, train
from .config import ExperimentConfig

log = logging.getLogger("tsdegen.cli")


class RunDirectory:
    """Layout of one experiment's outputs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.checkpoints = self.root / "checkpoints"
        self.captures = self.root / "captures"
        for d in (self.root, self.checkpoints, self.captures):
            d.mkdir(parents=True, exist_ok=True)

    @property
    def config_path(self) -> Path:
        return self.root / "config.yaml"

    @property
    def report_path(self) -> Path:
        return self.root / "report.json"

    @property
    def summary_path(self) -> Path:
        return self.root / "summary.txt"

    @property
    def log_path(self) -> Path:
        return self.root / "run.log"

    def table(self, name: str) -> Path:
        return self.root / f"{name}.csv"

    def checkpoint(self, cell: str) -> Path:
        return self.checkpoints / f"{cell}.ckpt"


# ---------------------------------------------------------------- data

_DATA_CACHE: dict[str, tuple[LabeledSeries | None, WindowedDataset]] = {}


def load_data(cfg: ExperimentConfig) -> tuple[LabeledSeries | None, WindowedDataset]:
    """Toy or CSV data windowed with the model's lookback and horizon (cached per process)."""
    mc = cfg.model_config()
    key = canonical_json([cfg.dataset, mc.lookback, mc.horizon])
    if key in _DATA_CACHE:
        return _DATA_CACHE[key]
    split = tuple(cfg.dataset.get("split", [0.7, 0.1, 0.2]))
    if "toy" in cfg.dataset:
        labels = generate_toy(cfg.toy_config())
        values = labels.values
        normalize = bool(cfg.dataset.get("normalize", False))
    else:
        spec = cfg.dataset["csv"]
        spec = {"path": spec} if isinstance(spec, str) else spec
        try:
            values, names = load_csv(spec["path"], spec.get("date_column", "date"))
        except FileNotFoundError as exc:
            raise ConfigError(f"dataset file not found: {exc.filename}") from None
        if spec.get("columns"):
            idx = [names.index(c) for c in spec["columns"]]
            values = values[:, idx]
        labels = None
        normalize = bool(cfg.dataset.get("normalize", True))
    if values.ndim == 2 and values.shape[1] != mc.channels:
        raise ConfigError(f"dataset has {values.shape[1]} channels, model expects {mc.channels}")
    ds = make_windows(values, mc.lookback, mc.horizon, split=split, normalize=normalize)
    _DATA_CACHE[key] = (labels, ds)
    return labels, ds


# ---------------------------------------------------------------- training cells

@dataclass(frozen=True)
class Cell:
    """One model to train: config overrides plus a seed for init, batching and evaluation."""

    name: str
    seed: int
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)


@dataclass
class CellResult:
    name: str
    seed: int
    metrics: dict
    history: dict
    params: int
    active_params: int
    checkpoint: str


def train_cell(cfg: ExperimentConfig, cell: Cell, run_dir: RunDirectory) -> CellResult:
    from ..model import build_model

    _, ds = load_data(cfg)
    mc = cfg.model_config(**{"seed": cell.seed, **cell.model})
    tc = cfg.train_config(**{"seed": cell.seed, **cell.train})
    t0 = time.perf_counter()
    model, history = train(build_model(mc), ds, tc)
    metrics = evaluate(model, ds, "test")
    path = run_dir.checkpoint(cell.name)
    save_checkpoint(model, path, model.optimizer_state, epoch=len(history.epochs), history=history.epochs)
    log.info("cell %s trained in %.1fs: test mse %.6f", cell.name, time.perf_counter() - t0, metrics.mse)
    return CellResult(cell.name, cell.seed, metrics.to_dict(), history.to_dict(), model.parameter_count(),
                      model.active_parameter_count(), str(path.relative_to(run_dir.root)))


def _cell_job(args) -> CellResult:
    cfg_dict, cell, root = args
    return train_cell(ExperimentConfig.from_dict(cfg_dict), cell, RunDirectory(root))


def run_cells(cfg: ExperimentConfig, cells: Sequence[Cell], run_dir: RunDirectory,
              workers: int = 1) -> list[CellResult]:
    """Train every cell; results come back in cell order whatever the worker count."""
    jobs = [(cfg.to_dict(), c, str(run_dir.root)) for c in cells]
    if workers <= 1 or len(cells) <= 1:
        return [_cell_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell_job, jobs))


def load_cell_model(run_dir: RunDirectory, result: CellResult):
    return load_model(run_dir.root / result.checkpoint)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def aggregate(results: Sequence[CellResult], key: Callable[[CellResult], Any]) -> dict[Any, dict]:
    """Group cell metrics by ``key`` into mean/std per metric, preserving first-seen order."""
    groups: dict[Any, list[CellResult]] = {}
    for r in results:
        groups.setdefault(key(r), []).append(r)
    out = {}
    for k, rs in groups.items():
        row = {"seeds": [r.seed for r in rs], "params": rs[0].params, "active_params": rs[0].active_params}
        for m in ("mse", "mae", "mda"):
            row[f"{m}_mean"], row[f"{m}_std"] = mean_std([r.metrics[m] for r in rs])
        out[k] = row
    return out
