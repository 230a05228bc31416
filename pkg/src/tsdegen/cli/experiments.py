"""One runner per experiment kind. Each trains its cells, writes CSV tables and returns a report."""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from ..analysis import (
    ExperimentReport,
    asymmetry,
    capture_attention,
    event_attention_mass,
    flatness,
    perturbation_surface,
    predicted_state_density,
    similarity_curve,
    write_table,
)
from ..analysis.report import content_hash
from ..dataset import generate_toy, make_windows
from ..errors import ConfigError
from ..model import count_tokens, PatchSpec
from ..surgery import SmoothingSpec, smooth_blocks, zero_positional_encoding
from ..trainer import evaluate, load_model
from .config import ExperimentConfig
from .runner import Cell, CellResult, RunDirectory, aggregate, load_cell_model, load_data, mean_std, run_cells

log = logging.getLogger("tsdegen.cli")

METRIC_COLUMNS = ["mse_mean", "mse_std", "mae_mean", "mae_std", "mda_mean", "mda_std"]


class Context:
    def __init__(self, cfg: ExperimentConfig, run_dir: RunDirectory, workers: int = 1, paper_scale: bool = False):
        self.cfg = cfg
        self.run_dir = run_dir
        self.workers = workers
        self.paper_scale = paper_scale
        self.report = ExperimentReport(cfg.kind, cfg.hash(), list(cfg.seeds))
        self._inputs_hash = None

    @property
    def inputs_hash(self) -> str:
        if self._inputs_hash is None:
            _, ds = load_data(self.cfg)
            # first input step of every window plus the last target covers every series value in use
            parts = [a for sp in ds.splits.values() if len(sp) for a in (sp.inputs[:, 0, :], sp.targets[-1])]
            self._inputs_hash = content_hash(self.cfg.hash(), *parts)
        return self._inputs_hash

    def table(self, name: str, header, rows) -> None:
        meta = {"config_hash": self.cfg.hash(), "seeds": list(self.cfg.seeds), "inputs_hash": self.inputs_hash}
        write_table(self.run_dir.table(name), header, rows, meta)
        self.report.tables.append(f"{name}.csv")

    def train(self, cells: list[Cell]) -> list[CellResult]:
        results = run_cells(self.cfg, cells, self.run_dir, self.workers)
        self.report.metrics.setdefault("cells", {}).update(
            {r.name: {"seed": r.seed, **r.metrics, "best_epoch": r.history["best_epoch"],
                      "checkpoint": r.checkpoint} for r in results})
        return results

    def grouped_table(self, name: str, label: str, groups: dict) -> None:
        rows = [[k, *[g[c] for c in METRIC_COLUMNS], g["params"], g["active_params"]] for k, g in groups.items()]
        self.table(name, [label, *METRIC_COLUMNS, "params", "active_params"], rows)
        self.report.parameter_counts.update(
            {str(k): {"params": g["params"], "active": g["active_params"]} for k, g in groups.items()})


def _rel(a: float, b: float) -> float:
    return a / b - 1.0


def run_replace(ctx: Context) -> None:
    modes = ctx.cfg.intervention["modes"]
    cells = [Cell(f"{m}_s{s}", s, {"attention": m}) for m in modes for s in ctx.cfg.seeds]
    results = ctx.train(cells)
    groups = aggregate(results, lambda r: r.name.rsplit("_s", 1)[0])
    ctx.grouped_table("replace", "mode", groups)
    ctx.report.metrics["by_mode"] = groups
    ref = groups.get("raw")
    if ref is not None:
        rel = {m: _rel(g["mse_mean"], ref["mse_mean"]) for m, g in groups.items()}
        ctx.report.summary["mse_relative_to_raw"] = rel
        ctx.report.summary["max_abs_relative_to_raw"] = max(abs(v) for v in rel.values())


def _models_for_seeds(ctx: Context, overrides: dict | None = None) -> list[tuple[int, object]]:
    results = ctx.train([Cell(f"model_s{s}", s, overrides or {}) for s in ctx.cfg.seeds])
    return [(r.seed, load_cell_model(ctx.run_dir, r)) for r in results]


def run_perturb_grid(ctx: Context) -> None:
    iv = ctx.cfg.intervention
    _, ds = load_data(ctx.cfg)
    if iv["checkpoint"]:
        try:
            models = [(ctx.cfg.seeds[0], load_model(iv["checkpoint"]))]
        except FileNotFoundError:
            if not iv["train"]:
                raise ConfigError(f"checkpoint {iv['checkpoint']} not found and training is disabled") from None
            models = _models_for_seeds(ctx)
    else:
        models = _models_for_seeds(ctx)
    rows, per_seed = [], {}
    for seed, model in models:
        base = evaluate(model, ds, "test").mse
        surfaces = {t: perturbation_surface(model, ds["test"], iv["alphas"], iv["etas"], t, seed=seed, baseline=base)
                    for t in iv["targets"]}
        for t, surf in surfaces.items():
            rows += [(seed, *r) for r in surf.rows()]
        stats = {"baseline_mse": base}
        for t, surf in surfaces.items():
            stats[f"{t}_max_mse"] = surf.max()
            stats[f"{t}_worst_ratio"] = surf.worst_ratio()
        if {"attention", "ffn"} <= set(surfaces):
            stats["asymmetry"] = asymmetry(surfaces["ffn"], surfaces["attention"])
        per_seed[str(seed)] = stats
        ctx.report.grids.append({"seed": seed, **{t: s.mse.tolist() for t, s in surfaces.items()},
                                 "alphas": list(iv["alphas"]), "etas": list(iv["etas"])})
    ctx.table("perturb_grid", ["seed", "target", "alpha", "eta", "mse"], rows)
    ctx.report.summary["per_seed"] = per_seed


def run_patch_sweep(ctx: Context) -> None:
    L = ctx.cfg.model_config().lookback
    pls = ctx.cfg.intervention["patch_lengths"]
    cells = [Cell(f"P{P}_s{s}", s, {"patch_length": P, "stride": P}) for P in pls for s in ctx.cfg.seeds]
    groups = aggregate(ctx.train(cells), lambda r: int(r.name.split("_")[0][1:]))
    for P, g in groups.items():
        g["tokens"] = count_tokens(PatchSpec(P, P, L))
    rows = [[P, g["tokens"], *[g[c] for c in METRIC_COLUMNS], g["params"]] for P, g in groups.items()]
    ctx.table("patch_sweep", ["patch_length", "tokens", *METRIC_COLUMNS, "params"], rows)
    ctx.report.metrics["by_patch_length"] = {str(P): g for P, g in groups.items()}
    means = [g["mse_mean"] for g in groups.values()]
    ctx.report.summary["relative_spread"] = max(means) / min(means) - 1.0


def run_posenc_zero(ctx: Context) -> None:
    _, ds = load_data(ctx.cfg)
    rows, sims, changes = [], [], []
    for seed, model in _models_for_seeds(ctx):
        base = evaluate(model, ds, "test")
        zeroed = evaluate(zero_positional_encoding(model), ds, "test")
        changes.append(_rel(zeroed.mse, base.mse))
        rows.append([seed, base.mse, zeroed.mse, changes[-1], base.mae, zeroed.mae, base.mda, zeroed.mda])
        curve = similarity_curve(model)
        sims += [(seed, d, v) for d, v in curve]
        ctx.report.summary.setdefault("similarity_flatness", {})[str(seed)] = flatness(curve)
    ctx.table("posenc_zero", ["seed", "mse", "mse_zeroed", "relative_change", "mae", "mae_zeroed", "mda",
                              "mda_zeroed"], rows)
    ctx.table("posenc_similarity", ["seed", "distance", "mean_cosine"], sims)
    ctx.report.summary["relative_change"] = changes
    ctx.report.summary["mean_relative_change"] = mean_std(changes)[0]


def run_toy_attention(ctx: Context) -> None:
    iv = ctx.cfg.intervention
    toy = ctx.cfg.toy_config()
    mc = ctx.cfg.model_config()
    labels, ds = load_data(ctx.cfg)
    n_density = iv["paper_density_samples"] if ctx.paper_scale else iv["density_samples"]
    # densities are measured on a fresh series from the same generator so both scales share one code path
    eval_toy = dataclasses.replace(toy, seed=toy.seed + 1, length=n_density + mc.lookback + mc.horizon - 1)
    eval_series = generate_toy(eval_toy)
    eval_split = make_windows(eval_series.values, mc.lookback, mc.horizon, split=(0.0, 0.0, 1.0))["test"]
    mass_rows, query_rows, dens_rows = [], [], []
    for seed, model in _models_for_seeds(ctx):
        cap = capture_attention(model, ds["test"], max_samples=iv["capture_samples"])
        cap.save(ctx.run_dir.captures / f"attention_s{seed}.cap")
        stats = event_attention_mass(cap, labels)
        summary = stats.summary(seed=seed)
        for b, row in enumerate(stats.by_block_head()):
            mass_rows += [(seed, b, h, float(v)) for h, v in enumerate(row)]
        for b, row in enumerate(stats.by_query()):
            query_rows += [(seed, b, q, float(v)) for q, v in enumerate(row)]
        dens = predicted_state_density(model, eval_split, eval_series, eval_toy, max_samples=n_density)
        dens_rows += [(seed, *r) for r in dens.rows()]
        ctx.report.captures[str(seed)] = {"event_attention": summary, "state_density": dens.summary(),
                                          "capture_file": f"captures/attention_s{seed}.cap"}
    ctx.table("event_mass_block_head", ["seed", "block", "head", "event_mass"], mass_rows)
    ctx.table("event_mass_by_query", ["seed", "block", "query", "event_mass"], query_rows)
    ctx.table("state_density", ["seed", "state", "bin_lo", "bin_hi", "count"], dens_rows)
    ctx.report.summary["density_samples"] = n_density
    ctx.report.summary["degenerate_prediction"] = {
        s: c["state_density"]["flag"] for s, c in ctx.report.captures.items()}


def run_freeze_emb(ctx: Context) -> None:
    cells = [Cell(f"{v}_s{s}", s, {"frozen_embedding": v == "frozen"})
             for v in ("trained", "frozen") for s in ctx.cfg.seeds]
    groups = aggregate(ctx.train(cells), lambda r: r.name.rsplit("_s", 1)[0])
    ctx.grouped_table("freeze_emb", "embedding", groups)
    ctx.report.metrics["by_variant"] = groups
    ctx.report.summary["relative_difference"] = _rel(groups["frozen"]["mse_mean"], groups["trained"]["mse_mean"])


def run_embed_variants(ctx: Context) -> None:
    iv = ctx.cfg.intervention
    cells = [Cell(f"{m}-{e}_s{s}", s, {"attention": m, "embedding": e})
             for m in iv["modes"] for e in iv["embeddings"] for s in ctx.cfg.seeds]
    groups = aggregate(ctx.train(cells), lambda r: r.name.rsplit("_s", 1)[0])
    ctx.grouped_table("embed_variants", "mode-embedding", groups)
    ctx.report.metrics["by_variant"] = groups
    grid = [[groups[f"{m}-{e}"]["mse_mean"] for e in iv["embeddings"]] for m in iv["modes"]]
    ctx.table("embed_variants_grid", ["mode", *iv["embeddings"]], [[m, *row] for m, row in zip(iv["modes"], grid)])


def run_block_sweep(ctx: Context) -> None:
    counts = ctx.cfg.intervention["block_counts"]
    cells = [Cell(f"B{b}_s{s}", s, {"blocks": int(b)}) for b in counts for s in ctx.cfg.seeds]
    groups = aggregate(ctx.train(cells), lambda r: int(r.name.split("_")[0][1:]))
    ctx.grouped_table("block_sweep", "blocks", groups)
    ctx.report.metrics["by_blocks"] = {str(k): g for k, g in groups.items()}


def run_smooth_blocks(ctx: Context) -> None:
    _, ds = load_data(ctx.cfg)
    n = ctx.cfg.model_config().blocks
    subsets = ctx.cfg.intervention["subsets"]
    if subsets is None:
        subsets = [[]] + [[i] for i in range(n)] + ([list(range(n))] if n > 1 else [])
    per: dict[str, list[float]] = {}
    for seed, model in _models_for_seeds(ctx):
        for sub in subsets:
            key = "+".join(str(b) for b in sorted(sub)) or "none"
            per.setdefault(key, []).append(evaluate(smooth_blocks(model, SmoothingSpec(tuple(sub))), ds, "test").mse)
    rows = [[k, *mean_std(v)] for k, v in per.items()]
    ctx.table("smooth_blocks", ["smoothed_blocks", "mse_mean", "mse_std"], rows)
    ctx.report.metrics["by_subset"] = {k: {"mse": v} for k, v in per.items()}


RUNNERS = {
    "replace": run_replace,
    "perturb-grid": run_perturb_grid,
    "patch-sweep": run_patch_sweep,
    "posenc-zero": run_posenc_zero,
    "toy-attention": run_toy_attention,
    "freeze-emb": run_freeze_emb,
    "embed-variants": run_embed_variants,
    "block-sweep": run_block_sweep,
    "smooth-blocks": run_smooth_blocks,
}


def run_experiment(cfg: ExperimentConfig, run_dir: RunDirectory, workers: int = 1,
                   paper_scale: bool = False) -> ExperimentReport:
    """Run ``cfg`` into ``run_dir`` and write the config echo, tables, summary and report."""
    cfg.save(run_dir.config_path)
    ctx = Context(cfg, run_dir, workers, paper_scale)
    RUNNERS[cfg.kind](ctx)
    ctx.report.summary["paper_scale"] = bool(paper_scale)
    ctx.report.write(run_dir.report_path)
    run_dir.summary_path.write_text(_summary_text(ctx.report))
    return ctx.report


def _summary_text(report: ExperimentReport) -> str:
    lines = [f"experiment: {report.kind}", f"config hash: {report.config_hash}",
             f"seeds: {', '.join(map(str, report.seeds))}"]
    for k, v in sorted(report.summary.items()):
        lines.append(f"{k}: {v}")
    if report.parameter_counts:
        lines.append("parameter counts:")
        for k, v in report.parameter_counts.items():
            lines.append(f"  {k}: {v['params']} total, {v['active']} active")
    lines.append("tables: " + ", ".join(sorted(report.tables)))
    return "\n".join(lines) + "\n"
