import csv
import json

import numpy as np
import pytest
import yaml

from tsdegen.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, KINDS, ExperimentConfig, RunDirectory, main, run_experiment
from tsdegen.cli.runner import load_data
from tsdegen.errors import ConfigError
from tsdegen.model import build_model
from tsdegen.trainer import evaluate, train

TINY_MODEL = {"lookback": 96, "horizon": 96, "patch_length": 16, "stride": 16,
              "d_model": 8, "heads": 2, "ffn_dim": 16, "blocks": 2}
TINY_TRAIN = {"epochs": 1, "batch_size": 32, "lr": 1e-3, "samples_per_epoch": 64}
TINY_DATA = {"toy": {"length": 1500, "seed": 0}}

SMALL_INTERVENTIONS = {
    "replace": {"modes": ["raw", "zero"]},
    "perturb-grid": {"alphas": [0.0, 1.0], "etas": [0.0, 4.0]},
    "patch-sweep": {"patch_lengths": [16, 96]},
    "toy-attention": {"capture_samples": 16, "density_samples": 32},
    "embed-variants": {"embeddings": ["linear", "conv"]},
    "block-sweep": {"block_counts": [1, 2]},
}


def tiny_config(kind, tmp_path=None, **kw):
    d = {"kind": kind, "dataset": TINY_DATA, "model": TINY_MODEL, "train": TINY_TRAIN, "seeds": [0],
         "intervention": SMALL_INTERVENTIONS.get(kind, {})}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def write_config(path, cfg):
    cfg.save(path)
    return path


# ---------------------------------------------------------------- config

def test_yaml_round_trip_is_lossless(tmp_path):
    cfg = tiny_config("perturb-grid", seeds=[3, 1])
    again = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert again.to_dict() == cfg.to_dict()
    assert again.hash() == cfg.hash()


def test_hash_ignores_field_order_and_output_dir():
    cfg = tiny_config("replace")
    d = cfg.to_dict()
    shuffled = {k: d[k] for k in reversed(list(d))}
    shuffled["model"] = {k: d["model"][k] for k in reversed(list(d["model"]))}
    shuffled["out"] = "/elsewhere"
    assert ExperimentConfig.from_dict(shuffled).hash() == cfg.hash()
    assert tiny_config("replace", seeds=[1]).hash() != cfg.hash()


def test_desk_defaults():
    cfg = ExperimentConfig("replace")
    assert cfg.seeds == [0, 1, 2]
    assert cfg.intervention["modes"] == ["raw", "zero", "eye", "mean", "fixed_trainable"]
    mc = cfg.model_config()
    assert (mc.d_model, mc.blocks, mc.lookback, mc.horizon, mc.patch_length, mc.stride) == (64, 3, 336, 96, 16, 16)


@pytest.mark.parametrize("bad", [
    {"kind": "nope"},
    {"kind": "replace", "extra": 1},
    {"kind": "replace", "intervention": {"modes": ["softmax"]}},
    {"kind": "replace", "intervention": {"bogus": 1}},
    {"kind": "patch-sweep", "intervention": {"patch_lengths": [400]}},
    {"kind": "replace", "train": {"epochz": 3}},
    {"kind": "replace", "dataset": {"toy": {}, "csv": "x.csv"}},
    {"kind": "replace", "dataset": {"toy": {"event_period": 81}}},
    {"kind": "perturb-grid", "intervention": {"train": False}},
    {"kind": "smooth-blocks", "intervention": {"subsets": [[5]]}},
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


# ---------------------------------------------------------------- command line

def test_bad_config_exits_with_1(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("kind: patch-sweep\nintervention: {patch_lengths: [999]}\n")
    assert main(["patch-sweep", "--config", str(p), "--out", str(tmp_path / "run")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_kind_mismatch_exits_with_1(tmp_path):
    p = write_config(tmp_path / "c.yaml", tiny_config("replace"))
    assert main(["patch-sweep", "--config", str(p), "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_missing_checkpoint_without_training_exits_with_1(tmp_path):
    cfg = tiny_config("perturb-grid", intervention={"train": False, "checkpoint": str(tmp_path / "none.ckpt")})
    p = write_config(tmp_path / "c.yaml", cfg)
    assert main(["perturb-grid", "--config", str(p), "--out", str(tmp_path / "run")]) == EXIT_CONFIG


def test_non_finite_data_exits_with_2(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(800, 1))
    rows[50, 0] = np.nan
    data = tmp_path / "d.csv"
    data.write_text("date,x\n" + "".join(f"{i},{float(v[0])!r}\n" for i, v in enumerate(rows)))
    cfg = tiny_config("replace", dataset={"csv": {"path": str(data)}, "normalize": False},
                      intervention={"modes": ["raw"]})
    p = write_config(tmp_path / "c.yaml", cfg)
    assert main(["replace", "--config", str(p), "--out", str(tmp_path / "run")]) == EXIT_NUMERIC


def test_seeds_flag_and_outputs(tmp_path, capsys):
    p = write_config(tmp_path / "c.yaml", tiny_config("replace"))
    out = tmp_path / "run"
    assert main(["replace", "--config", str(p), "--out", str(out), "--seeds", "4,5"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["seeds"] == [4, 5]
    assert sorted(report["metrics"]["cells"]) == ["raw_s4", "raw_s5", "zero_s4", "zero_s5"]
    assert (out / "config.yaml").exists() and (out / "summary.txt").exists()
    assert "wall time" in (out / "run.log").read_text()
    assert "time" not in json.dumps(report)
    rows = list(csv.DictReader(open(out / "replace.csv")))
    assert [r["mode"] for r in rows] == ["raw", "zero"]
    assert int(rows[1]["params"]) < int(rows[0]["params"])
    echo = yaml.safe_load((out / "config.yaml").read_text())
    assert echo["seeds"] == [4, 5]


# ---------------------------------------------------------------- experiments

@pytest.mark.parametrize("kind", KINDS)
def test_every_experiment_runs(kind, tmp_path):
    report = run_experiment(tiny_config(kind), RunDirectory(tmp_path))
    assert report.tables
    for t in report.tables:
        assert (tmp_path / t).exists()
        meta = json.loads((tmp_path / t).with_suffix(".meta.json").read_text())
        assert meta["config_hash"] == report.config_hash


def test_single_cell_replace_matches_direct_training(tmp_path):
    cfg = tiny_config("replace", intervention={"modes": ["raw"]}, seeds=[2])
    report = run_experiment(cfg, RunDirectory(tmp_path))
    _, ds = load_data(cfg)
    model, _ = train(build_model(cfg.model_config(seed=2)), ds, cfg.train_config(seed=2))
    direct = evaluate(model, ds, "test")
    cell = report.metrics["cells"]["raw_s2"]
    assert (cell["mse"], cell["mae"], cell["mda"]) == (direct.mse, direct.mae, direct.mda)


def test_patch_sweep_token_counts(tmp_path):
    cfg = tiny_config("patch-sweep", model={**TINY_MODEL, "lookback": 336},
                      intervention={"patch_lengths": [16, 48, 112, 336]})
    run_experiment(cfg, RunDirectory(tmp_path))
    rows = list(csv.DictReader(open(tmp_path / "patch_sweep.csv")))
    assert [(int(r["patch_length"]), int(r["tokens"])) for r in rows] == [(16, 21), (48, 7), (112, 3), (336, 1)]


def test_block_sweep_and_embedding_grid_shapes(tmp_path):
    run_experiment(tiny_config("block-sweep", intervention={"block_counts": [1, 2, 3, 4, 6]}), RunDirectory(tmp_path / "b"))
    assert len(list(csv.DictReader(open(tmp_path / "b" / "block_sweep.csv")))) == 5
    run_experiment(tiny_config("embed-variants", intervention={}), RunDirectory(tmp_path / "e"))
    grid = list(csv.reader(open(tmp_path / "e" / "embed_variants_grid.csv")))
    assert grid[0] == ["mode", "linear", "conv", "mlp", "residual"]
    assert [r[0] for r in grid[1:]] == ["raw", "mean"]


def test_trivial_grid_equals_baseline(tmp_path):
    cfg = tiny_config("perturb-grid", intervention={"alphas": [0.0], "etas": [0.0]})
    report = run_experiment(cfg, RunDirectory(tmp_path))
    stats = report.summary["per_seed"]["0"]
    assert stats["attention_max_mse"] == stats["ffn_max_mse"] == stats["baseline_mse"]


def test_grid_from_checkpoint_matches_in_run_model(tmp_path):
    first = run_experiment(tiny_config("perturb-grid"), RunDirectory(tmp_path / "a"))
    ckpt = tmp_path / "a" / first.metrics["cells"]["model_s0"]["checkpoint"]
    cfg = tiny_config("perturb-grid", intervention={**SMALL_INTERVENTIONS["perturb-grid"],
                                                    "train": False, "checkpoint": str(ckpt)})
    resumed = run_experiment(cfg, RunDirectory(tmp_path / "b"))
    assert resumed.grids == first.grids
    a = (tmp_path / "a" / "perturb_grid.csv").read_bytes()
    assert (tmp_path / "b" / "perturb_grid.csv").read_bytes() == a


def test_toy_attention_capture_replays(tmp_path):
    from tsdegen.analysis import AttentionCapture, event_attention_mass

    cfg = tiny_config("toy-attention")
    report = run_experiment(cfg, RunDirectory(tmp_path))
    labels, _ = load_data(cfg)
    cap = AttentionCapture.load(tmp_path / report.captures["0"]["capture_file"])
    replay = event_attention_mass(cap, labels).summary(seed=0)
    assert json.loads(json.dumps(replay)) == report.to_dict()["captures"]["0"]["event_attention"]
    assert report.captures["0"]["state_density"]["flag"] in ("ok", "degenerate prediction")


def test_rerun_is_bitwise_identical(tmp_path):
    cfg = tiny_config("smooth-blocks", seeds=[0, 1])
    run_experiment(cfg, RunDirectory(tmp_path / "a"))
    run_experiment(cfg, RunDirectory(tmp_path / "b"))
    for name in ("report.json", "smooth_blocks.csv", "smooth_blocks.meta.json", "checkpoints/model_s1.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_worker_pool_matches_serial(tmp_path):
    cfg = tiny_config("replace", seeds=[0, 1])
    serial = run_experiment(cfg, RunDirectory(tmp_path / "s"), workers=1)
    pooled = run_experiment(cfg, RunDirectory(tmp_path / "p"), workers=2)
    assert serial.to_json() == pooled.to_json()
