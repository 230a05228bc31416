import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsdegen.dataset import (
    StateMachine,
    ToySeriesConfig,
    count_windows,
    extract_event_amplitude,
    generate_toy,
    load_csv,
    make_windows,
    next_state,
    unit_event_area,
    write_csv,
)
from tsdegen.errors import ContractError


# ---------------------------------------------------------------- state machine

@pytest.mark.parametrize("current, expected", [(1, 2), (2, 3), (3, 0)])
def test_deterministic_rows(current, expected):
    rng = np.random.default_rng(0)
    machine = StateMachine()
    draws = {next_state(machine, current, rng) for _ in range(10_000)}
    assert draws == {expected}


def test_random_row_matches_transition_probabilities():
    rng = np.random.default_rng(1)
    machine = StateMachine()
    draws = np.array([next_state(machine, 0, rng) for _ in range(10_000)])
    freq = np.bincount(draws, minlength=4) / draws.size
    # binomial std at p=0.5, n=1e4 is 0.005
    np.testing.assert_allclose(freq, [0.5, 0.5, 0.0, 0.0], atol=0.02)


def test_identity_machine_keeps_state():
    machine = StateMachine.identity()
    rng = np.random.default_rng(0)
    assert all(next_state(machine, s, rng) == s for s in range(4))


def test_unknown_state_rejected():
    with pytest.raises(ContractError):
        next_state(StateMachine(), 7, np.random.default_rng(0))


def test_transition_rows_must_be_distributions():
    with pytest.raises(ContractError):
        StateMachine([0, 1], [[0.5, 0.4], [0.0, 1.0]])


def test_stationary_distribution_matches_power_iteration():
    machine = StateMachine()
    P = machine.matrix
    pi = np.full(4, 0.25)
    for _ in range(2000):
        pi = pi @ P
    # 0 -> {0,1}: pi0 = 0.4, pi1 = pi2 = pi3 = 0.2
    np.testing.assert_allclose(machine.stationary_distribution(), pi, atol=1e-9)
    np.testing.assert_allclose(pi, [0.4, 0.2, 0.2, 0.2], atol=1e-9)


# ---------------------------------------------------------------- generator

def test_config_validation():
    with pytest.raises(ContractError):
        ToySeriesConfig(event_period=81)
    with pytest.raises(ContractError):
        ToySeriesConfig(noise_sigma=-1.0)
    with pytest.raises(ContractError):
        ToySeriesConfig(length=40)
    assert ToySeriesConfig().event_span == 10


def test_carrier_value_without_events_or_noise():
    cfg = ToySeriesConfig(noise_sigma=0.0, length=400)
    series = generate_toy(cfg, StateMachine.identity())  # initial state 0 forever
    assert series.values[25] == pytest.approx(1.0, abs=1e-15)
    t = np.arange(400)
    np.testing.assert_allclose(series.values, np.sin(2 * np.pi * 0.01 * t), atol=1e-15)


def test_event_apex_height():
    cfg = ToySeriesConfig(noise_sigma=0.0, length=400, initial_state=2)
    series = generate_toy(cfg, StateMachine.identity())
    apex = 5  # middle of the first 10-step event starting at t=0
    carrier = math.sin(2 * math.pi * 0.01 * apex)
    assert series.values[apex] == pytest.approx(carrier + 1.0, abs=1e-12)
    # symmetric linear rise and fall
    resid = series.values[:10] - np.sin(2 * np.pi * 0.01 * np.arange(10))
    np.testing.assert_allclose(resid, [0, .2, .4, .6, .8, 1, .8, .6, .4, .2], atol=1e-12)
    assert np.allclose(series.values[10:80], np.sin(2 * np.pi * 0.01 * np.arange(10, 80)))


def test_generation_is_deterministic():
    a = generate_toy(ToySeriesConfig(length=2000, seed=5))
    b = generate_toy(ToySeriesConfig(length=2000, seed=5))
    c = generate_toy(ToySeriesConfig(length=2000, seed=6))
    assert a.values.tobytes() == b.values.tobytes()
    assert np.array_equal(a.event_states, b.event_states)
    assert a.values.tobytes() != c.values.tobytes()


def test_labels_are_consistent():
    cfg = ToySeriesConfig(length=1000, event_offset=7)
    s = generate_toy(cfg)
    assert len(s.event_states) == len(s.event_start_indices)
    assert np.all((s.event_start_indices - 7) % 80 == 0)
    assert s.state_at(int(s.event_start_indices[3]) + 4) == s.event_states[3]
    assert s.state_at(int(s.event_start_indices[3]) + 10) is None


def test_state_frequencies_match_stationary_distribution():
    # one-step events keep 1e5 cycles cheap
    cfg = ToySeriesConfig(event_period=8, event_duty_ratio=8, length=8 * 100_000, noise_sigma=0.0, seed=3)
    s = generate_toy(cfg)
    assert len(s.event_states) == 100_000
    freq = np.bincount(s.event_states, minlength=4) / len(s.event_states)
    np.testing.assert_allclose(freq, StateMachine().stationary_distribution(), atol=0.01)


def test_export_csv(tmp_path):
    s = generate_toy(ToySeriesConfig(length=200, noise_sigma=0.0, initial_state=1))
    path = tmp_path / "toy.csv"
    s.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "value", "event_state"]
    assert rows[1][2] == "1" and rows[11][2] == ""
    assert rows[81][2] == "2"
    assert float(rows[51][1]) == s.values[50]


# ---------------------------------------------------------------- event amplitude oracle

def test_unit_area_default():
    # triangle area 0.5 * 10 * 0.5
    assert unit_event_area(ToySeriesConfig()) == pytest.approx(2.5, abs=1e-12)


@pytest.mark.parametrize("state", [0, 1, 2, 3])
def test_extract_noiseless_event(state):
    cfg = ToySeriesConfig(noise_sigma=0.0, length=400, initial_state=state)
    s = generate_toy(cfg, StateMachine.identity())
    est = extract_event_amplitude(s.values[80:200], cfg.carrier, 0, cfg, t0=80)
    assert est == pytest.approx(state, abs=1e-9)


def test_extract_recovers_every_state_noiseless():
    cfg = ToySeriesConfig(noise_sigma=0.0, length=8000)
    s = generate_toy(cfg)
    est = [extract_event_amplitude(s.values, cfg.carrier, int(i), cfg) for i in s.event_start_indices]
    assert np.max(np.abs(np.array(est) - s.event_states)) < 1e-9


def test_extract_is_unbiased_under_noise():
    cfg = ToySeriesConfig(noise_sigma=0.025, length=80 * 10_000, seed=11)
    s = generate_toy(cfg)
    est = np.array([extract_event_amplitude(s.values, cfg.carrier, int(i), cfg) for i in s.event_start_indices])
    assert abs(np.mean(est - s.event_states)) < 0.05


def test_extract_rejects_short_window():
    cfg = ToySeriesConfig()
    with pytest.raises(ContractError):
        extract_event_amplitude(np.zeros(15), cfg.carrier, 8, cfg)


# ---------------------------------------------------------------- csv

def test_load_csv_order_and_shape(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,y\n1,2\n3,4\n5,6\n")
    values, names = load_csv(p, date_column=None)
    assert names == ["x", "y"]
    np.testing.assert_array_equal(values, [[1, 2], [3, 4], [5, 6]])


def test_load_csv_drops_date_column(tmp_path):
    p = tmp_path / "ett.csv"
    p.write_text("date,HUFL,OT\n2016-07-01 00:00:00,5.8,30.5\n2016-07-01 01:00:00,5.6,27.8\n")
    values, names = load_csv(p, "date")
    assert names == ["HUFL", "OT"] and values.shape == (2, 2)


def test_load_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.normal(size=(50, 3))
    p = tmp_path / "rt.csv"
    write_csv(p, data, ["a", "b", "c"], dates=[f"d{i}" for i in range(50)])
    back, names = load_csv(p, "date")
    assert names == ["a", "b", "c"]
    np.testing.assert_array_equal(back, data)


def test_load_csv_reports_bad_cell(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("date,a,b\nx,1,2\ny,3,oops\n")
    with pytest.raises(ContractError, match=r"row 3.*'b'"):
        load_csv(p)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


# ---------------------------------------------------------------- windows

def test_window_count_formula():
    assert count_windows(1000, 336, 96) == 569


def test_boundary_length_yields_one_sample():
    ds = make_windows(np.arange(432.0), 336, 96)
    assert sum(ds.sizes().values()) == 1


def test_windows_are_contiguous_and_stride_one():
    series = np.arange(1000.0)
    ds = make_windows(series, 336, 96)
    tr = ds["train"]
    np.testing.assert_array_equal(np.diff(tr.starts), 1)
    for i in (0, 17, len(tr) - 1):
        s0 = tr.starts[i]
        np.testing.assert_array_equal(tr.inputs[i, :, 0], series[s0:s0 + 336])
        np.testing.assert_array_equal(tr.targets[i, :, 0], series[s0 + 336:s0 + 432])


def test_normalized_windows_are_standardized_and_invertible():
    rng = np.random.default_rng(2)
    series = np.cumsum(rng.normal(size=(900, 2)), axis=0) + 10.0
    ds = make_windows(series, 96, 24, normalize=True)
    te = ds["test"]
    np.testing.assert_allclose(te.inputs.mean(axis=1), 0.0, atol=1e-9)
    np.testing.assert_allclose(te.inputs.std(axis=1), 1.0, atol=1e-9)
    i = 5
    s0 = te.starts[i]
    np.testing.assert_allclose(te.raw_inputs()[i], series[s0:s0 + 96], atol=1e-9)
    np.testing.assert_allclose(te.raw_targets()[i], series[s0 + 96:s0 + 120], atol=1e-9)


def test_too_short_series_rejected():
    with pytest.raises(ContractError):
        make_windows(np.zeros(100), 96, 24)


@settings(max_examples=60, deadline=None)
@given(
    length=st.integers(40, 400),
    lookback=st.integers(1, 30),
    horizon=st.integers(1, 30),
    f_train=st.floats(0.0, 1.0),
    f_val=st.floats(0.0, 1.0),
)
def test_split_targets_are_disjoint(length, lookback, horizon, f_train, f_val):
    f_val = f_val * (1.0 - f_train)
    fractions = (f_train, f_val, 1.0 - f_train - f_val)
    if length < lookback + horizon:
        return
    ds = make_windows(np.arange(float(length)), lookback, horizon, split=fractions)
    regions = []
    for name in ("train", "val", "test"):
        sp = ds[name]
        if len(sp):
            regions.append((int(sp.starts.min()) + lookback, int(sp.starts.max()) + lookback + horizon))
    for (a0, a1), (b0, b1) in zip(regions, regions[1:]):
        assert a1 <= b0
