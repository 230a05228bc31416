"""Distribution of forecast event amplitudes, grouped by the true event state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset.toy import LabeledSeries, StateMachine, ToySeriesConfig, extract_event_amplitude
from ..dataset.windows import Split
from ..errors import ContractError

DEFAULT_BINS = np.linspace(-1.0, 4.0, 101)
DESK_SAMPLES = 5120
PAPER_SAMPLES = 51200
MODE_TOLERANCE = 0.25


@dataclass
class StateDensity:
    """Histogram of extracted forecast amplitudes per true next state.

    ``counts[s]`` sums to the number of samples whose true state is ``s``.
    ``deterministic[s]`` is the subset following a state whose transition is certain.
    """

    bins: np.ndarray
    counts: dict[int, np.ndarray] = field(default_factory=dict)
    estimates: dict[int, np.ndarray] = field(default_factory=dict)
    deterministic: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bins[1:] + self.bins[:-1])

    def samples(self, state: int) -> int:
        return int(self.estimates[state].size)

    def density(self, state: int) -> np.ndarray:
        """Counts normalized to unit area."""
        c = self.counts[state].astype(np.float64)
        total = c.sum()
        return c / (total * np.diff(self.bins)) if total else c

    def mode(self, state: int, deterministic_only: bool = False) -> float:
        values = self.deterministic[state] if deterministic_only else self.estimates[state]
        if values.size == 0:
            return float("nan")
        c, _ = np.histogram(values, self.bins)
        return float(self.centers[int(np.argmax(c))])

    def degenerate_states(self, tol: float = MODE_TOLERANCE) -> list[int]:
        """States reached by a certain transition whose density mode misses the true amplitude."""
        bad = []
        for s in sorted(self.deterministic):
            if self.deterministic[s].size and abs(self.mode(s, deterministic_only=True) - s) > tol:
                bad.append(s)
        return bad

    @property
    def degenerate(self) -> bool:
        return bool(self.degenerate_states())

    def rows(self) -> list[tuple]:
        """(state, bin_lo, bin_hi, count) rows for CSV export."""
        out = []
        for s in sorted(self.counts):
            for lo, hi, c in zip(self.bins[:-1], self.bins[1:], self.counts[s]):
                out.append((s, float(lo), float(hi), int(c)))
        return out

    def summary(self) -> dict:
        return {
            "samples": {str(s): self.samples(s) for s in sorted(self.estimates)},
            "mean": {str(s): float(self.estimates[s].mean()) if self.samples(s) else None for s in sorted(self.estimates)},
            "mode": {str(s): self.mode(s) for s in sorted(self.estimates)},
            "degenerate_states": self.degenerate_states(),
            "flag": "degenerate prediction" if self.degenerate else "ok",
        }


def _first_future_event(labels: LabeledSeries, start: int, stop: int) -> int:
    """Index into the label arrays of the first event fully inside [start, stop), or -1."""
    ev = labels.event_start_indices
    k = int(np.searchsorted(ev, start, side="left"))
    if k < len(ev) and ev[k] + labels.event_span <= stop:
        return k
    return -1


def state_density_from_forecasts(forecasts: np.ndarray, forecast_starts: np.ndarray, labels: LabeledSeries,
                                 config: ToySeriesConfig, machine: StateMachine | None = None,
                                 bins: np.ndarray = DEFAULT_BINS) -> StateDensity:
    """Bin the amplitude of the first complete event inside each forecast.

    ``forecasts`` is (N, H) on the raw scale and ``forecast_starts`` the absolute
    index of each forecast's first step.
    """
    machine = machine or StateMachine()
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if forecasts.ndim != 2:
        raise ContractError(f"forecasts must be (N, H), got {forecasts.shape}")
    H = forecasts.shape[1]
    if H < config.event_period + config.event_span - 1:
        raise ContractError(
            f"horizon {H} cannot always hold a full event (needs >= {config.event_period + config.event_span - 1})")
    est: dict[int, list[float]] = {s: [] for s in machine.states}
    det: dict[int, list[float]] = {s: [] for s in machine.states}
    for f, t0 in zip(forecasts, np.asarray(forecast_starts, dtype=np.int64)):
        k = _first_future_event(labels, int(t0), int(t0) + H)
        if k < 0:
            continue
        e = int(labels.event_start_indices[k])
        state = int(labels.event_states[k])
        amp = extract_event_amplitude(f, labels.carrier, e - int(t0), config, t0=int(t0))
        est[state].append(amp)
        if k > 0 and machine.is_deterministic(int(labels.event_states[k - 1])):
            det[state].append(amp)
    out = StateDensity(np.asarray(bins, dtype=np.float64))
    for s in machine.states:
        values = np.asarray(est[s])
        out.estimates[s] = values
        out.deterministic[s] = np.asarray(det[s])
        # out-of-range amplitudes are clipped into the edge bins so counts sum to the sample count
        clipped = np.clip(values, out.bins[0], np.nextafter(out.bins[-1], -np.inf))
        out.counts[s] = np.histogram(clipped, out.bins)[0]
    return out


def predicted_state_density(model, split: Split, labels: LabeledSeries, config: ToySeriesConfig,
                            machine: StateMachine | None = None, max_samples: int = DESK_SAMPLES,
                            bins: np.ndarray = DEFAULT_BINS, batch_size: int = 32) -> StateDensity:
    """Forecast the first ``max_samples`` windows of ``split`` and bin their next-event amplitudes."""
    if labels is None:
        raise ContractError("state density needs event labels")
    n = min(max_samples, len(split))
    L = split.inputs.shape[1]
    if split.targets.shape[1] < config.event_period + config.event_span - 1:
        raise ContractError("horizon too short to contain a complete future event")
    preds = []
    for lo in range(0, n, batch_size):
        idx = slice(lo, min(n, lo + batch_size))
        preds.append(split.denormalize(model.forward(split.inputs[idx]).data, idx))
    forecasts = np.concatenate(preds, axis=0)[:, :, 0]
    return state_density_from_forecasts(forecasts, split.starts[:n] + L, labels, config, machine, bins)
