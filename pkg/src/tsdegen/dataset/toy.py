"""Synthetic carrier + state-machine event series with labelled events."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class CarrierParams:
    amplitude: float = 1.0
    frequency: float = 0.01
    phase: float = 0.0
    offset: float = 0.0

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase) + self.offset


@dataclass(frozen=True)
class ToySeriesConfig:
    carrier_amplitude: float = 1.0
    carrier_frequency: float = 0.01
    carrier_phase: float = 0.0
    carrier_offset: float = 0.0
    event_period: int = 80
    event_duty_ratio: int = 8
    event_amplitude_factor: float = 0.5
    event_offset: int = 0
    noise_sigma: float = 0.025
    length: int = 8000
    seed: int = 0
    initial_state: int = 0

    def __post_init__(self):
        if self.event_period <= 0 or self.event_duty_ratio <= 0:
            raise ContractError("event_period and event_duty_ratio must be positive")
        if self.event_period % self.event_duty_ratio:
            raise ContractError(
                f"event_period {self.event_period} is not divisible by duty ratio {self.event_duty_ratio}")
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")
        if self.length < self.event_period:
            raise ContractError(f"length {self.length} shorter than one event period {self.event_period}")
        if not 0 <= self.event_offset < self.event_period:
            raise ContractError("event_offset must lie in [0, event_period)")

    @property
    def event_span(self) -> int:
        return self.event_period // self.event_duty_ratio

    @property
    def carrier(self) -> CarrierParams:
        return CarrierParams(self.carrier_amplitude, self.carrier_frequency,
                             self.carrier_phase, self.carrier_offset)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StateMachine:
    """Discrete Markov chain over amplitude levels.

    ``transition[i][j]`` is the probability of moving from ``states[i]`` to
    ``states[j]`` at the next event cycle.
    """

    states: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    transition: list[list[float]] = field(default_factory=lambda: [
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 0.0],
    ])

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=np.float64)
        n = len(self.states)
        if P.shape != (n, n):
            raise ContractError(f"transition matrix must be {n}x{n}, got {P.shape}")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise ContractError("each transition row must be a probability distribution")
        self._P = P
        self._cum = np.cumsum(P, axis=1)
        self._cum[:, -1] = 1.0
        self._index = {s: i for i, s in enumerate(self.states)}

    @classmethod
    def identity(cls, states: Sequence[int] = (0, 1, 2, 3)) -> "StateMachine":
        n = len(states)
        return cls(list(states), np.eye(n).tolist())

    @property
    def matrix(self) -> np.ndarray:
        return self._P.copy()

    def is_deterministic(self, state: int) -> bool:
        return bool(np.max(self._P[self._index_of(state)]) == 1.0)

    def _index_of(self, state: int) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise ContractError(f"unknown state {state!r}; known states {self.states}") from None

    def next_state(self, current: int, rng: np.random.Generator) -> int:
        i = self._index_of(current)
        row = self._P[i]
        hit = np.flatnonzero(row == 1.0)
        if hit.size:
            return self.states[int(hit[0])]
        u = rng.random()
        return self.states[int(np.searchsorted(self._cum[i], u, side="right"))]

    def stationary_distribution(self) -> np.ndarray:
        """Left eigenvector of the transition matrix for eigenvalue 1, normalized."""
        w, vecs = np.linalg.eig(self._P.T)
        k = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(vecs[:, k])
        return pi / pi.sum()

    def to_dict(self) -> dict:
        return {"states": list(self.states), "transition": [list(map(float, r)) for r in self.transition]}


def next_state(machine: StateMachine, current: int, rng: np.random.Generator) -> int:
    return machine.next_state(current, rng)


@dataclass
class LabeledSeries:
    values: np.ndarray
    event_states: np.ndarray
    event_start_indices: np.ndarray
    event_span: int
    carrier: CarrierParams

    def __len__(self) -> int:
        return self.values.shape[0]

    def state_at(self, t: int) -> int | None:
        """State label of the event covering step ``t``, or None outside events."""
        k = np.searchsorted(self.event_start_indices, t, side="right") - 1
        if k >= 0 and t < self.event_start_indices[k] + self.event_span:
            return int(self.event_states[k])
        return None

    def events_in(self, start: int, stop: int) -> list[tuple[int, int]]:
        """(start_index, state) for every event whose span lies fully inside [start, stop)."""
        s = self.event_start_indices
        mask = (s >= start) & (s + self.event_span <= stop)
        return [(int(a), int(b)) for a, b in zip(s[mask], self.event_states[mask])]

    def to_csv(self, path: str | Path) -> None:
        labels = np.full(len(self), -1, dtype=np.int64)
        for s0, st in zip(self.event_start_indices, self.event_states):
            labels[s0:s0 + self.event_span] = st
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value", "event_state"])
            for t, (v, lab) in enumerate(zip(self.values, labels)):
                w.writerow([t, repr(float(v)), "" if lab < 0 else int(lab)])


def triangle_template(span: int) -> np.ndarray:
    """Unit-height symmetric hat sampled at the ``span`` integer steps of one event."""
    j = np.arange(span, dtype=np.float64)
    half = span / 2.0
    return 1.0 - np.abs(j - half) / half


def unit_event_area(config: ToySeriesConfig) -> float:
    """Integral of the hat for state 1: span/2 * amplitude factor (2.5 with defaults)."""
    return float(triangle_template(config.event_span).sum() * config.event_amplitude_factor)


def generate_toy(config: ToySeriesConfig, machine: StateMachine | None = None) -> LabeledSeries:
    machine = machine or StateMachine()
    state_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(2))
    n = config.length
    t = np.arange(n, dtype=np.float64)
    values = config.carrier(t)

    span = config.event_span
    hat = triangle_template(span) * config.event_amplitude_factor
    starts = np.arange(config.event_offset, n - span + 1, config.event_period, dtype=np.int64)
    states = np.empty(starts.size, dtype=np.int64)
    s = config.initial_state
    for k, s0 in enumerate(starts):
        if k:
            s = machine.next_state(s, state_rng)
        states[k] = s
        values[s0:s0 + span] += s * hat

    if config.noise_sigma > 0:
        values = values + noise_rng.normal(0.0, config.noise_sigma, size=n)
    return LabeledSeries(values, states, starts, span, config.carrier)


def extract_event_amplitude(window: np.ndarray, carrier: CarrierParams, event_index: int,
                            config: ToySeriesConfig | None = None, t0: int = 0) -> float:
    """Estimate an event's state from the carrier-subtracted area under its span.

    ``window[i]`` is the series at absolute step ``t0 + i``; ``event_index`` is
    the offset of the event start inside ``window``.
    """
    config = config or ToySeriesConfig()
    window = np.asarray(window, dtype=np.float64).reshape(-1)
    span = config.event_span
    if event_index < 0 or event_index + span > window.size:
        raise ContractError(
            f"event span [{event_index}, {event_index + span}) exceeds window of length {window.size}")
    seg = window[event_index:event_index + span]
    residual = seg - carrier(np.arange(t0 + event_index, t0 + event_index + span))
    return float(residual.sum() / unit_event_area(config))
