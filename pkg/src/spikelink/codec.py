"""Continuous <-> spike conversion.

Encoders turn a frame in [-1, 1]^n into one spike train per neuron; the
decoder low-pass filters spike trains with a causal exponential kernel and
maps the activities through a linear readout.  :class:`ChannelMap` adapts the
width of a continuous signal to the width of the receiving population.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .core import ContinuousFrame, SimClock, SpikeBatch, clamp_frame
from .errors import BadRange, DimensionMismatch, IndexOutOfRange, WidthMismatch
from .rng import StreamBank, exponential_isi

__all__ = [
    "RateEncoderParams",
    "instantaneous_rate",
    "RegularEncoder",
    "PoissonEncoder",
    "ExponentialFilter",
    "LinearReadout",
    "ChannelMap",
    "regular_encode_step",
    "poisson_encode_step",
    "filter_step",
    "readout",
    "apply_channel_map",
    "load_matrix_csv",
    "save_matrix_csv",
]

DEFAULT_TAU_DEC = 0.03
# phase values this close to an integer are treated as landing on it
_PHASE_SNAP = 1e-12


@dataclass(frozen=True)
class RateEncoderParams:
    v_min: float
    v_max: float
    n_neurons: int

    def __post_init__(self):
        if not (np.isfinite(self.v_min) and np.isfinite(self.v_max)):
            raise BadRange("encoder rates must be finite")
        if self.v_min < 0 or not self.v_min < self.v_max:
            raise BadRange(f"need 0 <= v_min < v_max, got [{self.v_min}, {self.v_max}]")
        if self.n_neurons < 1:
            raise BadRange("n_neurons must be positive")


def instantaneous_rate(params: RateEncoderParams, value):
    """Firing rate in Hz for input(s) in [-1, 1]; the reciprocal of the regular ISI."""
    return params.v_min + (params.v_max - params.v_min) * (1.0 + np.asarray(value)) / 2.0


def _input_values(frame, n):
    v = frame.values if isinstance(frame, ContinuousFrame) else np.asarray(frame, dtype=float)
    if v.size != n:
        raise WidthMismatch(n, v.size)
    return v


def _expand_counts(counts):
    """For per-neuron spike counts return (neuron ids, index within neuron)."""
    total = int(counts.sum())
    ids = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    starts = np.cumsum(counts) - counts
    j = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    return ids, j


def _last_before(t_end):
    return np.nextafter(t_end, -np.inf)


class RegularEncoder:
    """Deterministic rate encoder built on a per-neuron phase accumulator.

    Each tick the phase advances by ``rate * delta_t``; a spike is emitted at
    every integer the accumulated phase passes (the starting integer
    included), at the linearly interpolated time.  Under constant input the
    inter-spike interval is exactly ``1 / rate``.  With ``initial_phase=0`` a
    neuron with positive rate fires at the start of its first active tick.
    """

    def __init__(self, params: RateEncoderParams, initial_phase="zero", seed=0):
        self.params = params
        n = params.n_neurons
        if isinstance(initial_phase, str):
            if initial_phase == "zero":
                self.phase = np.zeros(n)
            elif initial_phase == "random":
                self.phase = StreamBank(seed, n).draw()
            else:
                raise ValueError(f"unknown initial_phase {initial_phase!r}")
        else:
            self.phase = np.broadcast_to(np.asarray(initial_phase, dtype=float), (n,)).copy()
        if np.any(self.phase < 0) or np.any(self.phase >= 1):
            raise BadRange("phase must lie in [0, 1)")

    def step(self, frame, clock: SimClock) -> SpikeBatch:
        rate = instantaneous_rate(self.params, _input_values(frame, self.params.n_neurons))
        p = self.phase
        q = p + rate * clock.delta_t
        qr = np.round(q)
        q = np.where(np.abs(q - qr) <= _PHASE_SNAP, qr, q)
        first = np.ceil(p)
        counts = (np.ceil(q) - first).astype(np.int64)
        self.phase = q - np.floor(q)
        if not counts.any():
            return SpikeBatch.empty(clock.tick_index)
        ids, j = _expand_counts(counts)
        t0 = clock.time
        times = t0 + (first[ids] + j - p[ids]) / rate[ids]
        times = np.minimum(times, _last_before(clock.t_end))
        return SpikeBatch.from_arrays(clock.tick_index, ids, times)


class PoissonEncoder:
    """Inhomogeneous Poisson encoder realized by thinning.

    Candidate events are proposed at rate ``v_max`` and kept with probability
    ``rate(t) / v_max``.  Every neuron draws from its own counter-based stream.
    """

    def __init__(self, params: RateEncoderParams, seed=0, first_stream=0):
        self.params = params
        self.bank = StreamBank(seed, params.n_neurons, first_stream)
        self.next_proposal = exponential_isi(params.v_max, 1.0 - self.bank.draw())

    def step(self, frame, clock: SimClock) -> SpikeBatch:
        v_max = self.params.v_max
        accept_p = instantaneous_rate(self.params, _input_values(frame, self.params.n_neurons)) / v_max
        t_end = clock.t_end
        nxt = self.next_proposal
        ids, times = [], []
        active = np.flatnonzero(nxt < t_end)
        while active.size:
            tp = nxt[active]
            keep = self.bank.draw(active) < accept_p[active]
            ids.append(active[keep])
            times.append(tp[keep])
            nxt[active] = tp + exponential_isi(v_max, 1.0 - self.bank.draw(active))
            active = active[nxt[active] < t_end]
        if not ids:
            return SpikeBatch.empty(clock.tick_index)
        return SpikeBatch.from_arrays(clock.tick_index, np.concatenate(ids), np.concatenate(times))


def regular_encode_step(state: RegularEncoder, frame, clock: SimClock) -> SpikeBatch:
    return state.step(frame, clock)


def poisson_encode_step(state: PoissonEncoder, frame, clock: SimClock) -> SpikeBatch:
    return state.step(frame, clock)


class ExponentialFilter:
    """Causal exponential low-pass of each spike train, ``a_n(t) = sum_i exp(-(t - t_i)/tau)``.

    Decay between evaluation points uses the closed-form propagator, so the
    result does not depend on how often the filter is evaluated.
    """

    def __init__(self, n_neurons: int, tau_dec: float = DEFAULT_TAU_DEC, resolution: float = 1e-3):
        if not tau_dec > 0:
            raise BadRange("tau_dec must be positive")
        self.tau_dec = float(tau_dec)
        self.resolution = float(resolution)
        self.activities = np.zeros(int(n_neurons))
        self.last_time = 0.0

    def step(self, batch: SpikeBatch, clock: SimClock) -> np.ndarray:
        """Add the batch's spikes and return activities at the end of ``clock``'s tick."""
        t_eval = clock.t_end
        if t_eval < self.last_time:
            raise ValueError("filter evaluated backwards in time")
        if t_eval > self.last_time:
            self.activities *= np.exp(-(t_eval - self.last_time) / self.tau_dec)
            self.last_time = t_eval
        if len(batch):
            if batch.times[-1] > t_eval:
                raise ValueError("batch contains spikes after the evaluation time")
            contrib = np.exp(-(t_eval - batch.times) / self.tau_dec)
            self.activities += np.bincount(batch.neuron_ids, contrib, minlength=self.activities.size)
        return self.activities.copy()

    def value_at(self, t: float) -> np.ndarray:
        """Activities at ``t >= last_time`` assuming no further spikes."""
        if t < self.last_time:
            raise ValueError("cannot evaluate before the last update")
        return self.activities * np.exp(-(t - self.last_time) / self.tau_dec)

    def sample_grid(self, t_end: float) -> tuple[np.ndarray, np.ndarray]:
        """Activities on the ``resolution`` grid from ``last_time`` up to ``t_end``."""
        k = int(np.floor((t_end - self.last_time) / self.resolution + 1e-9))
        ts = self.last_time + self.resolution * np.arange(k + 1)
        return ts, self.activities[None, :] * np.exp(-(ts[:, None] - self.last_time) / self.tau_dec)


def filter_step(state: ExponentialFilter, batch: SpikeBatch, clock: SimClock) -> np.ndarray:
    return state.step(batch, clock)


@dataclass(frozen=True, eq=False)
class LinearReadout:
    """Weights ``phi[n, k]`` from neuron ``n`` to output ``k`` plus an optional offset."""

    phi: np.ndarray
    bias: np.ndarray | None = None
    names: tuple = field(default=())

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=np.float64))
        if not np.all(np.isfinite(phi)):
            raise BadRange("readout weights must be finite")
        object.__setattr__(self, "phi", phi)
        if self.bias is not None:
            b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
            if b.size != phi.shape[1]:
                raise DimensionMismatch("bias length must equal the number of outputs")
            object.__setattr__(self, "bias", b)

    @property
    def n_inputs(self) -> int:
        return self.phi.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.phi.shape[1]

    def raw(self, activities) -> np.ndarray:
        a = np.asarray(activities, dtype=np.float64)
        if a.shape != (self.n_inputs,):
            raise DimensionMismatch(f"{a.size} activities for a readout with {self.n_inputs} inputs")
        z = a @ self.phi
        if self.bias is not None:
            z = z + self.bias
        return z


def readout(activities, weights: LinearReadout) -> np.ndarray:
    return np.clip(weights.raw(activities), -1.0, 1.0)


class ChannelMap:
    """Weighted mapping from ``m`` input channels to ``n`` output channels.

    ``mapping[j]`` lists the ``(input index, weight)`` pairs feeding output
    ``j``.  Outputs are clamped to [-1, 1].
    """

    def __init__(self, mapping, m: int):
        self.m = int(m)
        rows, cols, vals = [], [], []
        for j, pairs in enumerate(mapping):
            for i, w in pairs:
                if not 0 <= i < self.m:
                    raise IndexOutOfRange(f"output {j} references input {i}, width is {self.m}")
                if not np.isfinite(w):
                    raise BadRange("channel weights must be finite")
                rows.append(j)
                cols.append(int(i))
                vals.append(float(w))
        self.n = len(mapping)
        self._matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(self.n, self.m))
        self._row = None

    @classmethod
    def identity(cls, m: int) -> "ChannelMap":
        return cls([[(i, 1.0)] for i in range(m)], m)

    @classmethod
    def split(cls, m: int, parts: int = 2) -> "ChannelMap":
        """Average contiguous blocks of inputs; ``parts=2`` gives the two-hemisphere map."""
        edges = np.linspace(0, m, parts + 1).round().astype(int)
        return cls(
            [[(i, 1.0 / (hi - lo)) for i in range(lo, hi)] for lo, hi in zip(edges[:-1], edges[1:])],
            m,
        )

    @classmethod
    def hemispheres(cls, m: int) -> "ChannelMap":
        return cls.split(m, 2)

    @classmethod
    def fan_in(cls, m: int, n: int, weights=None) -> "ChannelMap":
        """Every one of ``n`` outputs receives all ``m`` inputs (mean by default).

        Stored as a single shared row, so ``n`` can be large.
        """
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (m,) or not np.all(np.isfinite(w)):
            raise BadRange("fan-in weights must be a finite vector of length m")
        obj = cls.__new__(cls)
        obj.m, obj.n = int(m), int(n)
        obj._matrix = None
        obj._row = w
        return obj

    @classmethod
    def from_matrix(cls, weights) -> "ChannelMap":
        """Build from a dense ``m x n`` matrix (rows = inputs, columns = outputs)."""
        w = np.atleast_2d(np.asarray(weights, dtype=float))
        m, n = w.shape
        return cls([[(i, w[i, j]) for i in range(m) if w[i, j] != 0.0] for j in range(n)], m)

    def to_matrix(self) -> np.ndarray:
        if self._row is not None:
            return np.repeat(self._row[:, None], self.n, axis=1)
        return self._matrix.toarray().T

    def apply(self, values) -> np.ndarray:
        x = np.asarray(values, dtype=np.float64)
        if x.size != self.m:
            raise WidthMismatch(self.m, x.size)
        if self._row is not None:
            return np.full(self.n, np.clip(float(self._row @ x), -1.0, 1.0))
        return clamp_frame(self._matrix @ x)


def apply_channel_map(cmap: ChannelMap, frame: ContinuousFrame) -> ContinuousFrame:
    return ContinuousFrame(frame.tick_index, cmap.apply(frame.values))


def load_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a weight matrix: header row of output names, one row per neuron."""
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    names = [h.strip() for h in rows[0]]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    if data.size and data.shape[1] != len(names):
        raise DimensionMismatch(f"{path}: {data.shape[1]} columns but {len(names)} names")
    return names, data.reshape(-1, len(names))


def save_matrix_csv(path, matrix, names=None) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    names = list(names) if names is not None else [f"out{k}" for k in range(m.shape[1])]
    with open(Path(path), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names)
        for row in m:
            w.writerow([repr(float(x)) for x in row])
