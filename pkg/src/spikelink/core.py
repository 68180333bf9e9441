"""Signal, spike and clock value types passed between stages.

Spike batches are stored as parallel arrays (neuron ids, times) rather than
lists of event objects so that populations of 10^5..10^6 neurons can be moved
through the pipeline at numpy speed. :class:`SpikeEvent` is the scalar view.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import NonFinite, RangeViolation, WidthMismatch

__all__ = [
    "SpikeEvent",
    "SpikeBatch",
    "ContinuousFrame",
    "SimClock",
    "validate_frame",
    "clamp_frame",
    "merge_batches",
]


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


class SpikeEvent(NamedTuple):
    neuron_id: int
    time: float


@dataclass(frozen=True, eq=False)
class SpikeBatch:
    """All spikes emitted by one port during one tick.

    Events are kept sorted by ``(time, neuron_id)``.  Use :meth:`from_arrays`
    to build a batch from unsorted data.
    """

    tick_index: int
    neuron_ids: np.ndarray
    times: np.ndarray

    @classmethod
    def from_arrays(cls, tick_index: int, neuron_ids, times, *, presorted=False) -> "SpikeBatch":
        ids = np.asarray(neuron_ids, dtype=np.int64).reshape(-1)
        ts = np.asarray(times, dtype=np.float64).reshape(-1)
        if ids.shape != ts.shape:
            raise ValueError("neuron_ids and times must have the same length")
        if not presorted and ids.size > 1:
            order = np.lexsort((ids, ts))
            ids, ts = ids[order], ts[order]
        ids.flags.writeable = False
        ts.flags.writeable = False
        return cls(int(tick_index), ids, ts)

    @classmethod
    def from_events(cls, tick_index: int, events: Iterable[SpikeEvent]) -> "SpikeBatch":
        events = list(events)
        return cls.from_arrays(
            tick_index, [e.neuron_id for e in events], [e.time for e in events]
        )

    @classmethod
    def empty(cls, tick_index: int = -1) -> "SpikeBatch":
        return cls(int(tick_index), _frozen([], np.int64), _frozen([], np.float64))

    def __len__(self):
        return int(self.neuron_ids.size)

    @property
    def events(self) -> list[SpikeEvent]:
        return [SpikeEvent(int(i), float(t)) for i, t in zip(self.neuron_ids, self.times)]

    def __eq__(self, other):
        if not isinstance(other, SpikeBatch):
            return NotImplemented
        return (
            self.tick_index == other.tick_index
            and np.array_equal(self.neuron_ids, other.neuron_ids)
            and np.array_equal(self.times, other.times)
        )

    def shifted(self, ticks: int, delta_t: float) -> "SpikeBatch":
        """Same spikes moved ``ticks`` ticks later; order is preserved.

        Offsets within the tick are kept and the result is clipped to the new
        tick window so rounding never pushes a spike across a tick boundary.
        """
        k = self.tick_index + ticks
        lo, hi = k * delta_t, (k + 1) * delta_t
        ts = lo + (self.times - self.tick_index * delta_t)
        ts = np.clip(ts, lo, np.nextafter(hi, -np.inf))
        return SpikeBatch.from_arrays(k, self.neuron_ids, ts, presorted=True)

    def check(self, delta_t: float, n_neurons: int | None = None) -> None:
        """Raise ``ValueError`` if any batch invariant is violated."""
        if self.times.size == 0:
            return
        if not np.all(np.isfinite(self.times)) or np.any(self.times < 0):
            raise ValueError("spike times must be finite and non-negative")
        lo, hi = self.tick_index * delta_t, (self.tick_index + 1) * delta_t
        if self.times.min() < lo or self.times.max() >= hi:
            raise ValueError(f"spike times outside tick window [{lo}, {hi})")
        if np.any(self.neuron_ids < 0):
            raise ValueError("negative neuron id")
        if n_neurons is not None and np.any(self.neuron_ids >= n_neurons):
            raise ValueError("neuron id exceeds population size")
        dt = np.diff(self.times)
        di = np.diff(self.neuron_ids)
        if np.any(dt < 0) or np.any((dt == 0) & (di <= 0)):
            raise ValueError("events not strictly sorted by (time, neuron_id)")


def merge_batches(a: SpikeBatch, b: SpikeBatch, offset_b: int = 0) -> SpikeBatch:
    """Merge two batches of the same tick, optionally renumbering ``b``'s ids."""
    if a.tick_index != b.tick_index:
        raise ValueError("cannot merge batches from different ticks")
    return SpikeBatch.from_arrays(
        a.tick_index,
        np.concatenate([a.neuron_ids, b.neuron_ids + offset_b]),
        np.concatenate([a.times, b.times]),
    )


@dataclass(frozen=True, eq=False)
class ContinuousFrame:
    """A timestamped vector of values nominally in [-1, 1]."""

    tick_index: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, np.float64))

    @property
    def width(self) -> int:
        return int(self.values.size)

    def __eq__(self, other):
        if not isinstance(other, ContinuousFrame):
            return NotImplemented
        return self.tick_index == other.tick_index and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"ContinuousFrame(tick_index={self.tick_index}, values={self.values.tolist()})"


@dataclass(frozen=True)
class SimClock:
    """Simulation clock; time is always derived from the tick index."""

    delta_t: float
    tick_index: int = 0

    def __post_init__(self):
        if not (self.delta_t > 0 and np.isfinite(self.delta_t)):
            raise ValueError("delta_t must be positive and finite")
        if self.tick_index < 0:
            raise ValueError("tick_index must be >= 0")

    @property
    def time(self) -> float:
        return self.tick_index * self.delta_t

    @property
    def t_end(self) -> float:
        return (self.tick_index + 1) * self.delta_t

    def advance(self, ticks: int = 1) -> "SimClock":
        return SimClock(self.delta_t, self.tick_index + ticks)

    def at(self, tick_index: int) -> "SimClock":
        return SimClock(self.delta_t, tick_index)


def validate_frame(frame: ContinuousFrame, width: int) -> ContinuousFrame:
    if frame.width != width:
        raise WidthMismatch(width, frame.width)
    v = frame.values
    bad = np.flatnonzero(~((v >= -1.0) & (v <= 1.0)))
    if bad.size:
        i = int(bad[0])
        raise RangeViolation(i, float(v[i]))
    return frame


def clamp_frame(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NonFinite("cannot clamp non-finite values")
    return np.clip(v, -1.0, 1.0)
