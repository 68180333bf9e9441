"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, counter)``, so each neuron
owns an independent stream whose values do not depend on how many other
neurons exist or on the order in which stages are scheduled.  The mixing
function is the SplitMix64 finalizer applied in three chained rounds.
"""
from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash64(seed, stream, counter) -> np.ndarray:
    seed = np.asarray(seed, dtype=np.uint64)
    stream = np.asarray(stream, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = _mix(seed + _GAMMA)
        k = _mix(k ^ (stream * _GAMMA + _GAMMA))
        return _mix(k + counter * _GAMMA)


def uniform(seed, stream, counter) -> np.ndarray:
    """Uniform doubles in [0, 1) with 53 random bits."""
    return (hash64(seed, stream, counter) >> _S11).astype(np.float64) * _INV53


class StreamBank:
    """One independent stream per index, each with its own draw counter."""

    def __init__(self, seed: int, n_streams: int, first_stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.streams = np.arange(first_stream, first_stream + n_streams, dtype=np.uint64)
        self.counters = np.zeros(n_streams, dtype=np.uint64)

    def __len__(self):
        return self.streams.size

    def draw(self, which=None) -> np.ndarray:
        """Next uniform from each selected stream (all streams if ``which`` is None)."""
        if which is None:
            u = uniform(self.seed, self.streams, self.counters)
            self.counters += np.uint64(1)
            return u
        u = uniform(self.seed, self.streams[which], self.counters[which])
        self.counters[which] += np.uint64(1)
        return u


def exponential_isi(rate, r) -> np.ndarray:
    """Inter-spike interval ``-ln(r) / rate`` for a uniform draw ``r`` in (0, 1]."""
    return -np.log(r) / rate
