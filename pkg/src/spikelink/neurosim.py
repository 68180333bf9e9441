"""Minimal spiking networks that sit between encoder and decoder."""
from __future__ import annotations

from collections import deque

import numpy as np

from .core import SimClock, SpikeBatch
from .errors import BadRange, UnknownNeuron
from .nef import LifParams, NefPopulation, lif_step

__all__ = ["ParrotNetwork", "DemoNetwork", "parrot_step", "demo_step"]


def _check_ids(batch: SpikeBatch, n: int):
    if len(batch) and (batch.neuron_ids.max() >= n or batch.neuron_ids.min() < 0):
        bad = batch.neuron_ids[(batch.neuron_ids >= n) | (batch.neuron_ids < 0)][0]
        raise UnknownNeuron(f"spike from neuron {bad} but network has {n} neurons")


class ParrotNetwork:
    """Repeats every received spike once.

    Input spikes are re-timed into the emitting tick, i.e. shifted by
    ``(emit tick - input tick) * delta_t``.  With ``delay_ticks=0`` a batch read
    at tick ``k`` is emitted at tick ``k``; each extra delay tick holds the
    spikes in ``pending`` for one more tick.
    """

    def __init__(self, n_neurons: int, delay_ticks: int = 0):
        if n_neurons < 1 or delay_ticks < 0:
            raise BadRange("need n_neurons >= 1 and delay_ticks >= 0")
        self.n_neurons = int(n_neurons)
        self.delay_ticks = int(delay_ticks)
        self.pending: deque[SpikeBatch] = deque()
        self.received = 0
        self.emitted = 0

    def step(self, batch_in: SpikeBatch, clock: SimClock) -> SpikeBatch:
        _check_ids(batch_in, self.n_neurons)
        self.received += len(batch_in)
        self.pending.append(batch_in)
        if len(self.pending) <= self.delay_ticks:
            return SpikeBatch.empty(clock.tick_index)
        src = self.pending.popleft()
        self.emitted += len(src)
        if not len(src):
            return SpikeBatch.empty(clock.tick_index)
        return src.shifted(clock.tick_index - src.tick_index, clock.delta_t)


def parrot_step(net: ParrotNetwork, batch_in: SpikeBatch, clock: SimClock) -> SpikeBatch:
    return net.step(batch_in, clock)


class DemoNetwork:
    """Small LIF population driven one-to-one by incoming spikes.

    A spike arriving on channel ``i`` injects ``weights[i]`` units of current
    into neuron ``i`` for one integration step.  Optional ``lateral[i, j]``
    weights feed neuron ``i``'s spikes into neuron ``j`` on the next step.
    """

    def __init__(self, n_neurons: int = 2, weights=50.0, lateral=None, lif: LifParams | None = None,
                 bias=0.0):
        self.lif = lif or LifParams()
        n = int(n_neurons)
        self.weights = np.broadcast_to(np.asarray(weights, dtype=float), (n,)).copy()
        self.bias = np.broadcast_to(np.asarray(bias, dtype=float), (n,)).copy()
        self.lateral = None if lateral is None else np.asarray(lateral, dtype=float).reshape(n, n)
        for w in (self.weights, self.bias) + (() if self.lateral is None else (self.lateral,)):
            if not np.all(np.isfinite(w)):
                raise BadRange("network weights must be finite")
        # the LIF state lives in a population with unit gains and zero bias
        self._pop = NefPopulation(np.ones((n, 1)), np.ones(n), np.zeros(n), self.lif)
        self._recurrent = np.zeros(n)
        self._carry = np.zeros(n)

    @property
    def n_neurons(self) -> int:
        return self.weights.size

    def step(self, batch_in: SpikeBatch, clock: SimClock) -> SpikeBatch:
        n = self.n_neurons
        _check_ids(batch_in, n)
        dt = self.lif.dt
        n_sub = int(round(clock.delta_t / dt))
        # a spike arriving during sub-step s drives sub-step s + 1
        drive = np.zeros((n_sub + 1, n))
        drive[0] = self._carry
        if len(batch_in):
            t_local = batch_in.times + (clock.tick_index - batch_in.tick_index) * clock.delta_t - clock.time
            sub = np.clip(np.floor(t_local / dt + 1e-9).astype(np.int64), 0, n_sub - 1) + 1
            np.add.at(drive, (sub, batch_in.neuron_ids), self.weights[batch_in.neuron_ids])
        self._carry = drive[n_sub]
        ids, steps = [], []
        for s in range(n_sub):
            j = self.bias + drive[s] + self._recurrent
            spiked = lif_step(self._pop, j, dt)
            self._recurrent = self.lateral.T @ spiked if self.lateral is not None else self._recurrent
            if spiked.any():
                hit = np.flatnonzero(spiked)
                ids.append(hit)
                steps.append(np.full(hit.size, s))
        if not ids:
            return SpikeBatch.empty(clock.tick_index)
        return SpikeBatch.from_arrays(
            clock.tick_index, np.concatenate(ids), clock.time + np.concatenate(steps) * dt
        )


def demo_step(net: DemoNetwork, batch_in: SpikeBatch, clock: SimClock) -> SpikeBatch:
    return net.step(batch_in, clock)
