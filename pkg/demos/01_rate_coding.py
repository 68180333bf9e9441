"""Rate coding round trip: a slow sine is turned into spikes and back.

A continuous value in [-1, 1] sets each neuron's firing rate between v_min and
v_max.  The regular encoder fires on a phase accumulator, so at constant input its trains
are perfectly periodic.  The Poisson encoder fires at the same mean rate but
with exponential inter-spike intervals.  An exponential filter turns the
spikes back into activities and a linear readout maps those to a value.
"""
import numpy as np

from spikelink import (
    ContinuousFrame,
    ExponentialFilter,
    LinearReadout,
    PoissonEncoder,
    RateEncoderParams,
    RegularEncoder,
    SimClock,
)
from spikelink.codec import readout

DT = 0.01
TICKS = 400
N = 50
TAU = 0.1
params = RateEncoderParams(v_min=10.0, v_max=100.0, n_neurons=N)
signal = 0.8 * np.sin(2 * np.pi * 0.5 * DT * np.arange(TICKS))

# With tau = 0.1 s a neuron firing at rate r settles at activity r * tau, so
# averaging the population and undoing the rate map recovers the input.
span = params.v_max - params.v_min
phi = np.full((N, 1), 2.0 / (N * TAU * span))
bias = np.array([-2.0 * params.v_min / span - 1.0])
weights = LinearReadout(phi, bias)

for name, enc in (("regular", RegularEncoder(params)), ("poisson", PoissonEncoder(params, seed=3))):
    filt = ExponentialFilter(N, tau_dec=TAU)
    decoded, isis, last = [], [], {}
    for k in range(TICKS):
        clock = SimClock(DT, k)
        batch = enc.step(ContinuousFrame(k, np.full(N, signal[k])), clock)
        for i, t in zip(batch.neuron_ids.tolist(), batch.times.tolist()):
            if i in last:
                isis.append(t - last[i])
            last[i] = t
        decoded.append(readout(filt.step(batch, clock), weights)[0])
    decoded = np.array(decoded)
    # the filter lags the input by roughly tau, so skip the first second and
    # compare against a delayed copy of the signal
    lag = int(TAU / DT)
    err = decoded[100:] - signal[100 - lag:TICKS - lag]
    isis = np.array(isis)
    print(f"{name:8s} spikes={len(isis) + len(last):6d}  ISI CV={isis.std() / isis.mean():.3f}  "
          f"decode rmse={np.sqrt(np.mean(err ** 2)):.3f}")
