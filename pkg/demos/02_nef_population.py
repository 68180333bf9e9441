"""An NEF population represents a vector with heterogeneous LIF neurons.

Each neuron gets a random preferred direction, an intercept where it starts
firing and a maximum rate.  Linear decoders solved by ridge regression over
the neurons' steady-state rates reconstruct the represented value.  Error
falls as the population grows.
"""
import numpy as np

from spikelink import lif_rate, nef_build, nef_train_decoders
from spikelink.nef import rmse

pop = nef_build(dim=1, n_neurons=8, seed=0)
xs = np.linspace(-1, 1, 9)
print("tuning curves (Hz) for 8 neurons, x from -1 to 1")
for n in range(pop.n_neurons):
    rates = lif_rate(pop.gains[n] * pop.encoders[n, 0] * xs + pop.biases[n], pop.lif)
    print(f"  neuron {n} enc={pop.encoders[n, 0]:+.0f} intercept={pop.intercepts[n]:+.2f}  "
          + " ".join(f"{r:5.0f}" for r in rates))

print("\nreconstruction rmse against population size")
for dim in (1, 2):
    for n in (10, 50, 100, 200, 500):
        pop = nef_build(dim=dim, n_neurons=n * dim, seed=1)
        nef_train_decoders(pop)
        print(f"  dim={dim} n={n * dim:5d}  rmse={rmse(pop):.4f}")
