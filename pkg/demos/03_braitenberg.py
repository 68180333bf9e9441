"""Closed-loop Braitenberg vehicle in the default arena.

The robot's laser scan is averaged into a left and a right hemisphere.  Each
half drives one rate-coded neuron and those spikes pass through a parrot
network.  A filtered linear readout turns them into forward and turning
speed: obstacles on one side slow the robot and turn it away.  The whole loop
runs on the shared 50 ms tick for one simulated minute.
"""
from importlib import resources

import numpy as np

from spikelink import build_graph, load_config, run

cfg = resources.files("spikelink") / "data" / "braitenberg.cfg"
doc = load_config(cfg)
graph = build_graph(doc)
report = run(graph, doc.globals["t_sim"], transcript=["encoder.out"])
world = graph.stages["robot"].world

spikes = sum(len(b) for b in report.transcripts["encoder.out"])
print(f"ticks={report.n_ticks}  rtf={report.rtf:.1f}  spikes={spikes}")
print(f"collisions={world.collisions}  path={world.path_length:.2f} m")

# trace rows: tick, x, y, heading, v, omega, collided
poses = np.array([row[1:3] for row in world.trace])
print("pose every 10 s:")
for k in range(0, len(poses), 200):
    print(f"  t={k * doc.globals['delta_t']:5.1f} s  x={poses[k, 0]:.2f}  y={poses[k, 1]:.2f}")
