"""Timing behaviour of the runtime.

Every connection hands data over at the tick boundary, so a change at the
sensor reaches a sink H hops away exactly H ticks later.  The latency
therefore scales with the tick length.  The second part shows how the
real-time factor (simulated seconds per wall second) falls as the encoded
population grows.
"""
from spikelink import bench

for hops in (1, 2, 3):
    res = bench.measure_latency([0.001, 0.005, 0.01, 0.05], hops=hops)
    lat = ", ".join(f"{r.latency_s * 1e3:g} ms" for r in res.records)
    print(f"hops={hops}: {lat}  (slope {res.slope:.3f} x delta_t)")

print("\nreal-time factor at delta_t = 50 ms, regular encoder")
for n in (1_000, 10_000, 100_000):
    doc = bench.scalability_config("regular", n)
    mean = bench.measure_rtf(doc, t_sim=2.0, trials=2)[-1]
    print(f"  n={n:7d}  rtf={mean.rtf:8.2f}")
