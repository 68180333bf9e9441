"""Performance measurement protocols.

* real-time factor of a scenario over repeated trials (:func:`measure_rtf`)
* largest encoder population that still runs in real time (:func:`find_realtime_limit`)
* real-time factor versus encoder firing rate (:func:`measure_bandwidth`)
* sensor-to-motor latency versus tick length (:func:`measure_latency`)
* real-time factor over a tick x population grid (:func:`sweep_overhead`)

Capacity measurements run the pipeline unpaced (deterministic mode) and
report ``rtf = t_sim / t_run``; ``rtf >= 1`` means the pipeline keeps up with
simulated time.  Absolute numbers depend entirely on the machine.
"""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
from scipy import stats

from .config import ConfigDocument, StageConfig
from .errors import BracketInvalid, NoResponse
from .runtime import Connection, build_graph, run

__all__ = [
    "BenchRecord",
    "LatencyProbe",
    "LimitResult",
    "LatencyResult",
    "OverheadResult",
    "CSV_HEADER",
    "scalability_config",
    "latency_config",
    "measure_rtf",
    "aggregate",
    "find_realtime_limit",
    "measure_bandwidth",
    "measure_latency",
    "sweep_overhead",
    "write_records_csv",
    "read_records_csv",
]

CSV_HEADER = (
    "scenario", "encoder", "n_neurons", "rate_hz", "delta_t_s", "trial",
    "t_build_s", "t_run_s", "t_sim_s", "rtf", "latency_s", "spikes",
)


ENCODER_ALIASES = {"rate": "regular"}


@dataclass
class BenchRecord:
    scenario: str
    encoder: str
    n_neurons: int
    rate_hz: float
    delta_t_s: float
    trial: int | str
    t_build_s: float
    t_run_s: float
    t_sim_s: float
    latency_s: float | None = None
    spikes: int = 0
    rtf_std: float | None = field(default=None, repr=False)

    @property
    def rtf(self) -> float:
        return self.t_sim_s / self.t_run_s if self.t_run_s > 0 else math.inf

    @property
    def t_total_s(self) -> float:
        return self.t_build_s + self.t_run_s

    def row(self) -> list:
        d = asdict(self)
        d["rtf"] = self.rtf
        out = []
        for k in CSV_HEADER:
            v = d[k]
            out.append("" if v is None else repr(v) if isinstance(v, float) else v)
        return out


@dataclass(frozen=True)
class LatencyProbe:
    step_tick: int = 5
    threshold: float = 1e-6
    max_ticks: int = 100


def write_records_csv(path_or_file, records) -> None:
    close = not hasattr(path_or_file, "write")
    f = open(path_or_file, "w", newline="") if close else path_or_file
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())
    finally:
        if close:
            f.close()


def read_records_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# -- scenarios -----------------------------------------------------------------

def scalability_config(encoder: str, n_neurons: int, *, delta_t: float = 0.05, rate_hz: float | None = None,
                       rate_range=(1.0, 2.0), network: bool = True, seed: int = 0,
                       sensor_width: int = 100) -> ConfigDocument:
    """Sensor -> encoder -> parrot -> decoder -> motor sink, sized by ``n_neurons``.

    Rate encoders get a fan-in adapter (every neuron sees the mean of all
    sensor channels) and fire mid-way through ``rate_range`` unless ``rate_hz``
    is given.  The NEF
    encoder takes the sensor vector directly, one dimension per 100 neurons.
    """
    n = int(n_neurons)
    stages: dict[str, StageConfig] = {}
    conns = []
    encoder = ENCODER_ALIASES.get(encoder, encoder)
    if encoder in ("regular", "poisson"):
        if rate_hz is None:
            (v_min, v_max), value = map(float, rate_range), 0.0
        else:
            v_min, v_max = 0.0, max(float(rate_hz), 1.0)
            value = 2.0 * rate_hz / v_max - 1.0
        stages["sensor"] = StageConfig("constant", {"width": sensor_width, "value": (value,)})
        stages["adapter"] = StageConfig("adapter", {"in_width": sensor_width, "map": "fan_in", "out_width": n})
        params = {"n_neurons": n, "v_min": v_min, "v_max": v_max}
        if encoder == "regular":
            params["initial_phase"] = "random"
        stages["encoder"] = StageConfig(encoder, params)
        conns += ["sensor.out -> adapter.in", "adapter.out -> encoder.in"]
    elif encoder == "nef":
        dim = max(1, min(sensor_width, n // 100))
        stages["sensor"] = StageConfig("constant", {"width": dim, "value": (0.0,)})
        stages["encoder"] = StageConfig("nef", {"dim": dim, "n_neurons": n})
        conns += ["sensor.out -> encoder.in"]
    else:
        raise ValueError(f"unknown encoder {encoder!r}")
    last = "encoder.out"
    if network:
        stages["network"] = StageConfig("parrot", {"n_neurons": n})
        conns.append(f"{last} -> network.in")
        last = "network.out"
    stages["decoder"] = StageConfig("decoder", {"n_neurons": n, "n_outputs": 2, "phi_fill": 1.0 / n})
    stages["motor"] = StageConfig("sink", {"width": 2, "record": False})
    conns += [f"{last} -> decoder.in", "decoder.out -> motor.in"]
    g = {"delta_t": float(delta_t), "t_sim": 10.0, "mode": "deterministic", "seed": seed, "workers": 1}
    return ConfigDocument(g, stages, [Connection.parse(c) for c in conns])


def latency_config(hops: int, delta_t: float, probe: LatencyProbe = LatencyProbe(), *, v_max: float = 100.0,
                   parrot_delay: int = 0) -> ConfigDocument:
    """Step stimulus -> regular encoder -> (hops - 1) parrots -> decoder -> sink."""
    if hops < 1:
        raise ValueError("need at least one hop between encoder and decoder")
    stages = {
        "sensor": StageConfig("step", {"width": 1, "before": -1.0, "after": 1.0, "step_tick": probe.step_tick}),
        "encoder": StageConfig("regular", {"n_neurons": 1, "v_min": 0.0, "v_max": v_max, "initial_phase": "zero"}),
    }
    conns = ["sensor.out -> encoder.in"]
    last = "encoder.out"
    for h in range(hops - 1):
        stages[f"parrot{h}"] = StageConfig("parrot", {"n_neurons": 1, "delay_ticks": parrot_delay})
        conns.append(f"{last} -> parrot{h}.in")
        last = f"parrot{h}.out"
    stages["decoder"] = StageConfig("decoder", {"n_neurons": 1, "phi": ((1.0,),), "tau_dec": 0.03})
    stages["motor"] = StageConfig("sink", {"width": 1, "record": True})
    conns += [f"{last} -> decoder.in", "decoder.out -> motor.in"]
    g = {"delta_t": float(delta_t), "t_sim": 1.0, "mode": "deterministic", "seed": 0, "workers": 1}
    return ConfigDocument(g, stages, [Connection.parse(c) for c in conns])


# -- real-time factor ------------------------------------------------------------

def _timed_run(doc: ConfigDocument, t_sim: float, mode: str, **kw):
    t0 = time.perf_counter()
    graph = build_graph(doc)
    rep = run(graph, t_sim, mode, workers=doc.globals.get("workers", 1), **kw)
    t_total = time.perf_counter() - t0
    return graph, rep, t_total


def aggregate(records: list[BenchRecord]) -> BenchRecord:
    """Mean row over trials; ``rtf`` of the row is ``t_sim / mean(t_run)``."""
    r0 = records[0]
    rtfs = [r.rtf for r in records]
    return BenchRecord(
        r0.scenario, r0.encoder, r0.n_neurons, r0.rate_hz, r0.delta_t_s, "mean",
        statistics.fmean(r.t_build_s for r in records),
        statistics.fmean(r.t_run_s for r in records),
        r0.t_sim_s,
        None if any(r.latency_s is None for r in records) else statistics.fmean(r.latency_s for r in records),
        round(statistics.fmean(r.spikes for r in records)),
        rtf_std=statistics.stdev(rtfs) if len(rtfs) > 1 else 0.0,
    )


def measure_rtf(doc: ConfigDocument, t_sim: float = 10.0, trials: int = 5, *, mode: str = "deterministic",
                scenario: str = "rtf", encoder: str = "", rate_hz: float = float("nan"),
                warmup: bool = True) -> list[BenchRecord]:
    """Build and run ``trials`` times; returns one row per trial plus a mean row.

    A short warm-up run precedes the trials and is discarded.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if warmup:
        _timed_run(doc, min(t_sim, 3 * doc.globals["delta_t"]), "deterministic", check=False)
    n = _population_size(doc)
    out = []
    for k in range(trials):
        _, rep, _ = _timed_run(doc, t_sim, mode, check=False)
        out.append(BenchRecord(
            scenario, encoder, n, rate_hz, rep.delta_t, k, rep.t_build, rep.t_run, rep.t_sim,
            spikes=rep.spikes_encoded,
        ))
    return out + [aggregate(out)]


def _population_size(doc: ConfigDocument) -> int:
    for sc in doc.stages.values():
        if sc.kind in ("regular", "poisson", "nef"):
            return int(sc.params.get("n_neurons") or 100 * sc.params.get("dim", 1))
    return 0


@dataclass
class LimitResult:
    n_limit: int
    lo: int
    hi: int
    probes: list = field(default_factory=list)  # (n, rtf) in probe order

    @property
    def n_probes(self) -> int:
        return len(self.probes)


def find_realtime_limit(encoder: str = "regular", bracket=(1000, 100_000), t_sim: float = 1.0, *,
                        trials: int = 1, delta_t: float = 0.05, rel_window: float = 0.1,
                        runner: Callable[[int], float] | None = None, max_doublings: int = 30) -> LimitResult:
    """Bisect for the largest population with ``rtf >= 1``.

    ``runner(n)`` returns the mean real-time factor for population ``n``; by
    default it times :func:`scalability_config`.  If ``hi`` still runs in real
    time the bracket is doubled until it does not.  Bisection is geometric and
    stops once ``(hi - lo) / hi <= rel_window``.
    """
    if runner is None:
        def runner(n):
            recs = measure_rtf(scalability_config(encoder, n, delta_t=delta_t), t_sim, trials,
                               scenario="limit", encoder=encoder, warmup=False)
            return recs[-1].rtf

    probes = []

    def probe(n):
        r = float(runner(int(n)))
        probes.append((int(n), r))
        return r

    lo, hi = int(bracket[0]), int(bracket[1])
    if not 1 <= lo < hi:
        raise BracketInvalid(f"bracket {bracket} must satisfy 1 <= lo < hi")
    if probe(lo) < 1.0:
        raise BracketInvalid(f"rtf({lo}) < 1: lower bracket is not real-time capable")
    doublings = 0
    while probe(hi) >= 1.0:
        lo, hi = hi, hi * 2
        doublings += 1
        if doublings > max_doublings:
            raise BracketInvalid("could not find a population that breaks real time")
    while (hi - lo) > rel_window * hi:
        mid = int(round(math.sqrt(lo * hi)))
        if mid <= lo or mid >= hi:
            mid = (lo + hi) // 2
            if mid <= lo:
                break
        if probe(mid) >= 1.0:
            lo = mid
        else:
            hi = mid
    return LimitResult(lo, lo, hi, probes)


def measure_bandwidth(n_neurons: int, rates, t_sim: float = 1.0, *, trials: int = 1, delta_t: float = 0.05,
                      encoder: str = "regular", network: bool = True) -> list[BenchRecord]:
    """One mean row per firing rate; ``spikes`` is the encoder's spike count."""
    out = []
    for r in rates:
        doc = scalability_config(encoder, n_neurons, delta_t=delta_t, rate_hz=float(r), network=network)
        recs = measure_rtf(doc, t_sim, trials, scenario="bandwidth", encoder=encoder, rate_hz=float(r),
                           warmup=not out)
        out.append(recs[-1])
    return out


def spearman(records, x="rate_hz") -> float:
    xs = [getattr(r, x) for r in records]
    ys = [r.rtf for r in records]
    return float(stats.spearmanr(xs, ys).statistic)


# -- latency -------------------------------------------------------------------

@dataclass
class LatencyResult:
    records: list
    slope: float
    intercept: float
    r_squared: float
    hops: int


def _latency_once(hops, delta_t, probe, mode, parrot_delay=0):
    doc = latency_config(hops, delta_t, probe, parrot_delay=parrot_delay)
    t_sim = (probe.step_tick + 1 + probe.max_ticks) * delta_t
    graph, rep, _ = _timed_run(doc, t_sim, mode, transcript=["encoder.out"])
    first_spike = next((b.tick_index for b in rep.transcripts["encoder.out"] if len(b)), None)
    if first_spike is None:
        raise NoResponse("encoder never responded to the step")
    motor = graph.stages["motor"].frames
    resp = next((f.tick_index for f in motor if f.tick_index >= first_spike and f.values[0] > probe.threshold), None)
    if resp is None or resp - first_spike > probe.max_ticks:
        raise NoResponse(f"no motor response within {probe.max_ticks} ticks")
    if mode == "realtime":
        latency = float(rep.tick_wall_end[resp]) - first_spike * delta_t
    else:
        latency = (resp - first_spike) * delta_t
    return rep, latency


def measure_latency(delta_ts, hops: int = 1, *, mode: str = "deterministic", probe: LatencyProbe = LatencyProbe(),
                    trials: int = 1, parrot_delay: int = 0) -> LatencyResult:
    """Latency from the encoder's first response to the decoder's output crossing ``threshold``.

    Deterministic mode counts ticks; realtime mode measures wall time from the
    scheduled start of the step tick to the end of the response tick.
    """
    recs = []
    for dt in delta_ts:
        for k in range(trials):
            rep, lat = _latency_once(hops, float(dt), probe, mode, parrot_delay)
            recs.append(BenchRecord(
                f"latency_h{hops}", "regular", 1, float("nan"), float(dt), k, rep.t_build, rep.t_run,
                rep.t_sim, latency_s=lat, spikes=rep.spikes_encoded,
            ))
    x = np.array([r.delta_t_s for r in recs])
    y = np.array([r.latency_s for r in recs])
    if np.unique(x).size >= 2:
        fit = stats.linregress(x, y)
        slope, intercept, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)
    else:
        slope, intercept, r2 = float("nan"), float("nan"), float("nan")
    return LatencyResult(recs, slope, intercept, r2, hops)


# -- overhead grid ---------------------------------------------------------------

@dataclass
class OverheadResult:
    records: list
    borders: dict  # delta_t -> largest n with rtf >= 1 (0 if none)

    @property
    def monotone(self) -> bool:
        b = [self.borders[k] for k in sorted(self.borders)]
        return all(x <= y for x, y in zip(b, b[1:]))


def sweep_overhead(delta_ts, counts, encoder: str = "regular", t_sim: float = 1.0, trials: int = 1) -> OverheadResult:
    """Full factorial tick x population grid of trial rows, plus the per-tick border."""
    records = []
    borders = {}
    first = True
    for dt in delta_ts:
        border = 0
        for n in counts:
            doc = scalability_config(encoder, n, delta_t=float(dt))
            rows = measure_rtf(doc, t_sim, trials, scenario="overhead", encoder=encoder, warmup=first)
            first = False
            trial_rows = rows[:-1]
            records += trial_rows
            if rows[-1].rtf >= 1.0:
                border = max(border, int(n))
        borders[float(dt)] = border
    return OverheadResult(records, borders)
