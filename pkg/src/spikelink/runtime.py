"""Tick-synchronized execution of a stage graph.

Every connection owns a double-buffered :class:`TickPort`.  On tick ``k`` each
stage reads the front buffers of its inputs (data written on tick ``k-1``),
computes, and writes the back buffers of its outputs.  After all stages have
finished the tick, a global barrier swaps every port.  Each hop therefore
adds exactly one tick of latency, independent of stage order or of how many
worker threads execute the stages.  Inputs left unconnected read zeros
(continuous ports) or empty batches (event ports).
"""
from __future__ import annotations

import csv
import graphlib
import hashlib
import io
import json
import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ContinuousFrame, SimClock, SpikeBatch, validate_frame
from .errors import CycleError, NoPath, PortMismatch, StageFailure
from .stages import EVENT, PortSpec, Stage, make_stage

__all__ = [
    "Connection",
    "StageDescriptor",
    "StageGraph",
    "TickPort",
    "RunReport",
    "build_graph",
    "run",
    "step_latency_hops",
    "path_latency_ticks",
    "REPORT_FIELDS",
]

DETERMINISTIC, REALTIME = "deterministic", "realtime"


@dataclass(frozen=True)
class Connection:
    src: str
    src_port: str
    dst: str
    dst_port: str

    @classmethod
    def parse(cls, text: str) -> "Connection":
        """Parse ``"a.out -> b.in"``."""
        left, sep, right = text.partition("->")
        if not sep:
            raise ValueError(f"connection {text!r} lacks '->'")
        try:
            src, sp = left.strip().rsplit(".", 1)
            dst, dp = right.strip().rsplit(".", 1)
        except ValueError:
            raise ValueError(f"connection {text!r} must read 'stage.port -> stage.port'") from None
        return cls(src.strip(), sp.strip(), dst.strip(), dp.strip())

    def __str__(self):
        return f"{self.src}.{self.src_port} -> {self.dst}.{self.dst_port}"


@dataclass(frozen=True)
class StageDescriptor:
    name: str
    kind: str  # role: source | adapter | encoder | decoder | network | sink
    ports: tuple
    delay_ticks: int = 0
    breaks_cycle: bool = False

    @classmethod
    def of(cls, stage: Stage) -> "StageDescriptor":
        return cls(stage.name, stage.role, tuple(stage.ports.values()), stage.delay_ticks, stage.breaks_cycle)


class TickPort:
    """Single-producer/single-consumer double buffer with generation counters."""

    __slots__ = ("spec", "front", "back", "front_gen", "back_gen")

    def __init__(self, spec: PortSpec, initial):
        self.spec = spec
        self.front = initial
        self.back = None
        self.front_gen = -1
        self.back_gen = None

    def read(self, tick: int):
        if self.front_gen != tick - 1:
            raise RuntimeError(f"stale read: tick {tick} sees generation {self.front_gen}")
        return self.front

    def write(self, data, tick: int):
        if self.back_gen == tick:
            raise RuntimeError("port written twice in one tick")
        self.back = data
        self.back_gen = tick

    def swap(self, tick: int):
        if self.back_gen != tick:
            raise RuntimeError(f"port not written on tick {tick}")
        self.front, self.back = self.back, None
        self.front_gen, self.back_gen = self.back_gen, None


class StageGraph:
    """Validated stage topology; stages keep their own mutable state."""

    def __init__(self, stages, connections, delta_t: float, seed: int = 0):
        t0 = time.perf_counter()
        self.delta_t = float(delta_t)
        if not (self.delta_t > 0 and math.isfinite(self.delta_t)):
            raise ValueError("delta_t must be positive")
        self.seed = seed
        self.stages: dict[str, Stage] = {}
        for s in stages:
            if s.name in self.stages:
                raise PortMismatch(f"duplicate stage name {s.name!r}")
            self.stages[s.name] = s
        self.connections = [c if isinstance(c, Connection) else Connection.parse(c) for c in connections]
        self._validate()
        self.order = self._order()
        self.t_build = time.perf_counter() - t0
        self.consumed = False

    @property
    def descriptors(self) -> list[StageDescriptor]:
        return [StageDescriptor.of(s) for s in self.stages.values()]

    def _port(self, stage, port, direction):
        if stage not in self.stages:
            raise PortMismatch(f"unknown stage {stage!r}")
        spec = self.stages[stage].ports.get(port)
        if spec is None or spec.direction != direction:
            raise PortMismatch(f"stage {stage!r} has no {direction}put port {port!r}")
        return spec

    def _validate(self):
        fed = {}
        for c in self.connections:
            a = self._port(c.src, c.src_port, "out")
            b = self._port(c.dst, c.dst_port, "in")
            if a.kind != b.kind:
                raise PortMismatch(f"{c}: {a.kind} port connected to {b.kind} port")
            if a.width != b.width:
                raise PortMismatch(f"{c}: width {a.width} connected to width {b.width}")
            key = (c.dst, c.dst_port)
            if key in fed:
                raise PortMismatch(f"input {c.dst}.{c.dst_port} connected twice")
            fed[key] = c
        self.unconnected = [(s.name, p) for s in self.stages.values() for p in s.inputs if (s.name, p) not in fed]

    def _order(self) -> list[str]:
        ts = graphlib.TopologicalSorter()
        for name in self.stages:
            ts.add(name)
        for c in self.connections:
            if not self.stages[c.dst].breaks_cycle:
                ts.add(c.dst, c.src)
        try:
            return list(ts.static_order())
        except graphlib.CycleError as exc:
            raise CycleError(f"illegal cycle through stages {exc.args[1]}") from None

    def successors(self, name):
        return [c.dst for c in self.connections if c.src == name]


REPORT_FIELDS = (
    "mode", "delta_t", "n_ticks", "t_build", "t_run", "t_sim", "rtf",
    "overrun_ticks", "spikes_transported", "spikes_encoded",
)


@dataclass
class RunReport:
    t_build: float
    t_run: float
    t_sim: float
    n_ticks: int
    delta_t: float
    mode: str = DETERMINISTIC
    overrun_ticks: int = 0
    spikes_transported: int = 0
    spikes_encoded: int = 0
    completed: bool = True
    t_start: float = 0.0
    tick_wall_end: np.ndarray | None = None
    transcripts: dict = field(default_factory=dict)

    @property
    def rtf(self) -> float:
        return self.t_sim / self.t_run if self.t_run > 0 else math.inf

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_FIELDS}

    def csv_row(self, header=True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(REPORT_FIELDS)
        w.writerow([repr(v) if isinstance(v, float) else v for v in self.as_dict().values()])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def transcript_rows(self):
        """Yield ``(port, tick, neuron_id, time)`` for every recorded spike."""
        for port in sorted(self.transcripts):
            for batch in self.transcripts[port]:
                for i, t in zip(batch.neuron_ids.tolist(), batch.times.tolist()):
                    yield port, batch.tick_index, i, t

    def write_transcript(self, path_or_file) -> None:
        close = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        f = open(path_or_file, "w") if close else path_or_file
        try:
            f.write("port,tick,neuron_id,time\n")
            for port, tick, i, t in self.transcript_rows():
                f.write(f"{port},{tick},{i},{t!r}\n")
        finally:
            if close:
                f.close()

    def transcript_hash(self) -> str:
        buf = io.StringIO()
        self.write_transcript(buf)
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def build_graph(config) -> StageGraph:
    """Instantiate every stage of a parsed :class:`~spikelink.config.ConfigDocument`."""
    t0 = time.perf_counter()
    seed0 = config.resolved_seed()
    stages: dict[str, Stage] = {}
    # decoders may reference encoder stages, so build them last
    order = sorted(config.stages.items(), key=lambda kv: kv[1].kind == "decoder")
    index = {name: i for i, name in enumerate(config.stages)}
    for name, sc in order:
        seed = int(np.random.SeedSequence([seed0, index[name]]).generate_state(1)[0])
        stages[name] = make_stage(name, sc.kind, sc.params, seed=seed, base_dir=config.base_dir, stages=stages)
    graph = StageGraph(
        [stages[n] for n in config.stages], config.connections, config.globals["delta_t"], seed=seed0
    )
    graph.t_build = time.perf_counter() - t0
    return graph


def _shortest_path(graph: StageGraph, src: str, dst: str) -> list[str]:
    for s in (src, dst):
        if s not in graph.stages:
            raise NoPath(f"unknown stage {s!r}")
    prev = {src: None}
    q = deque([src])
    while q:
        u = q.popleft()
        if u == dst:
            path = []
            while u is not None:
                path.append(u)
                u = prev[u]
            return path[::-1]
        for v in graph.successors(u):
            if v not in prev:
                prev[v] = u
                q.append(v)
    raise NoPath(f"no path from {src!r} to {dst!r}")


def step_latency_hops(graph: StageGraph, src: str, dst: str) -> int:
    """Number of buffered hops on the shortest path from ``src`` to ``dst``."""
    return len(_shortest_path(graph, src, dst)) - 1


def path_latency_ticks(graph: StageGraph, src: str, dst: str) -> int:
    """Hops plus declared internal delays of every stage on the shortest path."""
    path = _shortest_path(graph, src, dst)
    return len(path) - 1 + sum(graph.stages[s].delay_ticks for s in path)


def _n_ticks(t_sim: float, delta_t: float) -> int:
    return max(0, math.ceil(t_sim / delta_t - 1e-9))


def run(graph: StageGraph, t_sim: float, mode: str = DETERMINISTIC, *, workers: int = 1,
        transcript=False, check: bool = True) -> RunReport:
    """Execute ``ceil(t_sim / delta_t)`` ticks.

    ``transcript`` may be ``True`` (record every event output port) or an
    iterable of ``"stage.port"`` names.  In realtime mode tick ``k`` starts no
    earlier than ``start + k * delta_t`` and the run ends no earlier than
    ``start + n_ticks * delta_t``; ticks that start late are counted as
    overruns, never skipped.
    """
    if mode not in (DETERMINISTIC, REALTIME):
        raise ValueError(f"unknown mode {mode!r}")
    if graph.consumed:
        raise RuntimeError("a StageGraph can only be run once; build a new one")
    graph.consumed = True
    dt = graph.delta_t
    n_ticks = _n_ticks(t_sim, dt)
    stages = [graph.stages[n] for n in graph.order]

    out_ports: dict[tuple, list[TickPort]] = {}
    in_ports: dict[str, dict[str, TickPort]] = {s.name: {} for s in stages}
    all_ports = []
    for c in graph.connections:
        src = graph.stages[c.src]
        port = TickPort(src.ports[c.src_port], src.initial_output(c.src_port))
        out_ports.setdefault((c.src, c.src_port), []).append(port)
        in_ports[c.dst][c.dst_port] = port
        all_ports.append(port)

    if transcript is True:
        recorded = {f"{s.name}.{p}" for s in stages for p, spec in s.outputs.items() if spec.kind == EVENT}
    else:
        recorded = set(transcript or ())
    transcripts = {k: [] for k in sorted(recorded)}
    encoders = {s.name for s in stages if s.role == "encoder"}
    # per-stage counters: each stage runs on one thread per tick
    transported = {s.name: 0 for s in stages}
    encoded = {s.name: 0 for s in stages}
    wall_end = np.zeros(n_ticks)

    # unconnected inputs idle: zeros, or no spikes
    idle = {s.name: {} for s in stages}
    for name, p in graph.unconnected:
        spec = graph.stages[name].ports[p]
        idle[name][p] = spec.kind == EVENT

    def do_stage(stage: Stage, clock: SimClock):
        k = clock.tick_index
        inputs = {p: port.read(k) for p, port in in_ports[stage.name].items()}
        for p, is_event in idle[stage.name].items():
            w = stage.ports[p].width
            inputs[p] = SpikeBatch.empty(k - 1) if is_event else ContinuousFrame(k - 1, np.zeros(w))
        outputs = stage.step(inputs, clock)
        for p, spec in stage.outputs.items():
            if p not in outputs:
                raise RuntimeError(f"output {p!r} not produced")
            data = outputs[p]
            if spec.kind == EVENT:
                if check:
                    data.check(dt, spec.width)
                n = len(data)
                if stage.name in encoders:
                    encoded[stage.name] += n
                transported[stage.name] += n * len(out_ports.get((stage.name, p), ()))
                key = f"{stage.name}.{p}"
                if key in transcripts:
                    transcripts[key].append(data)
            elif check:
                validate_frame(data, spec.width)
            for port in out_ports.get((stage.name, p), ()):
                port.write(data, k)

    def report(done, t_run, overruns, start):
        return RunReport(
            t_build=graph.t_build, t_run=t_run, t_sim=done * dt, n_ticks=done, delta_t=dt, mode=mode,
            overrun_ticks=overruns, spikes_transported=sum(transported.values()),
            spikes_encoded=sum(encoded.values()), completed=done == n_ticks, t_start=start,
            tick_wall_end=wall_end[:done], transcripts=transcripts,
        )

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    overruns = 0
    # start barrier: everything above is build phase
    start = time.perf_counter()
    try:
        for k in range(n_ticks):
            clock = SimClock(dt, k)
            if mode == REALTIME:
                target = start + k * dt
                lag = time.perf_counter() - target
                if lag > 0 and k > 0:
                    overruns += 1
                elif lag < 0:
                    _sleep_until(target)
            if pool is None:
                for s in stages:
                    try:
                        do_stage(s, clock)
                    except Exception as exc:
                        raise StageFailure(s.name, exc) from exc
            else:
                futures = [(s, pool.submit(do_stage, s, clock)) for s in stages]
                for s, fut in futures:
                    exc = fut.exception()
                    if exc is not None:
                        raise StageFailure(s.name, exc) from exc
            for port in all_ports:
                port.swap(k)
            wall_end[k] = time.perf_counter() - start
        if mode == REALTIME:
            _sleep_until(start + n_ticks * dt)
        t_run = time.perf_counter() - start
    except StageFailure as exc:
        exc.report = report(k, time.perf_counter() - start, overruns, start)
        raise
    finally:
        if pool is not None:
            pool.shutdown()
    return report(n_ticks, t_run, overruns, start)


def _sleep_until(target: float) -> None:
    # coarse sleep, then spin for the last half millisecond
    while True:
        remaining = target - time.perf_counter()
        if remaining <= 0:
            return
        if remaining > 1e-3:
            time.sleep(remaining - 5e-4)
