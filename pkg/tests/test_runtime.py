import math

import numpy as np
import pytest

from spikelink.config import ConfigDocument, StageConfig, parse_config
from spikelink.core import ContinuousFrame
from spikelink.errors import CycleError, NoPath, PortMismatch, StageFailure
from spikelink.runtime import (
    REPORT_FIELDS,
    Connection,
    RunReport,
    StageGraph,
    TickPort,
    build_graph,
    path_latency_ticks,
    run,
    step_latency_hops,
)
from spikelink.stages import CONTINUOUS, Stage, make_stage


class Ramp(Stage):
    """Emits its tick index scaled into [-1, 1]."""

    role = "source"

    def __init__(self, name):
        super().__init__(name)
        self._port("out", "out", CONTINUOUS, 1)

    def step(self, inputs, clock):
        return {"out": ContinuousFrame(clock.tick_index, [clock.tick_index / 1000.0])}


class Relay(Stage):
    """Copies its input and remembers what it saw on every tick."""

    def __init__(self, name):
        super().__init__(name)
        self.seen = []
        self._port("in", "in", CONTINUOUS, 1)
        self._port("out", "out", CONTINUOUS, 1)

    def step(self, inputs, clock):
        f = inputs["in"]
        self.seen.append((clock.tick_index, f.tick_index, float(f.values[0])))
        return {"out": ContinuousFrame(clock.tick_index, f.values)}


class Boom(Relay):
    def step(self, inputs, clock):
        if clock.tick_index == 3:
            raise ZeroDivisionError("boom")
        return super().step(inputs, clock)


def chain(n, delta_t=0.05, cls=Relay):
    stages = [Ramp("src")] + [cls(f"r{i}") for i in range(n)]
    conns = [f"src.out -> r0.in"] + [f"r{i}.out -> r{i + 1}.in" for i in range(n - 1)]
    return StageGraph(stages, conns, delta_t)


def text_config(body, **g):
    head = "[global]\n" + "".join(f"{k} = {v}\n" for k, v in g.items())
    return parse_config(head + body)


ENC_DEC = """
[enc]
kind = regular
n_neurons = 3
v_min = 0
v_max = 40

[dec]
kind = decoder
n_neurons = 3
phi = 0.01; 0.01; 0.01

[connections]
enc.out -> dec.in
"""


def test_connection_parse_round_trip():
    c = Connection.parse("a.out -> b.in")
    assert (c.src, c.src_port, c.dst, c.dst_port) == ("a", "out", "b", "in")
    assert Connection.parse(str(c)) == c
    with pytest.raises(ValueError):
        Connection.parse("a.out b.in")


@pytest.mark.parametrize("order", [False, True])
def test_one_tick_buffering_per_hop(order):
    g = chain(4)
    if order:
        g.order = list(reversed(g.order))
    run(g, 1.0)
    for i in range(4):
        for tick, src_tick, value in g.stages[f"r{i}"].seen:
            # the frame read on tick k was produced on tick k - 1
            assert src_tick == tick - 1
            origin = tick - (i + 1)
            assert value == (origin / 1000.0 if origin >= 0 else 0.0)


def test_one_tick_buffering_with_workers():
    g = chain(3)
    run(g, 1.0, workers=3)
    assert all(v == max(t - 3, 0) / 1000.0 for t, _, v in g.stages["r2"].seen)


def test_run_tick_count_and_report():
    g = chain(1)
    rep = run(g, 10.0)
    assert rep.n_ticks == 200
    assert rep.t_sim == pytest.approx(10.0)
    assert rep.completed
    assert rep.rtf * rep.t_run == pytest.approx(rep.t_sim, rel=1e-12)
    assert set(REPORT_FIELDS) <= set(rep.as_dict())


def test_rtf_definition():
    assert RunReport(0.0, 5.0, 10.0, 200, 0.05).rtf == 2.0


def test_graph_runs_once():
    g = chain(1)
    run(g, 0.1)
    with pytest.raises(RuntimeError):
        run(g, 0.1)


def test_stage_failure_carries_partial_report():
    g = chain(2, cls=Boom)
    with pytest.raises(StageFailure) as exc:
        run(g, 1.0)
    assert exc.value.name == "r0"
    assert isinstance(exc.value.cause, ZeroDivisionError)
    assert exc.value.report.n_ticks == 3
    assert not exc.value.report.completed


def test_tick_port_generation_checks():
    from spikelink.stages import PortSpec

    p = TickPort(PortSpec("x", "out", CONTINUOUS, 1), "init")
    assert p.read(0) == "init"
    p.write("a", 0)
    with pytest.raises(RuntimeError):
        p.write("b", 0)
    p.swap(0)
    assert p.read(1) == "a"
    with pytest.raises(RuntimeError):
        p.read(3)
    with pytest.raises(RuntimeError):
        p.swap(1)


def test_minimal_encoder_decoder_graph():
    g = build_graph(text_config(ENC_DEC, seed=1))
    assert len(g.stages) == 2 and len(g.connections) == 1
    rep = run(g, 1.0)
    assert rep.spikes_encoded > 0
    assert rep.spikes_transported == rep.spikes_encoded
    assert step_latency_hops(g, "enc", "dec") == 1


def test_width_mismatch_is_port_mismatch():
    body = ENC_DEC.replace("n_neurons = 3\nphi = 0.01; 0.01; 0.01", "n_neurons = 5\nphi = 0;0;0;0;0")
    with pytest.raises(PortMismatch):
        build_graph(text_config(body))


def test_kind_mismatch_is_port_mismatch():
    stages = [Ramp("src"), make_stage("dec", "decoder", {"n_neurons": 1, "phi": ((1.0,),)})]
    with pytest.raises(PortMismatch):
        StageGraph(stages, ["src.out -> dec.in"], 0.05)


def test_double_fed_input_rejected():
    stages = [Ramp("a"), Ramp("b"), Relay("r")]
    with pytest.raises(PortMismatch):
        StageGraph(stages, ["a.out -> r.in", "b.out -> r.in"], 0.05)


def test_cycle_without_robot_rejected():
    with pytest.raises(CycleError):
        StageGraph([Relay("a"), Relay("b")], ["a.out -> b.in", "b.out -> a.in"], 0.05)


def test_no_path():
    g = chain(1)
    with pytest.raises(NoPath):
        step_latency_hops(g, "r0", "src")


def test_path_latency_includes_declared_delay():
    doc = ConfigDocument(
        {"delta_t": 0.05, "t_sim": 1.0, "mode": "deterministic", "seed": 0, "workers": 1},
        {
            "enc": StageConfig("regular", {"n_neurons": 1}),
            "net": StageConfig("parrot", {"n_neurons": 1, "delay_ticks": 1}),
            "dec": StageConfig("decoder", {"n_neurons": 1, "phi": ((1.0,),)}),
        },
        [Connection.parse("enc.out -> net.in"), Connection.parse("net.out -> dec.in")],
    )
    g = build_graph(doc)
    assert step_latency_hops(g, "enc", "dec") == 2
    assert path_latency_ticks(g, "enc", "dec") == 3


def test_deterministic_transcripts_repeat():
    cfg = ENC_DEC.replace("kind = regular", "kind = poisson")
    a = run(build_graph(text_config(cfg, seed=4)), 5.0, transcript=True)
    b = run(build_graph(text_config(cfg, seed=4)), 5.0, transcript=True)
    c = run(build_graph(text_config(cfg, seed=5)), 5.0, transcript=True)
    assert a.transcript_hash() == b.transcript_hash()
    assert a.transcript_hash() != c.transcript_hash()


def test_workers_do_not_change_results():
    cfg = ENC_DEC.replace("kind = regular", "kind = poisson")
    a = run(build_graph(text_config(cfg, seed=4)), 5.0, transcript=True)
    b = run(build_graph(text_config(cfg, seed=4)), 5.0, transcript=True, workers=2)
    assert a.transcript_hash() == b.transcript_hash()


def test_seed_environment_fallback(monkeypatch):
    cfg = ENC_DEC.replace("kind = regular", "kind = poisson")
    monkeypatch.setenv("SPIKELINK_SEED", "4")
    a = run(build_graph(text_config(cfg)), 3.0, transcript=True)
    b = run(build_graph(text_config(cfg, seed=4)), 3.0, transcript=True)
    assert a.transcript_hash() == b.transcript_hash()


def test_transcript_csv(tmp_path):
    rep = run(build_graph(text_config(ENC_DEC, seed=1)), 1.0, transcript=["enc.out"])
    rep.write_transcript(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "port,tick,neuron_id,time"
    assert len(lines) - 1 == rep.spikes_encoded


def test_realtime_pacing():
    g = chain(1, delta_t=0.01)
    rep = run(g, 0.5, "realtime")
    assert rep.t_run >= 0.5
    assert 0.95 <= rep.rtf <= 1.0
    assert np.all(np.diff(rep.tick_wall_end) > 0)
    starts = np.arange(rep.n_ticks) * 0.01
    assert np.all(rep.tick_wall_end >= starts)


def test_unconnected_inputs_idle():
    g = StageGraph([Relay("r")], [], 0.05)
    run(g, 0.2)
    assert [v for _, _, v in g.stages["r"].seen] == [0.0] * 4
