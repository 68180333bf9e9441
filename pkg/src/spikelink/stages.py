"""Pipeline stages wrapping the codec, NEF, network and robot building blocks.

Each stage declares its ports and a parameter schema.  ``step`` receives the
front-buffer contents of every input port and returns one value per output
port.  Stages are constructed by :func:`make_stage` from typed parameters,
which is how configuration files are turned into graphs.
"""
from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import codec, nef, neurosim, robosim
from .core import ContinuousFrame, SimClock, SpikeBatch, validate_frame
from .errors import BadRange, UnknownStageKind

__all__ = ["PortSpec", "Stage", "STAGE_TYPES", "make_stage", "ROLES"]

ROLES = ("source", "adapter", "encoder", "decoder", "network", "sink")
CONTINUOUS, EVENT = "continuous", "event"


@dataclass(frozen=True)
class PortSpec:
    name: str
    direction: str  # "in" | "out"
    kind: str  # "continuous" | "event"
    width: int


# parameter value types understood by the config layer
FLOAT, INT, STR, BOOL, FLOATS, MATRIX = "float", "int", "str", "bool", "floats", "matrix"
REQUIRED = object()


class Stage:
    role = "adapter"
    kind = ""
    params: dict = {}
    delay_ticks = 0
    breaks_cycle = False

    def __init__(self, name: str):
        self.name = name
        self.ports: dict[str, PortSpec] = {}

    def _port(self, name, direction, kind, width):
        self.ports[name] = PortSpec(name, direction, kind, int(width))

    @property
    def inputs(self):
        return {k: p for k, p in self.ports.items() if p.direction == "in"}

    @property
    def outputs(self):
        return {k: p for k, p in self.ports.items() if p.direction == "out"}

    def initial_output(self, port: str):
        """Front-buffer content seen by readers on tick 0."""
        spec = self.ports[port]
        if spec.kind == EVENT:
            return SpikeBatch.empty(-1)
        return ContinuousFrame(-1, np.zeros(spec.width))

    def step(self, inputs: dict, clock: SimClock) -> dict:
        raise NotImplementedError


def _data_file(name: str) -> Path:
    return Path(str(resources.files("spikelink") / "data" / name))


def resolve_path(value: str, base_dir) -> Path:
    if value.startswith("builtin:"):
        return _data_file(value.split(":", 1)[1])
    p = Path(value)
    if not p.is_absolute() and base_dir is not None:
        p = Path(base_dir) / p
    return p


class ConstantSource(Stage):
    role, kind = "source", "constant"
    params = {"width": (INT, REQUIRED), "value": (FLOATS, [0.0])}

    def __init__(self, name, width, value):
        super().__init__(name)
        v = np.broadcast_to(np.asarray(value, dtype=float), (width,)).copy()
        self.frame_values = validate_frame(ContinuousFrame(0, v), width).values
        self._port("out", "out", CONTINUOUS, width)

    def initial_output(self, port):
        return ContinuousFrame(-1, self.frame_values)

    def step(self, inputs, clock):
        return {"out": ContinuousFrame(clock.tick_index, self.frame_values)}


class StepSource(Stage):
    """Emits ``before`` until ``step_tick``, then ``after`` (a sensor jump)."""

    role, kind = "source", "step"
    params = {"width": (INT, 1), "before": (FLOAT, -1.0), "after": (FLOAT, 1.0), "step_tick": (INT, 5)}

    def __init__(self, name, width, before, after, step_tick):
        super().__init__(name)
        self.width, self.before, self.after, self.step_tick = width, before, after, step_tick
        self._port("out", "out", CONTINUOUS, width)

    def initial_output(self, port):
        return ContinuousFrame(-1, np.full(self.width, self.before))

    def step(self, inputs, clock):
        v = self.after if clock.tick_index >= self.step_tick else self.before
        return {"out": ContinuousFrame(clock.tick_index, np.full(self.width, v))}


class AdapterStage(Stage):
    role, kind = "adapter", "adapter"
    params = {
        "in_width": (INT, REQUIRED),
        "map": (STR, "identity"),  # identity | hemispheres | split | fan_in | file
        "out_width": (INT, 0),
        "map_file": (STR, ""),
    }

    def __init__(self, name, in_width, map, out_width, map_file, base_dir=None):
        super().__init__(name)
        if map == "identity":
            cmap = codec.ChannelMap.identity(in_width)
        elif map == "hemispheres":
            cmap = codec.ChannelMap.hemispheres(in_width)
        elif map == "split":
            cmap = codec.ChannelMap.split(in_width, out_width)
        elif map == "fan_in":
            cmap = codec.ChannelMap.fan_in(in_width, out_width)
        elif map == "file":
            _, w = codec.load_matrix_csv(resolve_path(map_file, base_dir))
            cmap = codec.ChannelMap.from_matrix(w)
            if cmap.m != in_width:
                raise BadRange(f"map file has {cmap.m} inputs, in_width is {in_width}")
        else:
            raise BadRange(f"unknown channel map {map!r}")
        self.cmap = cmap
        self._port("in", "in", CONTINUOUS, cmap.m)
        self._port("out", "out", CONTINUOUS, cmap.n)

    def step(self, inputs, clock):
        return {"out": ContinuousFrame(clock.tick_index, self.cmap.apply(inputs["in"].values))}


class _EncoderStage(Stage):
    role = "encoder"

    def step(self, inputs, clock):
        frame = validate_frame(inputs["in"], self.ports["in"].width)
        return {"out": self.encoder.step(frame, clock)}


class RegularEncoderStage(_EncoderStage):
    kind = "regular"
    params = {
        "n_neurons": (INT, REQUIRED),
        "v_min": (FLOAT, 1.0),
        "v_max": (FLOAT, 2.0),
        "initial_phase": (STR, "zero"),
    }

    def __init__(self, name, n_neurons, v_min, v_max, initial_phase, seed=0):
        super().__init__(name)
        self.encoder = codec.RegularEncoder(codec.RateEncoderParams(v_min, v_max, n_neurons), initial_phase, seed)
        self._port("in", "in", CONTINUOUS, n_neurons)
        self._port("out", "out", EVENT, n_neurons)


class PoissonEncoderStage(_EncoderStage):
    kind = "poisson"
    params = {"n_neurons": (INT, REQUIRED), "v_min": (FLOAT, 1.0), "v_max": (FLOAT, 2.0)}

    def __init__(self, name, n_neurons, v_min, v_max, seed=0):
        super().__init__(name)
        self.encoder = codec.PoissonEncoder(codec.RateEncoderParams(v_min, v_max, n_neurons), seed)
        self._port("in", "in", CONTINUOUS, n_neurons)
        self._port("out", "out", EVENT, n_neurons)


class NefEncoderStage(_EncoderStage):
    kind = "nef"
    params = {
        "dim": (INT, 1),
        "n_neurons": (INT, 0),  # 0 -> 100 per dimension
        "intercept_low": (FLOAT, -0.95),
        "intercept_high": (FLOAT, 0.95),
        "max_rate_low": (FLOAT, 100.0),
        "max_rate_high": (FLOAT, 200.0),
        "tau_m": (FLOAT, 0.02),
        "t_ref": (FLOAT, 0.002),
        "lif_dt": (FLOAT, 0.001),
    }

    def __init__(self, name, dim, n_neurons, intercept_low, intercept_high, max_rate_low,
                 max_rate_high, tau_m, t_ref, lif_dt, seed=0):
        super().__init__(name)
        self.population = nef.nef_build(
            dim, n_neurons or None, seed, (intercept_low, intercept_high),
            (max_rate_low, max_rate_high), nef.LifParams(tau_m=tau_m, t_ref=t_ref, dt=lif_dt),
        )
        self._port("in", "in", CONTINUOUS, dim)
        self._port("out", "out", EVENT, self.population.n_neurons)

    def step(self, inputs, clock):
        frame = validate_frame(inputs["in"], self.ports["in"].width)
        return {"out": nef.nef_encode_step(self.population, frame, clock)}


class ParrotStage(Stage):
    role, kind = "network", "parrot"
    params = {"n_neurons": (INT, REQUIRED), "delay_ticks": (INT, 0)}

    def __init__(self, name, n_neurons, delay_ticks):
        super().__init__(name)
        self.net = neurosim.ParrotNetwork(n_neurons, delay_ticks)
        self.delay_ticks = int(delay_ticks)
        self._port("in", "in", EVENT, n_neurons)
        self._port("out", "out", EVENT, n_neurons)

    def step(self, inputs, clock):
        return {"out": self.net.step(inputs["in"], clock)}


class LifNetworkStage(Stage):
    role, kind = "network", "lif"
    params = {
        "n_neurons": (INT, 2),
        "weights": (FLOATS, [50.0]),
        "bias": (FLOATS, [0.0]),
        "lateral": (MATRIX, None),
        "tau_m": (FLOAT, 0.02),
        "t_ref": (FLOAT, 0.002),
        "lif_dt": (FLOAT, 0.001),
    }

    def __init__(self, name, n_neurons, weights, bias, lateral, tau_m, t_ref, lif_dt):
        super().__init__(name)
        self.net = neurosim.DemoNetwork(
            n_neurons, weights, lateral, nef.LifParams(tau_m=tau_m, t_ref=t_ref, dt=lif_dt), bias
        )
        self._port("in", "in", EVENT, n_neurons)
        self._port("out", "out", EVENT, n_neurons)

    def step(self, inputs, clock):
        return {"out": self.net.step(inputs["in"], clock)}


class DecoderStage(Stage):
    """Exponential filter followed by a clamped linear readout.

    ``phi`` comes from an inline matrix, a CSV file, a constant fill
    (``phi_fill`` with ``n_outputs`` columns), or (``phi_from``) from the
    ridge-trained decoders of a NEF encoder stage, divided by ``tau_dec`` so
    that filtered spike trains decode like steady-state rates.
    """

    role, kind = "decoder", "decoder"
    params = {
        "n_neurons": (INT, REQUIRED),
        "phi": (MATRIX, None),
        "phi_file": (STR, ""),
        "phi_from": (STR, ""),
        "phi_fill": (FLOAT, None),
        "n_outputs": (INT, 0),
        "bias": (FLOATS, None),
        "tau_dec": (FLOAT, codec.DEFAULT_TAU_DEC),
    }

    def __init__(self, name, n_neurons, phi, phi_file, phi_from, phi_fill, n_outputs, bias, tau_dec,
                 base_dir=None, stages=None):
        super().__init__(name)
        if phi_from:
            src = (stages or {}).get(phi_from)
            if not isinstance(src, NefEncoderStage):
                raise BadRange(f"phi_from={phi_from!r} does not name a nef encoder stage")
            pop = src.population
            dec = pop.decoders if pop.decoders is not None else nef.nef_train_decoders(pop)
            phi = dec / tau_dec
        elif phi_file:
            _, phi = codec.load_matrix_csv(resolve_path(phi_file, base_dir))
        elif phi_fill is not None:
            if n_outputs < 1:
                raise BadRange("phi_fill needs n_outputs >= 1")
            phi = np.full((n_neurons, n_outputs), phi_fill)
        elif phi is None:
            raise BadRange(f"decoder {name!r} needs phi, phi_file, phi_from or phi_fill")
        self.weights = codec.LinearReadout(phi, bias)
        if self.weights.n_inputs != n_neurons:
            raise BadRange(f"phi has {self.weights.n_inputs} rows, decoder has {n_neurons} neurons")
        self.filter = codec.ExponentialFilter(n_neurons, tau_dec)
        self._port("in", "in", EVENT, n_neurons)
        self._port("out", "out", CONTINUOUS, self.weights.n_outputs)

    def step(self, inputs, clock):
        a = self.filter.step(inputs["in"], clock)
        return {"out": ContinuousFrame(clock.tick_index, codec.readout(a, self.weights))}


class SinkStage(Stage):
    """Records every frame it reads."""

    role, kind = "sink", "sink"
    params = {"width": (INT, REQUIRED), "record": (BOOL, True)}

    def __init__(self, name, width, record):
        super().__init__(name)
        self.record = record
        self.frames: list[ContinuousFrame] = []
        self._port("in", "in", CONTINUOUS, width)

    def step(self, inputs, clock):
        if self.record:
            self.frames.append(inputs["in"])
        return {}

    def values(self) -> np.ndarray:
        return np.array([f.values for f in self.frames])


class RobotStage(Stage):
    """Robot world: reads a (linear, angular) motor frame, writes the next scan."""

    role, kind = "source", "robot"
    breaks_cycle = True
    params = {
        "arena": (STR, "builtin:arena_default.txt"),
        "x": (FLOAT, 5.0),
        "y": (FLOAT, 5.0),
        "heading": (FLOAT, 0.0),
        "radius": (FLOAT, 0.2),
        "n_beams": (INT, 100),
        "fov": (FLOAT, math.pi),
        "max_range": (FLOAT, 5.0),
        "update_rate": (FLOAT, 20.0),
        "v_max_lin": (FLOAT, 0.5),
        "omega_max": (FLOAT, 1.5),
        "substep": (FLOAT, 0.001),
        "halt_on_collision": (BOOL, False),
        "proximity": (BOOL, True),
    }

    def __init__(self, name, arena, x, y, heading, radius, n_beams, fov, max_range, update_rate,
                 v_max_lin, omega_max, substep, halt_on_collision, proximity, base_dir=None):
        super().__init__(name)
        self.world = robosim.RobotWorld(
            robosim.load_arena(resolve_path(arena, base_dir)),
            robosim.RobotState(x, y, heading, radius),
            robosim.ScanParams(n_beams, fov, max_range, update_rate),
            v_max_lin, omega_max, substep, halt_on_collision, proximity,
        )
        self._port("motor", "in", CONTINUOUS, 2)
        self._port("scan", "out", CONTINUOUS, n_beams)

    def initial_output(self, port):
        return self.world.sense(-1)

    def step(self, inputs, clock):
        return {"scan": self.world.step(inputs["motor"], clock)}


STAGE_TYPES: dict[str, type[Stage]] = {
    cls.kind: cls
    for cls in (
        ConstantSource, StepSource, AdapterStage, RegularEncoderStage, PoissonEncoderStage,
        NefEncoderStage, ParrotStage, LifNetworkStage, DecoderStage, SinkStage, RobotStage,
    )
}


def make_stage(name: str, kind: str, params: dict, *, seed: int = 0, base_dir=None, stages=None) -> Stage:
    """Instantiate a stage of config ``kind``; missing parameters take their defaults."""
    try:
        cls = STAGE_TYPES[kind]
    except KeyError:
        raise UnknownStageKind(f"stage {name!r}: unknown kind {kind!r}") from None
    kwargs = {}
    for key, (_, default) in cls.params.items():
        val = params.get(key, default)
        if val is REQUIRED:
            raise BadRange(f"stage {name!r}: missing required parameter {key!r}")
        kwargs[key] = val
    extra = set(params) - set(cls.params)
    if extra:
        raise BadRange(f"stage {name!r}: unknown parameters {sorted(extra)}")
    accepted = inspect.signature(cls.__init__).parameters
    if "seed" in accepted:
        kwargs["seed"] = seed
    if "base_dir" in accepted:
        kwargs["base_dir"] = base_dir
    if "stages" in accepted:
        kwargs["stages"] = stages
    return cls(name, **kwargs)
