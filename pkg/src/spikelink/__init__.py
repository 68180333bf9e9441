"""Spike/continuous co-simulation middleware with a tick-synchronous runtime.

Continuous sensor frames are rate- or NEF-encoded into spike batches, routed
through spiking networks, decoded back into continuous actuator commands and
fed to a planar robot simulator, all on a shared global tick.
"""
from .core import ContinuousFrame, SimClock, SpikeBatch, SpikeEvent, clamp_frame, merge_batches, validate_frame
from .codec import (
    ChannelMap,
    ExponentialFilter,
    LinearReadout,
    PoissonEncoder,
    RateEncoderParams,
    RegularEncoder,
)
from .nef import LifParams, NefPopulation, lif_rate, lif_step, nef_build, nef_decode, nef_train_decoders
from .neurosim import DemoNetwork, ParrotNetwork
from .robosim import Arena, LaserScan, RobotState, RobotWorld, ScanParams, TwistCommand, load_arena
from .config import ConfigDocument, StageConfig, load_config, parse_config, render_config
from .runtime import Connection, RunReport, StageGraph, build_graph, path_latency_ticks, run, step_latency_hops
from .stages import STAGE_TYPES, Stage, make_stage
from . import bench, errors

__version__ = "0.1.0"
