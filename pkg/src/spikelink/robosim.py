"""Planar robot world: segment arena, unicycle kinematics, ray-cast laser scanner."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import ContinuousFrame, SimClock
from .errors import BadRange, CollisionHalt, WidthMismatch

__all__ = [
    "Arena",
    "RobotState",
    "ScanParams",
    "LaserScan",
    "TwistCommand",
    "RobotWorld",
    "load_arena",
    "raycast_scan",
    "scan_to_frame",
    "frame_to_ranges",
    "apply_twist",
    "collision_check",
    "robot_stage_step",
    "POSE_TRACE_HEADER",
]

POSE_TRACE_HEADER = ("tick", "x", "y", "heading", "v", "omega", "collided")


def _wrap(angle: float) -> float:
    """Normalize to (-pi, pi]."""
    a = math.remainder(angle, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True, eq=False)
class Arena:
    """Obstacle segments (rows ``x1 y1 x2 y2``) inside a rectangular boundary."""

    segments: np.ndarray
    bounds: tuple = (0.0, 0.0, 10.0, 10.0)  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        if not np.all(np.isfinite(seg)):
            raise BadRange("arena segments must be finite")
        object.__setattr__(self, "segments", seg)
        x0, y0, x1, y1 = map(float, self.bounds)
        if not (x1 > x0 and y1 > y0):
            raise BadRange("arena bounds are degenerate")
        object.__setattr__(self, "bounds", (x0, y0, x1, y1))

    @property
    def walls(self) -> np.ndarray:
        """Obstacle segments plus the four boundary edges."""
        x0, y0, x1, y1 = self.bounds
        box = np.array([[x0, y0, x1, y0], [x1, y0, x1, y1], [x1, y1, x0, y1], [x0, y1, x0, y0]])
        return np.vstack([self.segments, box])

    def mirrored(self, axis_point, axis_angle) -> "Arena":
        """Reflect obstacle segments across a line (the boundary box is dropped)."""
        px, py = axis_point
        c, s = math.cos(2 * axis_angle), math.sin(2 * axis_angle)
        r = np.array([[c, s], [s, -c]])
        pts = self.segments.reshape(-1, 2) - (px, py)
        pts = pts @ r.T + (px, py)
        big = 1e6
        return Arena(pts.reshape(-1, 4), (-big, -big, big, big))


def load_arena(path) -> Arena:
    """Parse an arena file.

    One segment per line as ``x1 y1 x2 y2`` (meters); ``#`` starts a comment.
    An optional ``bounds xmin ymin xmax ymax`` line sets the boundary, which
    otherwise defaults to the bounding box of all segments.
    """
    segs, bounds = [], None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "bounds":
            parts = parts[1:]
            target = "bounds"
        else:
            target = "segment"
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 numbers, got {len(parts)}")
        vals = [float(p) for p in parts]
        if target == "bounds":
            bounds = tuple(vals)
        else:
            segs.append(vals)
    seg = np.array(segs, dtype=float).reshape(-1, 4)
    if bounds is None:
        if not len(seg):
            raise ValueError(f"{path}: no segments and no bounds")
        xs, ys = seg[:, [0, 2]], seg[:, [1, 3]]
        bounds = (xs.min(), ys.min(), xs.max(), ys.max())
    return Arena(seg, bounds)


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float = 0.0
    radius: float = 0.2
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise BadRange("robot radius must be positive")
        object.__setattr__(self, "heading", _wrap(float(self.heading)))


@dataclass(frozen=True)
class ScanParams:
    n_beams: int = 100
    fov: float = math.pi
    max_range: float = 5.0
    update_rate: float = 20.0

    @property
    def angles(self) -> np.ndarray:
        """Beam angles relative to the heading, right to left, symmetric about 0."""
        return -self.fov / 2 + (np.arange(self.n_beams) + 0.5) * self.fov / self.n_beams


@dataclass(frozen=True, eq=False)
class LaserScan:
    ranges: np.ndarray
    params: ScanParams = field(default_factory=ScanParams)

    @property
    def n_beams(self):
        return self.params.n_beams

    @property
    def max_range(self):
        return self.params.max_range


@dataclass(frozen=True)
class TwistCommand:
    linear: float
    angular: float
    v_max_lin: float = 0.5
    omega_max: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "linear", float(np.clip(self.linear, -self.v_max_lin, self.v_max_lin)))
        object.__setattr__(self, "angular", float(np.clip(self.angular, -self.omega_max, self.omega_max)))

    @classmethod
    def from_frame(cls, values, v_max_lin=0.5, omega_max=1.5) -> "TwistCommand":
        v = np.asarray(values, dtype=float)
        if v.size != 2:
            raise WidthMismatch(2, v.size)
        v = np.clip(v, -1.0, 1.0)
        return cls(v[0] * v_max_lin, v[1] * omega_max, v_max_lin, omega_max)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def raycast_scan(arena: Arena, pose: RobotState, params: ScanParams = ScanParams()) -> LaserScan:
    """Exact nearest ray/segment intersection per beam, clipped to the max range."""
    ang = pose.heading + params.angles
    dx, dy = np.cos(ang)[:, None], np.sin(ang)[:, None]
    w = arena.walls
    ax, ay = w[:, 0][None, :] - pose.x, w[:, 1][None, :] - pose.y
    ex, ey = (w[:, 2] - w[:, 0])[None, :], (w[:, 3] - w[:, 1])[None, :]
    denom = _cross(dx, dy, ex, ey)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = _cross(ax, ay, ex, ey) / denom
        s = _cross(ax, ay, dx, dy) / denom
    hit = (denom != 0) & (t >= 0) & (s >= 0) & (s <= 1)
    t = np.where(hit, t, np.inf)
    ranges = np.minimum(t.min(axis=1), params.max_range)
    return LaserScan(np.clip(ranges, 0.0, params.max_range), params)


def scan_to_frame(scan: LaserScan, tick_index: int = 0, proximity: bool = True) -> ContinuousFrame:
    """Map ranges to [-1, 1]: +1 touching, -1 free (or the reverse with ``proximity=False``)."""
    v = 1.0 - 2.0 * (scan.ranges / scan.max_range)
    return ContinuousFrame(tick_index, v if proximity else -v)


def frame_to_ranges(values, max_range: float = 5.0, proximity: bool = True) -> np.ndarray:
    """Inverse of :func:`scan_to_frame`."""
    v = np.asarray(values, dtype=float)
    if not proximity:
        v = -v
    return (1.0 - v) * max_range / 2.0


def apply_twist(state: RobotState, cmd: TwistCommand, dt: float) -> RobotState:
    """Exact unicycle motion for constant (v, omega) over ``dt``.

    The arc chord is written as ``v dt sinc(omega dt / 2)`` along the mean
    heading, which is exact for every omega and reduces to a straight line
    as omega goes to zero.
    """
    if not dt > 0:
        raise BadRange("dt must be positive")
    v, w = cmd.linear, cmd.angular
    half = 0.5 * w * dt
    chord = v * dt * (np.sinc(half / math.pi) if abs(w) >= 1e-9 else 1.0)
    mid = state.heading + half
    x = state.x + chord * math.cos(mid)
    y = state.y + chord * math.sin(mid)
    return RobotState(x, y, state.heading + w * dt, state.radius, v, w)


def _segment_distance(px, py, seg: np.ndarray) -> np.ndarray:
    ax, ay, bx, by = seg.T
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(ll > 0, ((px - ax) * ex + (py - ay) * ey) / ll, 0.0)
    u = np.clip(u, 0.0, 1.0)
    return np.hypot(ax + u * ex - px, ay + u * ey - py)


def collision_check(arena: Arena, state: RobotState) -> bool:
    """True iff the robot disc touches an obstacle segment or leaves the bounds."""
    x0, y0, x1, y1 = arena.bounds
    r = state.radius
    if state.x - r <= x0 or state.x + r >= x1 or state.y - r <= y0 or state.y + r >= y1:
        return True
    if not len(arena.segments):
        return False
    return bool(np.any(_segment_distance(state.x, state.y, arena.segments) <= r))


class RobotWorld:
    """Robot stage state: physics in fixed sub-steps, scan output once per tick.

    On a colliding sub-step the robot is held at its previous pose (the world
    is not penetrable) and the collision is counted.
    """

    def __init__(self, arena: Arena, state: RobotState, scan: ScanParams = ScanParams(),
                 v_max_lin=0.5, omega_max=1.5, substep=1e-3, halt_on_collision=False,
                 proximity=True):
        self.arena = arena
        self.state = state
        self.scan_params = scan
        self.v_max_lin = float(v_max_lin)
        self.omega_max = float(omega_max)
        self.substep = float(substep)
        self.halt_on_collision = halt_on_collision
        self.proximity = proximity
        self.collisions = 0
        self.path_length = 0.0
        self.trace: list[tuple] = []
        self._last_frame = None

    def sense(self, tick_index: int) -> ContinuousFrame:
        scan = raycast_scan(self.arena, self.state, self.scan_params)
        self._last_frame = scan_to_frame(scan, tick_index, self.proximity)
        return self._last_frame

    def step(self, motor, clock: SimClock) -> ContinuousFrame:
        values = motor.values if isinstance(motor, ContinuousFrame) else motor
        cmd = TwistCommand.from_frame(values, self.v_max_lin, self.omega_max)
        n_sub = max(1, int(round(clock.delta_t / self.substep)))
        h = clock.delta_t / n_sub
        collided = False
        for _ in range(n_sub):
            nxt = apply_twist(self.state, cmd, h)
            if collision_check(self.arena, nxt):
                collided = True
                self.state = replace(self.state, v=cmd.linear, omega=cmd.angular)
                break
            self.path_length += math.hypot(nxt.x - self.state.x, nxt.y - self.state.y)
            self.state = nxt
        s = self.state
        self.trace.append((clock.tick_index, s.x, s.y, s.heading, s.v, s.omega, int(collided)))
        if collided:
            self.collisions += 1
            if self.halt_on_collision:
                raise CollisionHalt(f"collision at tick {clock.tick_index}")
        every = max(1, int(round(1.0 / (self.scan_params.update_rate * clock.delta_t))))
        if self._last_frame is None or (clock.tick_index + 1) % every == 0:
            return self.sense(clock.tick_index + 1)
        return ContinuousFrame(clock.tick_index + 1, self._last_frame.values)

    def write_trace(self, path) -> None:
        with open(path, "w") as f:
            f.write(",".join(POSE_TRACE_HEADER) + "\n")
            for row in self.trace:
                f.write(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r},{row[4]!r},{row[5]!r},{row[6]}\n")


def robot_stage_step(world: RobotWorld, motor, clock: SimClock) -> ContinuousFrame:
    return world.step(motor, clock)
