"""Ground-truth world model: moving targets, unicycle sensors, disk-FOV sensing.

Targets follow analytic velocity fields (one per pattern kind) integrated with
midpoint velocity sampling; sensors follow unicycle kinematics under box-bounded
acceleration and turn-rate inputs. Sensing returns one noisy velocity
measurement per active in-FOV target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BoundsViolation

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap to [0, 2*pi)."""
    t = theta % TWO_PI
    if t >= TWO_PI:  # guards the tiny-negative-input edge case of %
        t -= TWO_PI
    return t


@dataclass(frozen=True)
class WorkspaceSpec:
    """Axis-aligned rectangle anchored at the origin."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("workspace dimensions must be positive")

    def contains(self, point) -> bool:
        x, y = float(point[0]), float(point[1])
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * self.width, 0.5 * self.height])

    def clip(self, point) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float),
                       [0.0, 0.0], [self.width, self.height])


@dataclass(frozen=True)
class ControlBounds:
    """Admissible box for control inputs plus the speed range of the platform."""

    accel_min: float = -5.0
    accel_max: float = 5.0
    turn_min: float = -math.pi / 6.0
    turn_max: float = math.pi / 6.0
    speed_min: float = 0.0
    speed_max: float = 3.0

    def __post_init__(self):
        if self.accel_min > self.accel_max or self.turn_min > self.turn_max:
            raise ValueError("control bounds must satisfy min <= max")
        if self.speed_min > self.speed_max or self.speed_min < 0:
            raise ValueError("speed bounds must satisfy 0 <= min <= max")

    def contains(self, control: "ControlInput") -> bool:
        return (self.accel_min <= control.accel <= self.accel_max
                and self.turn_min <= control.turn_rate <= self.turn_max)

    def clip_speed(self, v: float) -> float:
        return min(max(v, self.speed_min), self.speed_max)


@dataclass(frozen=True)
class ControlInput:
    """Linear acceleration (m/s^2) and turn rate (rad/s)."""

    accel: float = 0.0
    turn_rate: float = 0.0


@dataclass(frozen=True)
class SensorState:
    """Unicycle sensor: planar position, heading, scalar speed, disk FOV radius."""

    position: np.ndarray
    heading: float
    speed: float
    sensing_radius: float

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float).reshape(2).copy())
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")
        if self.sensing_radius <= 0:
            raise ValueError("sensing radius must be positive")


@dataclass(frozen=True)
class TargetState:
    """Snapshot of one target: identity, position, velocity, in-workspace flag."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    active: bool = True

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float).reshape(2).copy())
        object.__setattr__(self, "velocity",
                           np.asarray(self.velocity, dtype=float).reshape(2).copy())


@dataclass(frozen=True)
class Measurement:
    """One velocity observation of a target, tagged with its training input."""

    sensor_id: int
    target_id: int
    time_step: int
    observed_position: np.ndarray
    observed_velocity: np.ndarray


GENERATOR_KINDS = ("circle", "figure-eight", "sine-lane", "straight-bounce",
                   "spiral", "random-waypoint")


@dataclass(frozen=True)
class TrajectoryGenerator:
    """Analytic target motion pattern with an activity window in steps.

    Every kind exposes a closed-form position(t) and its exact time derivative
    velocity(t), so paths are smooth and integration tests can compare against
    the analytic curve. The random-waypoint kind derives its waypoints from a
    seed at construction and is deterministic afterwards.
    """

    kind: str
    params: dict
    entry_step: int = 0
    exit_step: int = 10 ** 9
    _waypoints: np.ndarray = field(default=None, repr=False, compare=False)
    _segment_times: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.exit_step < self.entry_step:
            raise ValueError("exit_step must be >= entry_step")
        if self.kind == "random-waypoint":
            self._build_waypoints()

    def _build_waypoints(self):
        p = self.params
        rng = np.random.default_rng(int(p.get("seed", 0)))
        count = int(p.get("count", 6))
        lo = np.asarray(p["low"], dtype=float)
        hi = np.asarray(p["high"], dtype=float)
        cruise = float(p.get("cruise_speed", 1.0))
        pts = rng.uniform(lo, hi, size=(count, 2))
        pts = np.vstack([pts, pts[:1]])  # close the loop for continuity
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1) / max(cruise, 1e-9)
        seg = np.maximum(seg, 1e-3)
        object.__setattr__(self, "_waypoints", pts)
        object.__setattr__(self, "_segment_times", seg)

    # -- closed-form curves ------------------------------------------------

    def position(self, t: float) -> np.ndarray:
        p = self.params
        if self.kind == "circle":
            c = np.asarray(p["center"], dtype=float)
            u = p["angular_rate"] * t + p.get("phase", 0.0)
            return c + p["radius"] * np.array([math.cos(u), math.sin(u)])
        if self.kind == "figure-eight":
            c = np.asarray(p["center"], dtype=float)
            u = p["angular_rate"] * t + p.get("phase", 0.0)
            return c + np.array([p["ax"] * math.sin(u),
                                 p["ay"] * math.sin(u) * math.cos(u)])
        if self.kind in ("sine-lane", "straight-bounce"):
            p0 = np.asarray(p["start"], dtype=float)
            ang = p.get("direction", 0.0)
            d = np.array([math.cos(ang), math.sin(ang)])
            n = np.array([-d[1], d[0]])
            along = 0.5 * p["length"] * (1.0 - math.cos(p["rate"] * t))
            if self.kind == "sine-lane":
                across = p["amplitude"] * math.sin(p["wiggle_rate"] * t)
            else:
                across = 0.0
            return p0 + d * along + n * across
        if self.kind == "spiral":
            c = np.asarray(p["center"], dtype=float)
            u = p["angular_rate"] * t + p.get("phase", 0.0)
            r = p["radius"] + p["radius_swing"] * math.sin(p["swing_rate"] * t)
            return c + r * np.array([math.cos(u), math.sin(u)])
        # random-waypoint: cosine-eased segments, zero speed at the joints
        idx, s = self._segment_of(t)
        a = self._waypoints[idx]
        b = self._waypoints[idx + 1]
        ease = 0.5 * (1.0 - math.cos(math.pi * s))
        return a + (b - a) * ease

    def velocity(self, t: float) -> np.ndarray:
        p = self.params
        if self.kind == "circle":
            u = p["angular_rate"] * t + p.get("phase", 0.0)
            rw = p["radius"] * p["angular_rate"]
            return rw * np.array([-math.sin(u), math.cos(u)])
        if self.kind == "figure-eight":
            u = p["angular_rate"] * t + p.get("phase", 0.0)
            w = p["angular_rate"]
            return np.array([p["ax"] * w * math.cos(u),
                             p["ay"] * w * math.cos(2.0 * u)])
        if self.kind in ("sine-lane", "straight-bounce"):
            ang = p.get("direction", 0.0)
            d = np.array([math.cos(ang), math.sin(ang)])
            n = np.array([-d[1], d[0]])
            v_along = 0.5 * p["length"] * p["rate"] * math.sin(p["rate"] * t)
            if self.kind == "sine-lane":
                v_across = p["amplitude"] * p["wiggle_rate"] * math.cos(p["wiggle_rate"] * t)
            else:
                v_across = 0.0
            return d * v_along + n * v_across
        if self.kind == "spiral":
            u = p["angular_rate"] * t + p.get("phase", 0.0)
            w = p["angular_rate"]
            r = p["radius"] + p["radius_swing"] * math.sin(p["swing_rate"] * t)
            dr = p["radius_swing"] * p["swing_rate"] * math.cos(p["swing_rate"] * t)
            return (dr * np.array([math.cos(u), math.sin(u)])
                    + r * w * np.array([-math.sin(u), math.cos(u)]))
        idx, s = self._segment_of(t)
        a = self._waypoints[idx]
        b = self._waypoints[idx + 1]
        dur = self._segment_times[idx]
        return (b - a) * (0.5 * math.pi * math.sin(math.pi * s) / dur)

    def _segment_of(self, t: float):
        total = float(self._segment_times.sum())
        tau = t % total
        for i, dur in enumerate(self._segment_times):
            if tau <= dur:
                return i, tau / dur
            tau -= dur
        return len(self._segment_times) - 1, 1.0


# -- kinematics -----------------------------------------------------------


def step_sensor(state: SensorState, control: ControlInput, dt: float,
                bounds: ControlBounds = ControlBounds()) -> SensorState:
    """Advance a unicycle sensor one step.

    Position advances with the current speed and heading, then heading and
    speed are updated from the input; speed clamps to the platform range.
    Raises BoundsViolation for inputs outside the admissible box.
    """
    if not bounds.contains(control):
        raise BoundsViolation(
            f"control ({control.accel}, {control.turn_rate}) outside bounds")
    pos = state.position + state.speed * dt * np.array(
        [math.cos(state.heading), math.sin(state.heading)])
    heading = wrap_angle(state.heading + control.turn_rate * dt)
    speed = bounds.clip_speed(state.speed + control.accel * dt)
    return SensorState(pos, heading, speed, state.sensing_radius)


def step_target(gen: TrajectoryGenerator, state: TargetState, t: float,
                dt: float) -> TargetState:
    """Advance a target using midpoint velocity sampling.

    Past the generator's exit time the target freezes in place and is marked
    inactive.
    """
    exit_t = gen.exit_step * dt
    if t >= exit_t:
        return replace(state, active=False)
    vmid = gen.velocity(t + 0.5 * dt)
    pos = state.position + vmid * dt
    vel = gen.velocity(t + dt)
    active = (t + dt) <= exit_t
    return TargetState(state.id, pos, vel, active)


def spawn_target(gen: TrajectoryGenerator, target_id: int, dt: float) -> TargetState:
    """Target state at its entry step."""
    t0 = gen.entry_step * dt
    return TargetState(target_id, gen.position(t0), gen.velocity(t0), True)


def in_fov(sensor: SensorState, point) -> bool:
    """Disk field of view, boundary inclusive."""
    d = math.hypot(sensor.position[0] - float(point[0]),
                   sensor.position[1] - float(point[1]))
    return d <= sensor.sensing_radius


def sense(sensor_id: int, sensor: SensorState, targets, k: int,
          rng: np.random.Generator, noise_std: float) -> list[Measurement]:
    """Measure every active in-FOV target at step k.

    Velocity observations carry additive isotropic Gaussian noise drawn from
    rng; positions are recorded as noise-free training inputs. Out-of-FOV
    targets produce no entry.
    """
    out = []
    for tgt in targets:
        if not tgt.active or not in_fov(sensor, tgt.position):
            continue
        noise = rng.normal(0.0, noise_std, size=2)
        out.append(Measurement(sensor_id, tgt.id, k,
                               tgt.position.copy(),
                               tgt.velocity + noise))
    return out
