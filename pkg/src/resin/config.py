"""Scenario configuration: schema, validation, builtin experiment setups.

Configs are JSON with a versioned format tag. Validation errors name the
offending field path. Random sensor placement is derived deterministically
from the scenario seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError
from .world import (ControlBounds, GENERATOR_KINDS, SensorState,
                    TrajectoryGenerator, WorkspaceSpec)

FORMAT_VERSION = 1

PLANNERS = ("resin", "centralized", "no-fusion", "nearest-target", "random")

_EXIT_NEVER = 10 ** 9


@dataclass(frozen=True)
class SensorSpec:
    position: tuple
    heading: float = 0.0
    speed: float = 0.0
    sensing_radius: float = 5.0
    stationary: bool = False

    def to_state(self) -> SensorState:
        return SensorState(np.asarray(self.position, dtype=float),
                           self.heading, self.speed, self.sensing_radius)


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    params: dict
    entry_step: int = 0
    exit_step: int = _EXIT_NEVER

    def to_generator(self) -> TrajectoryGenerator:
        return TrajectoryGenerator(self.kind, dict(self.params),
                                   self.entry_step, self.exit_step)


@dataclass(frozen=True)
class GpSettings:
    signal_std: float = 1.0
    length_space: float = 2.0
    length_time: float = 4.0
    noise_std: float | None = None  # None: track the world noise (floored)
    window_cap: int = 60
    window_min: int = 8
    refit_period: int = 10
    fit_maxiter: int = 25


@dataclass(frozen=True)
class PlanningSettings:
    budget: int = 300
    psi_mode: str = "bump"
    order: str = "ascending"


@dataclass(frozen=True)
class TopologySettings:
    mode: str = "proximity"
    parent: dict | None = None
    root: int | None = None
    connectivity_radius: float | None = None


@dataclass(frozen=True)
class FusionSettings:
    scale_before_weight: bool = True


@dataclass(frozen=True)
class RandomSensors:
    count: int
    sensing_radius: float = 5.0
    stationary: bool = False
    margin: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    workspace: WorkspaceSpec
    dt: float
    steps: int
    horizon: int
    noise_std: float
    planner: str
    targets: tuple
    sensors: tuple = ()
    random_sensors: RandomSensors | None = None
    bounds: ControlBounds = ControlBounds()
    gp: GpSettings = GpSettings()
    planning: PlanningSettings = PlanningSettings()
    topology: TopologySettings = TopologySettings()
    fusion: FusionSettings = FusionSettings()

    @property
    def gp_noise_std(self) -> float:
        if self.gp.noise_std is not None:
            return self.gp.noise_std
        return max(self.noise_std, 1e-4)

    def sensor_states(self) -> dict:
        """Initial sensor states keyed by id; random placement is seed-derived."""
        if self.sensors:
            return {i: s.to_state() for i, s in enumerate(self.sensors)}
        rs = self.random_sensors
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, 7]).generate_state(4))
        lo = (rs.margin, rs.margin)
        hi = (self.workspace.width - rs.margin,
              self.workspace.height - rs.margin)
        out = {}
        for i in range(rs.count):
            pos = rng.uniform(lo, hi)
            heading = rng.uniform(0.0, 2.0 * math.pi)
            out[i] = SensorState(pos, heading, 0.0, rs.sensing_radius)
        return out

    def stationary_flags(self) -> dict:
        if self.sensors:
            return {i: s.stationary for i, s in enumerate(self.sensors)}
        return {i: self.random_sensors.stationary
                for i in range(self.random_sensors.count)}

    def generators(self) -> dict:
        return {i: t.to_generator() for i, t in enumerate(self.targets)}

    def to_dict(self) -> dict:
        d = {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "seed": self.seed,
            "workspace": {"width": self.workspace.width,
                          "height": self.workspace.height},
            "dt": self.dt,
            "steps": self.steps,
            "horizon": self.horizon,
            "noise_std": self.noise_std,
            "planner": self.planner,
            "bounds": asdict(self.bounds),
            "gp": asdict(self.gp),
            "planning": asdict(self.planning),
            "topology": asdict(self.topology),
            "fusion": asdict(self.fusion),
            "targets": [asdict(t) for t in self.targets],
        }
        if self.sensors:
            d["sensors"] = [asdict(s) for s in self.sensors]
        if self.random_sensors is not None:
            d["random_sensors"] = asdict(self.random_sensors)
        return d


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"{where}{key}", "missing required field")
    return data[key]


def _positive(value, fieldname: str):
    if not isinstance(value, (int, float)) or value <= 0:
        raise ConfigError(fieldname, "must be a positive number")
    return float(value)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    version = _require(data, "format_version", "")
    if version != FORMAT_VERSION:
        raise ConfigError("format_version",
                          f"expected {FORMAT_VERSION}, got {version!r}")
    seed = _require(data, "seed", "")
    if not isinstance(seed, int):
        raise ConfigError("seed", "must be an integer (and is mandatory)")

    ws = _require(data, "workspace", "")
    workspace = WorkspaceSpec(_positive(ws.get("width"), "workspace.width"),
                              _positive(ws.get("height"), "workspace.height"))

    planner = data.get("planner", "resin")
    if planner not in PLANNERS:
        raise ConfigError("planner", f"must be one of {PLANNERS}")

    dt = _positive(_require(data, "dt", ""), "dt")
    steps = _require(data, "steps", "")
    if not isinstance(steps, int) or steps < 1:
        raise ConfigError("steps", "must be a positive integer")
    horizon = _require(data, "horizon", "")
    if not isinstance(horizon, int) or horizon < 1:
        raise ConfigError("horizon", "must be a positive integer")
    noise = data.get("noise_std", 0.1)
    if not isinstance(noise, (int, float)) or noise < 0:
        raise ConfigError("noise_std", "must be a nonnegative number")

    try:
        bounds = ControlBounds(**data.get("bounds", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError("bounds", str(exc)) from None

    sensors = ()
    random_sensors = None
    if "sensors" in data:
        items = data["sensors"]
        if not isinstance(items, list) or not items:
            raise ConfigError("sensors", "must be a non-empty list")
        specs = []
        for i, s in enumerate(items):
            try:
                pos = tuple(_require(s, "position", f"sensors[{i}]."))
                specs.append(SensorSpec(
                    pos, s.get("heading", 0.0), s.get("speed", 0.0),
                    _positive(s.get("sensing_radius", 5.0),
                              f"sensors[{i}].sensing_radius"),
                    bool(s.get("stationary", False))))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"sensors[{i}]", str(exc)) from None
        sensors = tuple(specs)
    elif "random_sensors" in data:
        rs = data["random_sensors"]
        count = _require(rs, "count", "random_sensors.")
        if not isinstance(count, int) or count < 1:
            raise ConfigError("random_sensors.count",
                              "must be a positive integer")
        random_sensors = RandomSensors(
            count,
            _positive(rs.get("sensing_radius", 5.0),
                      "random_sensors.sensing_radius"),
            bool(rs.get("stationary", False)),
            float(rs.get("margin", 1.0)))
    else:
        raise ConfigError("sensors",
                          "either sensors or random_sensors is required")

    raw_targets = _require(data, "targets", "")
    if not isinstance(raw_targets, list) or not raw_targets:
        raise ConfigError("targets", "must be a non-empty list")
    targets = []
    for i, t in enumerate(raw_targets):
        kind = _require(t, "kind", f"targets[{i}].")
        if kind not in GENERATOR_KINDS:
            raise ConfigError(f"targets[{i}].kind",
                              f"must be one of {GENERATOR_KINDS}")
        exit_step = t.get("exit_step")
        spec = TargetSpec(kind, dict(_require(t, "params", f"targets[{i}].")),
                          int(t.get("entry_step", 0)),
                          _EXIT_NEVER if exit_step is None else int(exit_step))
        try:
            spec.to_generator()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"targets[{i}]", f"invalid parameters: {exc}") from None
        targets.append(spec)

    gp_raw = data.get("gp", {})
    try:
        gp = GpSettings(**gp_raw)
    except TypeError as exc:
        raise ConfigError("gp", str(exc)) from None
    try:
        planning = PlanningSettings(**data.get("planning", {}))
    except TypeError as exc:
        raise ConfigError("planning", str(exc)) from None
    if planning.psi_mode not in ("bump", "monotone"):
        raise ConfigError("planning.psi_mode", "must be bump or monotone")
    if planning.order not in ("ascending", "tree-dfs"):
        raise ConfigError("planning.order", "must be ascending or tree-dfs")

    topo_raw = dict(data.get("topology", {}))
    if "parent" in topo_raw and topo_raw["parent"] is not None:
        topo_raw["parent"] = {int(k): (None if v is None else int(v))
                              for k, v in topo_raw["parent"].items()}
    try:
        topology = TopologySettings(**topo_raw)
    except TypeError as exc:
        raise ConfigError("topology", str(exc)) from None
    if topology.mode not in ("proximity", "static"):
        raise ConfigError("topology.mode", "must be proximity or static")

    try:
        fusion = FusionSettings(**data.get("fusion", {}))
    except TypeError as exc:
        raise ConfigError("fusion", str(exc)) from None

    return ScenarioConfig(
        name=str(data.get("name", "scenario")), seed=seed,
        workspace=workspace, dt=dt, steps=steps, horizon=horizon,
        noise_std=float(noise), planner=planner, targets=tuple(targets),
        sensors=sensors, random_sensors=random_sensors, bounds=bounds,
        gp=gp, planning=planning, topology=topology, fusion=fusion)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return config_from_dict(data)


def builtin_config(name: str) -> ScenarioConfig:
    """Load one of the shipped experiment configs by name."""
    ref = resources.files("resin") / "configs" / f"{name}.json"
    if not ref.is_file():
        available = sorted(p.stem for p in (resources.files("resin") / "configs").iterdir())
        raise ConfigError("<builtin>", f"unknown config {name!r}; "
                          f"available: {available}")
    return config_from_dict(json.loads(ref.read_text()))


def config_hash(cfg: ScenarioConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
