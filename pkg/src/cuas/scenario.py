"""Scenario configuration: parsing, validation, and per-episode swarm sampling.

A scenario is a single JSON document (schema in docs/config_schema.md).
Loaded configs are immutable; episode sampling is a pure function of
(config, seed) so setups are bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

SIZE_NAMES = ("Small", "Medium", "Large")
POWER_NAMES = ("Low", "Medium", "High")
ZONE_TARGET_RULES = ("uniform_over_target_volume_and_zones",)

PMF_TOL = 1e-9

DEFAULT_P_HIT_TABLE = ((0.0, 0.95), (0.5, 0.95), (1.0, 0.60), (2.0, 0.15), (3.0, 0.0))
DEFAULT_TRACK_TOLERANCE = 0.01
DEFAULT_D_MAX = 100.0
DEFAULT_STACK_FRAMES = 4
DEFAULT_DECISION_INTERVAL = 1
DEFAULT_MAX_STEPS = 1200
DEFAULT_WAYPOINT_COUNT_RANGE = (1, 3)


class ConfigError(ValueError):
    """Raised for unparseable or invalid scenario documents."""


Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box, meters."""

    lo: Vec3
    hi: Vec3

    def contains_point(self, p, eps: float = 1e-9) -> bool:
        return all(self.lo[i] - eps <= p[i] <= self.hi[i] + eps for i in range(3))

    def contains_box(self, other: Box3) -> bool:
        return self.contains_point(other.lo) and self.contains_point(other.hi)


@dataclass(frozen=True)
class Zone:
    """Ground-level circular high-value area; damage = power scalar x value."""

    center: Vec3
    radius: float
    value: float


@dataclass(frozen=True)
class EffectorSpec:
    position: Vec3
    az_limits: tuple[float, float]
    el_limits: tuple[float, float]
    az_rate_max: float
    el_rate_max: float
    recharge_time: float
    track_tolerance: float = DEFAULT_TRACK_TOLERANCE


@dataclass(frozen=True)
class SwarmDistributions:
    n_drones: int
    speed_pmf: tuple[tuple[float, float], ...]  # (speed m/s, probability), speeds ascending
    size_pmf: tuple[float, float, float]        # by SIZE_NAMES index
    power_pmf: tuple[float, float, float]       # by POWER_NAMES index
    waypoint_count_range: tuple[int, int] = DEFAULT_WAYPOINT_COUNT_RANGE
    zone_target_rule: str = ZONE_TARGET_RULES[0]


@dataclass(frozen=True)
class SensorSpec:
    pos_sigma_by_size: tuple[float, float, float]        # sigma meters, by size index
    size_confusion: tuple[tuple[float, float, float], ...]   # row-stochastic, true -> detected
    power_confusion: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class ScenarioConfig:
    domain_box: Box3
    target_box: Box3
    spawn_box: Box3
    dt: float
    zones: tuple[Zone, ...]
    effectors: tuple[EffectorSpec, ...]
    sensor: SensorSpec
    swarm: SwarmDistributions
    p_hit_table: tuple[tuple[float, float], ...] = DEFAULT_P_HIT_TABLE
    decision_interval: int = DEFAULT_DECISION_INTERVAL
    max_steps: int = DEFAULT_MAX_STEPS
    stack_frames: int = DEFAULT_STACK_FRAMES
    d_max: float = DEFAULT_D_MAX

    @property
    def n_drones(self) -> int:
        return self.swarm.n_drones

    @property
    def n_effectors(self) -> int:
        return len(self.effectors)


@dataclass(frozen=True)
class DroneSpec:
    """One attacker: features plus its precomputed piecewise-linear path."""

    speed: float
    size: int   # index into SIZE_NAMES
    power: int  # index into POWER_NAMES; scalar damage factor is power + 1
    target: Vec3
    path: tuple[Vec3, ...]  # spawn, intermediates..., target
    path_length: float

    @property
    def power_scalar(self) -> int:
        return self.power + 1


@dataclass(frozen=True)
class EpisodeSetup:
    drones: tuple[DroneSpec, ...]
    max_damage: float
    seed: int


# ---------------------------------------------------------------------------
# validation

def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate_config(cfg: ScenarioConfig) -> None:
    """Check every structural invariant; raise ConfigError naming the first violation."""
    _require(cfg.dt > 0, "dt must be positive")
    _require(cfg.max_steps >= 1, "max_steps must be >= 1")
    _require(cfg.stack_frames >= 1, "stack_frames must be >= 1")
    _require(cfg.decision_interval >= 1, "decision_interval must be >= 1")
    _require(cfg.d_max > 0, "d_max must be positive")

    for name, box in (("domain_box", cfg.domain_box), ("target_box", cfg.target_box),
                      ("spawn_box", cfg.spawn_box)):
        _require(all(box.lo[i] < box.hi[i] for i in range(3)) or name != "domain_box",
                 f"{name} must have lo < hi on every axis")
        _require(all(box.lo[i] <= box.hi[i] for i in range(3)),
                 f"{name} must have lo <= hi on every axis")
    _require(cfg.domain_box.contains_box(cfg.spawn_box), "spawn_box must lie inside domain_box")
    _require(cfg.domain_box.contains_box(cfg.target_box), "target_box must lie inside domain_box")

    dists = [d for d, _ in cfg.p_hit_table]
    probs = [p for _, p in cfg.p_hit_table]
    _require(len(cfg.p_hit_table) >= 1, "p_hit_table must have at least one node")
    _require(all(dists[i] < dists[i + 1] for i in range(len(dists) - 1)),
             "p_hit_table distances must be strictly increasing")
    _require(all(0.0 <= p <= 1.0 for p in probs), "p_hit_table probabilities must be in [0, 1]")

    tb = cfg.target_box
    for k, z in enumerate(cfg.zones):
        _require(z.radius > 0, f"zones[{k}] radius must be positive")
        _require(z.value > 0, f"zones[{k}] value must be positive")
        _require(z.center[2] == 0.0, f"zones[{k}] center must lie on the ground (z = 0)")
        inside = (tb.lo[0] <= z.center[0] - z.radius and z.center[0] + z.radius <= tb.hi[0]
                  and tb.lo[1] <= z.center[1] - z.radius and z.center[1] + z.radius <= tb.hi[1])
        _require(inside, f"zones[{k}] circle must lie inside the target_box footprint")

    _require(len(cfg.effectors) >= 1, "at least one effector is required")
    for m, e in enumerate(cfg.effectors):
        _require(e.az_rate_max > 0 and e.el_rate_max > 0,
                 f"effectors[{m}] slew rates must be positive")
        _require(e.recharge_time >= 0, f"effectors[{m}] recharge_time must be >= 0")
        _require(e.az_limits[0] <= e.az_limits[1], f"effectors[{m}] az_limits must be ordered")
        _require(e.el_limits[0] <= e.el_limits[1], f"effectors[{m}] el_limits must be ordered")
        _require(e.track_tolerance > 0, f"effectors[{m}] track_tolerance must be positive")

    sw = cfg.swarm
    _require(sw.n_drones >= 1, "n_drones must be >= 1")
    _require(abs(sum(p for _, p in sw.speed_pmf) - 1.0) <= PMF_TOL, "speed_pmf must sum to 1")
    _require(abs(sum(sw.size_pmf) - 1.0) <= PMF_TOL, "size_pmf must sum to 1")
    _require(abs(sum(sw.power_pmf) - 1.0) <= PMF_TOL, "power_pmf must sum to 1")
    _require(all(p >= 0 for _, p in sw.speed_pmf), "speed_pmf probabilities must be >= 0")
    lo, hi = sw.waypoint_count_range
    _require(0 <= lo <= hi, "waypoint_count_range must satisfy 0 <= min <= max")
    _require(sw.zone_target_rule in ZONE_TARGET_RULES,
             f"zone_target_rule must be one of {ZONE_TARGET_RULES}")

    sn = cfg.sensor
    _require(all(s > 0 for s in sn.pos_sigma_by_size), "pos_sigma_by_size entries must be positive")
    for label, mat in (("size_confusion", sn.size_confusion), ("power_confusion", sn.power_confusion)):
        _require(len(mat) == 3 and all(len(row) == 3 for row in mat), f"{label} must be 3x3")
        for i, row in enumerate(mat):
            _require(abs(sum(row) - 1.0) <= PMF_TOL, f"{label} row {i} must sum to 1")
            _require(all(p >= 0 for p in row), f"{label} row {i} must be non-negative")


# ---------------------------------------------------------------------------
# JSON document <-> config

def _vec3(raw: Any, where: str) -> Vec3:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ConfigError(f"{where} must be a 3-element array")
    return (float(raw[0]), float(raw[1]), float(raw[2]))


def _box(raw: Any, where: str) -> Box3:
    if not isinstance(raw, dict) or "min" not in raw or "max" not in raw:
        raise ConfigError(f"{where} must be an object with 'min' and 'max'")
    return Box3(_vec3(raw["min"], f"{where}.min"), _vec3(raw["max"], f"{where}.max"))


def _get(d: dict, key: str) -> Any:
    if key not in d:
        raise ConfigError(f"missing required field '{key}'")
    return d[key]


def config_from_dict(doc: dict) -> ScenarioConfig:
    domain = _box(_get(doc, "domain_box"), "domain_box")
    target = _box(_get(doc, "target_box"), "target_box")
    spawn = _box(_get(doc, "spawn_box"), "spawn_box")

    zones = tuple(
        Zone(_vec3(_get(z, "center"), f"zones[{k}].center"),
             float(_get(z, "radius")), float(_get(z, "value")))
        for k, z in enumerate(_get(doc, "zones")))

    effectors = tuple(
        EffectorSpec(
            position=_vec3(_get(e, "position"), f"effectors[{m}].position"),
            az_limits=(float(_get(e, "az_limits")[0]), float(_get(e, "az_limits")[1])),
            el_limits=(float(_get(e, "el_limits")[0]), float(_get(e, "el_limits")[1])),
            az_rate_max=float(_get(e, "az_rate_max")),
            el_rate_max=float(_get(e, "el_rate_max")),
            recharge_time=float(_get(e, "recharge_time")),
            track_tolerance=float(e.get("track_tolerance", DEFAULT_TRACK_TOLERANCE)),
        )
        for m, e in enumerate(_get(doc, "effectors")))

    raw_sensor = _get(doc, "sensor")
    sigma_map = _get(raw_sensor, "pos_sigma_by_size")
    sensor = SensorSpec(
        pos_sigma_by_size=tuple(float(sigma_map[name]) for name in SIZE_NAMES),
        size_confusion=tuple(tuple(float(v) for v in row)
                             for row in _get(raw_sensor, "size_confusion")),
        power_confusion=tuple(tuple(float(v) for v in row)
                              for row in _get(raw_sensor, "power_confusion")),
    )

    raw_swarm = _get(doc, "swarm")
    speed_pmf = tuple(sorted((float(k), float(v))
                             for k, v in _get(raw_swarm, "speed_pmf").items()))
    size_map = _get(raw_swarm, "size_pmf")
    power_map = _get(raw_swarm, "power_pmf")
    swarm = SwarmDistributions(
        n_drones=int(_get(raw_swarm, "n_drones")),
        speed_pmf=speed_pmf,
        size_pmf=tuple(float(size_map[name]) for name in SIZE_NAMES),
        power_pmf=tuple(float(power_map[name]) for name in POWER_NAMES),
        waypoint_count_range=tuple(
            int(v) for v in raw_swarm.get("waypoint_count_range", DEFAULT_WAYPOINT_COUNT_RANGE)),
        zone_target_rule=raw_swarm.get("zone_target_rule", ZONE_TARGET_RULES[0]),
    )

    cfg = ScenarioConfig(
        domain_box=domain,
        target_box=target,
        spawn_box=spawn,
        dt=float(_get(doc, "dt")),
        zones=zones,
        effectors=effectors,
        sensor=sensor,
        swarm=swarm,
        p_hit_table=tuple((float(d), float(p))
                          for d, p in doc.get("p_hit_table", DEFAULT_P_HIT_TABLE)),
        decision_interval=int(doc.get("decision_interval", DEFAULT_DECISION_INTERVAL)),
        max_steps=int(doc.get("max_steps", DEFAULT_MAX_STEPS)),
        stack_frames=int(doc.get("stack_frames", DEFAULT_STACK_FRAMES)),
        d_max=float(doc.get("d_max", DEFAULT_D_MAX)),
    )
    validate_config(cfg)
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "domain_box": {"min": list(cfg.domain_box.lo), "max": list(cfg.domain_box.hi)},
        "target_box": {"min": list(cfg.target_box.lo), "max": list(cfg.target_box.hi)},
        "spawn_box": {"min": list(cfg.spawn_box.lo), "max": list(cfg.spawn_box.hi)},
        "dt": cfg.dt,
        "zones": [{"center": list(z.center), "radius": z.radius, "value": z.value}
                  for z in cfg.zones],
        "effectors": [{
            "position": list(e.position),
            "az_limits": list(e.az_limits),
            "el_limits": list(e.el_limits),
            "az_rate_max": e.az_rate_max,
            "el_rate_max": e.el_rate_max,
            "recharge_time": e.recharge_time,
            "track_tolerance": e.track_tolerance,
        } for e in cfg.effectors],
        "sensor": {
            "pos_sigma_by_size": {name: cfg.sensor.pos_sigma_by_size[i]
                                  for i, name in enumerate(SIZE_NAMES)},
            "size_confusion": [list(row) for row in cfg.sensor.size_confusion],
            "power_confusion": [list(row) for row in cfg.sensor.power_confusion],
        },
        "swarm": {
            "n_drones": cfg.swarm.n_drones,
            "speed_pmf": {repr(v): p for v, p in cfg.swarm.speed_pmf},
            "size_pmf": {name: cfg.swarm.size_pmf[i] for i, name in enumerate(SIZE_NAMES)},
            "power_pmf": {name: cfg.swarm.power_pmf[i] for i, name in enumerate(POWER_NAMES)},
            "waypoint_count_range": list(cfg.swarm.waypoint_count_range),
            "zone_target_rule": cfg.swarm.zone_target_rule,
        },
        "p_hit_table": [list(node) for node in cfg.p_hit_table],
        "decision_interval": cfg.decision_interval,
        "max_steps": cfg.max_steps,
        "stack_frames": cfg.stack_frames,
        "d_max": cfg.d_max,
    }


def load_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    return config_from_dict(doc)


def config_fingerprint(cfg: ScenarioConfig) -> str:
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def default_config() -> ScenarioConfig:
    """The bundled reference scenario: 3 zones, 50 drones, 4 effectors."""
    pi = math.pi
    effector = {
        "az_limits": [-pi, pi],
        "el_limits": [0.0, pi / 2],
        "az_rate_max": pi / 2,
        "el_rate_max": pi / 3,
        "recharge_time": 0.5,
        "track_tolerance": DEFAULT_TRACK_TOLERANCE,
    }
    doc = {
        "domain_box": {"min": [-100.0, -100.0, 0.0], "max": [100.0, 100.0, 50.0]},
        "target_box": {"min": [-100.0, -100.0, 0.0], "max": [0.0, 100.0, 50.0]},
        "spawn_box": {"min": [95.0, -100.0, 25.0], "max": [100.0, 100.0, 50.0]},
        "dt": 0.1,
        "zones": [
            {"center": [-30.0, -50.0, 0.0], "radius": 10.0, "value": 2.0},
            {"center": [-30.0, 50.0, 0.0], "radius": 30.0, "value": 5.0},
            {"center": [-60.0, -10.0, 0.0], "radius": 20.0, "value": 10.0},
        ],
        "effectors": [
            dict(effector, position=[0.0, -60.0, 0.0]),
            dict(effector, position=[0.0, -20.0, 0.0]),
            dict(effector, position=[0.0, 20.0, 0.0]),
            dict(effector, position=[0.0, 60.0, 0.0]),
        ],
        "sensor": {
            "pos_sigma_by_size": {"Small": 0.75, "Medium": 0.5, "Large": 0.25},
            "size_confusion": [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]],
            "power_confusion": [[0.8, 0.1, 0.1], [0.3, 0.4, 0.3], [0.1, 0.2, 0.7]],
        },
        "swarm": {
            "n_drones": 50,
            "speed_pmf": {"10": 0.4, "20": 0.4, "30": 0.2},
            "size_pmf": {"Small": 0.3, "Medium": 0.4, "Large": 0.3},
            "power_pmf": {"Low": 0.6, "Medium": 0.3, "High": 0.1},
            "waypoint_count_range": [1, 3],
            "zone_target_rule": "uniform_over_target_volume_and_zones",
        },
    }
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# episode sampling

def episode_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Derive the three independent streams of an episode: (setup, world, policy).

    The split is part of the reproducibility contract: protocol clients that
    want bit-identical rollouts must draw policy randomness from stream 3.
    """
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)  # type: ignore[return-value]


def zone_index_of(point, zones: tuple[Zone, ...]) -> int | None:
    """Index of the first zone whose ground disc contains the point, else None."""
    for k, z in enumerate(zones):
        dx = point[0] - z.center[0]
        dy = point[1] - z.center[1]
        if dx * dx + dy * dy <= z.radius * z.radius:
            return k
    return None


def sample_trajectory(rng: np.random.Generator, spawn_point, target_point,
                      config: ScenarioConfig) -> list[Vec3]:
    """Piecewise-linear path: spawn, randomized intermediates, target.

    Intermediate x coordinates are strictly monotone from spawn toward target
    (guarantees progress); y and z are uniform over the domain box.
    """
    lo, hi = config.swarm.waypoint_count_range
    k = int(rng.integers(lo, hi + 1))
    dom = config.domain_box
    x0, x1 = spawn_point[0], target_point[0]
    xs = np.sort(rng.uniform(min(x0, x1), max(x0, x1), size=k))
    if x0 > x1:
        xs = xs[::-1]
    ys = rng.uniform(dom.lo[1], dom.hi[1], size=k)
    zs = rng.uniform(dom.lo[2], dom.hi[2], size=k)
    path = [(float(spawn_point[0]), float(spawn_point[1]), float(spawn_point[2]))]
    path.extend((float(xs[i]), float(ys[i]), float(zs[i])) for i in range(k))
    path.append((float(target_point[0]), float(target_point[1]), float(target_point[2])))
    return path


def path_length_of(path) -> float:
    pts = np.asarray(path, dtype=float)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def max_damage_of(drones, zones: tuple[Zone, ...]) -> float:
    """Damage if every drone reached its target: sum of power scalar x zone value."""
    total = 0.0
    for d in drones:
        k = zone_index_of(d.target, zones)
        if k is not None:
            total += d.power_scalar * zones[k].value
    return total


def sample_episode(config: ScenarioConfig, seed: int) -> EpisodeSetup:
    """Sample one randomized swarm. Identical (config, seed) give identical setups."""
    rng = episode_rngs(seed)[0]
    sw = config.swarm
    n = sw.n_drones

    speed_values = np.array([v for v, _ in sw.speed_pmf])
    speed_probs = np.array([p for _, p in sw.speed_pmf])
    speeds = speed_values[rng.choice(len(speed_values), size=n, p=speed_probs / speed_probs.sum())]
    sizes = rng.choice(3, size=n, p=np.array(sw.size_pmf) / sum(sw.size_pmf))
    powers = rng.choice(3, size=n, p=np.array(sw.power_pmf) / sum(sw.power_pmf))

    sb = config.spawn_box
    spawns = rng.uniform(low=sb.lo, high=sb.hi, size=(n, 3))
    tb = config.target_box
    tx = rng.uniform(tb.lo[0], tb.hi[0], size=n)
    ty = rng.uniform(tb.lo[1], tb.hi[1], size=n)

    drones = []
    for j in range(n):
        target = (float(tx[j]), float(ty[j]), 0.0)
        path = sample_trajectory(rng, spawns[j], target, config)
        drones.append(DroneSpec(
            speed=float(speeds[j]),
            size=int(sizes[j]),
            power=int(powers[j]),
            target=target,
            path=tuple(path),
            path_length=path_length_of(path),
        ))
    drones = tuple(drones)
    return EpisodeSetup(drones=drones, max_damage=max_damage_of(drones, config.zones), seed=seed)


def setup_to_dict(setup: EpisodeSetup) -> dict:
    return {
        "seed": setup.seed,
        "max_damage": setup.max_damage,
        "drones": [{
            "speed": d.speed, "size": d.size, "power": d.power,
            "target": list(d.target), "path": [list(p) for p in d.path],
            "path_length": d.path_length,
        } for d in setup.drones],
    }
