"""World advancement: drone motion, effector state machines, fire resolution.

The engine is discrete-time with fixed step dt. Each step runs four phases:
assignment storage, drone advancement (arrivals score damage), per-effector
slew/weapon handling with automatic fire, then reward and termination.
Fire happens autonomously the moment an effector is Tracking and Ready;
the decision layer only picks targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .scenario import EffectorSpec, EpisodeSetup, ScenarioConfig, Vec3, zone_index_of


class Status(IntEnum):
    ACTIVE = 0
    NEUTRALIZED = 1
    IMPACTED = 2


class Kinematic(IntEnum):
    CHASING = 0
    TRACKING = 1


class Weapon(IntEnum):
    READY = 0
    FIRING = 1
    CHARGING = 2


class ContractError(ValueError):
    """A caller violated an operation precondition."""


# ---------------------------------------------------------------------------
# geometry

def wrap_angle(a: float) -> float:
    """Wrap to the principal interval (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def aim_direction(azimuth: float, elevation: float) -> np.ndarray:
    """Unit pointing vector for an Az-El mount."""
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth), math.sin(elevation)])


def miss_distance(effector_position, direction, point) -> float:
    """Distance from a point to the ray {origin + t*u, t >= 0}; u must be unit length."""
    w = np.asarray(point, dtype=float) - np.asarray(effector_position, dtype=float)
    t = max(float(np.dot(w, direction)), 0.0)
    return float(np.linalg.norm(w - t * np.asarray(direction, dtype=float)))


def bearing_angles(origin, point) -> tuple[float, float] | None:
    """(azimuth, elevation) from origin toward point; None when coincident."""
    dx = point[0] - origin[0]
    dy = point[1] - origin[1]
    dz = point[2] - origin[2]
    horiz = math.hypot(dx, dy)
    if horiz < 1e-12 and abs(dz) < 1e-12:
        return None
    return math.atan2(dy, dx), math.atan2(dz, horiz)


def p_hit(distance: float, p_hit_table) -> float:
    """Piecewise-linear neutralization probability of a miss distance.

    Flat at the first node's value below support, zero beyond the last node.
    """
    xs = [d for d, _ in p_hit_table]
    ps = [p for _, p in p_hit_table]
    return float(np.interp(distance, xs, ps, left=ps[0], right=0.0))


# ---------------------------------------------------------------------------
# state containers

@dataclass
class DroneState:
    index: int
    arc_position: float
    position: Vec3
    status: Status


@dataclass
class EffectorState:
    index: int
    azimuth: float
    elevation: float
    kinematic: Kinematic = Kinematic.CHASING
    weapon: Weapon = Weapon.READY
    charge_steps_left: int = 0
    assigned_drone: int | None = None


@dataclass
class SimState:
    """Authoritative world state; single-writer, one per episode."""

    step_index: int
    arc: np.ndarray         # (N,) meters along each path
    positions: np.ndarray   # (N, 3) true drone positions
    status: np.ndarray      # (N,) Status values
    effectors: list[EffectorState]
    cumulative_damage: float
    rng: np.random.Generator | None = None

    def drone_state(self, j: int) -> DroneState:
        return DroneState(j, float(self.arc[j]), tuple(self.positions[j]), Status(self.status[j]))

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.status == Status.ACTIVE))


@dataclass
class FireEvent:
    effector: int
    drone: int
    hit: bool
    p: float
    miss_distance: float


@dataclass
class Impact:
    drone: int
    zone: int | None
    damage: float


@dataclass
class StepResult:
    raw_reward: float
    normalized_reward: float
    impacts: list[Impact] = field(default_factory=list)
    neutralizations: list[int] = field(default_factory=list)
    fires: list[FireEvent] = field(default_factory=list)
    terminal: bool = False


# ---------------------------------------------------------------------------
# per-drone motion

def _interp_on_path(nodes: np.ndarray, cums: np.ndarray, arc: float) -> np.ndarray:
    """Position at arc length along one piecewise-linear path (nodes (S,3), cums (S,))."""
    n_seg = len(nodes) - 1
    idx = min(int(np.searchsorted(cums, arc, side="right")) - 1, n_seg - 1)
    idx = max(idx, 0)
    seg_len = cums[idx + 1] - cums[idx]
    t = 0.0 if seg_len <= 0 else (arc - cums[idx]) / seg_len
    return nodes[idx] + t * (nodes[idx + 1] - nodes[idx])


def advance_drone(drone: DroneState, dt: float, speed: float, path) -> DroneState:
    """Move an Active drone speed*dt along its path; clamp at the end as an impact."""
    if drone.status != Status.ACTIVE:
        raise ContractError("advance_drone requires an Active drone")
    nodes = np.asarray(path, dtype=float)
    cums = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(nodes, axis=0), axis=1))])
    length = float(cums[-1])
    arc = drone.arc_position + speed * dt
    if arc >= length:
        return DroneState(drone.index, length, tuple(nodes[-1]), Status.IMPACTED)
    pos = _interp_on_path(nodes, cums, arc)
    return DroneState(drone.index, arc, tuple(pos), Status.ACTIVE)


# ---------------------------------------------------------------------------
# effector kinematics and weapon

def slew_effector(azimuth: float, elevation: float, desired_az: float, desired_el: float,
                  dt: float, spec: EffectorSpec) -> tuple[float, float, Kinematic]:
    """One slew step toward the desired bearing.

    Azimuth takes the shortest wrapped arc; both axes snap when within one
    step. Tracking holds when the residual error (|az| + |el|) is within
    the spec tolerance.
    """
    az_err = wrap_angle(desired_az - azimuth)
    max_az = spec.az_rate_max * dt
    if abs(az_err) <= max_az:
        new_az = desired_az
    else:
        new_az = wrap_angle(azimuth + math.copysign(max_az, az_err))
    new_az = min(max(new_az, spec.az_limits[0]), spec.az_limits[1])

    el_err = desired_el - elevation
    max_el = spec.el_rate_max * dt
    if abs(el_err) <= max_el:
        new_el = desired_el
    else:
        new_el = elevation + math.copysign(max_el, el_err)
    new_el = min(max(new_el, spec.el_limits[0]), spec.el_limits[1])

    residual = abs(wrap_angle(desired_az - new_az)) + abs(desired_el - new_el)
    kinematic = Kinematic.TRACKING if residual <= spec.track_tolerance else Kinematic.CHASING
    return new_az, new_el, kinematic


def recharge_steps(spec: EffectorSpec, dt: float) -> int:
    return int(math.ceil(spec.recharge_time / dt))


def resolve_fire(rng: np.random.Generator, effector: EffectorState, spec: EffectorSpec,
                 drone_true_position, p_hit_table) -> FireEvent:
    """Fire at the current aim line; Bernoulli hit on P(miss distance).

    Only legal from Tracking + Ready. The effector records Firing for this
    step and enters its recharge cycle next step regardless of outcome.
    The caller applies the drone-side effect of a hit.
    """
    if effector.kinematic != Kinematic.TRACKING or effector.weapon != Weapon.READY:
        raise ContractError("fire requires the Tracking kinematic state and a Ready weapon")
    u = aim_direction(effector.azimuth, effector.elevation)
    d = miss_distance(spec.position, u, drone_true_position)
    p = p_hit(d, p_hit_table)
    hit = bool(rng.random() < p)
    effector.weapon = Weapon.FIRING
    effector.charge_steps_left = 0
    target = -1 if effector.assigned_drone is None else int(effector.assigned_drone)
    return FireEvent(effector.index, target, hit, p, d)


def normalize_reward(raw_reward: float, max_damage: float) -> float:
    """Scale a (non-positive) step reward by the episode's maximum damage."""
    if max_damage <= 0.0:
        return 0.0
    return raw_reward / max_damage


def is_terminal(state: SimState, config: ScenarioConfig) -> bool:
    """No Active drone remains, or the hard step cap was reached."""
    return state.n_active == 0 or state.step_index >= config.max_steps


# ---------------------------------------------------------------------------
# episode engine

def init_state(setup: EpisodeSetup, config: ScenarioConfig,
               rng: np.random.Generator | None = None) -> SimState:
    """Fresh world: drones Active at path start, effectors centered, Ready."""
    n = len(setup.drones)
    positions = np.array([d.path[0] for d in setup.drones], dtype=float)
    effectors = [
        EffectorState(
            index=m,
            azimuth=0.5 * (spec.az_limits[0] + spec.az_limits[1]),
            elevation=spec.el_limits[0],
        )
        for m, spec in enumerate(config.effectors)
    ]
    return SimState(
        step_index=0,
        arc=np.zeros(n),
        positions=positions,
        status=np.full(n, Status.ACTIVE, dtype=np.int64),
        effectors=effectors,
        cumulative_damage=0.0,
        rng=rng,
    )


class Engine:
    """Steps one episode's SimState; owns compiled per-drone path tables."""

    def __init__(self, config: ScenarioConfig, setup: EpisodeSetup,
                 rng: np.random.Generator | None = None):
        self.config = config
        self.setup = setup
        n = len(setup.drones)
        max_nodes = max(len(d.path) for d in setup.drones)
        self.nodes = np.zeros((n, max_nodes, 3))
        self.cums = np.full((n, max_nodes), np.inf)
        self.n_segs = np.zeros(n, dtype=int)
        for j, d in enumerate(setup.drones):
            pts = np.asarray(d.path, dtype=float)
            s = len(pts)
            self.nodes[j, :s] = pts
            self.nodes[j, s:] = pts[-1]
            self.cums[j, :s] = np.concatenate(
                [[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
            self.n_segs[j] = s - 1
        self.lengths = np.array([d.path_length for d in setup.drones])
        self.speeds = np.array([d.speed for d in setup.drones])
        self.targets = np.array([d.target for d in setup.drones])
        self.impact_zone = np.array(
            [-1 if (k := zone_index_of(d.target, config.zones)) is None else k
             for d in setup.drones], dtype=int)
        self.impact_damage = np.array(
            [0.0 if self.impact_zone[j] < 0
             else setup.drones[j].power_scalar * config.zones[self.impact_zone[j]].value
             for j in range(n)])
        self.recharge_steps = [recharge_steps(spec, config.dt) for spec in config.effectors]
        self.state = init_state(setup, config, rng)

    def _advance_drones(self, result: StepResult) -> None:
        st = self.state
        active = st.status == Status.ACTIVE
        if not active.any():
            return
        st.arc[active] += self.speeds[active] * self.config.dt
        arrived = active & (st.arc >= self.lengths)
        np.minimum(st.arc, self.lengths, out=st.arc)

        moving = active & ~arrived
        idx = np.flatnonzero(moving)
        if idx.size:
            seg = np.sum(st.arc[idx, None] >= self.cums[idx, 1:], axis=1)
            seg = np.minimum(seg, self.n_segs[idx] - 1)
            a = self.nodes[idx, seg]
            b = self.nodes[idx, seg + 1]
            seg_len = self.cums[idx, seg + 1] - self.cums[idx, seg]
            t = (st.arc[idx] - self.cums[idx, seg]) / seg_len
            st.positions[idx] = a + t[:, None] * (b - a)

        for j in np.flatnonzero(arrived):
            st.status[j] = Status.IMPACTED
            st.positions[j] = self.targets[j]
            zone = int(self.impact_zone[j])
            damage = float(self.impact_damage[j])
            st.cumulative_damage += damage
            result.impacts.append(Impact(int(j), None if zone < 0 else zone, damage))

    def step(self, assignment, observed_positions) -> StepResult:
        """Advance one timestep under the given per-effector target assignment.

        observed_positions are the defender's current (noisy) drone positions;
        effectors slew toward them while fire resolution uses true positions.
        """
        st = self.state
        n = len(self.setup.drones)
        if len(assignment) != len(st.effectors):
            raise ContractError(
                f"assignment must have one target per effector ({len(st.effectors)})")
        for j in assignment:
            if not 0 <= int(j) < n:
                raise ContractError(f"assignment index {j} out of range [0, {n})")

        result = StepResult(raw_reward=0.0, normalized_reward=0.0)
        st.step_index += 1
        self._advance_drones(result)

        dt = self.config.dt
        for m, eff in enumerate(st.effectors):
            spec = self.config.effectors[m]
            eff.assigned_drone = int(assignment[m])

            bearing = bearing_angles(spec.position, observed_positions[eff.assigned_drone])
            if bearing is None:
                desired_az, desired_el = eff.azimuth, eff.elevation
            else:
                desired_az = min(max(wrap_angle(bearing[0]), spec.az_limits[0]),
                                 spec.az_limits[1])
                desired_el = min(max(bearing[1], spec.el_limits[0]), spec.el_limits[1])
            eff.azimuth, eff.elevation, eff.kinematic = slew_effector(
                eff.azimuth, eff.elevation, desired_az, desired_el, dt, spec)

            if eff.weapon == Weapon.FIRING:
                eff.weapon = Weapon.CHARGING
                eff.charge_steps_left = self.recharge_steps[m]
            elif eff.weapon == Weapon.CHARGING:
                eff.charge_steps_left -= 1
                if eff.charge_steps_left <= 0:
                    eff.charge_steps_left = 0
                    eff.weapon = Weapon.READY

            target = eff.assigned_drone
            if (eff.kinematic == Kinematic.TRACKING and eff.weapon == Weapon.READY
                    and st.status[target] == Status.ACTIVE):
                event = resolve_fire(st.rng, eff, spec, st.positions[target],
                                     self.config.p_hit_table)
                if event.hit:
                    st.status[target] = Status.NEUTRALIZED
                    result.neutralizations.append(target)
                result.fires.append(event)

        result.raw_reward = -sum(i.damage for i in result.impacts)
        result.normalized_reward = normalize_reward(result.raw_reward, self.setup.max_damage)
        result.terminal = is_terminal(st, self.config)
        return result
