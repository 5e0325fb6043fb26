"""Flat observation encoding, action masking, and action decoding.

Block order is frozen (weight files depend on it):
  stacked normalized drone positions (oldest -> newest), drone status
  one-hots, detected power one-hots, effector az/el scaled to [-1, 0],
  kinematic flags as raw 0/1, weapon one-hots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Kinematic, SimState, Status
from .scenario import ScenarioConfig
from .sensing import Tracks


@dataclass(frozen=True)
class ObservationSpec:
    n_drones: int
    n_effectors: int
    stack_frames: int

    @property
    def position_block(self) -> int:
        return 3 * self.n_drones

    @property
    def total(self) -> int:
        n, m = self.n_drones, self.n_effectors
        return 3 * n * self.stack_frames + 3 * n + 3 * n + 2 * m + m + 3 * m

    def fingerprint(self) -> str:
        return (f"obs-v1:N{self.n_drones}:M{self.n_effectors}"
                f":stack{self.stack_frames}:len{self.total}")

    def to_dict(self) -> dict:
        return {
            "n_drones": self.n_drones,
            "n_effectors": self.n_effectors,
            "stack_frames": self.stack_frames,
            "total_length": self.total,
            "fingerprint": self.fingerprint(),
        }

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> ObservationSpec:
        return cls(config.n_drones, config.n_effectors, config.stack_frames)


def normalize_box(value, lo: float, hi: float):
    """Scale [lo, hi] linearly onto [-1, 0]; values are clamped first."""
    v = np.clip(value, lo, hi)
    return (v - lo) / (hi - lo) - 1.0


def one_hot(k: int, cardinality: int) -> np.ndarray:
    if not 0 <= k < cardinality:
        raise ValueError(f"one_hot index {k} out of range [0, {cardinality})")
    v = np.zeros(cardinality)
    v[k] = 1.0
    return v


def position_block(observed_positions: np.ndarray, config: ScenarioConfig) -> np.ndarray:
    """One frame of the stack: per-drone xyz normalized over the domain box."""
    lo = np.asarray(config.domain_box.lo)
    hi = np.asarray(config.domain_box.hi)
    return normalize_box(observed_positions, lo, hi).ravel()


def encode_observation(tracks: Tracks, effectors, history, spec: ObservationSpec,
                       config: ScenarioConfig) -> np.ndarray:
    """Build the flat observation vector.

    history holds up to stack_frames - 1 previous position blocks, oldest
    first; missing frames at episode start are filled with the earliest one.
    """
    if len(tracks) != spec.n_drones or len(effectors) != spec.n_effectors:
        raise ValueError("tracks/effectors do not match the observation spec")

    current = position_block(tracks.positions, config)
    frames = list(history)
    if len(frames) > spec.stack_frames - 1:
        raise ValueError("history longer than stack_frames - 1")
    pad = frames[0] if frames else current
    while len(frames) < spec.stack_frames - 1:
        frames.insert(0, pad)
    frames.append(current)

    eye3 = np.eye(3)
    status_block = eye3[tracks.statuses].ravel()
    power_block = eye3[tracks.powers].ravel()

    azel = np.empty(2 * spec.n_effectors)
    kin = np.empty(spec.n_effectors)
    weapon_block = np.empty(3 * spec.n_effectors)
    for m, eff in enumerate(effectors):
        es = config.effectors[m]
        azel[2 * m] = normalize_box(eff.azimuth, es.az_limits[0], es.az_limits[1])
        azel[2 * m + 1] = normalize_box(eff.elevation, es.el_limits[0], es.el_limits[1])
        kin[m] = 1.0 if eff.kinematic == Kinematic.TRACKING else 0.0
        weapon_block[3 * m:3 * m + 3] = eye3[int(eff.weapon)]

    out = np.concatenate(frames + [status_block, power_block, azel, kin, weapon_block])
    assert out.shape == (spec.total,)
    return out


def action_mask(state: SimState) -> np.ndarray:
    """(M, N) validity flags: a drone is a legal target only while Active."""
    valid = state.status == Status.ACTIVE
    return np.tile(valid, (len(state.effectors), 1))


def decode_action(flat, n_drones: int, n_effectors: int) -> list[int]:
    """Per-effector target indices from a flat action list; no deduplication."""
    if len(flat) != n_effectors:
        raise ValueError(f"action must have {n_effectors} entries, got {len(flat)}")
    out = []
    for a in flat:
        j = int(a)
        if not 0 <= j < n_drones:
            raise ValueError(f"action index {j} out of range [0, {n_drones})")
        out.append(j)
    return out
