"""Episode runtime: wires sensing, encoding, and the engine into a
reset/step loop with frame stacking and a fixed decision interval.

One session is one episode. All randomness flows through the three streams
of scenario.episode_rngs(seed), so a session is bit-reproducible from
(config, setup, seed).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .encoding import ObservationSpec, action_mask, encode_observation, position_block
from .engine import Engine, StepResult, Weapon
from .policies import PolicyInput
from .scenario import EpisodeSetup, ScenarioConfig, episode_rngs
from .sensing import make_tracks, sample_class_labels


class EpisodeSession:
    def __init__(self, config: ScenarioConfig, setup: EpisodeSetup, seed: int,
                 record_replay: bool = False):
        self.config = config
        self.setup = setup
        self.seed = seed
        _, self.world_rng, self.policy_rng = episode_rngs(seed)

        self.true_sizes = np.array([d.size for d in setup.drones])
        self.true_powers = np.array([d.power for d in setup.drones])
        self.detected_sizes, self.detected_powers = sample_class_labels(
            self.world_rng, self.true_sizes, self.true_powers, config.sensor)

        self.engine = Engine(config, setup, self.world_rng)
        self.obs_spec = ObservationSpec.from_config(config)
        self.tracks = self._sense()
        self.history: deque[np.ndarray] = deque(maxlen=max(config.stack_frames - 1, 0))
        self.effector_positions = np.array([e.position for e in config.effectors])

        self.terminated = False
        self.episode_return = 0.0
        self.impacts = []
        self.fires = []
        self.kinematic_trace: list[tuple[int, ...]] = []
        self.weapon_trace: list[tuple[int, ...]] = []
        self.replay_records: list[dict] | None = [] if record_replay else None
        self._tracking_steps = 0
        self._busy_steps = 0

    # -- observation side ---------------------------------------------------

    def _sense(self):
        st = self.engine.state
        return make_tracks(self.world_rng, st.positions, st.status, self.true_sizes,
                           self.detected_sizes, self.detected_powers, self.config.sensor)

    def observation(self) -> np.ndarray:
        return encode_observation(self.tracks, self.engine.state.effectors,
                                  self.history, self.obs_spec, self.config)

    def mask(self) -> np.ndarray:
        return action_mask(self.engine.state)

    def info(self) -> dict:
        state = self.engine.state
        total = state.step_index * len(state.effectors)
        return {
            "damage_pct": self.damage_pct(),
            "step": state.step_index,
            "tracking_pct": 100.0 * self._tracking_steps / total if total else 0.0,
            "utilization_pct": 100.0 * self._busy_steps / total if total else 0.0,
        }

    def damage_pct(self) -> float:
        if self.setup.max_damage <= 0:
            return 0.0
        return 100.0 * self.engine.state.cumulative_damage / self.setup.max_damage

    def policy_input(self) -> PolicyInput:
        st = self.engine.state
        active = st.status == 0
        speeds = self.engine.speeds
        tti = np.where(active, (self.engine.lengths - st.arc) / speeds, np.inf)
        return PolicyInput(
            tracks=self.tracks,
            effectors=st.effectors,
            effector_positions=self.effector_positions,
            mask=self.mask(),
            zones=self.config.zones,
            d_max=self.config.d_max,
            dt=self.config.dt,
            rng=self.policy_rng,
            target_points=self.engine.targets,
            times_to_impact=tti,
            encode=self.observation,
        )

    # -- stepping -----------------------------------------------------------

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        """First observation + mask (the session is constructed reset)."""
        return self.observation(), self.mask()

    def step(self, action) -> tuple[float, bool, dict]:
        """Apply one decision: advance decision_interval sim steps under it.

        Returns (reward, terminated, info); the observation is deliberately
        not built here (it is pure and often unused by baselines), call
        observation()/mask() when needed.
        """
        if self.terminated:
            raise RuntimeError("episode is terminated; start a new session")
        reward = 0.0
        for _ in range(self.config.decision_interval):
            result = self.engine.step(action, self.tracks.positions)
            self._record(result)
            reward += result.normalized_reward
            self.history.append(position_block(self.tracks.positions, self.config))
            self.tracks = self._sense()
            if result.terminal:
                self.terminated = True
                break
        return reward, self.terminated, self.info()

    def _record(self, result: StepResult) -> None:
        st = self.engine.state
        self.episode_return += result.normalized_reward
        step = st.step_index
        self.impacts.extend((step, i.drone, i.zone, i.damage) for i in result.impacts)
        self.fires.extend((step, f.effector, f.drone, f.hit, f.p, f.miss_distance)
                          for f in result.fires)
        kin = tuple(int(e.kinematic) for e in st.effectors)
        weapons = tuple(int(e.weapon) for e in st.effectors)
        self.kinematic_trace.append(kin)
        self.weapon_trace.append(weapons)
        self._tracking_steps += sum(kin)
        self._busy_steps += sum(1 for w in weapons if w != Weapon.READY)
        if self.replay_records is not None:
            self.replay_records.append(self._replay_record(result))

    def _replay_record(self, result: StepResult) -> dict:
        st = self.engine.state
        return {
            "type": "step",
            "step": st.step_index,
            "drones": [[float(p[0]), float(p[1]), float(p[2]), int(s)]
                       for p, s in zip(st.positions, st.status)],
            "effectors": [[e.azimuth, e.elevation, int(e.kinematic), int(e.weapon),
                           e.charge_steps_left,
                           -1 if e.assigned_drone is None else e.assigned_drone]
                          for e in st.effectors],
            "fires": [[f.effector, f.drone, int(f.hit), f.p, f.miss_distance]
                      for f in result.fires],
            "raw_reward": result.raw_reward,
            "normalized_reward": result.normalized_reward,
        }

    @property
    def steps(self) -> int:
        return self.engine.state.step_index
