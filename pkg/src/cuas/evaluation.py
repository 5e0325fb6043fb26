"""Seeded episode/batch runners, the three evaluation metrics, and exports.

Metrics: damage percent (realized / theoretical max), in-tracking time
(fraction of effector-steps spent Tracking), and weapon utilization
(fraction of effector-steps with the weapon Firing or Charging).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .engine import Kinematic, Weapon
from .policies import PolicyInput
from .scenario import (EpisodeSetup, ScenarioConfig, config_fingerprint,
                       sample_episode, setup_to_dict)
from .session import EpisodeSession

Policy = Callable[[PolicyInput], list[int]]

CSV_COLUMNS = ("policy", "seed", "episode", "damage_pct", "tracking_pct",
               "utilization_pct", "steps")

MAX_EPISODES_PER_SEED = 1 << 20


@dataclass
class EpisodeReport:
    seed: int
    steps: int
    damage_pct: float
    tracking_pct: float
    utilization_pct: float
    episode_return: float
    max_damage: float
    realized_damage: float
    impacts: list[tuple] = field(default_factory=list)
    fires: list[tuple] = field(default_factory=list)


@dataclass
class BatchReport:
    policy: str
    config_fingerprint: str
    seeds: list[int]
    episodes_per_seed: int
    reports: list[EpisodeReport]
    per_seed_means: dict[int, dict[str, float]]
    overall: dict[str, dict[str, float]]


METRICS = ("damage_pct", "tracking_pct", "utilization_pct", "steps")


def tracking_pct(kinematic_trace) -> float:
    """Percent of effector-steps spent Tracking over an episode trace."""
    trace = list(kinematic_trace)
    if not trace:
        return 0.0
    total = len(trace) * len(trace[0])
    tracking = sum(1 for step in trace for k in step if k == Kinematic.TRACKING)
    return 100.0 * tracking / total


def utilization_pct(weapon_trace) -> float:
    """Percent of effector-steps with the weapon busy (Firing or Charging)."""
    trace = list(weapon_trace)
    if not trace:
        return 0.0
    total = len(trace) * len(trace[0])
    busy = sum(1 for step in trace for w in step
               if w in (Weapon.FIRING, Weapon.CHARGING))
    return 100.0 * busy / total


def run_episode(config: ScenarioConfig, setup: EpisodeSetup, policy: Policy, seed: int,
                replay_path: str | None = None) -> EpisodeReport:
    """Sense -> encode -> policy -> step until terminal; aggregate metrics."""
    session = EpisodeSession(config, setup, seed, record_replay=replay_path is not None)
    terminated = session.terminated
    while not terminated:
        action = policy(session.policy_input())
        _, terminated, _ = session.step(action)
    if replay_path is not None:
        export_replay(replay_records(session), replay_path)
    return EpisodeReport(
        seed=seed,
        steps=session.steps,
        damage_pct=session.damage_pct(),
        tracking_pct=tracking_pct(session.kinematic_trace),
        utilization_pct=utilization_pct(session.weapon_trace),
        episode_return=session.episode_return,
        max_damage=setup.max_damage,
        realized_damage=session.engine.state.cumulative_damage,
        impacts=session.impacts,
        fires=session.fires,
    )


def replay_records(session: EpisodeSession) -> list[dict]:
    if session.replay_records is None:
        raise ValueError("session was not created with record_replay=True")
    header = {
        "type": "header",
        "config_fingerprint": config_fingerprint(session.config),
        "seed": session.seed,
        "n_drones": session.config.n_drones,
        "n_effectors": session.config.n_effectors,
        "setup": setup_to_dict(session.setup),
    }
    return [header] + session.replay_records


def export_replay(records: list[dict], path: str) -> None:
    """Line-delimited JSON, one record per line; stable field order for hashing."""
    try:
        with open(path, "w") as f:
            for rec in records:
                f.write(json.dumps(rec, separators=(",", ":")))
                f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write replay to {path}: {e}") from e


def episode_seed(seed: int, index: int) -> int:
    """Deterministic per-episode seed; documented so runs are reproducible."""
    if not 0 <= index < MAX_EPISODES_PER_SEED:
        raise ValueError(f"episode index must be in [0, {MAX_EPISODES_PER_SEED})")
    return (seed << 20) + index


def _episode_job(args) -> EpisodeReport:
    config, policy, ep_seed = args
    return run_episode(config, sample_episode(config, ep_seed), policy, ep_seed)


def run_batch(config: ScenarioConfig, policy: Policy, episodes_per_seed: int,
              seeds, policy_name: str = "", workers: int = 1) -> BatchReport:
    """episodes_per_seed episodes for each seed; aggregation is order-independent."""
    seeds = list(seeds)
    jobs = [(config, policy, episode_seed(s, i))
            for s in seeds for i in range(episodes_per_seed)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_episode_job, jobs, chunksize=4))
    else:
        reports = [_episode_job(job) for job in jobs]

    per_seed_means = {}
    for k, s in enumerate(seeds):
        chunk = reports[k * episodes_per_seed:(k + 1) * episodes_per_seed]
        per_seed_means[s] = {m: float(np.mean([getattr(r, m) for r in chunk]))
                             for m in METRICS}
    overall = {}
    for m in METRICS:
        values = np.array([getattr(r, m) for r in reports], dtype=float)
        overall[m] = {"mean": float(values.mean()), "std": float(values.std())}
    return BatchReport(
        policy=policy_name,
        config_fingerprint=config_fingerprint(config),
        seeds=seeds,
        episodes_per_seed=episodes_per_seed,
        reports=reports,
        per_seed_means=per_seed_means,
        overall=overall,
    )


def export_csv(batch: BatchReport, path: str) -> None:
    """One row per episode; aggregates are recomputable from the rows."""
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_COLUMNS)
            for k, s in enumerate(batch.seeds):
                chunk = batch.reports[k * batch.episodes_per_seed:
                                      (k + 1) * batch.episodes_per_seed]
                for i, r in enumerate(chunk):
                    writer.writerow([batch.policy, s, i, repr(r.damage_pct),
                                     repr(r.tracking_pct), repr(r.utilization_pct),
                                     r.steps])
    except OSError as e:
        raise OSError(f"cannot write CSV to {path}: {e}") from e


def batch_summary(batch: BatchReport) -> dict:
    return {
        "policy": batch.policy,
        "config_fingerprint": batch.config_fingerprint,
        "seeds": batch.seeds,
        "episodes_per_seed": batch.episodes_per_seed,
        "per_seed_means": {str(s): m for s, m in batch.per_seed_means.items()},
        "overall": batch.overall,
    }


def export_summary(batch: BatchReport, path: str) -> None:
    with open(path, "w") as f:
        json.dump(batch_summary(batch), f, indent=2)
        f.write("\n")
