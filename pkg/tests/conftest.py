import copy

import numpy as np
import pytest

from cuas.scenario import (DroneSpec, EpisodeSetup, config_from_dict, config_to_dict,
                           default_config, max_damage_of, path_length_of)


@pytest.fixture(scope="session")
def ref_cfg():
    """The bundled reference scenario (N=50, M=4, 3 zones)."""
    return default_config()


def deep_merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def build_config(**overrides):
    """Reference scenario with nested overrides applied (dict-level merge)."""
    return config_from_dict(deep_merge(config_to_dict(default_config()), overrides))


def small_config(n_drones=4, n_effectors=2, **overrides):
    doc = config_to_dict(default_config())
    doc["swarm"]["n_drones"] = n_drones
    doc["effectors"] = doc["effectors"][:n_effectors]
    return config_from_dict(deep_merge(doc, overrides))


def make_drone(target, spawn=(97.0, 0.0, 30.0), speed=10.0, size=1, power=0,
               waypoints=()):
    path = (tuple(float(v) for v in spawn),
            *[tuple(float(v) for v in w) for w in waypoints],
            tuple(float(v) for v in target))
    return DroneSpec(speed=float(speed), size=size, power=power,
                     target=path[-1], path=path, path_length=path_length_of(path))


def make_setup(cfg, drones, seed=0):
    drones = tuple(drones)
    return EpisodeSetup(drones=drones, max_damage=max_damage_of(drones, cfg.zones),
                        seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
