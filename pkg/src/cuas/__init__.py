"""Counter-UAS swarm defense: deterministic simulator, baselines, evaluation."""

from .encoding import ObservationSpec, action_mask, decode_action, encode_observation
from .engine import (Engine, Kinematic, SimState, Status, StepResult, Weapon,
                     init_state, is_terminal)
from .evaluation import (BatchReport, EpisodeReport, run_batch, run_episode)
from .policies import PolicyInput, make_policy
from .scenario import (ConfigError, EpisodeSetup, ScenarioConfig, default_config,
                       load_scenario, sample_episode)
from .session import EpisodeSession

__version__ = "0.1.0"

__all__ = [
    "BatchReport", "ConfigError", "Engine", "EpisodeReport", "EpisodeSession",
    "EpisodeSetup", "Kinematic", "ObservationSpec", "PolicyInput", "ScenarioConfig",
    "SimState", "Status", "StepResult", "Weapon", "action_mask", "decode_action",
    "default_config", "encode_observation", "init_state", "is_terminal", "load_scenario",
    "make_policy", "run_batch", "run_episode", "sample_episode",
]
