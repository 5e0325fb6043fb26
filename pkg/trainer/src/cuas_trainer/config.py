"""Training hyperparameters with linear learning-rate and clip schedules."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class TrainConfig:
    total_steps: int = 80_000_000
    n_envs: int = 32
    rollout_len: int = 512
    epochs: int = 10
    batch_size: int = 2048
    lr_start: float = 2.5e-4
    lr_end: float = 2.5e-6
    gamma: float = 0.998
    clip_start: float = 0.15
    clip_end: float = 0.025
    hidden_sizes: tuple[int, ...] = (64, 64)
    masking: bool = True
    eval_every: int = 0       # iterations between greedy protocol evals; 0 disables
    eval_episodes: int = 10
    gae_lambda: float = 0.95
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        rollout_total = self.n_envs * self.rollout_len
        if rollout_total % self.batch_size != 0:
            raise ValueError(f"batch_size {self.batch_size} must divide "
                             f"n_envs * rollout_len = {rollout_total}")
        if self.lr_end > self.lr_start:
            raise ValueError("lr schedule must be non-increasing")
        if self.clip_end > self.clip_start:
            raise ValueError("clip schedule must be non-increasing")
        if self.total_steps < rollout_total:
            raise ValueError("total_steps smaller than one rollout")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")

    @property
    def iterations(self) -> int:
        return self.total_steps // (self.n_envs * self.rollout_len)


def linear_schedule(start: float, end: float, progress: float) -> float:
    """Linear decay from start to end as progress runs over [0, 1]."""
    p = min(max(progress, 0.0), 1.0)
    return start + (end - start) * p
