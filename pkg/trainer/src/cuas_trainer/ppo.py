"""Generalized advantage estimation and the clipped-surrogate update."""

from __future__ import annotations

import numpy as np
import torch

from .net import MaskedMultiCategorical, PolicyValueNet


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                last_values: np.ndarray, gamma: float, lam: float):
    """Advantages/returns for a (T, n_envs) rollout.

    dones[t] marks that step t ended its episode (the env auto-reset after),
    so neither the delta nor the trace bootstraps across it.
    """
    t_len, n = rewards.shape
    advantages = np.zeros((t_len, n), dtype=np.float64)
    next_values = last_values.astype(np.float64)
    trace = np.zeros(n, dtype=np.float64)
    for t in reversed(range(t_len)):
        nonterminal = 1.0 - dones[t].astype(np.float64)
        delta = rewards[t] + gamma * next_values * nonterminal - values[t]
        trace = delta + gamma * lam * nonterminal * trace
        advantages[t] = trace
        next_values = values[t].astype(np.float64)
    returns = advantages + values
    return advantages, returns


def clipped_surrogate_loss(new_logp: torch.Tensor, old_logp: torch.Tensor,
                           advantages: torch.Tensor, clip_eps: float) -> torch.Tensor:
    """-E[min(r A, clip(r) A)] with r = exp(new_logp - old_logp)."""
    ratio = (new_logp - old_logp).exp()
    unclipped = ratio * advantages
    clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return -torch.minimum(unclipped, clipped).mean()


def ppo_update(net: PolicyValueNet, optimizer: torch.optim.Optimizer,
               batch: dict, clip_eps: float, epochs: int, batch_size: int,
               vf_coef: float, ent_coef: float, max_grad_norm: float,
               generator: torch.Generator) -> dict:
    """Shuffled minibatch epochs over one rollout; returns loss diagnostics."""
    obs = batch["obs"]
    actions = batch["actions"]
    old_logp = batch["logp"]
    advantages = batch["advantages"]
    returns = batch["returns"]
    masks = batch["masks"]
    total = obs.shape[0]

    last = {}
    for _ in range(epochs):
        order = torch.randperm(total, generator=generator)
        for start in range(0, total, batch_size):
            idx = order[start:start + batch_size]
            adv = advantages[idx]
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)

            logits, value = net(obs[idx])
            dist = MaskedMultiCategorical(logits, masks[idx])
            new_logp = dist.log_prob(actions[idx])

            policy_loss = clipped_surrogate_loss(new_logp, old_logp[idx], adv, clip_eps)
            value_loss = (value - returns[idx]).pow(2).mean()
            entropy = dist.entropy().mean()
            loss = policy_loss + vf_coef * value_loss - ent_coef * entropy

            if not torch.isfinite(loss):
                raise FloatingPointError("non-finite loss; training diverged")

            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(net.parameters(), max_grad_norm)
            optimizer.step()
            last = {"policy_loss": float(policy_loss), "value_loss": float(value_loss),
                    "entropy": float(entropy)}
    return last
