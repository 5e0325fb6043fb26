"""Shared-backbone policy/value network and the masked multi-head categorical."""

from __future__ import annotations

import torch
from torch import nn


class PolicyValueNet(nn.Module):
    """MLP backbone -> one categorical head per effector + a value head."""

    def __init__(self, obs_dim: int, n_heads: int, n_actions: int,
                 hidden_sizes=(64, 64)):
        super().__init__()
        self.n_heads = n_heads
        self.n_actions = n_actions
        layers = []
        last = obs_dim
        for h in hidden_sizes:
            layers += [nn.Linear(last, h), nn.ReLU()]
            last = h
        self.backbone = nn.Sequential(*layers)
        self.policy_head = nn.Linear(last, n_heads * n_actions)
        self.value_head = nn.Linear(last, 1)

    def forward(self, obs: torch.Tensor):
        h = self.backbone(obs)
        logits = self.policy_head(h).view(-1, self.n_heads, self.n_actions)
        value = self.value_head(h).squeeze(-1)
        return logits, value


class MaskedMultiCategorical:
    """Independent categorical per head; invalid entries carry zero mass.

    log-probabilities of invalid actions are -inf; entropy treats their
    0 * log 0 terms as 0.
    """

    def __init__(self, logits: torch.Tensor, mask: torch.Tensor):
        if logits.shape != mask.shape:
            raise ValueError(f"logits {tuple(logits.shape)} != mask {tuple(mask.shape)}")
        masked = logits.masked_fill(~mask, float("-inf"))
        self.log_probs = masked.log_softmax(dim=-1)  # (B, M, N)

    @property
    def probs(self) -> torch.Tensor:
        return self.log_probs.exp()

    def sample(self) -> torch.Tensor:
        b, m, n = self.log_probs.shape
        flat = self.probs.reshape(b * m, n)
        return torch.multinomial(flat, 1).reshape(b, m)

    def greedy(self) -> torch.Tensor:
        return self.log_probs.argmax(dim=-1)

    def log_prob(self, actions: torch.Tensor) -> torch.Tensor:
        """Joint log-probability over heads, shape (B,)."""
        gathered = self.log_probs.gather(-1, actions.long().unsqueeze(-1)).squeeze(-1)
        return gathered.sum(dim=-1)

    def entropy(self) -> torch.Tensor:
        """Sum of per-head entropies, shape (B,)."""
        p = self.probs
        p_log_p = torch.where(p > 0, p * self.log_probs, torch.zeros_like(p))
        return -p_log_p.sum(dim=(-2, -1))

    def head_entropies(self) -> torch.Tensor:
        p = self.probs
        p_log_p = torch.where(p > 0, p * self.log_probs, torch.zeros_like(p))
        return -p_log_p.sum(dim=-1)  # (B, M)
