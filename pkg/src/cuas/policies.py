"""Decision policies: one callable interface, PolicyInput -> per-effector targets.

Baselines consume noisy tracks. Ranked baselines give effector m the rank-m
candidate so fire is spread over distinct targets while enough remain; ties
always break toward the lower drone index to keep replays deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .encoding import ObservationSpec
from .engine import EffectorState, Status
from .scenario import Zone, zone_index_of
from .sensing import Tracks

Assignment = list[int]


class PolicyInput:
    """Everything a policy may consult for one decision step.

    target_points/times_to_impact are privileged ground-truth fields used
    only by the expected-loss baseline (its urgency is defined in terms of
    the impact point); the other baselines see noisy tracks only. The
    encoded observation vector is built lazily since only MLP policies
    read it.
    """

    def __init__(self, tracks: Tracks, effectors: list[EffectorState],
                 effector_positions: np.ndarray, mask: np.ndarray,
                 zones: tuple[Zone, ...], d_max: float, dt: float,
                 rng: np.random.Generator,
                 target_points: np.ndarray | None = None,
                 times_to_impact: np.ndarray | None = None,
                 observation: np.ndarray | None = None,
                 encode: Callable[[], np.ndarray] | None = None):
        self.tracks = tracks
        self.effectors = effectors
        self.effector_positions = effector_positions
        self.mask = mask
        self.zones = zones
        self.d_max = d_max
        self.dt = dt
        self.rng = rng
        self.target_points = target_points
        self.times_to_impact = times_to_impact
        self._observation = observation
        self._encode = encode

    @property
    def observation(self) -> np.ndarray:
        if self._observation is None:
            if self._encode is None:
                raise ValueError("PolicyInput has no observation encoder")
            self._observation = self._encode()
        return self._observation

    @property
    def n_drones(self) -> int:
        return len(self.tracks)

    @property
    def n_effectors(self) -> int:
        return len(self.effectors)

    def valid_indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask[0])


def _ranked_assignment(ranked_valid: np.ndarray, n_effectors: int) -> Assignment:
    """Effector m takes the rank-m candidate, wrapping when candidates run out."""
    if ranked_valid.size == 0:
        return [0] * n_effectors
    return [int(ranked_valid[m % ranked_valid.size]) for m in range(n_effectors)]


def random_policy(inp: PolicyInput) -> Assignment:
    """Uniform over mask-valid drones per effector; uniform over all if none."""
    valid = inp.valid_indices()
    out = []
    for _ in range(inp.n_effectors):
        if valid.size:
            out.append(int(valid[inp.rng.integers(valid.size)]))
        else:
            out.append(int(inp.rng.integers(inp.n_drones)))
    return out


def heuristic_scores(inp: PolicyInput) -> np.ndarray:
    """Weighted-distance priority score per drone; lower means more urgent.

    Zone distances are divided by value x radius, the sum is divided by the
    detected power scalar, inactive drones are pushed out by +1000, and the
    result is saturated at d_max and mapped into [-1, 1].
    """
    centers = np.array([z.center for z in inp.zones])
    vr = np.array([z.value * z.radius for z in inp.zones])
    d = np.linalg.norm(inp.tracks.positions[:, None, :] - centers[None, :, :], axis=2)
    w = (d / vr).sum(axis=1)
    e = inp.tracks.powers + 1
    s = (inp.tracks.statuses != Status.ACTIVE).astype(float)
    w = w / e + s * 1000.0
    return np.minimum(w, inp.d_max) / (0.5 * inp.d_max) - 1.0


def heuristic_policy(inp: PolicyInput) -> Assignment:
    scores = heuristic_scores(inp)
    order = np.lexsort((np.arange(inp.n_drones), scores))
    ranked_valid = order[inp.mask[0][order]]
    return _ranked_assignment(ranked_valid, inp.n_effectors)


def closest_first(inp: PolicyInput) -> Assignment:
    """Each effector independently takes its nearest valid drone."""
    valid = inp.mask[0]
    out = []
    for m in range(inp.n_effectors):
        d = np.linalg.norm(inp.tracks.positions - inp.effector_positions[m], axis=1)
        d = np.where(valid, d, np.inf)
        out.append(int(np.argmin(d)) if valid.any() else 0)
    return out


def zone_weighted(inp: PolicyInput) -> Assignment:
    """Rank by (nearest zone's value) / (distance to that zone + 1), descending.

    The nearest zone to the drone's current observed position stands in for
    its projected destination; tracks carry no velocity estimate.
    """
    centers = np.array([z.center for z in inp.zones])
    values = np.array([z.value for z in inp.zones])
    d = np.linalg.norm(inp.tracks.positions[:, None, :] - centers[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    score = values[nearest] / (d[np.arange(inp.n_drones), nearest] + 1.0)
    order = np.lexsort((np.arange(inp.n_drones), -score))
    ranked_valid = order[inp.mask[0][order]]
    return _ranked_assignment(ranked_valid, inp.n_effectors)


def greedy_expected_loss(inp: PolicyInput) -> Assignment:
    """Rank by urgency = target-zone value x power scalar / max(time-to-impact, dt)."""
    if inp.target_points is None or inp.times_to_impact is None:
        raise ValueError("greedy_expected_loss needs target_points and times_to_impact")
    zone_value = np.array([
        0.0 if (k := zone_index_of(p, inp.zones)) is None else inp.zones[k].value
        for p in inp.target_points])
    e = inp.tracks.powers + 1
    urgency = zone_value * e / np.maximum(inp.times_to_impact, inp.dt)
    order = np.lexsort((np.arange(inp.n_drones), -urgency))
    ranked_valid = order[inp.mask[0][order]]
    return _ranked_assignment(ranked_valid, inp.n_effectors)


# ---------------------------------------------------------------------------
# MLP policy

WEIGHTS_FORMAT_VERSION = 1


@dataclass
class MlpLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str      # "relu" | "linear"


@dataclass
class MlpPolicy:
    layers: list[MlpLayer]
    observation_fingerprint: str
    action_dims: tuple[int, int]  # (n_effectors, n_drones)

    def __post_init__(self) -> None:
        for k, layer in enumerate(self.layers):
            if layer.activation not in ("relu", "linear"):
                raise ValueError(f"layer {k}: unknown activation '{layer.activation}'")
            if layer.weights.shape[0] != layer.bias.shape[0]:
                raise ValueError(f"layer {k}: weights/bias row mismatch")
            if k > 0 and layer.weights.shape[1] != self.layers[k - 1].weights.shape[0]:
                raise ValueError(f"layer {k}: input dim {layer.weights.shape[1]} does not "
                                 f"chain from layer {k - 1}")
        m, n = self.action_dims
        if self.layers[-1].weights.shape[0] != m * n:
            raise ValueError(f"output dim {self.layers[-1].weights.shape[0]} "
                             f"!= action dims {m}x{n}")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]


def mlp_forward(policy: MlpPolicy, observation: np.ndarray) -> np.ndarray:
    """Affine chain with per-layer activations; logits reshaped to (M, N)."""
    x = np.asarray(observation, dtype=float)
    if x.shape != (policy.input_dim,):
        raise ValueError(f"observation length {x.shape} != expected ({policy.input_dim},)")
    for layer in policy.layers:
        x = layer.weights @ x + layer.bias
        if layer.activation == "relu":
            x = np.maximum(x, 0.0)
    m, n = policy.action_dims
    return x.reshape(m, n)


def masked_select(logits: np.ndarray, mask: np.ndarray, mode: str = "greedy",
                  rng: np.random.Generator | None = None) -> Assignment:
    """Pick one target per row after masking invalid entries to -inf."""
    if logits.shape != mask.shape:
        raise ValueError(f"logits shape {logits.shape} != mask shape {mask.shape}")
    masked = np.where(mask, logits, -np.inf)
    out = []
    for m in range(masked.shape[0]):
        row = masked[m]
        if not np.isfinite(row).any():
            raise ValueError(f"no valid action for effector {m}")
        if mode == "greedy":
            out.append(int(np.argmax(row)))
        elif mode == "sample":
            if rng is None:
                raise ValueError("sample mode needs an rng")
            z = row - row.max()
            p = np.exp(z)
            p /= p.sum()
            k = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
            out.append(min(k, len(p) - 1))
        else:
            raise ValueError(f"unknown mode '{mode}'")
    return out


def save_policy_weights(policy: MlpPolicy, path: str) -> None:
    doc = {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "observation_fingerprint": policy.observation_fingerprint,
        "layers": [{
            "rows": int(layer.weights.shape[0]),
            "cols": int(layer.weights.shape[1]),
            "weights": [float(v) for v in layer.weights.ravel()],
            "bias": [float(v) for v in layer.bias],
            "activation": layer.activation,
        } for layer in policy.layers],
        "action_dims": list(policy.action_dims),
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_policy_weights(path: str, observation_spec: ObservationSpec | None = None) -> MlpPolicy:
    """Load and validate a weight file; optionally check the observation fingerprint."""
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"malformed weight file {path}: {e.msg}") from e
    if doc.get("format_version") != WEIGHTS_FORMAT_VERSION:
        raise ValueError(f"unsupported weight format_version {doc.get('format_version')}")
    layers = []
    for k, raw in enumerate(doc["layers"]):
        rows, cols = int(raw["rows"]), int(raw["cols"])
        w = np.asarray(raw["weights"], dtype=float)
        if w.size != rows * cols:
            raise ValueError(f"layer {k}: expected {rows * cols} weights, got {w.size}")
        layers.append(MlpLayer(w.reshape(rows, cols), np.asarray(raw["bias"], dtype=float),
                               str(raw["activation"])))
    policy = MlpPolicy(layers, str(doc["observation_fingerprint"]),
                       tuple(int(v) for v in doc["action_dims"]))
    if observation_spec is not None:
        expected = observation_spec.fingerprint()
        if policy.observation_fingerprint != expected:
            raise ValueError(f"weight file fingerprint '{policy.observation_fingerprint}' "
                             f"does not match scenario '{expected}'")
        if policy.input_dim != observation_spec.total:
            raise ValueError(f"weight file input dim {policy.input_dim} "
                             f"!= observation length {observation_spec.total}")
    return policy


class MlpPolicyRunner:
    """Masked inference over a loaded MLP; greedy by default."""

    def __init__(self, policy: MlpPolicy, mode: str = "greedy"):
        self.policy = policy
        self.mode = mode

    def __call__(self, inp: PolicyInput) -> Assignment:
        logits = mlp_forward(self.policy, inp.observation)
        return masked_select(logits, inp.mask, self.mode, inp.rng)


# ---------------------------------------------------------------------------
# registry

BASELINE_POLICIES: dict[str, Callable[[PolicyInput], Assignment]] = {
    "random": random_policy,
    "closest": closest_first,
    "zone": zone_weighted,
    "greedy": greedy_expected_loss,
    "heuristic": heuristic_policy,
}

POLICY_USAGE = "random | closest | zone | greedy | heuristic | mlp:<weights-path>"


def make_policy(name: str, observation_spec: ObservationSpec | None = None,
                mode: str = "greedy") -> Callable[[PolicyInput], Assignment]:
    if name in BASELINE_POLICIES:
        return BASELINE_POLICIES[name]
    if name.startswith("mlp:"):
        return MlpPolicyRunner(load_policy_weights(name[4:], observation_spec), mode)
    raise ValueError(f"unknown policy '{name}'; valid policies: {POLICY_USAGE}")
