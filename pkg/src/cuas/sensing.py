"""The defender's noisy view: perturbed positions and confused class labels.

Position noise is redrawn every step with a sigma set by the drone's true
size. Size/power class labels are drawn once per episode (stable tracks)
from the row of the confusion matrix for the true class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import SensorSpec


@dataclass
class Tracks:
    """Column-wise track table for one step: what the defender can see."""

    positions: np.ndarray   # (N, 3) observed, noisy
    sizes: np.ndarray       # (N,) detected size class
    powers: np.ndarray      # (N,) detected power class
    statuses: np.ndarray    # (N,) true status, known exactly

    def __len__(self) -> int:
        return len(self.statuses)


def observe_positions(rng: np.random.Generator, true_positions: np.ndarray,
                      true_sizes: np.ndarray, sensor: SensorSpec) -> np.ndarray:
    """Independent zero-mean Gaussian noise per coordinate, sigma by true size."""
    sigma = np.asarray(sensor.pos_sigma_by_size)[true_sizes]
    noise = rng.standard_normal(true_positions.shape) * sigma[:, None]
    return true_positions + noise


def _classify(rng: np.random.Generator, true_class: int, confusion) -> int:
    row = confusion[true_class]
    u = rng.random()
    acc = 0.0
    for k, p in enumerate(row):
        acc += p
        if u < acc:
            return k
    return len(row) - 1


def classify_size(rng: np.random.Generator, true_size: int, sensor: SensorSpec) -> int:
    return _classify(rng, true_size, sensor.size_confusion)


def classify_power(rng: np.random.Generator, true_power: int, sensor: SensorSpec) -> int:
    return _classify(rng, true_power, sensor.power_confusion)


def sample_class_labels(rng: np.random.Generator, true_sizes, true_powers,
                        sensor: SensorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Episode-start label draw; held fixed for the rest of the episode."""
    detected_sizes = np.array([classify_size(rng, int(s), sensor) for s in true_sizes])
    detected_powers = np.array([classify_power(rng, int(p), sensor) for p in true_powers])
    return detected_sizes, detected_powers


def make_tracks(rng: np.random.Generator, true_positions, statuses, true_sizes,
                detected_sizes, detected_powers, sensor: SensorSpec) -> Tracks:
    return Tracks(
        positions=observe_positions(rng, np.asarray(true_positions, dtype=float),
                                    true_sizes, sensor),
        sizes=detected_sizes,
        powers=detected_powers,
        statuses=np.array(statuses, copy=True),
    )
