"""Sensor noise statistics and confusion-matrix classification."""

import numpy as np
import pytest
from scipy import stats

from cuas.scenario import sample_episode
from cuas.sensing import (classify_power, classify_size, make_tracks,
                          observe_positions, sample_class_labels)
from cuas.session import EpisodeSession

from conftest import build_config

IDENTITY = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


class TestObservePositions:
    def test_noiseless_limit(self, rng):
        cfg = build_config(sensor={"pos_sigma_by_size": {
            "Small": 1e-300, "Medium": 1e-300, "Large": 1e-300}})
        true = np.array([[10.0, -5.0, 30.0], [0.0, 0.0, 0.0]])
        sizes = np.array([0, 2])
        observed = observe_positions(rng, true, sizes, cfg.sensor)
        np.testing.assert_allclose(observed, true, atol=1e-200)

    @pytest.mark.parametrize("size,sigma", [(0, 0.75), (1, 0.5), (2, 0.25)])
    def test_std_matches_size_class(self, rng, ref_cfg, size, sigma):
        n = 100_000
        true = np.zeros((n, 3))
        observed = observe_positions(rng, true, np.full(n, size), ref_cfg.sensor)
        for axis in range(3):
            assert abs(observed[:, axis].std() - sigma) / sigma < 0.02

    def test_noise_redrawn_every_step(self, ref_cfg):
        setup = sample_episode(ref_cfg, 5)
        session = EpisodeSession(ref_cfg, setup, 5)
        first = session.tracks.positions.copy()
        session.step([0, 0, 0, 0])
        second = session.tracks.positions
        assert not np.array_equal(first, second)


class TestClassification:
    def test_identity_matrix_is_exact(self, rng):
        cfg = build_config(sensor={"size_confusion": IDENTITY,
                                   "power_confusion": IDENTITY})
        for k in range(3):
            assert classify_size(rng, k, cfg.sensor) == k
            assert classify_power(rng, k, cfg.sensor) == k

    def test_size_row_frequencies_medium(self, rng, ref_cfg):
        n = 100_000
        draws = np.array([classify_size(rng, 1, ref_cfg.sensor) for _ in range(n)])
        freqs = [np.mean(draws == k) for k in range(3)]
        for f, expected in zip(freqs, (0.1, 0.8, 0.1)):
            assert abs(f - expected) < 0.01
        assert sum(freqs) == pytest.approx(1.0)

    def test_power_row_frequencies_high(self, rng, ref_cfg):
        n = 100_000
        draws = np.array([classify_power(rng, 2, ref_cfg.sensor) for _ in range(n)])
        for k, expected in enumerate((0.1, 0.2, 0.7)):
            assert abs(np.mean(draws == k) - expected) < 0.01

    def test_power_medium_often_detected_low(self, rng, ref_cfg):
        n = 100_000
        draws = np.array([classify_power(rng, 1, ref_cfg.sensor) for _ in range(n)])
        assert abs(np.mean(draws == 0) - 0.3) < 0.01

    def test_chi_square_rows(self, rng, ref_cfg):
        n = 50_000
        cases = [
            (classify_size, 0, (0.8, 0.1, 0.1)),
            (classify_size, 2, (0.1, 0.1, 0.8)),
            (classify_power, 1, (0.3, 0.4, 0.3)),
        ]
        for fn, true_class, probs in cases:
            draws = np.array([fn(rng, true_class, ref_cfg.sensor) for _ in range(n)])
            observed = [np.sum(draws == k) for k in range(3)]
            assert stats.chisquare(observed, [p * n for p in probs]).pvalue > 0.01


class TestLabelPersistence:
    def test_labels_fixed_within_episode(self, ref_cfg):
        setup = sample_episode(ref_cfg, 11)
        session = EpisodeSession(ref_cfg, setup, 11)
        sizes0 = session.tracks.sizes.copy()
        powers0 = session.tracks.powers.copy()
        for _ in range(10):
            session.step([0, 1, 2, 3])
        np.testing.assert_array_equal(session.tracks.sizes, sizes0)
        np.testing.assert_array_equal(session.tracks.powers, powers0)

    def test_statuses_copied_from_truth(self, rng, ref_cfg):
        setup = sample_episode(ref_cfg, 11)
        sizes = np.array([d.size for d in setup.drones])
        powers = np.array([d.power for d in setup.drones])
        ds, dp = sample_class_labels(rng, sizes, powers, ref_cfg.sensor)
        statuses = np.zeros(len(sizes), dtype=int)
        statuses[7] = 2
        tracks = make_tracks(rng, np.zeros((len(sizes), 3)), statuses, sizes,
                             ds, dp, ref_cfg.sensor)
        assert tracks.statuses[7] == 2
        assert tracks.statuses[0] == 0
