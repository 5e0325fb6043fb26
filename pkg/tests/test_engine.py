"""Engine: motion, geometry, effector state machines, rewards, termination."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuas.engine import (ContractError, DroneState, EffectorState, Engine, Kinematic,
                         Status, Weapon, advance_drone, aim_direction, init_state,
                         is_terminal, miss_distance, normalize_reward, p_hit,
                         resolve_fire, slew_effector, wrap_angle)
from cuas.scenario import sample_episode

from conftest import make_drone, make_setup, small_config

CERTAIN_HIT = [[0.0, 1.0], [10000.0, 1.0]]
CERTAIN_MISS = [[0.0, 0.0], [10000.0, 0.0]]


class TestInitState:
    def test_reference_setup(self, ref_cfg):
        setup = sample_episode(ref_cfg, 1)
        state = init_state(setup, ref_cfg)
        assert state.n_active == 50
        assert len(state.effectors) == 4
        assert all(e.weapon == Weapon.READY for e in state.effectors)
        assert all(e.kinematic == Kinematic.CHASING for e in state.effectors)
        assert all(e.assigned_drone is None for e in state.effectors)

    def test_initial_values(self, ref_cfg):
        setup = sample_episode(ref_cfg, 1)
        state = init_state(setup, ref_cfg)
        assert np.all(state.arc == 0.0)
        assert state.cumulative_damage == 0.0
        assert state.step_index == 0
        for m, e in enumerate(state.effectors):
            spec = ref_cfg.effectors[m]
            assert e.azimuth == pytest.approx(0.5 * sum(spec.az_limits))
            assert e.elevation == spec.el_limits[0]
        np.testing.assert_array_equal(state.positions,
                                      [d.path[0] for d in setup.drones])


class TestAdvanceDrone:
    def test_arc_arithmetic(self):
        d = DroneState(0, 0.0, (0.0, 0.0, 10.0), Status.ACTIVE)
        path = [(0.0, 0.0, 10.0), (100.0, 0.0, 10.0)]
        out = advance_drone(d, dt=0.1, speed=10.0, path=path)
        assert out.arc_position == pytest.approx(1.0)
        assert out.position == pytest.approx((1.0, 0.0, 10.0))
        assert out.status == Status.ACTIVE

    def test_clamped_arrival_at_exact_target(self):
        path = [(0.0, 0.0, 10.0), (100.0, 0.0, 0.0)]
        length = math.dist(path[0], path[1])
        d = DroneState(0, length - 0.5, (0.0, 0.0, 0.0), Status.ACTIVE)
        out = advance_drone(d, dt=0.1, speed=20.0, path=path)
        assert out.status == Status.IMPACTED
        assert out.position == (100.0, 0.0, 0.0)
        assert out.arc_position == pytest.approx(length)

    def test_position_at_waypoint_is_exact(self):
        path = [(0.0, 0.0, 0.0), (3.0, 4.0, 0.0), (3.0, 4.0, 12.0)]
        d = DroneState(0, 0.0, path[0], Status.ACTIVE)
        out = advance_drone(d, dt=1.0, speed=5.0, path=path)  # arc = 5 = first segment
        assert out.position == pytest.approx((3.0, 4.0, 0.0), abs=1e-12)

    def test_requires_active(self):
        d = DroneState(0, 0.0, (0.0, 0.0, 0.0), Status.NEUTRALIZED)
        with pytest.raises(ContractError):
            advance_drone(d, 0.1, 10.0, [(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)])


class TestAimDirection:
    def test_axis_cases(self):
        np.testing.assert_allclose(aim_direction(0.0, 0.0), [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(aim_direction(math.pi / 2, 0.0), [0, 1, 0], atol=1e-15)

    def test_zenith(self):
        for az in (0.0, 1.0, -2.5):
            np.testing.assert_allclose(aim_direction(az, math.pi / 2), [0, 0, 1], atol=1e-15)

    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_unit_norm(self, az, el):
        assert abs(np.linalg.norm(aim_direction(az, el)) - 1.0) <= 1e-12


class TestSlew:
    def test_rate_limited_step(self, ref_cfg):
        spec = ref_cfg.effectors[0]  # az rate pi/2
        az, el, kin = slew_effector(0.0, 0.0, math.pi, 0.0, 0.1, spec)
        assert az == pytest.approx(0.05 * math.pi)
        assert kin == Kinematic.CHASING

    def test_shortest_arc_wrap_snap(self, ref_cfg):
        spec = ref_cfg.effectors[0]
        az, el, kin = slew_effector(3.1, 0.0, -3.1, 0.0, 0.1, spec)
        assert az == pytest.approx(-3.1)
        assert kin == Kinematic.TRACKING

    def test_zero_error_is_tracking(self, ref_cfg):
        spec = ref_cfg.effectors[0]
        az, el, kin = slew_effector(1.0, 0.3, 1.0, 0.3, 0.1, spec)
        assert (az, el) == (1.0, 0.3)
        assert kin == Kinematic.TRACKING

    def test_elevation_rate_limit(self, ref_cfg):
        spec = ref_cfg.effectors[0]  # el rate pi/3
        az, el, kin = slew_effector(0.0, 0.0, 0.0, math.pi / 2, 0.1, spec)
        assert el == pytest.approx(math.pi / 3 * 0.1)
        assert kin == Kinematic.CHASING

    @given(st.floats(-math.pi, math.pi), st.floats(0, math.pi / 2),
           st.floats(-math.pi, math.pi), st.floats(0, math.pi / 2),
           st.floats(0.01, 1.0))
    @settings(max_examples=200)
    def test_step_magnitude_bounded_and_within_limits(self, az, el, daz, del_, dt):
        from cuas.scenario import default_config
        spec = default_config().effectors[0]
        new_az, new_el, _ = slew_effector(az, el, daz, del_, dt, spec)
        assert abs(wrap_angle(new_az - az)) <= spec.az_rate_max * dt + 1e-9
        assert abs(new_el - el) <= spec.el_rate_max * dt + 1e-9
        assert spec.az_limits[0] - 1e-12 <= new_az <= spec.az_limits[1] + 1e-12
        assert spec.el_limits[0] <= new_el <= spec.el_limits[1]

    def test_wrap_angle_principal_interval(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        assert wrap_angle(0.0) == 0.0


class TestMissDistance:
    def test_on_ray(self):
        assert miss_distance([0, 0, 0], [1, 0, 0], [10, 0, 0]) == 0.0

    def test_perpendicular_offset(self):
        assert miss_distance([0, 0, 0], [1, 0, 0], [10, 3, 0]) == pytest.approx(3.0)

    def test_clamped_at_origin(self):
        assert miss_distance([0, 0, 0], [1, 0, 0], [-5, 0, 0]) == pytest.approx(5.0)

    def test_against_dense_grid(self, rng):
        # the acceptance suite runs the full 10k-case version
        ts = np.arange(0.0, 500.0001, 0.001)
        for _ in range(50):
            origin = rng.uniform(-100, 100, 3)
            point = rng.uniform(-100, 100, 3)
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            d = miss_distance(origin, u, point)
            grid = np.linalg.norm(point[None, :] - (origin[None, :] + ts[:, None] * u),
                                  axis=1).min()
            assert abs(d - grid) <= 1e-3


class TestPHit:
    TABLE = ((0.0, 0.95), (0.5, 0.95), (1.0, 0.60), (2.0, 0.15), (3.0, 0.0))

    def test_node_lookup(self):
        for d, p in self.TABLE:
            assert p_hit(d, self.TABLE) == pytest.approx(p)

    def test_midpoint_interpolation(self):
        assert p_hit(1.5, self.TABLE) == pytest.approx((0.60 + 0.15) / 2)

    def test_beyond_support_is_zero(self):
        assert p_hit(10.0, self.TABLE) == 0.0

    def test_below_support_is_flat(self):
        table = ((1.0, 0.8), (2.0, 0.2))
        assert p_hit(0.0, table) == pytest.approx(0.8)

    @given(st.floats(0, 50))
    def test_always_a_probability(self, d):
        assert 0.0 <= p_hit(d, self.TABLE) <= 1.0


def _tracking_ready_effector(cfg):
    return EffectorState(index=0, azimuth=0.0, elevation=0.0,
                         kinematic=Kinematic.TRACKING, weapon=Weapon.READY,
                         assigned_drone=0)


class TestResolveFire:
    def test_certain_hit(self, rng):
        cfg = small_config(p_hit_table=CERTAIN_HIT)
        eff = _tracking_ready_effector(cfg)
        event = resolve_fire(rng, eff, cfg.effectors[0], [50.0, -60.0, 0.0],
                             cfg.p_hit_table)
        assert event.hit
        assert eff.weapon == Weapon.FIRING

    def test_certain_miss_still_consumes_cooldown(self, rng):
        cfg = small_config(p_hit_table=CERTAIN_MISS)
        eff = _tracking_ready_effector(cfg)
        event = resolve_fire(rng, eff, cfg.effectors[0], [50.0, -60.0, 0.0],
                             cfg.p_hit_table)
        assert not event.hit
        assert eff.weapon == Weapon.FIRING  # enters Charging next step

    def test_contract_violation_outside_tracking_ready(self, rng):
        cfg = small_config()
        eff = _tracking_ready_effector(cfg)
        eff.kinematic = Kinematic.CHASING
        with pytest.raises(ContractError):
            resolve_fire(rng, eff, cfg.effectors[0], [1.0, 0.0, 0.0], cfg.p_hit_table)
        eff.kinematic = Kinematic.TRACKING
        eff.weapon = Weapon.CHARGING
        with pytest.raises(ContractError):
            resolve_fire(rng, eff, cfg.effectors[0], [1.0, 0.0, 0.0], cfg.p_hit_table)


def _run_weapon_cycle(cfg, steps=40):
    """One slow distant drone, one effector, certain-miss fire; returns weapon trace."""
    drone = make_drone(target=(-99.0, -60.0, 0.0), spawn=(99.0, -60.0, 30.0), speed=0.5)
    setup = make_setup(cfg, [drone])
    engine = Engine(cfg, setup, np.random.default_rng(0))
    trace = []
    for _ in range(steps):
        result = engine.step([0], engine.state.positions)
        trace.append((engine.state.effectors[0].weapon,
                      engine.state.effectors[0].charge_steps_left))
        if result.terminal:
            break
    return trace


class TestWeaponCycle:
    def test_exactly_five_charging_steps_then_ready(self):
        cfg = small_config(n_drones=1, n_effectors=1, p_hit_table=CERTAIN_MISS)
        trace = _run_weapon_cycle(cfg)
        states = [w for w, _ in trace]
        first_fire = states.index(Weapon.FIRING)
        window = states[first_fire:first_fire + 7]
        assert window == [Weapon.FIRING] + [Weapon.CHARGING] * 5 + [Weapon.FIRING]

    def test_recharge_steps_follow_ceil_rule(self):
        # recharge 0.25 s at dt 0.1 -> ceil = 3 charging steps
        from cuas.scenario import config_from_dict, config_to_dict
        doc = config_to_dict(small_config(n_drones=1, n_effectors=1,
                                          p_hit_table=CERTAIN_MISS))
        doc["effectors"][0]["recharge_time"] = 0.25
        cfg = config_from_dict(doc)
        trace = _run_weapon_cycle(cfg)
        states = [w for w, _ in trace]
        first_fire = states.index(Weapon.FIRING)
        window = states[first_fire:first_fire + 5]
        assert window == [Weapon.FIRING] + [Weapon.CHARGING] * 3 + [Weapon.FIRING]

    def test_charging_iff_counter_positive(self):
        cfg = small_config(n_drones=1, n_effectors=1, p_hit_table=CERTAIN_MISS)
        for weapon, left in _run_weapon_cycle(cfg):
            assert (weapon == Weapon.CHARGING) == (left > 0)


class TestStep:
    def test_no_arrivals_zero_reward(self, ref_cfg):
        setup = sample_episode(ref_cfg, 2)
        engine = Engine(ref_cfg, setup, np.random.default_rng(0))
        result = engine.step([0, 0, 0, 0], engine.state.positions)
        assert result.raw_reward == 0.0
        assert result.normalized_reward == 0.0
        assert result.impacts == []

    def test_medium_power_into_value5_zone(self):
        cfg = small_config(n_drones=1, n_effectors=1, p_hit_table=CERTAIN_MISS)
        # power index 1 (Medium) -> scalar 2; zone 1 has value 5
        drone = make_drone(target=(-30.0, 50.0, 0.0), spawn=(97.0, 50.0, 30.0),
                           speed=30.0, power=1)
        setup = make_setup(cfg, [drone])
        assert setup.max_damage == 10.0
        engine = Engine(cfg, setup, np.random.default_rng(0))
        engine.state.arc[0] = drone.path_length - 1.0  # arrives this step
        result = engine.step([0], engine.state.positions)
        assert result.raw_reward == -10.0
        assert result.normalized_reward == -1.0
        assert result.impacts[0].zone == 1
        assert engine.state.status[0] == Status.IMPACTED

    def test_impact_outside_zones_scores_zero(self):
        cfg = small_config(n_drones=1, n_effectors=1, p_hit_table=CERTAIN_MISS)
        drone = make_drone(target=(-5.0, 95.0, 0.0), spawn=(97.0, 95.0, 30.0), speed=30.0)
        setup = make_setup(cfg, [drone])
        engine = Engine(cfg, setup, np.random.default_rng(0))
        engine.state.arc[0] = drone.path_length - 1.0
        result = engine.step([0], engine.state.positions)
        assert engine.state.status[0] == Status.IMPACTED
        assert result.impacts[0].damage == 0.0
        assert result.raw_reward == 0.0

    def test_assignment_out_of_range(self, ref_cfg):
        setup = sample_episode(ref_cfg, 2)
        engine = Engine(ref_cfg, setup, np.random.default_rng(0))
        with pytest.raises(ContractError, match="out of range"):
            engine.step([0, 0, 0, 50], engine.state.positions)
        with pytest.raises(ContractError, match="one target per effector"):
            engine.step([0, 0, 0], engine.state.positions)


class TestNormalizeReward:
    def test_full_loss(self):
        assert normalize_reward(-10.0, 10.0) == -1.0

    def test_zero_raw(self):
        assert normalize_reward(0.0, 25.0) == 0.0

    def test_zero_max_damage(self):
        assert normalize_reward(0.0, 0.0) == 0.0

    def test_episode_accounting_oracle(self):
        """Return equals -(realized damage)/(max damage) recomputed from impacts."""
        cfg = small_config(n_drones=2, n_effectors=1, p_hit_table=CERTAIN_MISS)
        drones = [
            make_drone(target=(-30.0, -50.0, 0.0), spawn=(97.0, -50.0, 30.0),
                       speed=30.0, power=0),   # e=1 into v=2 -> damage 2
            make_drone(target=(-30.0, 50.0, 0.0), spawn=(97.0, 50.0, 30.0),
                       speed=30.0, power=1),   # e=2 into v=5 -> damage 10
        ]
        setup = make_setup(cfg, drones)
        assert setup.max_damage == 12.0

        def run(neutralize_second):
            engine = Engine(cfg, setup, np.random.default_rng(0))
            if neutralize_second:
                engine.state.status[1] = Status.NEUTRALIZED
            total, impacts = 0.0, []
            while not is_terminal(engine.state, cfg):
                res = engine.step([0], engine.state.positions)
                total += res.normalized_reward
                impacts.extend(res.impacts)
            oracle = -sum(i.damage for i in impacts) / setup.max_damage
            assert total == pytest.approx(oracle)
            return total

        assert run(neutralize_second=False) == pytest.approx(-1.0)
        assert run(neutralize_second=True) == pytest.approx(-2.0 / 12.0)


class TestIsTerminal:
    def test_all_neutralized(self, ref_cfg):
        setup = sample_episode(ref_cfg, 2)
        state = init_state(setup, ref_cfg)
        state.status[:] = Status.NEUTRALIZED
        assert is_terminal(state, ref_cfg)

    def test_one_active_not_terminal(self, ref_cfg):
        setup = sample_episode(ref_cfg, 2)
        state = init_state(setup, ref_cfg)
        state.status[:] = Status.IMPACTED
        state.status[3] = Status.ACTIVE
        assert not is_terminal(state, ref_cfg)

    def test_step_cap_safeguard(self, ref_cfg):
        setup = sample_episode(ref_cfg, 2)
        state = init_state(setup, ref_cfg)
        state.step_index = ref_cfg.max_steps
        assert is_terminal(state, ref_cfg)


class TestTraceInvariants:
    def test_status_monotone_and_damage_bounded(self):
        cfg = small_config(n_drones=6, n_effectors=2)
        for seed in range(5):
            setup = sample_episode(cfg, seed)
            engine = Engine(cfg, setup, np.random.default_rng(seed))
            prev = engine.state.status.copy()
            while not is_terminal(engine.state, cfg):
                engine.step([0, 1], engine.state.positions)
                now = engine.state.status
                changed = prev != now
                # only Active -> terminal transitions, never out of terminal
                assert np.all(prev[changed] == Status.ACTIVE)
                assert engine.state.cumulative_damage <= setup.max_damage + 1e-9
                prev = now.copy()
