import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import reference as ref
from ris_hppo.env import (MOVES, ActionLayout, EnvConfig, HybridAction, RewardParams, RisEnv,
                          StepFlags, log_tanh_jacobian, reward, squash_action,
                          squash_amplification, squash_lambda, squash_phase)
from ris_hppo.network import RadioConfig, dbm_to_watt
from ris_hppo.ris import RisMode
from ris_hppo.scenario import ScenarioConfig, build_topology, tiny_scenario

RADIO = RadioConfig(float(dbm_to_watt(20)), float(dbm_to_watt(-104)))


def make_env(**kw):
    sc = kw.pop("scenario", ScenarioConfig())
    return RisEnv(build_topology(sc), RADIO, cfg=EnvConfig(**kw), uav_start=sc.uav_start)


def hover(env, lam=0.75, amp=1.0):
    n = env.cfg.n_phase
    return HybridAction(4, np.zeros(n), np.full(env.topology.n_bs, lam), np.full(n, amp))


def test_reset_defaults():
    env = make_env(k_ground=4, k_uav=4)
    s = env.reset(seed=0)
    np.testing.assert_array_equal(s.uav_xy, [-5.0, 0.0])
    np.testing.assert_array_equal(s.lambdas, [0.75] * 3)
    np.testing.assert_array_equal(s.amplification_flat, np.ones(8))
    assert s.slot_index == 0
    assert s.dim == env.state_dim == 2 + 3 + 8 + 2
    assert env.observe().shape == (env.state_dim,)


def test_hover_keeps_position():
    env = make_env(k_ground=2, k_uav=2)
    env.reset(seed=1)
    out = env.step(hover(env))
    np.testing.assert_array_equal(out.next_state.uav_xy, [-5.0, 0.0])
    assert not out.flags.oob


def test_move_outside_area_is_rejected():
    sc = ScenarioConfig(uav_start=(49.0, 0.0, 40.0))
    env = make_env(scenario=sc, k_ground=2, k_uav=2)
    env.reset(seed=2)
    a = hover(env)
    out = env.step(HybridAction(1, a.phases, a.lambdas, a.amplification))
    np.testing.assert_array_equal(out.next_state.uav_xy, [49.0, 0.0])
    assert out.flags.oob
    d = env.mean_user_distance([49.0, 0.0])
    assert out.reward == pytest.approx(reward(out.rates.r_total, d, StepFlags(), RewardParams()) - 10)


def test_no_fly_zone_rejected():
    sc = ScenarioConfig(obstacles=((6.0, 0.0, 10.0),))
    env = make_env(scenario=sc, k_ground=2, k_uav=2)
    env.reset(seed=0)
    a = hover(env)
    out = env.step(HybridAction(1, a.phases, a.lambdas, a.amplification))
    assert out.flags.no_fly_violation and not out.flags.oob
    np.testing.assert_array_equal(out.next_state.uav_xy, [-5.0, 0.0])


def test_moves_shift_by_step():
    env = make_env(k_ground=1, k_uav=1)
    for m in range(4):
        env.reset(seed=0)
        a = hover(env)
        out = env.step(HybridAction(m, a.phases, a.lambdas, a.amplification))
        np.testing.assert_array_equal(out.next_state.uav_xy, np.array([-5.0, 0.0]) + 2.0 * MOVES[m])


def test_reward_examples():
    rp = RewardParams()
    assert reward(5.0, 30.0, StepFlags(), rp) == 5.0
    assert reward(5.0, 30.0, StepFlags(oob=True), rp) == -5.0
    assert reward(5.0, 5.0, StepFlags(), rp) == pytest.approx(7.0)
    assert reward(5.0, 0.0, StepFlags(), rp) == pytest.approx(105.0)
    assert reward(5.0, 30.0, StepFlags(qos_violation=True), RewardParams(qos_penalty=2.0)) == 3.0
    with pytest.raises(ValueError):
        RewardParams(c_const=0)


def test_squash_midpoints_and_limits():
    assert squash_phase(0.0) == 0.0
    assert squash_lambda(0.0) == 0.75
    assert squash_amplification(0.0, 10.0) == 5.5
    assert -np.pi < squash_phase(1e6) < np.pi
    assert 0.5 < squash_lambda(-1e6) and squash_lambda(1e6) < 1.0
    assert 1.0 <= squash_amplification(-1e6, 10.0) and squash_amplification(1e6, 10.0) <= 10.0
    assert squash_lambda(50.0) == pytest.approx(1.0)


def test_squash_monotone():
    rng = np.random.default_rng(0)
    u = rng.normal(scale=3, size=(10 ** 4, 2))
    lo, hi = u.min(1), u.max(1)
    for f in (squash_phase, squash_lambda, lambda x: squash_amplification(x, 10.0)):
        assert np.all(f(lo) <= f(hi))


@given(st.floats(-30, 30))
def test_log_tanh_jacobian(u):
    exact = math.log1p(-math.tanh(u) ** 2) if abs(u) < 5 else None
    if exact is not None:
        assert float(log_tanh_jacobian(u)) == pytest.approx(exact, rel=1e-9, abs=1e-12)
    assert np.isfinite(log_tanh_jacobian(u))


def test_layout_jacobian_matches_finite_difference():
    lay = ActionLayout(3, 2, 3, 10.0)
    raw = np.random.default_rng(3).normal(size=lay.dim)
    h = 1e-6
    total = 0.0
    for i in range(lay.dim):
        e = np.zeros(lay.dim)
        e[i] = h
        a, b = squash_action(raw + e, lay), squash_action(raw - e, lay)
        fa = np.concatenate([a.phases, a.lambdas, a.amplification])
        fb = np.concatenate([b.phases, b.lambdas, b.amplification])
        total += math.log(abs((fa[i] - fb[i]) / (2 * h)))
    assert float(lay.log_abs_det_jacobian(raw)) == pytest.approx(total, rel=1e-6)


def test_episode_length_and_determinism():
    def run(seed):
        env = make_env(k_ground=2, k_uav=2, t_s=7)
        env.reset(seed=seed)
        rng = np.random.default_rng(5)
        rs, done = [], False
        while not done:
            raw = rng.normal(size=env.layout.dim)
            out = env.step(squash_action(raw, env.layout, int(rng.integers(5))))
            rs.append(out.reward)
            done = out.done
        return rs
    a = run(11)
    assert len(a) == 7
    assert a == run(11)
    assert a != run(12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_uav_stays_feasible(seed):
    sc = ScenarioConfig(obstacles=((20.0, 0.0, 10.0), (-20.0, 20.0, 10.0)))
    env = make_env(scenario=sc, k_ground=1, k_uav=1, t_s=60)
    env.reset(seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(60):
        out = env.step(squash_action(rng.normal(size=env.layout.dim), env.layout, int(rng.integers(5))))
        xy = out.next_state.uav_xy
        assert env.topology.in_flight_area(xy)
        assert not env.topology.in_no_fly_zone(xy)


def test_passive_mode_ignores_amplification():
    env = make_env(ris_mode=RisMode.PASSIVE, k_ground=2, k_uav=2)
    env.reset(seed=0)
    out = env.step(hover(env, amp=7.0))
    np.testing.assert_array_equal(out.next_state.amplification_flat, np.ones(4))


def test_freeze_lambda_amp():
    env = make_env(k_ground=1, k_uav=1, freeze_lambda_amp=True)
    env.reset(seed=0)
    env.step(hover(env, lam=0.6, amp=3.0))
    out = env.step(hover(env, lam=0.9, amp=8.0))
    np.testing.assert_array_equal(out.next_state.lambdas, [0.6] * 3)
    np.testing.assert_array_equal(out.next_state.amplification_flat, [3.0, 3.0])


def test_toy_reward_equals_hand_sum_rate():
    top = build_topology(tiny_scenario())
    env = RisEnv(top, RADIO, cfg=EnvConfig(k_ground=1, k_uav=0, r_min=0.0))
    env.reset(seed=4)
    act = HybridAction(4, np.array([0.4]), np.array([0.7, 0.8]), np.array([3.0]))
    out = env.step(act)
    ch = env.last_channels
    refl = [3.0 * complex(math.cos(0.4), math.sin(0.4))]
    h_in = np.concatenate(ch.h_in, 1)
    h_out = np.concatenate(ch.h_out, 1)
    g = ref.composite_gains(ch.direct.tolist(), h_in.tolist(), h_out.tolist(), refl)
    nz = ref.ris_noise(h_out.tolist(), [9.0], env.sigma_v2, True)
    rates, _ = ref.user_rates(top.serving.tolist(), top.partner.tolist(), top.is_edge.tolist(), g, nz,
                              RADIO.p_t, RADIO.sigma2, [0.7, 0.8])
    total = math.fsum(rates)
    d = env.mean_user_distance(out.next_state.uav_xy)
    bonus = 10.0 / max(d, 0.1) if d < 20 else 0.0
    assert out.rates.r_total == pytest.approx(total, rel=1e-9)
    assert out.reward == pytest.approx(total + bonus, rel=1e-9)


def test_oma_access_halves_rates():
    env = make_env(access="oma", k_ground=2, k_uav=2)
    env.reset(seed=3)
    out = env.step(hover(env))
    assert out.rates.edge_rate >= 0 and out.rates.r_total > 0


def test_config_validation():
    with pytest.raises(ValueError):
        EnvConfig(access="tdma")
    with pytest.raises(ValueError):
        EnvConfig(shared_ris_action=True, k_ground=2, k_uav=3)
    with pytest.raises(ValueError):
        EnvConfig(lambda_init=0.5)
    env = make_env(k_ground=1, k_uav=1)
    with pytest.raises(RuntimeError):
        env.step(hover(env))
