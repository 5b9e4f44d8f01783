import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import reference as ref
from ris_hppo.channel import ChannelConfig
from ris_hppo.network import (EdgeRateVariant, LinkGeometry, PowerModel, RadioConfig, RateReport,
                              Topology, center_sinr, dbm_to_watt, effective_gains,
                              energy_efficiency, evaluate_rates, incoming_ris_powers, jain_fairness,
                              noise_power_dbm, oma_rates, outage_probability, rate_center,
                              rate_decode_edge_at_center, rate_edge, ris_noise_powers,
                              sample_channels, sic_feasibility, sum_rate, total_power, watt_to_dbm)
from ris_hppo.ris import RisMode, RisState
from ris_hppo.scenario import ScenarioConfig, build_topology

lam_st = st.floats(0.5001, 0.9999)
gam_st = st.floats(0.0, 1e4)


def test_noise_power():
    assert noise_power_dbm(10e6) == pytest.approx(-104.0)
    assert noise_power_dbm(1.0) == -174.0
    assert noise_power_dbm(1e6) == pytest.approx(-114.0)
    with pytest.raises(ValueError):
        noise_power_dbm(0.0)


def test_dbm_conversion_exact():
    assert dbm_to_watt(30.0) == 1.0
    assert dbm_to_watt(0.0) == pytest.approx(1e-3, rel=1e-15)
    assert dbm_to_watt(20.0) == pytest.approx(0.1, rel=1e-15)
    assert watt_to_dbm(dbm_to_watt(-17.3)) == pytest.approx(-17.3, rel=1e-14)


def test_center_sinr_examples():
    assert center_sinr(1.0, [], 0.0, RadioConfig(1.0, 1.0)) == 1.0
    assert center_sinr(1.0, [1.0], 0.0, RadioConfig(1.0, 1e-300)) == pytest.approx(1.0)
    assert center_sinr(2.0, [1.0], 1.0, RadioConfig(2.0, 1.0)) == pytest.approx(2.0)


def test_rate_examples():
    assert rate_decode_edge_at_center(0.8, 0.0) == 0.0
    assert rate_decode_edge_at_center(1.0, 1.0) == pytest.approx(1.0)
    assert rate_decode_edge_at_center(0.8, 10.0) == pytest.approx(math.log2(1 + 8 / 3))
    assert rate_decode_edge_at_center(0.8, 10.0) == pytest.approx(1.8745, abs=1e-4)
    assert rate_center(1.0, 5.0) == 0.0
    assert rate_center(0.5, 2.0) == pytest.approx(1.0)
    assert rate_center(0.8, 10.0) == pytest.approx(1.58496, abs=1e-5)
    for v in EdgeRateVariant:
        assert rate_edge(0.7, 0.0, 0.6, 0.0, v) == 0.0
    assert rate_edge(0.8, 10, 0.8, 10) == pytest.approx(math.log2(1 + 16 / 5))
    assert rate_edge(0.8, 10, 0.8, 10) == pytest.approx(2.0704, abs=1e-4)


def test_sic_feasibility():
    assert sic_feasibility(2.0, 1.0)
    assert sic_feasibility(1.0, 1.0)
    assert not sic_feasibility(0.5, 1.0)


@given(lam_st, lam_st, gam_st)
def test_edge_variants_agree_on_equal_gamma(lm, lj, g):
    a = rate_edge(lm, g, lj, g, EdgeRateVariant.CORRECTED)
    b = rate_edge(lm, g, lj, g, EdgeRateVariant.LITERAL)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


@given(lam_st, lam_st, st.floats(0.01, 1e4))
def test_rate_monotonicity_in_lambda(l1, l2, g):
    lo, hi = min(l1, l2), max(l1, l2)
    assert rate_center(hi, g) <= rate_center(lo, g) + 1e-12
    assert rate_decode_edge_at_center(hi, g) >= rate_decode_edge_at_center(lo, g) - 1e-12


@given(lam_st, gam_st, lam_st, gam_st)
def test_rates_nonnegative(lm, gm, lj, gj):
    assert rate_center(lm, gm) >= 0
    assert rate_decode_edge_at_center(lm, gm) >= 0
    for v in EdgeRateVariant:
        assert rate_edge(lm, gm, lj, gj, v) >= 0


@given(st.floats(0.1, 10), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.1, 100))
def test_sinr_scale_invariance(hm, hj, p, c):
    a = center_sinr(hm, [hj], 0.0, RadioConfig(p, 1e-300))
    b = center_sinr(hm, [hj], 0.0, RadioConfig(c * p, 1e-300))
    assert a == pytest.approx(b, rel=1e-12)
    s = center_sinr(hm, [hj], 0.3, RadioConfig(p, 0.2))
    t = center_sinr(hm, [hj], 0.3 * c, RadioConfig(p * c, 0.2 * c))
    assert s == pytest.approx(t, rel=1e-12)


def _states(sizes, rng, mode=RisMode.ACTIVE, s_max=10.0):
    out = []
    for k in sizes:
        p = rng.uniform(1, s_max, k) if mode is RisMode.ACTIVE else np.ones(k)
        out.append(RisState(rng.uniform(-np.pi, np.pi, k), np.ones(k), p, mode, s_max))
    return out


def _ref_report(top, ch, states, lambdas, radio, sigma_v2, literal=False):
    refl = np.concatenate([s.amplification * s.amplitudes * np.exp(1j * s.phases) for s in states])
    h_in = np.concatenate(ch.h_in, axis=1)
    h_out = np.concatenate(ch.h_out, axis=1)
    gains = ref.composite_gains(ch.direct.tolist(), h_in.tolist(), h_out.tolist(), refl.tolist())
    amp_sq = np.concatenate([(s.amplification * s.amplitudes) ** 2 for s in states]).tolist()
    noise = ref.ris_noise(h_out.tolist(), amp_sq, sigma_v2, states[0].active)
    return ref.user_rates(top.serving.tolist(), top.partner.tolist(), top.is_edge.tolist(), gains,
                          noise, radio.p_t, radio.sigma2, list(lambdas), literal)


@pytest.mark.parametrize("variant", list(EdgeRateVariant))
def test_reference_scenario_matches_scalar_oracle(variant):
    top = build_topology(ScenarioConfig())
    radio = RadioConfig(float(dbm_to_watt(20)), float(dbm_to_watt(-104)))
    ch = sample_channels(top, (16, 16), ChannelConfig(), np.random.default_rng(2024))
    states = [RisState.identity(16), RisState.identity(16)]
    lam = np.array([0.7, 0.8, 0.9])
    rep = evaluate_rates(top, ch, states, lam, radio, radio.sigma2, variant)
    rates, dec = _ref_report(top, ch, states, lam, radio, radio.sigma2,
                             variant is EdgeRateVariant.LITERAL)
    np.testing.assert_allclose(rep.rates, rates, rtol=1e-9, atol=1e-12)
    assert rep.r_total == pytest.approx(math.fsum(rates), rel=1e-9)
    centers, _ = top.noma_pairs
    np.testing.assert_allclose(rep.r_c_to_e, np.array(dec)[centers], rtol=1e-9)


def test_effective_gains_and_noise_match_scalar():
    top = build_topology(ScenarioConfig())
    rng = np.random.default_rng(3)
    ch = sample_channels(top, (5, 3), ChannelConfig(), rng)
    states = _states((5, 3), rng)
    refl = [s.amplification * np.exp(1j * s.phases) for s in states]
    g = effective_gains(ch, refl)
    ref_g = ref.composite_gains(ch.direct.tolist(), np.concatenate(ch.h_in, 1).tolist(),
                                np.concatenate(ch.h_out, 1).tolist(), np.concatenate(refl).tolist())
    np.testing.assert_allclose(g, np.array(ref_g), rtol=1e-12)
    nz = ris_noise_powers(ch, [s.amplification ** 2 for s in states], 2e-14, [True, True])
    ref_nz = ref.ris_noise(np.concatenate(ch.h_out, 1).tolist(),
                           np.concatenate([s.amplification ** 2 for s in states]).tolist(), 2e-14, True)
    np.testing.assert_allclose(nz, ref_nz, rtol=1e-12)


def test_sum_rate_is_sum_of_components():
    top = build_topology(ScenarioConfig())
    rng = np.random.default_rng(4)
    rates = rng.uniform(0, 3, top.n_users)
    rep = sum_rate(top, rates, rng.uniform(0, 3, top.n_users))
    assert rep.r_total == float(rates.sum())
    assert rep.center_rate + rep.edge_rate == pytest.approx(rep.r_total)


def test_all_zero_gains_give_zero_rate():
    top = build_topology(ScenarioConfig())
    ch = sample_channels(top, (0, 0), ChannelConfig(), np.random.default_rng(0))
    ch = type(ch)(np.zeros_like(ch.direct), ch.h_in, ch.h_out)
    rep = evaluate_rates(top, ch, [RisState.identity(0), RisState.identity(0)], np.full(3, 0.75),
                         RadioConfig(1.0, 1e-9), 1e-9)
    assert rep.r_total == 0.0


def test_oma_single_user():
    top = Topology([[0, 0, 10]], [[1, 1, 0]], [0], [-1], [[0, 5, 5], [0, 0, 40]])
    g = np.array([[np.sqrt(3.0)]])
    assert oma_rates(top, g, np.zeros(1), RadioConfig(1.0, 1.0))[0] == pytest.approx(1.0)
    assert oma_rates(top, np.zeros((1, 1)), np.zeros(1), RadioConfig(1.0, 1.0))[0] == 0.0


def test_total_power_examples():
    pm = PowerModel(p_bs_static=5.0, eta_ris=1.25, p_circuit_per_elem=0.01, p_uav_hover=100.0)
    k = 4
    passive = [RisState.identity(k, RisMode.PASSIVE)] * 2
    zero = [np.zeros(k)] * 2
    assert total_power(pm, passive, zero, 3, 0.1) == pytest.approx(3 * 5.1 + 2 * k * 0.01 + 100)
    pm0 = PowerModel(0.0, 1.25, 0.0, 0.0)
    s1 = [RisState(np.zeros(k), np.ones(k), np.full(k, 2.0))]
    s2 = [RisState(np.zeros(k), np.ones(k), np.full(k, 4.0))]
    pin = [np.full(k, 0.3)]
    assert total_power(pm0, s2, pin, 1, 0.0) == pytest.approx(4 * total_power(pm0, s1, pin, 1, 0.0))
    # hand sum
    s = [RisState(np.array([0.1, -2.0]), np.array([1.0, 0.5]), np.array([3.0, 2.0]))]
    hand = 2 * (5.0 + 0.1) + 1.25 * (9 * 0.2 + 1 * 0.7) + 2 * 0.01 + 100.0
    assert total_power(pm, s, [np.array([0.2, 0.7])], 2, 0.1) == pytest.approx(hand, rel=1e-12)


@settings(max_examples=40)
@given(st.integers(0, 2 ** 31))
def test_total_power_phase_invariant_and_increasing(seed):
    rng = np.random.default_rng(seed)
    k = 3
    p = rng.uniform(1, 5, k)
    pin = [rng.uniform(0.01, 1, k)]
    pm = PowerModel()
    a = total_power(pm, [RisState(np.zeros(k), np.ones(k), p)], pin, 2, 0.1)
    b = total_power(pm, [RisState(rng.uniform(-np.pi, np.pi, k), np.ones(k), p)], pin, 2, 0.1)
    assert a == pytest.approx(b, rel=1e-14)
    p2 = p.copy()
    p2[rng.integers(k)] += 0.5
    assert total_power(pm, [RisState(np.zeros(k), np.ones(k), p2)], pin, 2, 0.1) > a


def test_energy_efficiency():
    assert energy_efficiency(10.0, 1.0, 2.0) == 5.0
    assert energy_efficiency(0.0, 1e7, 3.0) == 0.0
    r, b, p = 12.345, 10e6, 117.3
    assert energy_efficiency(r, b, p) == pytest.approx(r * b / p, rel=1e-12)
    with pytest.raises(ValueError):
        energy_efficiency(1.0, 1.0, 0.0)


def test_outage():
    hi = [np.array([2.0, 3.0])] * 4
    assert outage_probability(hi, 1.0) == 0.0
    assert outage_probability([np.array([0.1, 0.5])] * 3, 1.0) == 1.0
    mixed = [np.array([0.5, 2.0])] * 3 + [np.array([1.5, 2.0])] * 7
    assert outage_probability(mixed, 1.0) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        outage_probability([], 1.0)


def test_jain():
    assert jain_fairness([2.0, 2.0, 2.0]) == pytest.approx(1.0)
    assert jain_fairness([1.0, 0, 0, 0]) == pytest.approx(0.25)
    assert jain_fairness([1.0, 2.0, 3.0]) == pytest.approx(36 / 42)
    with pytest.raises(ValueError):
        jain_fairness([0.0, 0.0])


def test_topology_validation():
    ris = [[0, 0, 10], [0, 0, 40]]
    with pytest.raises(ValueError):
        Topology([[0, 0, 10], [5, 0, 10]], [[1, 1, 0]], [0], [0], ris)
    with pytest.raises(ValueError):
        Topology([[0, 0, -1]], [[1, 1, 0]], [0], [-1], ris)
    with pytest.raises(ValueError):
        Topology([[0, 0, 10]], [[1, 1, 0]], [3], [-1], ris)


@pytest.mark.parametrize("seed", range(10))
def test_user_placement_roles(seed):
    sc = ScenarioConfig()
    top = build_topology(sc, placement_seed=seed)
    bs = top.bs_positions[:, :2]
    for u in range(top.n_users):
        d = np.linalg.norm(bs - top.user_positions[u, :2], axis=1)
        if top.is_edge[u]:
            order = np.argsort(d)
            assert order[0] == top.serving[u] and order[1] == top.partner[u]
            assert sc.cell_radius <= d[top.serving[u]] <= sc.edge_radius
        else:
            assert d[top.serving[u]] <= sc.cell_radius
        assert top.in_flight_area(top.user_positions[u, :2])
    centers, mates = top.noma_pairs
    assert len(centers) == 3 and np.all(mates >= 0)


def test_geometry_with_uav_matches_fresh():
    top = build_topology(ScenarioConfig())
    geom = LinkGeometry(top, (4, 4), ChannelConfig())
    moved = geom.with_uav(np.array([7.0, -3.0]))
    fresh = LinkGeometry(top.with_uav(np.array([7.0, -3.0])), (4, 4), ChannelConfig())
    a = moved.sample(np.random.default_rng(1))
    b = fresh.sample(np.random.default_rng(1))
    np.testing.assert_array_equal(a.direct, b.direct)
    for x, y in zip(a.h_in + a.h_out, b.h_in + b.h_out):
        np.testing.assert_array_equal(x, y)


def test_incoming_power():
    top = build_topology(ScenarioConfig())
    ch = sample_channels(top, (3, 2), ChannelConfig(), np.random.default_rng(0))
    radio = RadioConfig(0.5, 1e-12)
    states = [RisState.identity(3), RisState.identity(2, RisMode.PASSIVE)]
    pin = incoming_ris_powers(ch, radio, 1e-12, states)
    np.testing.assert_allclose(pin[0], 0.5 * (np.abs(ch.h_in[0]) ** 2).sum(0) + 1e-12)
    np.testing.assert_allclose(pin[1], 0.5 * (np.abs(ch.h_in[1]) ** 2).sum(0))


def test_rate_report_fields():
    top = build_topology(ScenarioConfig())
    rep = sum_rate(top, np.arange(6.0), np.full(6, 10.0))
    assert isinstance(rep, RateReport)
    assert rep.worst_rate == 0.0
    assert rep.sic_ok.all()
