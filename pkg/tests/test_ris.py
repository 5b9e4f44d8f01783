import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ris_hppo.ris import (CascadeInput, DynamicNoiseParams, RisMode, RisState, cascaded_gain,
                          dynamic_noise_power, effective_channel, phase_align, reflection_matrix,
                          wrap_phase)


def state(phases, amps=None, p=None, mode=RisMode.ACTIVE):
    k = len(phases)
    return RisState(phases, np.ones(k) if amps is None else amps, np.ones(k) if p is None else p, mode)


def test_reflection_examples():
    np.testing.assert_array_equal(reflection_matrix(RisState.identity(4)), np.ones(4))
    r = reflection_matrix(state([np.pi / 2], [0.5], [4.0]))
    assert r[0] == pytest.approx(2j)
    with pytest.raises(ValueError):
        state([0.0], p=[2.0], mode=RisMode.PASSIVE)


@pytest.mark.parametrize("kw", [
    dict(phases=[np.pi], amps=[1.0], p=[1.0]),
    dict(phases=[0.0], amps=[0.0], p=[1.0]),
    dict(phases=[0.0], amps=[1.5], p=[1.0]),
    dict(phases=[0.0], amps=[1.0], p=[0.5]),
    dict(phases=[0.0], amps=[1.0], p=[11.0]),
    dict(phases=[0.0, 0.0], amps=[1.0], p=[1.0]),
])
def test_state_validation(kw):
    with pytest.raises(ValueError):
        RisState(kw["phases"], kw["amps"], kw["p"])


def test_cascade_examples():
    one = CascadeInput([1], [1])
    assert cascaded_gain(one, RisState.identity(1)) == 1 + 0j
    c = CascadeInput([1, 1j], [1, 1])
    s = state([0.0, -np.pi / 2])
    assert cascaded_gain(c, s) == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(ValueError):
        CascadeInput([1, 1], [1])


@given(st.integers(1, 8), st.integers(0, 2 ** 31))
def test_cascade_linear_in_amplification(k, seed):
    rng = np.random.default_rng(seed)
    c = CascadeInput(rng.normal(size=k) + 1j * rng.normal(size=k), rng.normal(size=k) + 1j * rng.normal(size=k))
    ph = wrap_phase(rng.uniform(-4, 4, k))
    p = rng.uniform(1, 5, k)
    a = cascaded_gain(c, state(ph, p=p))
    b = cascaded_gain(c, state(ph, p=2 * p))
    assert b == pytest.approx(2 * a, rel=1e-12, abs=1e-14)


def test_effective_channel():
    c = CascadeInput([1], [1])
    assert effective_channel(0, c, RisState.identity(1)) == 1
    empty = CascadeInput([], [])
    assert effective_channel(0.3 + 0.1j, empty, RisState.identity(0)) == 0.3 + 0.1j
    c2 = CascadeInput([2], [1j])
    s = RisState.identity(1)
    both = effective_channel(0.5, c, s) + cascaded_gain(c2, s)
    assert both == pytest.approx(0.5 + cascaded_gain(c, s) + cascaded_gain(c2, s))


def test_dynamic_noise_examples():
    n = DynamicNoiseParams(0.1)
    assert dynamic_noise_power([1.0], state([0.0], p=[2.0]), n) == pytest.approx(0.4)
    assert dynamic_noise_power([1.0], state([0.0], mode=RisMode.PASSIVE), n) == 0.0
    with pytest.raises(ValueError):
        DynamicNoiseParams(-1.0)


@settings(max_examples=50)
@given(st.integers(1, 16), st.integers(0, 2 ** 31))
def test_dynamic_noise_quadratic_and_phase_free(k, seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=k) + 1j * rng.normal(size=k)
    p = rng.uniform(1, 5, k)
    n = DynamicNoiseParams(rng.uniform(0.01, 2))
    base = dynamic_noise_power(h, state(np.zeros(k), p=p), n)
    assert dynamic_noise_power(h, state(np.zeros(k), p=2 * p), n) == pytest.approx(4 * base, rel=1e-12)
    ph = wrap_phase(rng.uniform(-4, 4, k))
    assert dynamic_noise_power(h, state(ph, p=p), n) == pytest.approx(base, rel=1e-12)


def test_phase_align_examples():
    np.testing.assert_allclose(phase_align(CascadeInput([1], [1]), 1.0), [0.0])
    th = phase_align(CascadeInput([1], [1j]), 1.0)
    np.testing.assert_allclose(th, [-np.pi / 2])
    s = state(th, p=[3.0])
    assert abs(effective_channel(1.0, CascadeInput([1], [1j]), s)) == pytest.approx(4.0)
    th0 = phase_align(CascadeInput([0, 1], [1, 1]), 1j)
    assert th0[0] == 0.0


def test_phase_align_dominance():
    rng = np.random.default_rng(0)
    k = 4
    c = CascadeInput(rng.normal(size=k) + 1j * rng.normal(size=k), rng.normal(size=k) + 1j * rng.normal(size=k))
    d = complex(rng.normal(), rng.normal())
    best = abs(effective_channel(d, c, state(phase_align(c, d))))
    draws = rng.uniform(-np.pi, np.pi, (10 ** 4, k))
    vals = np.abs(d + (c.h_out * c.h_in * np.exp(1j * draws)).sum(axis=1))
    assert best >= vals.max() - 1e-12


@given(st.floats(-100, 100))
def test_wrap_phase_range(x):
    w = float(wrap_phase(x))
    assert -np.pi <= w < np.pi
    assert np.exp(1j * w) == pytest.approx(np.exp(1j * x), abs=1e-9)


def test_passive_unit_modulus():
    s = state(wrap_phase(np.linspace(-3, 3, 7)), amps=np.linspace(0.1, 1, 7), mode=RisMode.PASSIVE)
    assert np.all(np.abs(reflection_matrix(s)) <= 1 + 1e-15)
