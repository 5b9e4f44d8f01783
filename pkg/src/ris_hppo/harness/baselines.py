"""Reference baselines: orthogonal access, exhaustive search over quantized
controls, and non-learning policies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import ChannelConfig
from ..env import N_MOVES, HybridAction
from ..network import (EdgeRateVariant, LinkGeometry, RadioConfig, RateReport, Topology,
                       effective_gains, evaluate_rates, oma_rates, rates_from_sinr,
                       ris_noise_powers, sum_rate, user_sinrs)
from ..ris import RisMode, RisState


def rate_oma(top: Topology, gains, ris_noise, radio: RadioConfig) -> RateReport:
    rates = oma_rates(top, gains, ris_noise, radio)
    return sum_rate(top, rates, np.zeros(top.n_users))


# ---------------------------------------------------------------------------
# exhaustive oracle


def phase_levels(q: int) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(q) / q


def lambda_levels(q: int) -> np.ndarray:
    """Interior points of (0.5, 1), equally spaced."""
    return 0.5 + 0.5 * (np.arange(q) + 1) / (q + 1)


def amplification_levels(q: int, s_max: float, active: bool) -> np.ndarray:
    if not active:
        return np.ones(1)
    return np.linspace(1.0, s_max, q) if q > 1 else np.ones(1)


def _digits(idx: np.ndarray, base: int, width: int) -> np.ndarray:
    """Base-``base`` digits of ``idx``, most significant first."""
    pw = base ** np.arange(width - 1, -1, -1)
    return (idx[:, None] // pw[None, :]) % base


@dataclass
class OracleResult:
    best_rate: float
    phases: np.ndarray
    amplification: np.ndarray
    lambdas: np.ndarray
    uav_xy: np.ndarray
    report: RateReport
    n_configs: int
    states: list
    channels: object


def search_space_size(k_total: int, n_bs: int, q_theta: int, q_lambda: int, q_p: int,
                      active: bool, n_uav: int = 1, access: str = "noma") -> int:
    n_amp = q_p if active else 1
    n_lam = q_lambda if access == "noma" else 1
    return int(q_theta ** k_total * n_amp ** k_total * n_lam ** n_bs * max(n_uav, 1))


def oracle_search(top: Topology, radio: RadioConfig, channel: ChannelConfig, ris_sizes,
                  mode=RisMode.ACTIVE, seed: int = 0, q_theta: int = 8, q_lambda: int = 5,
                  q_p: int = 4, s_max: float = 10.0, amplitude: float = 1.0,
                  sigma_v2: float | None = None, access: str = "noma",
                  variant=EdgeRateVariant.CORRECTED, uav_grid=(), max_space: float = 1e7,
                  block: int = 4096) -> OracleResult:
    """Exhaustive maximization of the sum rate over quantized controls.

    The fading realization is drawn from ``seed`` and shared by every UAV
    grid point (common random numbers).  Ties keep the first configuration
    in enumeration order: UAV point, then phases, then amplification, then
    power split, each in lexicographic digit order.
    """
    mode = RisMode(mode)
    active = mode is RisMode.ACTIVE
    sizes = tuple(int(k) for k in ris_sizes)
    k_tot = sum(sizes)
    grid = [np.asarray(p, dtype=float) for p in uav_grid] or [top.uav_position[:2].copy()]
    total = search_space_size(k_tot, top.n_bs, q_theta, q_lambda, q_p, active, len(grid), access)
    if total > max_space:
        raise ValueError(f"oracle search space has {total:.3g} configurations "
                         f"(limit {max_space:.3g}); reduce quantization or element counts")
    sigma_v2 = radio.sigma2 if sigma_v2 is None else sigma_v2
    ph_lv = phase_levels(q_theta)
    amp_lv = amplification_levels(q_p, s_max, active)
    lam_grid = (lambda_levels(q_lambda)[_digits(np.arange(q_lambda ** top.n_bs), q_lambda, top.n_bs)]
                if access == "noma" else np.full((1, top.n_bs), 0.75))
    n_ph = q_theta ** k_tot
    n_amp = len(amp_lv) ** k_tot
    n_pa = n_ph * n_amp
    cuts = np.cumsum((0,) + sizes)

    best = (-np.inf, None)
    for gi, xy in enumerate(grid):
        if top.in_no_fly_zone(xy) or not top.in_flight_area(xy):
            continue
        geom = LinkGeometry(top.with_uav(xy), sizes, channel)
        ch = geom.sample(np.random.default_rng(seed))
        for lo in range(0, n_pa, block):
            idx = np.arange(lo, min(lo + block, n_pa))
            ph = ph_lv[_digits(idx // n_amp, q_theta, k_tot)]
            amp = amp_lv[_digits(idx % n_amp, len(amp_lv), k_tot)] * amplitude
            refl = amp * np.exp(1j * ph)
            parts = [refl[:, cuts[r]:cuts[r + 1]] for r in range(len(sizes))]
            gains = effective_gains(ch, parts)
            noise = ris_noise_powers(ch, [np.abs(p) ** 2 for p in parts], sigma_v2,
                                     [active] * len(sizes))
            if access == "noma":
                g_s, g_p = user_sinrs(geom.top, gains, noise, radio)
                rates, _ = rates_from_sinr(geom.top, g_s[:, None, :], g_p[:, None, :],
                                           lam_grid[None, :, :], variant)
            else:
                rates = oma_rates(geom.top, gains, noise, radio)[:, None, :]
            tot = rates.sum(axis=-1)
            j = int(np.argmax(tot))
            val = float(tot.flat[j])
            if val > best[0]:
                i_pa, i_lam = divmod(j, tot.shape[1])
                best = (val, (gi, xy, ph[i_pa], amp[i_pa] / amplitude, lam_grid[i_lam], ch, geom))

    if best[1] is None:
        raise ValueError("no feasible UAV grid point")
    _, (gi, xy, ph, amp, lam, ch, geom) = best
    states = [RisState(ph[cuts[r]:cuts[r + 1]], np.full(sizes[r], amplitude),
                       amp[cuts[r]:cuts[r + 1]], mode, s_max) for r in range(len(sizes))]
    if access == "noma":
        report = evaluate_rates(geom.top, ch, states, lam, radio, sigma_v2, variant)
    else:
        refl = [s.amplification * s.amplitudes * np.exp(1j * s.phases) for s in states]
        g = effective_gains(ch, refl)
        nz = ris_noise_powers(ch, [np.abs(r) ** 2 for r in refl], sigma_v2, [active] * len(sizes))
        report = rate_oma(geom.top, g, nz, radio)
    return OracleResult(report.r_total, ph, amp, lam, np.asarray(xy, dtype=float), report, total,
                        states, ch)


# ---------------------------------------------------------------------------
# non-learning policies


class RandomPolicy:
    """Uniform move and uniform controls inside their boxes."""

    def __init__(self, layout, seed: int = 0):
        self.layout = layout
        self.rng = np.random.default_rng(seed)

    def __call__(self, obs) -> HybridAction:
        lay, rng = self.layout, self.rng
        return HybridAction(int(rng.integers(N_MOVES)),
                            rng.uniform(-np.pi, np.pi, lay.n_phase),
                            rng.uniform(0.5, 1.0, lay.n_lambda),
                            rng.uniform(1.0, lay.s_max, lay.n_amp))


class FixedPolicy:
    """Hover with zero phases, unit amplification and a constant power split."""

    def __init__(self, layout, lam: float = 0.75):
        self.action = HybridAction(4, np.zeros(layout.n_phase), np.full(layout.n_lambda, lam),
                                   np.ones(layout.n_amp))

    def __call__(self, obs) -> HybridAction:
        return self.action
