"""Slotted MDP over the RIS-assisted CoMP-NOMA downlink.

The agent moves the UAV-mounted RIS on a grid, sets per-element phases and
amplification on both surfaces, and picks the NOMA power split of every BS.
Infeasible moves (leaving the flight area or entering a no-fly disk) are
rejected and penalized, so emitted states always satisfy the geometric
constraints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig
from .network import (EdgeRateVariant, LinkGeometry, RadioConfig, RateReport, Topology,
                      effective_gains, evaluate_rates, jain_fairness, oma_rates, ris_noise_powers,
                      sum_rate)
from .ris import RisMode, RisState

MOVES = np.array([(-1, 0), (1, 0), (0, -1), (0, 1), (0, 0)], dtype=float)
MOVE_NAMES = ("left", "right", "down", "up", "hover")
N_MOVES = len(MOVES)

_EDGE = 1.0 - 1e-12


@dataclass(frozen=True)
class RewardParams:
    xi_dist: float = 1.0
    xi_oob: float = 10.0
    c_const: float = 10.0
    proximity_threshold: float = 20.0
    qos_penalty: float = 0.0
    fairness_weight: float = 0.0

    def __post_init__(self):
        if min(self.xi_dist, self.xi_oob, self.c_const, self.proximity_threshold) <= 0:
            raise ValueError("reward constants must be positive")
        if self.qos_penalty < 0 or self.fairness_weight < 0:
            raise ValueError("penalty and bonus weights must be nonnegative")


@dataclass(frozen=True)
class EnvConfig:
    ris_mode: RisMode = RisMode.ACTIVE
    access: str = "noma"
    k_ground: int = 16
    k_uav: int = 16
    s_max: float = 10.0
    amplitude: float = 1.0
    shared_ris_action: bool = False
    t_s: int = 100
    step_size: float = 2.0
    freeze_lambda_amp: bool = False
    edge_variant: EdgeRateVariant = EdgeRateVariant.CORRECTED
    r_min: float = 1.0
    sigma_v2: float | None = None
    lambda_init: float = 0.75
    rate_scale: float = 10.0
    reward: RewardParams = field(default_factory=RewardParams)

    def __post_init__(self):
        object.__setattr__(self, "ris_mode", RisMode(self.ris_mode))
        object.__setattr__(self, "edge_variant", EdgeRateVariant(self.edge_variant))
        if self.access not in ("noma", "oma"):
            raise ValueError(f"unknown access scheme {self.access!r}")
        if self.k_ground < 0 or self.k_uav < 0:
            raise ValueError("RIS element counts must be nonnegative")
        if self.shared_ris_action and self.k_ground != self.k_uav:
            raise ValueError("a shared RIS action needs equal element counts")
        if self.s_max < 1:
            raise ValueError("maximum amplification must be at least 1")
        if not 0 < self.amplitude <= 1:
            raise ValueError("amplitude coefficient must lie in (0, 1]")
        if self.t_s < 1 or self.step_size <= 0:
            raise ValueError("episode length and step size must be positive")
        if not 0.5 < self.lambda_init < 1:
            raise ValueError("initial power split must lie in (0.5, 1)")

    @property
    def ris_sizes(self) -> tuple[int, int]:
        return (self.k_ground, self.k_uav)

    @property
    def active(self) -> bool:
        return self.ris_mode is RisMode.ACTIVE

    @property
    def n_phase(self) -> int:
        return self.k_ground if self.shared_ris_action else self.k_ground + self.k_uav

    @property
    def n_amp(self) -> int:
        # kept in passive mode (and ignored) so one policy shape serves both modes
        return self.n_phase


# ---------------------------------------------------------------------------
# action squashing


def squash_phase(u):
    return np.pi * np.clip(np.tanh(u), -_EDGE, _EDGE)


def squash_lambda(u):
    return 0.75 + 0.25 * np.clip(np.tanh(u), -_EDGE, _EDGE)


def squash_amplification(u, s_max: float):
    return 0.5 * (1 + s_max) + 0.5 * (s_max - 1) * np.clip(np.tanh(u), -_EDGE, _EDGE)


def log_tanh_jacobian(u):
    """log(1 - tanh(u)**2), computed without cancellation."""
    u = np.asarray(u, dtype=float)
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


@dataclass(frozen=True, eq=False)
class HybridAction:
    move: int
    phases: np.ndarray
    lambdas: np.ndarray
    amplification: np.ndarray


@dataclass(frozen=True)
class ActionLayout:
    """Slices of the flat continuous action vector: phases, lambdas, amplification."""

    n_phase: int
    n_lambda: int
    n_amp: int
    s_max: float

    @property
    def dim(self) -> int:
        return self.n_phase + self.n_lambda + self.n_amp

    def split(self, raw):
        raw = np.asarray(raw, dtype=float)
        a = self.n_phase
        b = a + self.n_lambda
        return raw[..., :a], raw[..., a:b], raw[..., b:]

    def scales(self) -> np.ndarray:
        """Half-widths of the target intervals; the squashing maps are
        ``center + scale * tanh(u)``."""
        return np.concatenate([np.full(self.n_phase, np.pi), np.full(self.n_lambda, 0.25),
                               np.full(self.n_amp, 0.5 * (self.s_max - 1))])

    def log_abs_det_jacobian(self, raw) -> np.ndarray:
        """Sum over dimensions of ``log|d squash / d raw|`` (last axis)."""
        raw = np.asarray(raw, dtype=float)
        scales = self.scales()
        if self.n_amp and self.s_max == 1:
            scales = np.where(scales == 0, 1.0, scales)
        return np.sum(np.log(scales) + log_tanh_jacobian(raw), axis=-1)


def squash_action(raw, layout: ActionLayout, move: int = 4) -> HybridAction:
    ph, lam, amp = layout.split(raw)
    return HybridAction(int(move), squash_phase(ph), squash_lambda(lam),
                        squash_amplification(amp, layout.s_max))


# ---------------------------------------------------------------------------
# reward


@dataclass(frozen=True)
class StepFlags:
    oob: bool = False
    no_fly_violation: bool = False
    qos_violation: bool = False


def reward(r_sum: float, d_uav_users: float, flags: StepFlags, rp: RewardParams) -> float:
    d = max(float(d_uav_users), 0.1)
    r = float(r_sum)
    if d < rp.proximity_threshold:
        r += rp.xi_dist * rp.c_const / d
    if flags.oob or flags.no_fly_violation:
        r -= rp.xi_oob
    if flags.qos_violation:
        r -= rp.qos_penalty
    return r


# ---------------------------------------------------------------------------
# environment


@dataclass(frozen=True, eq=False)
class EnvState:
    uav_xy: np.ndarray
    lambdas: np.ndarray
    amplification_flat: np.ndarray
    last_rates: np.ndarray
    slot_index: int

    def vector(self) -> np.ndarray:
        return np.concatenate([self.uav_xy, self.lambdas, self.amplification_flat,
                               self.last_rates])

    @property
    def dim(self) -> int:
        return 2 + len(self.lambdas) + len(self.amplification_flat) + 2


@dataclass(frozen=True, eq=False)
class StepOutcome:
    next_state: EnvState
    reward: float
    rates: RateReport
    flags: StepFlags
    done: bool


class RisEnv:
    """Single-threaded environment instance; create one per worker."""

    def __init__(self, topology: Topology, radio: RadioConfig,
                 channel: ChannelConfig = ChannelConfig(), cfg: EnvConfig = EnvConfig(),
                 uav_start=(-5.0, 0.0)):
        self.topology = topology
        self.radio = radio
        self.channel = channel
        self.cfg = cfg
        self.uav_start = np.asarray(uav_start, dtype=float)[:2]
        if not topology.in_flight_area(self.uav_start) or topology.in_no_fly_zone(self.uav_start):
            raise ValueError("UAV start position violates the flight constraints")
        self.sigma_v2 = radio.sigma2 if cfg.sigma_v2 is None else cfg.sigma_v2
        self.layout = ActionLayout(cfg.n_phase, topology.n_bs, cfg.n_amp, cfg.s_max)
        self.rng = np.random.default_rng(0)
        self._geom = LinkGeometry(topology.with_uav(self.uav_start), cfg.ris_sizes, channel)
        self._geom_start = self._geom
        self.state: EnvState | None = None
        self.ris_states: list[RisState] = []
        self.last_report: RateReport | None = None
        self.last_channels = None
        self._frozen = None

    @property
    def state_dim(self) -> int:
        return 2 + self.topology.n_bs + self.cfg.k_ground + self.cfg.k_uav + 2

    # -- construction helpers

    def _ris_states(self, phases, amplification) -> list[RisState]:
        cfg = self.cfg
        kg, ku = cfg.ris_sizes
        if cfg.shared_ris_action:
            phases = np.concatenate([phases, phases])
            if cfg.active:
                amplification = np.concatenate([amplification, amplification])
        if not cfg.active:
            amplification = np.ones(kg + ku)
        out = []
        for lo, hi in ((0, kg), (kg, kg + ku)):
            out.append(RisState(phases[lo:hi], np.full(hi - lo, cfg.amplitude),
                                amplification[lo:hi], cfg.ris_mode, cfg.s_max))
        return out

    def _rates(self, geom: LinkGeometry, states) -> RateReport:
        top = geom.top
        ch = geom.sample(self.rng)
        self.last_channels = ch
        if self.cfg.access == "noma":
            return evaluate_rates(top, ch, states, self._lambdas, self.radio, self.sigma_v2,
                                  self.cfg.edge_variant)
        refl = [s.amplification * s.amplitudes * np.exp(1j * s.phases) for s in states]
        gains = effective_gains(ch, refl)
        noise = ris_noise_powers(ch, [(s.amplification * s.amplitudes) ** 2 for s in states],
                                 self.sigma_v2, [s.active for s in states])
        rates = oma_rates(top, gains, noise, self.radio)
        return sum_rate(top, rates, np.zeros(top.n_users))

    def _make_state(self, xy, report: RateReport, slot: int) -> EnvState:
        amp = np.concatenate([s.amplification for s in self.ris_states])
        return EnvState(np.array(xy, dtype=float), self._lambdas.copy(), amp,
                        np.array([report.center_rate, report.edge_rate]), slot)

    def mean_user_distance(self, xy) -> float:
        d = np.linalg.norm(self.topology.user_positions[:, :2] - np.asarray(xy)[None, :], axis=1)
        return float(d.mean())

    # -- lifecycle

    def reset(self, seed: int | None = None) -> EnvState:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        cfg = self.cfg
        self._lambdas = np.full(self.topology.n_bs, cfg.lambda_init)
        self.ris_states = self._ris_states(np.zeros(cfg.n_phase), np.ones(cfg.n_phase))
        self._frozen = None
        self._geom = self._geom_start
        report = self._rates(self._geom, self.ris_states)
        self.last_report = report
        self.state = self._make_state(self.uav_start, report, 0)
        return self.state

    def step(self, action: HybridAction) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        cfg, top = self.cfg, self.topology
        xy = self.state.uav_xy
        dest = xy + MOVES[action.move] * cfg.step_size
        oob = not top.in_flight_area(dest)
        no_fly = (not oob) and top.in_no_fly_zone(dest)
        moved = not (oob or no_fly) and action.move != 4
        if moved:
            xy = dest

        lambdas, amp = np.asarray(action.lambdas, float), np.asarray(action.amplification, float)
        if cfg.freeze_lambda_amp:
            if self._frozen is None:
                self._frozen = (lambdas.copy(), amp.copy())
            lambdas, amp = self._frozen
        self._lambdas = lambdas.copy()
        self.ris_states = self._ris_states(np.asarray(action.phases, float), amp)

        if moved:
            self._geom = self._geom.with_uav(xy)
        report = self._rates(self._geom, self.ris_states)
        self.last_report = report
        qos = bool(np.any(report.rates < cfg.r_min))
        flags = StepFlags(oob, no_fly, qos)
        r = reward(report.r_total, self.mean_user_distance(xy), flags, cfg.reward)
        if cfg.reward.fairness_weight > 0 and report.rates.sum() > 0:
            r += cfg.reward.fairness_weight * jain_fairness(report.rates)
        slot = self.state.slot_index + 1
        self.state = self._make_state(xy, report, slot)
        return StepOutcome(self.state, r, report, flags, slot == cfg.t_s)

    # -- policy interface

    def observe(self, state: EnvState | None = None) -> np.ndarray:
        """Normalized state vector fed to the policy (same layout as ``vector``)."""
        s = self.state if state is None else state
        x0, x1, y0, y1 = self.topology.flight_area
        pos = np.array([(s.uav_xy[0] - 0.5 * (x0 + x1)) / (0.5 * (x1 - x0)),
                        (s.uav_xy[1] - 0.5 * (y0 + y1)) / (0.5 * (y1 - y0))])
        lam = (s.lambdas - 0.75) / 0.25
        span = max(self.cfg.s_max - 1.0, 1e-9)
        amp = 2.0 * (s.amplification_flat - 1.0) / span - 1.0
        rates = s.last_rates / self.cfg.rate_scale
        return np.concatenate([pos, lam, amp, rates])

    def trace_record(self, outcome: StepOutcome, action: HybridAction) -> dict:
        s = outcome.next_state
        return {
            "slot": s.slot_index,
            "uav_x": float(s.uav_xy[0]),
            "uav_y": float(s.uav_xy[1]),
            "move": MOVE_NAMES[action.move],
            "lambdas": [float(v) for v in s.lambdas],
            "mean_amplification": float(np.mean(s.amplification_flat)) if len(s.amplification_flat) else 1.0,
            "reward": float(outcome.reward),
            "r_total": outcome.rates.r_total,
            "r_center": outcome.rates.center_rate,
            "r_edge": outcome.rates.edge_rate,
            "oob": outcome.flags.oob,
            "no_fly": outcome.flags.no_fly_violation,
            "qos": outcome.flags.qos_violation,
        }
