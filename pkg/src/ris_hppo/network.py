"""Topology, channel composition, NOMA/CoMP rates, power and energy metrics."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelConfig, los_fraction, rayleigh


class EdgeRateVariant(str, enum.Enum):
    CORRECTED = "corrected"
    LITERAL = "literal"


# ---------------------------------------------------------------------------
# unit conversions


def dbm_to_watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def noise_power_dbm(bandwidth: float) -> float:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return -174.0 + 10.0 * np.log10(bandwidth)


# ---------------------------------------------------------------------------
# configuration records


@dataclass(frozen=True)
class RadioConfig:
    p_t: float
    sigma2: float
    bandwidth: float = 10e6
    carrier: float = 2.4e9
    p_t_per_bs: tuple | None = None

    def __post_init__(self):
        if not (self.p_t > 0 and self.sigma2 > 0 and self.bandwidth > 0 and self.carrier > 0):
            raise ValueError("radio parameters must be positive")
        if self.p_t_per_bs is not None and any(p <= 0 for p in self.p_t_per_bs):
            raise ValueError("per-BS transmit powers must be positive")

    def bs_powers(self, n_bs: int) -> np.ndarray:
        if self.p_t_per_bs is None:
            return np.full(n_bs, self.p_t)
        if len(self.p_t_per_bs) != n_bs:
            raise ValueError("per-BS power vector does not match the BS count")
        return np.asarray(self.p_t_per_bs, dtype=float)


@dataclass(frozen=True)
class PowerModel:
    p_bs_static: float = 5.0
    eta_ris: float = 1.25
    p_circuit_per_elem: float = 0.01
    p_uav_hover: float = 100.0

    def __post_init__(self):
        if min(self.p_bs_static, self.eta_ris, self.p_circuit_per_elem, self.p_uav_hover) < 0:
            raise ValueError("power-model terms must be nonnegative")


@dataclass(frozen=True, eq=False)
class Topology:
    """Node positions and user roles.

    ``serving[u]`` is the BS whose NOMA pair contains user ``u``;
    ``partner[u]`` is the second CoMP BS of an edge user and -1 for
    center users.  RIS entries are ``[ground, uav]``.
    """

    bs_positions: np.ndarray
    user_positions: np.ndarray
    serving: np.ndarray
    partner: np.ndarray
    ris_positions: np.ndarray
    obstacle_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    d_min: float = 10.0
    flight_area: tuple = (-50.0, 50.0, -50.0, 50.0)

    def __post_init__(self):
        for name in ("bs_positions", "user_positions", "ris_positions", "obstacle_positions"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1, 3))
        object.__setattr__(self, "serving", np.asarray(self.serving, dtype=int))
        object.__setattr__(self, "partner", np.asarray(self.partner, dtype=int))
        m = self.n_bs
        if np.any(self.bs_positions[:, 2] <= 0) or np.any(self.ris_positions[:, 2] <= 0):
            raise ValueError("BS and RIS heights must be positive")
        if self.serving.shape != (self.n_users,) or self.partner.shape != (self.n_users,):
            raise ValueError("role arrays do not match the user count")
        if np.any((self.serving < 0) | (self.serving >= m)):
            raise ValueError("every user needs a valid serving BS")
        edge = self.partner >= 0
        if np.any(self.partner[edge] >= m) or np.any(self.partner[edge] == self.serving[edge]):
            raise ValueError("edge users need two distinct CoMP base stations")
        centers = np.flatnonzero(~edge)
        mates = np.array([next(iter(np.flatnonzero(edge & (self.serving == self.serving[c]))), -1)
                          for c in centers], dtype=int)
        object.__setattr__(self, "is_edge", edge)
        object.__setattr__(self, "noma_pairs", (centers, mates))

    @property
    def n_bs(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def uav_position(self) -> np.ndarray:
        return self.ris_positions[1]

    def with_uav(self, xy) -> "Topology":
        ris = self.ris_positions.copy()
        ris[1, :2] = xy
        # only the UAV moved; skip re-validation of the fixed layout
        out = object.__new__(Topology)
        out.__dict__.update(self.__dict__)
        object.__setattr__(out, "ris_positions", ris)
        return out

    def in_flight_area(self, xy) -> bool:
        x0, x1, y0, y1 = self.flight_area
        return bool(x0 <= xy[0] <= x1 and y0 <= xy[1] <= y1)

    def in_no_fly_zone(self, xy) -> bool:
        if len(self.obstacle_positions) == 0:
            return False
        d = np.linalg.norm(self.obstacle_positions[:, :2] - np.asarray(xy)[None, :], axis=1)
        return bool(np.any(d < self.d_min))


def circumcenter(points_xy) -> np.ndarray:
    """Point equidistant from three planar points (centroid for other counts)."""
    p = np.asarray(points_xy, dtype=float)[:, :2]
    if len(p) != 3:
        return p.mean(axis=0)
    (ax, ay), (bx, by), (cx, cy) = p
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-12:
        return p.mean(axis=0)
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return np.array([ux, uy])


def place_users(bs_positions, rng: np.random.Generator, cell_radius: float,
                edge_radius: float, flight_area, edge_spread: float = np.pi / 4
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drop one center and one edge user per BS.

    Center users fall uniformly in the cell disk.  Edge users fall in the ring
    ``[cell_radius, edge_radius]`` within ``edge_spread`` of the bearing
    towards the network center (the inter-cell region), resampled until their
    own BS is the nearest one, so their CoMP pair is the two nearest BSs.
    """
    bs = np.asarray(bs_positions, dtype=float)
    m = len(bs)
    hub = circumcenter(bs)
    x0, x1, y0, y1 = flight_area
    pos, serving, partner = [], [], []
    for i in range(m):
        r = cell_radius * np.sqrt(rng.uniform(0.05, 1.0))
        phi = rng.uniform(-np.pi, np.pi)
        pos.append([bs[i, 0] + r * np.cos(phi), bs[i, 1] + r * np.sin(phi), 0.0])
        serving.append(i)
        partner.append(-1)
    for i in range(m):
        for _ in range(10_000):
            r = np.sqrt(rng.uniform(cell_radius ** 2, edge_radius ** 2))
            bearing = np.arctan2(hub[1] - bs[i, 1], hub[0] - bs[i, 0])
            phi = bearing + rng.uniform(-edge_spread, edge_spread)
            xy = bs[i, :2] + r * np.array([np.cos(phi), np.sin(phi)])
            d = np.linalg.norm(bs[:, :2] - xy, axis=1)
            order = np.argsort(d, kind="stable")
            if order[0] == i and x0 <= xy[0] <= x1 and y0 <= xy[1] <= y1:
                break
        else:
            raise RuntimeError("could not place an edge user; check the cell geometry")
        pos.append([xy[0], xy[1], 0.0])
        serving.append(i)
        partner.append(int(order[1]))
    return np.array(pos), np.array(serving), np.array(partner)


# ---------------------------------------------------------------------------
# channel realizations


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-fading draw.

    ``direct`` is (M, U); ``h_in[r]`` is (M, K_r) and ``h_out[r]`` is (U, K_r).
    """

    direct: np.ndarray
    h_in: tuple
    h_out: tuple


def _dist(a, b) -> np.ndarray:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    if np.any(d <= 0):
        raise ValueError("degenerate geometry: coincident nodes")
    return d


def _steering_from(src: np.ndarray, ris: np.ndarray, k: int) -> np.ndarray:
    v = src - ris[None, :]
    sin_w = v[:, 0] / np.sqrt((v * v).sum(axis=1))
    return np.exp(1j * np.arange(k)[None, :] * np.pi * sin_w[:, None])


class LinkGeometry:
    """Deterministic part of every link for a fixed node layout.

    Each fading link is ``mean + sd * CN(0, 1)``: Rician links carry the
    scaled LoS steering vector in ``mean``; Rayleigh links have zero mean.
    Only the UAV terms change when the UAV moves.
    """

    def __init__(self, top: Topology, ris_sizes, cfg: ChannelConfig, _direct=None, _ris=None):
        self.top = top
        self.ris_sizes = tuple(int(k) for k in ris_sizes)
        self.cfg = cfg
        if _direct is None:
            d = _dist(top.bs_positions, top.user_positions)
            _direct = np.sqrt(cfg.rho0 / d ** cfg.alpha_direct)
        self.direct_sd = _direct
        if _ris is None:
            _ris = [self._ris_terms(r) for r in range(len(self.ris_sizes))]
        self.ris = _ris
        self.n_draws = self.direct_sd.size + sum(
            t[0].size + t[2].size for t in self.ris if t is not None)

    def _ris_terms(self, r: int):
        k = self.ris_sizes[r]
        if k == 0:
            return None
        top, cfg = self.top, self.cfg
        ris = top.ris_positions[r]
        w_los, w_nlos = los_fraction(cfg.kappa)
        s_in = np.sqrt(cfg.rho0 / _dist(top.bs_positions, ris[None, :])[:, 0] ** cfg.alpha_ris)
        in_mean = s_in[:, None] * w_los * _steering_from(top.bs_positions, ris, k)
        in_sd = (s_in * w_nlos)[:, None]
        s_out = np.sqrt(cfg.rho0 / _dist(top.user_positions, ris[None, :])[:, 0] ** cfg.alpha_ris)
        if cfg.ris_user_fading == "rician":
            out_mean = s_out[:, None] * w_los * _steering_from(top.user_positions, ris, k)
            out_sd = (s_out * w_nlos)[:, None]
        else:
            out_mean = np.zeros((top.n_users, k), complex)
            out_sd = s_out[:, None]
        return in_mean, in_sd, out_mean, out_sd

    def with_uav(self, xy) -> "LinkGeometry":
        top = self.top.with_uav(xy)
        ris = list(self.ris)
        g = LinkGeometry(top, self.ris_sizes, self.cfg, self.direct_sd, ris)
        if len(ris) > 1:
            ris[1] = g._ris_terms(1)
            g.n_draws = self.n_draws
        return g

    def sample(self, rng: np.random.Generator) -> ChannelRealization:
        z = rayleigh(rng, (self.n_draws,))
        m, u = self.direct_sd.shape
        direct = self.direct_sd * z[: m * u].reshape(m, u)
        i = m * u
        h_in, h_out = [], []
        for t, k in zip(self.ris, self.ris_sizes):
            if t is None:
                h_in.append(np.zeros((m, 0), complex))
                h_out.append(np.zeros((u, 0), complex))
                continue
            in_mean, in_sd, out_mean, out_sd = t
            h_in.append(in_mean + in_sd * z[i: i + m * k].reshape(m, k))
            i += m * k
            h_out.append(out_mean + out_sd * z[i: i + u * k].reshape(u, k))
            i += u * k
        return ChannelRealization(direct, tuple(h_in), tuple(h_out))


def sample_channels(top: Topology, ris_sizes, cfg: ChannelConfig,
                    rng: np.random.Generator) -> ChannelRealization:
    return LinkGeometry(top, ris_sizes, cfg).sample(rng)


def ris_reflections(states) -> list:
    return [s.amplification * s.amplitudes * np.exp(1j * s.phases) for s in states]


def effective_gains(ch: ChannelRealization, reflections) -> np.ndarray:
    """Composite BS->user gains (..., M, U).

    ``reflections[r]`` has shape (..., K_r); leading batch axes broadcast.
    """
    h = ch.direct
    for hi, ho, phi in zip(ch.h_in, ch.h_out, reflections):
        if hi.shape[1] == 0:
            continue
        phi = np.asarray(phi)
        # sum_k h_out[u,k] phi[k] h_in[m,k]
        h = h + np.swapaxes((ho * phi[..., None, :]) @ hi.T, -1, -2)
    return h


def ris_noise_powers(ch: ChannelRealization, gains_sq, sigma_v2: float, active) -> np.ndarray:
    """Amplified dynamic-noise power at each user, shape (..., U).

    ``gains_sq[r]`` is ``(p_k a_k)**2`` with shape (..., K_r); ``active[r]``
    disables the term for passive surfaces.
    """
    out = np.zeros(ch.direct.shape[1])
    for ho, g2, act in zip(ch.h_out, gains_sq, active):
        if not act or ho.shape[1] == 0:
            continue
        out = out + sigma_v2 * (np.asarray(g2) @ (ho.real ** 2 + ho.imag ** 2).T)
    return out


# ---------------------------------------------------------------------------
# SINR and rate primitives (scalar or array inputs)


def center_sinr(effective_gain_m, interferer_gains, ris_noise, cfg: RadioConfig):
    interference = sum(cfg.p_t * abs(g) ** 2 for g in interferer_gains)
    return cfg.p_t * abs(effective_gain_m) ** 2 / (interference + ris_noise + cfg.sigma2)


def rate_decode_edge_at_center(lambda_m, gamma_m):
    lam = np.asarray(lambda_m, dtype=float)
    g = np.asarray(gamma_m, dtype=float)
    return np.log2(1 + lam * g / ((1 - lam) * g + 1))


def rate_center(lambda_m, gamma_m):
    return np.log2(1 + (1 - np.asarray(lambda_m, dtype=float)) * np.asarray(gamma_m, dtype=float))


def rate_edge(lambda_m, gamma_m, lambda_j, gamma_j, variant=EdgeRateVariant.CORRECTED):
    lm, gm = np.asarray(lambda_m, dtype=float), np.asarray(gamma_m, dtype=float)
    lj, gj = np.asarray(lambda_j, dtype=float), np.asarray(gamma_j, dtype=float)
    num = lm * gm + lj * gj
    if EdgeRateVariant(variant) is EdgeRateVariant.CORRECTED:
        den = (1 - lm) * gm + (1 - lj) * gj + 1
    else:
        den = (1 - lm) * gj + (1 - lj) * gj + 1
    return np.log2(1 + num / den)


def sic_feasibility(r_c_to_e, r_e) -> bool:
    return bool(r_c_to_e >= r_e)


# ---------------------------------------------------------------------------
# rate reports


@dataclass(frozen=True, eq=False)
class RateReport:
    rates: np.ndarray
    is_edge: np.ndarray
    r_c_to_e: np.ndarray
    sic_ok: np.ndarray
    r_total: float

    @property
    def center_rate(self) -> float:
        return float(self.rates[~self.is_edge].sum())

    @property
    def edge_rate(self) -> float:
        return float(self.rates[self.is_edge].sum())

    @property
    def worst_rate(self) -> float:
        return float(self.rates.min())


def user_sinrs(top: Topology, gains, ris_noise, radio: RadioConfig):
    """Per-user SINR terms for composite gains of shape (..., M, U).

    Returns ``(gamma_serv, gamma_partner)`` each (..., U); ``gamma_partner``
    is zero for center users.  Center users see every other BS as
    interference; edge users see every BS outside their CoMP pair.
    """
    m, u = top.n_bs, top.n_users
    p = radio.bs_powers(m)
    rx = p[:, None] * np.abs(gains) ** 2  # (..., M, U)
    total = rx.sum(axis=-2)
    idx = np.arange(u)
    serv = rx[..., top.serving, idx]
    part_idx = np.where(top.is_edge, top.partner, top.serving)
    part = np.where(top.is_edge, rx[..., part_idx, idx], 0.0)
    denom = total - serv - part + ris_noise + radio.sigma2
    return serv / denom, part / denom


def rates_from_sinr(top: Topology, g_serv, g_part, lambdas,
                    variant=EdgeRateVariant.CORRECTED):
    """Vectorized rate chain.

    Returns ``(rates (..., U), r_c_to_e (..., U))`` where ``r_c_to_e`` is the
    SIC decoding rate for center users (zero for edge users).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    lam_s = lambdas[..., top.serving]
    lam_p = lambdas[..., np.where(top.is_edge, top.partner, top.serving)]
    edge = top.is_edge
    r_c = rate_center(lam_s, g_serv)
    r_e = rate_edge(lam_s, g_serv, lam_p, g_part, variant)
    rates = np.where(edge, r_e, r_c)
    r_ce = np.where(edge, 0.0, rate_decode_edge_at_center(lam_s, g_serv))
    return rates, r_ce


def sum_rate(top: Topology, rates, r_c_to_e) -> RateReport:
    """Assemble a report; SIC feasibility pairs each center user with the
    edge user sharing its serving BS, when one exists."""
    rates = np.asarray(rates, dtype=float)
    centers, mates = top.noma_pairs
    rce = np.asarray(r_c_to_e, dtype=float)[centers]
    paired = mates >= 0
    sic = np.ones(len(centers), dtype=bool)
    sic[paired] = rce[paired] >= rates[mates[paired]]
    return RateReport(rates, top.is_edge, rce, sic, float(rates.sum()))


def evaluate_rates(top: Topology, ch: ChannelRealization, states, lambdas,
                   radio: RadioConfig, sigma_v2: float,
                   variant=EdgeRateVariant.CORRECTED) -> RateReport:
    """Full rate chain for one slot with concrete RIS states."""
    gains = effective_gains(ch, ris_reflections(states))
    noise = ris_noise_powers(ch, [(s.amplification * s.amplitudes) ** 2 for s in states],
                             sigma_v2, [s.active for s in states])
    g_s, g_p = user_sinrs(top, gains, noise, radio)
    rates, rce = rates_from_sinr(top, g_s, g_p, lambdas, variant)
    return sum_rate(top, rates, rce)


def oma_rates(top: Topology, gains, ris_noise, radio: RadioConfig):
    """Orthogonal baseline: each BS time-shares equally between its users at
    full power; only the serving BS carries a user's signal."""
    p = radio.bs_powers(top.n_bs)
    rx = p[:, None] * np.abs(gains) ** 2
    idx = np.arange(top.n_users)
    serv = rx[..., top.serving, idx]
    gamma = serv / (rx.sum(axis=-2) - serv + ris_noise + radio.sigma2)
    return 0.5 * np.log2(1 + gamma)


# ---------------------------------------------------------------------------
# power, efficiency and aggregate metrics


def total_power(pm: PowerModel, ris_states, incoming_powers, n_bs: int, p_t) -> float:
    """Network power draw in watts.

    ``incoming_powers[i]`` holds the per-element incident power at RIS ``i``.
    The amplifier term applies to active surfaces only; circuit power applies
    to every element.  ``p_t`` is a scalar (equal BS powers) or a per-BS vector.
    """
    p_t = np.asarray(p_t, dtype=float)
    bs = n_bs * pm.p_bs_static + (p_t.sum() if p_t.ndim else n_bs * float(p_t))
    ris = 0.0
    for s, pin in zip(ris_states, incoming_powers):
        if s.active:
            ris += pm.eta_ris * float(np.sum((s.amplification * s.amplitudes) ** 2 * np.asarray(pin)))
        ris += s.k * pm.p_circuit_per_elem
    return float(bs + ris + pm.p_uav_hover)


def incoming_ris_powers(ch: ChannelRealization, radio: RadioConfig, sigma_v2: float, states):
    p = radio.bs_powers(ch.direct.shape[0])
    out = []
    for hi, s in zip(ch.h_in, states):
        pin = (p[:, None] * np.abs(hi) ** 2).sum(axis=0)
        out.append(pin + (sigma_v2 if s.active else 0.0))
    return out


def energy_efficiency(r_total: float, bandwidth: float, p_total: float) -> float:
    if p_total <= 0:
        raise ValueError("total power must be positive")
    return r_total * bandwidth / p_total


def outage_probability(reports, r_min: float) -> float:
    reports = list(reports)
    if not reports:
        raise ValueError("outage needs at least one realization")
    worst = np.array([r.worst_rate if isinstance(r, RateReport) else np.min(r) for r in reports])
    return float(np.mean(worst < r_min))


def jain_fairness(rates) -> float:
    r = np.asarray(rates, dtype=float)
    if r.size == 0 or np.any(r < 0):
        raise ValueError("Jain index needs a nonempty vector of nonnegative rates")
    sq = float(np.sum(r ** 2))
    if sq == 0:
        raise ValueError("Jain index undefined for all-zero rates")
    return float(r.sum() ** 2 / (r.size * sq))
