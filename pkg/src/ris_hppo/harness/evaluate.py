"""Policy evaluation, metric aggregation and parameter sweeps."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..env import squash_action
from ..hppo.checkpoint import config_hash, load_checkpoint
from ..hppo.ppo import Agent, sample_hybrid
from ..hppo.train import train
from ..network import (dbm_to_watt, energy_efficiency, incoming_ris_powers, jain_fairness,
                       total_power)
from ..scenario import build_topology
from .baselines import FixedPolicy, RandomPolicy, oracle_search
from .config import ExperimentConfig, env_factory, mode_parts, policy_signature

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("sweep_parameter", "sweep_value", "mode", "policy", "fairness", "n",
                  "mean_sum_rate", "ci_sum_rate", "outage", "energy_efficiency",
                  "ci_energy_efficiency", "jain", "mean_center_rate", "mean_edge_rate",
                  "ci_defined")


def mean_ci(values) -> tuple[float, float]:
    """Mean and 95% normal half-width; the half-width is NaN below two samples.

    Exactly-rounded sums make both numbers independent of sample order.
    """
    v = [float(x) for x in values]
    n = len(v)
    if n == 0:
        return float("nan"), float("nan")
    m = math.fsum(v) / n
    if n < 2:
        return m, float("nan")
    var = math.fsum((x - m) ** 2 for x in v) / (n - 1)
    return m, 1.96 * math.sqrt(var) / math.sqrt(n)


@dataclass
class SlotMetrics:
    """Per-realization samples collected during evaluation."""

    sum_rate: list = field(default_factory=list)
    worst_rate: list = field(default_factory=list)
    center_rate: list = field(default_factory=list)
    edge_rate: list = field(default_factory=list)
    ee: list = field(default_factory=list)
    jain: list = field(default_factory=list)

    def add(self, report, p_total: float, bandwidth: float):
        self.sum_rate.append(report.r_total)
        self.worst_rate.append(report.worst_rate)
        self.center_rate.append(report.center_rate)
        self.edge_rate.append(report.edge_rate)
        self.ee.append(energy_efficiency(report.r_total, bandwidth, p_total))
        self.jain.append(jain_fairness(report.rates) if report.rates.sum() > 0 else 0.0)


@dataclass(frozen=True)
class MetricRow:
    sweep_parameter: str
    sweep_value: float
    mode: str
    policy: str
    fairness: str
    n: int
    mean_sum_rate: float
    ci_sum_rate: float
    outage: float
    energy_efficiency: float
    ci_energy_efficiency: float
    jain: float
    mean_center_rate: float
    mean_edge_rate: float
    ci_defined: bool

    def as_list(self) -> list:
        return [getattr(self, c) for c in METRIC_COLUMNS]


def make_row(m: SlotMetrics, r_min: float, param: str, value: float, mode: str, policy: str,
             fairness: str) -> MetricRow:
    rate, ci = mean_ci(m.sum_rate)
    ee, ci_ee = mean_ci(m.ee)
    outage = math.fsum(1.0 for w in m.worst_rate if w < r_min) / len(m.worst_rate)
    return MetricRow(param, float(value), mode, policy, fairness, len(m.sum_rate), rate, ci,
                     outage, ee, ci_ee, mean_ci(m.jain)[0], mean_ci(m.center_rate)[0],
                     mean_ci(m.edge_rate)[0], len(m.sum_rate) >= 2)


# ---------------------------------------------------------------------------
# rollouts with a fixed policy


class AgentPolicy:
    """Wraps trained parameters; greedy takes the argmax move and the mean controls."""

    def __init__(self, agent: Agent, layout, greedy: bool = True, seed: int = 0):
        self.agent, self.layout, self.greedy = agent, layout, greedy
        self.rng = np.random.default_rng(seed)

    def __call__(self, obs):
        s = sample_hybrid(self.agent.params, obs, self.rng, self.layout, greedy=self.greedy)
        return squash_action(s.raw, self.layout, s.move)


def episode_seeds(seed: int, episodes: int) -> list[int]:
    rng = np.random.default_rng([int(seed), 0x5EED])
    return [int(s) for s in rng.integers(2 ** 63, size=episodes)]


def rollout_metrics(make_env, policy_fn, episodes: int, seed: int, cfg: ExperimentConfig,
                    traces: list | None = None) -> SlotMetrics:
    """Run ``episodes`` full episodes; every slot counts as one realization."""
    m = SlotMetrics()
    env = make_env()
    for ep, s in enumerate(episode_seeds(seed, episodes)):
        env.reset(seed=s)
        done = False
        while not done:
            action = policy_fn(env.observe())
            out = env.step(action)
            done = out.done
            radio = env.radio
            pin = incoming_ris_powers(env.last_channels, radio, env.sigma_v2, env.ris_states)
            p_tot = total_power(cfg.power, env.ris_states, pin, env.topology.n_bs,
                                radio.bs_powers(env.topology.n_bs))
            m.add(out.rates, p_tot, radio.bandwidth)
            if traces is not None:
                rec = env.trace_record(out, action)
                rec["episode"] = ep
                traces.append(rec)
    return m


def evaluate_policy(checkpoint, cfg: ExperimentConfig, episodes: int | None = None,
                    seed: int | None = None, mode: str | None = None, p_t_dbm: float | None = None,
                    k: int | None = None, traces: list | None = None) -> MetricRow:
    """Greedy evaluation of a checkpoint (path or ``(agent, header)`` pair).

    Refuses checkpoints whose recorded policy signature differs from the
    one implied by ``cfg``.
    """
    agent, header = load_checkpoint(checkpoint) if not isinstance(checkpoint, tuple) else checkpoint
    want = config_hash(policy_signature(cfg, k))
    if header.get("config_hash") != want:
        raise ValueError("checkpoint is incompatible with this configuration "
                         f"(policy signature {header.get('config_hash', '?')[:12]} != {want[:12]})")
    mode = mode or cfg.mode
    make = env_factory(cfg, mode, p_t_dbm, k)
    env = make()
    if agent.params["enc0.W"].shape[0] != env.state_dim:
        raise ValueError("checkpoint state dimension does not match the environment")
    pol = AgentPolicy(agent, env.layout, greedy=True)
    seed = cfg.seed if seed is None else seed
    m = rollout_metrics(make, pol, episodes or cfg.eval_episodes, seed, cfg, traces)
    param, value = _point_label(cfg, p_t_dbm, k)
    return make_row(m, cfg.env.r_min, param, value, mode, "trained", cfg.fairness)


def evaluate_baseline(name: str, cfg: ExperimentConfig, episodes: int | None = None,
                      seed: int | None = None, mode: str | None = None,
                      p_t_dbm: float | None = None, k: int | None = None,
                      traces: list | None = None) -> MetricRow:
    mode = mode or cfg.mode
    make = env_factory(cfg, mode, p_t_dbm, k)
    layout = make().layout
    seed = cfg.seed if seed is None else seed
    if name == "random":
        pol = RandomPolicy(layout, seed)
    elif name == "fixed":
        pol = FixedPolicy(layout, cfg.env.lambda_init)
    else:
        raise ValueError(f"unknown baseline policy {name!r}")
    m = rollout_metrics(make, pol, episodes or cfg.eval_episodes, seed, cfg, traces)
    param, value = _point_label(cfg, p_t_dbm, k)
    return make_row(m, cfg.env.r_min, param, value, mode, name, cfg.fairness)


def _point_label(cfg, p_t_dbm, k):
    if k is not None:
        return "k", float(k)
    return "p_t", float(cfg.radio.p_t_dbm if p_t_dbm is None else p_t_dbm)


# ---------------------------------------------------------------------------
# training wrapper


def train_agent(cfg: ExperimentConfig, mode: str | None = None, p_t_dbm: float | None = None,
                k: int | None = None, seed: int | None = None, progress=None):
    """Train on one configuration point; returns ``(result, header)`` where
    ``header`` matches what a saved checkpoint would carry."""
    seed = cfg.seed if seed is None else seed
    result = train(env_factory(cfg, mode, p_t_dbm, k), cfg.train, seed, progress)
    header = {"seed": seed, "config_hash": config_hash(policy_signature(cfg, k))}
    return result, header


# ---------------------------------------------------------------------------
# sweeps


def oracle_point(cfg: ExperimentConfig, mode: str, p_t_dbm: float | None = None,
                 k: int | None = None, realizations: int | None = None) -> SlotMetrics:
    """Oracle-optimal metrics; realization ``i`` redraws user placement and fading from ``i``."""
    ris_mode, access = mode_parts(mode)
    radio = cfg.radio.radio(p_t_dbm)
    sizes = (cfg.ris.k_ground, cfg.ris.k_uav) if k is None else (int(k), int(k))
    sigma_v2 = None if cfg.ris.sigma_v2_dbm is None else float(dbm_to_watt(cfg.ris.sigma_v2_dbm))
    o = cfg.oracle
    m = SlotMetrics()
    for i in range(realizations or cfg.realizations):
        top = build_topology(cfg.scenario, placement_seed=cfg.scenario.placement_seed + i)
        res = oracle_search(top, radio, cfg.channel, sizes, ris_mode, seed=cfg.seed * 1_000_003 + i,
                            q_theta=o.q_theta, q_lambda=o.q_lambda, q_p=o.q_p, s_max=cfg.ris.s_max,
                            amplitude=cfg.ris.amplitude, sigma_v2=sigma_v2, access=access,
                            variant=cfg.env.edge_variant, uav_grid=o.uav_grid,
                            max_space=o.max_space)
        sv2 = radio.sigma2 if sigma_v2 is None else sigma_v2
        pin = incoming_ris_powers(res.channels, radio, sv2, res.states)
        p_tot = total_power(cfg.power, res.states, pin, top.n_bs, radio.bs_powers(top.n_bs))
        m.add(res.report, p_tot, radio.bandwidth)
    return m


def run_sweep(cfg: ExperimentConfig, policy: str = "oracle", modes=None, checkpoint=None,
              traces: list | None = None, curves: dict | None = None, agents: dict | None = None):
    """One row per (sweep value, mode).

    ``policy`` is ``oracle`` (exhaustive search, small scenarios only),
    ``random``, ``fixed``, or ``trained``.  ``trained`` trains a fresh agent
    per point with ``cfg.train`` unless ``checkpoint`` is given; learning
    curves are stored in ``curves`` keyed by ``(mode, value)`` and trained
    agents in ``agents``.
    """
    modes = tuple(modes or (cfg.mode,))
    param = cfg.sweep.parameter
    rows = []
    for value in cfg.sweep.values:
        kw = {"p_t_dbm": value} if param == "p_t" else {"k": int(value)}
        for mode in modes:
            if policy == "oracle":
                m = oracle_point(cfg, mode, **kw)
                rows.append(make_row(m, cfg.env.r_min, param, value, mode, "oracle", cfg.fairness))
            elif policy in ("random", "fixed"):
                rows.append(evaluate_baseline(policy, cfg, mode=mode, traces=traces, **kw))
            elif policy == "trained":
                if checkpoint is not None:
                    ck = checkpoint
                else:
                    res, header = train_agent(cfg, mode, **kw)
                    ck = (res.agent, header)
                    if curves is not None:
                        curves[(mode, value)] = res.curve
                    if agents is not None:
                        agents[(mode, value)] = ck
                rows.append(evaluate_policy(ck, cfg, mode=mode, traces=traces, **kw))
            else:
                raise ValueError(f"unknown sweep policy {policy!r}")
            log.info("sweep %s=%g %s: %.4f", param, value, mode, rows[-1].mean_sum_rate)
    return rows
