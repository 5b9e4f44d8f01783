"""Experiment configuration: schema, file loading, dotted overrides, and
builders that turn a config into concrete topology/radio/env objects.

Config files are YAML or JSON with the same nested layout as
``ExperimentConfig.to_dict()``; every key is optional.
"""
from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..channel import ChannelConfig
from ..env import EnvConfig, RewardParams, RisEnv
from ..hppo.ppo import TrainConfig
from ..network import EdgeRateVariant, PowerModel, RadioConfig, dbm_to_watt, noise_power_dbm
from ..ris import RisMode
from ..scenario import ScenarioConfig, build_topology, tiny_scenario

MODES = ("ARIS_NOMA", "PRIS_NOMA", "ARIS_OMA", "PRIS_OMA")


def mode_parts(mode: str) -> tuple[RisMode, str]:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    ris, access = mode.split("_")
    return (RisMode.ACTIVE if ris == "ARIS" else RisMode.PASSIVE), access.lower()


@dataclass(frozen=True)
class RadioSection:
    p_t_dbm: float = 20.0
    bandwidth: float = 10e6
    carrier: float = 2.4e9
    sigma2_dbm: float | None = None
    p_t_per_bs_dbm: tuple | None = None

    def radio(self, p_t_dbm: float | None = None) -> RadioConfig:
        p = self.p_t_dbm if p_t_dbm is None else p_t_dbm
        s = noise_power_dbm(self.bandwidth) if self.sigma2_dbm is None else self.sigma2_dbm
        per_bs = None
        if self.p_t_per_bs_dbm is not None:
            per_bs = tuple(float(dbm_to_watt(v)) for v in self.p_t_per_bs_dbm)
        return RadioConfig(float(dbm_to_watt(p)), float(dbm_to_watt(s)), self.bandwidth,
                           self.carrier, per_bs)


@dataclass(frozen=True)
class RisSection:
    k_ground: int = 16
    k_uav: int = 16
    s_max: float = 10.0
    amplitude: float = 1.0
    shared_action: bool = False
    sigma_v2_dbm: float | None = None


@dataclass(frozen=True)
class EnvSection:
    t_s: int = 100
    step_size: float = 2.0
    freeze_lambda_amp: bool = False
    edge_variant: str = "corrected"
    r_min: float = 1.0
    lambda_init: float = 0.75
    rate_scale: float = 10.0
    xi_dist: float = 1.0
    xi_oob: float = 10.0
    c_const: float = 10.0
    proximity_threshold: float = 20.0
    qos_penalty: float = 0.0


@dataclass(frozen=True)
class SweepSection:
    parameter: str = "p_t"
    values: tuple = (-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.parameter not in ("p_t", "k"):
            raise ValueError(f"sweep parameter must be 'p_t' or 'k', got {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep list must be nonempty")


@dataclass(frozen=True)
class OracleSection:
    q_theta: int = 8
    q_lambda: int = 5
    q_p: int = 4
    uav_grid: tuple = ()
    max_space: float = 1e7


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    radio: RadioSection = field(default_factory=RadioSection)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    ris: RisSection = field(default_factory=RisSection)
    env: EnvSection = field(default_factory=EnvSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepSection = field(default_factory=SweepSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    power: PowerModel = field(default_factory=PowerModel)
    mode: str = "ARIS_NOMA"
    fairness: str = "off"
    fairness_weight: float = 1.0
    realizations: int = 1000
    eval_episodes: int = 100
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        mode_parts(self.mode)
        if self.fairness not in ("off", "on"):
            raise ValueError("fairness must be 'off' or 'on'")
        if self.realizations < 1 or self.eval_episodes < 1:
            raise ValueError("realization and episode counts must be positive")
        EdgeRateVariant(self.env.edge_variant)

    def to_dict(self) -> dict:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _from_plain(cls, d or {})

    def with_overrides(self, overrides) -> "ExperimentConfig":
        d = self.to_dict()
        for item in overrides or ():
            key, sep, raw = item.partition("=")
            if not sep:
                raise ValueError(f"override {item!r} is not of the form key=value")
            set_dotted(d, key.strip(), yaml.safe_load(raw))
        return ExperimentConfig.from_dict(d)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (tuple, list)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_plain(cls, d):
    if not isinstance(d, dict):
        raise ValueError(f"expected a mapping for {cls.__name__}, got {type(d).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kw = {}
    for name, val in d.items():
        f = known[name]
        default = _field_default(f)
        if dataclasses.is_dataclass(default):
            kw[name] = _from_plain(type(default), val)
        elif isinstance(val, list):
            kw[name] = tuple(tuple(v) if isinstance(v, list) else v for v in val)
        else:
            kw[name] = val
    return cls(**kw)


def _field_default(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return None


def set_dotted(d: dict, key: str, value):
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        if not isinstance(cur.get(p), dict):
            raise ValueError(f"unknown config section in {key!r}")
        cur = cur[p]
    if parts[-1] not in cur:
        raise ValueError(f"unknown config key {key!r}")
    cur[parts[-1]] = value


def load_config(path=None, overrides=()) -> ExperimentConfig:
    d = {}
    if path is not None:
        text = Path(path).read_text()
        d = json.loads(text) if str(path).endswith(".json") else (yaml.safe_load(text) or {})
    return ExperimentConfig.from_dict(d).with_overrides(overrides)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def desk_preset() -> ExperimentConfig:
    """Reduced realization counts for quick runs."""
    return ExperimentConfig(realizations=100)


# ---------------------------------------------------------------------------
# builders


def tiny_preset(**kw) -> ExperimentConfig:
    """Two cells, 2 center + 2 edge users, one 2-element ground RIS and no
    UAV surface: small enough for exhaustive search."""
    base = dict(scenario=tiny_scenario(), ris=RisSection(k_ground=2, k_uav=0), realizations=50)
    base.update(kw)
    return ExperimentConfig(**base)


def env_config(cfg: ExperimentConfig, mode: str | None = None, k: int | None = None) -> EnvConfig:
    ris_mode, access = mode_parts(mode or cfg.mode)
    e, r = cfg.env, cfg.ris
    rp = RewardParams(e.xi_dist, e.xi_oob, e.c_const, e.proximity_threshold, e.qos_penalty,
                      cfg.fairness_weight if cfg.fairness == "on" else 0.0)
    sigma_v2 = None if r.sigma_v2_dbm is None else float(dbm_to_watt(r.sigma_v2_dbm))
    kg = r.k_ground if k is None else int(k)
    ku = r.k_uav if k is None else int(k)
    return EnvConfig(ris_mode, access, kg, ku, r.s_max, r.amplitude, r.shared_action, e.t_s,
                     e.step_size, e.freeze_lambda_amp, EdgeRateVariant(e.edge_variant), e.r_min,
                     sigma_v2, e.lambda_init, e.rate_scale, rp)


def env_factory(cfg: ExperimentConfig, mode: str | None = None, p_t_dbm: float | None = None,
                k: int | None = None):
    sc = cfg.scenario
    top = build_topology(sc)
    radio = cfg.radio.radio(p_t_dbm)
    ecfg = env_config(cfg, mode, k)

    def make() -> RisEnv:
        return RisEnv(top, radio, cfg.channel, ecfg, sc.uav_start)

    return make


def policy_signature(cfg: ExperimentConfig, k: int | None = None) -> dict:
    """The parts of a config that fix the policy's input/output shapes and
    the meaning of its actions; checkpoints are only portable between
    configs with equal signatures."""
    e = env_config(cfg, k=k)
    sc = cfg.scenario
    return {"n_bs": sc.n_bs, "k_ground": e.k_ground, "k_uav": e.k_uav, "s_max": e.s_max,
            "shared": e.shared_ris_action, "rate_scale": e.rate_scale,
            "flight_area": list(sc.flight_area), "hidden": list(cfg.train.hidden)}
