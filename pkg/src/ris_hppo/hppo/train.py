"""Rollout collection and the outer training loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..env import RisEnv, squash_action
from .ppo import (Agent, RolloutBuffer, TrainConfig, Transition, n_step_advantage,
                  sample_hybrid, update)
from .networks import forward_policy

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("iteration", "mean_reward", "mean_episode_reward", "mean_sum_rate",
                 "policy_loss_d", "policy_loss_c", "value_loss", "entropy_d", "entropy_c")


@dataclass
class TrainResult:
    agent: Agent
    curve: list = field(default_factory=list)
    seed: int = 0


def collect_rollout(env: RisEnv, agent: Agent, horizon: int, rng: np.random.Generator,
                    buffer: RolloutBuffer, reset_seed: int):
    """Run ``horizon`` steps from a fresh reset; returns (last_value, info)."""
    env.reset(seed=reset_seed)
    obs = env.observe()
    ep_ret, ep_returns, rates = 0.0, [], []
    last_done = False
    for t in range(horizon):
        if last_done:
            env.reset()
            obs = env.observe()
        smp = sample_hybrid(agent.params, obs, rng, env.layout)
        out = env.step(squash_action(smp.raw, env.layout, smp.move))
        nxt = env.observe()
        buffer.add(Transition(obs, smp.move, smp.raw, out.reward, nxt, smp.logp_d, smp.logp_c,
                              smp.log_jac, smp.value, out.done))
        ep_ret += out.reward
        rates.append(out.rates.r_total)
        if out.done:
            ep_returns.append(ep_ret)
            ep_ret = 0.0
        last_done = out.done
        obs = nxt
    last_value = 0.0 if last_done else float(forward_policy(agent.params, obs).value[0])
    return last_value, {"episode_returns": ep_returns, "mean_sum_rate": float(np.mean(rates))}


def train(env_factory, cfg: TrainConfig, seed: int, progress=None) -> TrainResult:
    """Alternate on-policy collection of ``cfg.horizon`` steps and PPO updates.

    ``env_factory()`` must return a fresh :class:`RisEnv`.  The environment
    is reset at the start of every iteration with a seed drawn from the
    training generator, so runs are reproducible from ``seed`` alone.
    """
    env = env_factory()
    rng = np.random.default_rng(seed)
    agent = Agent.create(env.state_dim, 5, env.layout.dim, cfg, rng)
    result = TrainResult(agent, [], seed)
    buffer = RolloutBuffer()
    for it in range(cfg.iterations):
        reset_seed = int(rng.integers(2 ** 63))
        last_value, info = collect_rollout(env, agent, cfg.horizon, rng, buffer, reset_seed)
        data = buffer.arrays()
        adv = n_step_advantage(data["rewards"], data["values"], data["dones"], last_value,
                               cfg.gamma, cfg.n_step)
        stats = update(agent, buffer, cfg, rng, advantages=adv, returns=adv + data["values"])
        ep = info["episode_returns"]
        row = {
            "iteration": it,
            "mean_reward": float(np.mean(data["rewards"])),
            "mean_episode_reward": float(np.mean(ep)) if ep else float("nan"),
            "mean_sum_rate": info["mean_sum_rate"],
            "policy_loss_d": stats["policy_loss_d"],
            "policy_loss_c": stats["policy_loss_c"],
            "value_loss": stats["value_loss"],
            "entropy_d": stats["entropy_d"],
            "entropy_c": stats["entropy_c"],
        }
        result.curve.append(row)
        log.debug("iter %d reward %.4f", it, row["mean_reward"])
        if progress is not None:
            progress(row)
    return result


def curve_gain(curve: list, key: str = "mean_reward", frac: float = 0.1) -> float:
    """Mean of ``key`` over the final ``frac`` of iterations divided by the first ``frac``."""
    vals = np.array([r[key] for r in curve], dtype=float)
    n = max(1, int(round(frac * len(vals))))
    return float(vals[-n:].mean() / vals[:n].mean())
