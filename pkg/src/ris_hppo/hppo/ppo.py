"""Hybrid-action PPO: decoupled clipped objectives for the discrete and the
continuous policy, n-step advantages and an on-policy rollout buffer."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .networks import (LOG_STD_MAX, LOG_STD_MIN, PolicyOutput, backward_policy,
                       categorical_entropy, forward_policy, gaussian_entropy,
                       gaussian_log_density, init_params, log_softmax)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    n_step: int = 8
    clip_eps: float = 0.2
    lr_discrete: float = 3e-4
    lr_continuous: float = 3e-4
    lr_encoder: float = 3e-4
    lr_critic: float = 3e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 4
    minibatch: int = 256
    horizon: int = 1024
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    iterations: int = 200
    normalize_advantages: bool = True
    hidden: tuple = (64, 64)
    init_log_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0 < self.gamma <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip parameter must be positive")
        if not 1 <= self.n_step <= self.horizon:
            raise ValueError("n-step length must lie in [1, horizon]")
        if self.epochs < 1 or self.minibatch < 1 or self.iterations < 0:
            raise ValueError("epochs and minibatch must be positive, iterations nonnegative")


# ---------------------------------------------------------------------------
# agent state and optimizer


class Adam:
    def __init__(self, params: dict, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, lrs: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] = params[k] - lrs[k] * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class Agent:
    """Actor-critic weights plus optimizer moments."""

    params: dict
    adam: Adam

    @classmethod
    def create(cls, obs_dim: int, n_discrete: int, n_continuous: int, cfg: TrainConfig,
               rng: np.random.Generator) -> "Agent":
        params = init_params(obs_dim, n_discrete, n_continuous, rng, cfg.hidden, cfg.init_log_std)
        return cls(params, Adam(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps))

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def param_group(name: str) -> str:
    if name.startswith("enc"):
        return "encoder"
    if name.startswith("pi_d"):
        return "discrete"
    if name.startswith("vf"):
        return "critic"
    return "continuous"


def learning_rates(params: dict, cfg: TrainConfig) -> dict:
    table = {"encoder": cfg.lr_encoder, "discrete": cfg.lr_discrete,
             "continuous": cfg.lr_continuous, "critic": cfg.lr_critic}
    return {k: table[param_group(k)] for k in params}


def clip_grad_norm(grads: dict, max_norm: float) -> float:
    """Clip actor and critic gradients separately; returns the actor norm."""
    norms = {}
    for group in ("actor", "critic"):
        keys = [k for k in grads if (param_group(k) == "critic") == (group == "critic")]
        norm = float(np.sqrt(sum(float(np.sum(grads[k] ** 2)) for k in keys)))
        norms[group] = norm
        if max_norm > 0 and norm > max_norm:
            for k in keys:
                grads[k] = grads[k] * (max_norm / norm)
    return norms["actor"]


# ---------------------------------------------------------------------------
# sampling


@dataclass
class HybridSample:
    move: int
    raw: np.ndarray
    logp_d: float
    logp_c: float
    log_jac: float
    value: float


def sample_hybrid(params: dict, obs, rng: np.random.Generator, layout=None,
                  greedy: bool = False) -> HybridSample:
    """Draw a move from the categorical head and a raw continuous vector from
    the Gaussian head.

    ``logp_c`` is the log-density of the squashed action, i.e. the Gaussian
    log-density minus ``log|det J|`` of the squashing map given by ``layout``
    (no correction when ``layout`` is None).  Greedy mode takes the argmax
    move and the Gaussian mean.
    """
    out = forward_policy(params, obs)
    lsm = log_softmax(out.logits)
    if greedy:
        move = int(np.argmax(lsm))
        raw = out.mean.copy()
    else:
        move = int(rng.choice(len(lsm), p=np.exp(lsm)))
        raw = out.mean + np.exp(out.log_std) * rng.standard_normal(out.mean.shape)
    log_jac = float(layout.log_abs_det_jacobian(raw)) if layout is not None else 0.0
    logp_c = float(gaussian_log_density(raw, out.mean, out.log_std)) - log_jac
    return HybridSample(move, raw, float(lsm[move]), logp_c, log_jac, float(out.value[0]))


# ---------------------------------------------------------------------------
# rollout storage and advantages


@dataclass
class Transition:
    obs: np.ndarray
    move: int
    raw: np.ndarray
    reward: float
    next_obs: np.ndarray
    logp_d: float
    logp_c: float
    log_jac: float
    value: float
    done: bool


@dataclass
class RolloutBuffer:
    items: list = field(default_factory=list)

    def add(self, t: Transition):
        self.items.append(t)

    def __len__(self):
        return len(self.items)

    def clear(self):
        self.items.clear()

    def arrays(self) -> dict:
        it = self.items
        return {
            "obs": np.array([t.obs for t in it]),
            "moves": np.array([t.move for t in it], dtype=int),
            "raw": np.array([t.raw for t in it]),
            "rewards": np.array([t.reward for t in it]),
            "logp_d": np.array([t.logp_d for t in it]),
            "logp_c": np.array([t.logp_c for t in it]),
            "log_jac": np.array([t.log_jac for t in it]),
            "values": np.array([t.value for t in it]),
            "dones": np.array([t.done for t in it], dtype=bool),
        }


def n_step_advantage(rewards, values, dones, last_value: float, gamma: float, n_step: int):
    """Truncated n-step advantages.

    ``A_t = sum_{k<n} gamma^k r_{t+k} + gamma^n V(s_{t+n}) - V(s_t)``.  The sum
    stops at an episode end (no bootstrap past ``done``) and at the end of
    the buffer, where ``last_value`` bootstraps.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    d = np.asarray(dones, dtype=bool)
    T = len(r)
    v_ext = np.append(v, last_value)
    adv = np.empty(T)
    for t in range(T):
        ret, disc = 0.0, 1.0
        k = 0
        terminal = False
        while k < n_step and t + k < T:
            ret += disc * r[t + k]
            disc *= gamma
            if d[t + k]:
                terminal = True
                k += 1
                break
            k += 1
        if not terminal:
            ret += disc * v_ext[t + k]
        adv[t] = ret - v[t]
    return adv


def clipped_surrogate(ratio, advantage, epsilon: float):
    ratio = np.asarray(ratio, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1 - epsilon, 1 + epsilon) * advantage)


def _surrogate_and_slope(ratio, adv, eps):
    """Clipped objective and its derivative w.r.t. the log-probability."""
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1 - eps, 1 + eps) * adv
    obj = np.minimum(unclipped, clipped)
    slope = np.where(unclipped <= clipped, unclipped, 0.0)
    return obj, slope


# ---------------------------------------------------------------------------
# loss and update


def hybrid_ppo_loss(params: dict, batch: dict, cfg: TrainConfig):
    """Loss ``-(L_d + L_c) - c_ent (H_d + H_c) + c_vf * 0.5 * MSE`` and its gradients.

    The discrete and continuous ratios are clipped independently.
    """
    obs = batch["obs"]
    n = obs.shape[0]
    out: PolicyOutput = forward_policy(params, obs, keep_cache=True)
    lsm = log_softmax(out.logits)
    p = np.exp(lsm)
    rows = np.arange(n)
    moves = batch["moves"]
    adv = batch["adv"]

    logp_d = lsm[rows, moves]
    ratio_d = np.exp(logp_d - batch["logp_d"])
    obj_d, slope_d = _surrogate_and_slope(ratio_d, adv, cfg.clip_eps)

    var = np.exp(2 * out.log_std)
    diff = batch["raw"] - out.mean
    logp_c = gaussian_log_density(batch["raw"], out.mean, out.log_std) - batch["log_jac"]
    ratio_c = np.exp(logp_c - batch["logp_c"])
    obj_c, slope_c = _surrogate_and_slope(ratio_c, adv, cfg.clip_eps)

    h_d_rows = categorical_entropy(out.logits)
    h_d = h_d_rows.mean()
    h_c = float(gaussian_entropy(params["log_std"]))
    v_err = out.value - batch["returns"]
    v_loss = 0.5 * np.mean(v_err ** 2)

    l_d, l_c = obj_d.mean(), obj_c.mean()
    loss = -(l_d + l_c) - cfg.ent_coef * (h_d + h_c) + cfg.vf_coef * v_loss

    onehot = np.zeros_like(p)
    onehot[rows, moves] = 1.0
    d_logits = (-slope_d / n)[:, None] * (onehot - p) \
        + (cfg.ent_coef / n) * p * (lsm + h_d_rows[:, None])
    g_c = (-slope_c / n)[:, None]
    d_mean = g_c * diff / var
    d_log_std = g_c * (diff * diff / var - 1.0) - cfg.ent_coef / n
    d_value = cfg.vf_coef * v_err / n
    grads = backward_policy(params, out, d_logits, d_mean, d_log_std, d_value)

    stats = {
        "loss": float(loss),
        "policy_loss_d": float(-l_d),
        "policy_loss_c": float(-l_c),
        "value_loss": float(v_loss),
        "entropy_d": float(h_d),
        "entropy_c": h_c,
        "clip_frac_d": float(np.mean(np.abs(ratio_d - 1) > cfg.clip_eps)),
        "clip_frac_c": float(np.mean(np.abs(ratio_c - 1) > cfg.clip_eps)),
    }
    return float(loss), grads, stats


def standardize(adv):
    adv = np.asarray(adv, dtype=float)
    if adv.size < 2:
        return adv.copy()
    std = adv.std()
    if std == 0:
        return adv - adv.mean()
    return (adv - adv.mean()) / std


def update(agent: Agent, buffer: RolloutBuffer, cfg: TrainConfig, rng: np.random.Generator,
           advantages=None, returns=None) -> dict:
    """Several epochs of shuffled minibatch Adam steps on one on-policy buffer.

    ``advantages``/``returns`` default to n-step estimates computed with a
    zero bootstrap.  The buffer is cleared afterwards; the returned stats
    carry the behavior-policy snapshot under ``"old_params"``.
    """
    data = buffer.arrays()
    if advantages is None:
        advantages = n_step_advantage(data["rewards"], data["values"], data["dones"], 0.0,
                                      cfg.gamma, cfg.n_step)
    if returns is None:
        returns = np.asarray(advantages) + data["values"]
    old_params = agent.copy_params()
    adv = standardize(advantages) if cfg.normalize_advantages else np.asarray(advantages, float)
    batch_all = {"obs": data["obs"], "moves": data["moves"], "raw": data["raw"],
                 "logp_d": data["logp_d"], "logp_c": data["logp_c"], "log_jac": data["log_jac"],
                 "adv": adv, "returns": np.asarray(returns, dtype=float)}
    n = len(adv)
    lrs = learning_rates(agent.params, cfg)
    acc = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch):
            idx = perm[lo: lo + cfg.minibatch]
            mb = {k: v[idx] for k, v in batch_all.items()}
            loss, grads, stats = hybrid_ppo_loss(agent.params, mb, cfg)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise FloatingPointError(
                    f"non-finite loss or gradient in update (loss={loss}, stats={stats})")
            stats["grad_norm"] = clip_grad_norm(grads, cfg.max_grad_norm)
            agent.adam.step(agent.params, grads, lrs)
            agent.params["log_std"] = np.clip(agent.params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
            acc.append(stats)
    buffer.clear()
    out = {k: float(np.mean([s[k] for s in acc])) for k in acc[0]}
    out["old_params"] = old_params
    return out


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(params: dict, loss_fn, tolerance: float = 1e-4, h: float = 1e-5,
               n_coords: int = 30, rng: np.random.Generator | None = None,
               floor: float = 1e-8) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``loss_fn(params) -> (loss, grads)``.  ``n_coords`` coordinates are drawn
    per parameter array.  Pairs where both gradients are below ``floor`` count
    as exact.  Logs a warning when the error exceeds ``tolerance``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    _, grads = loss_fn(params)
    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)
        g = np.asarray(grads.get(name, np.zeros_like(arr))).reshape(-1)
        picks = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
        for i in picks:
            old = flat[i]
            flat[i] = old + h
            lp, _ = loss_fn(params)
            flat[i] = old - h
            lm, _ = loss_fn(params)
            flat[i] = old
            num = (lp - lm) / (2 * h)
            scale = max(abs(num), abs(g[i]))
            if scale < floor:
                continue
            worst = max(worst, abs(num - g[i]) / scale)
    if worst > tolerance:
        log.warning("gradient check: max relative error %.3g exceeds %.3g", worst, tolerance)
    return worst
