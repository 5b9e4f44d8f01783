"""Actor-critic networks with hand-written backpropagation.

Parameters live in a flat ``dict[str, ndarray]`` so that optimizers,
checkpoints and gradient checks can treat them uniformly.  The actor is a
shared tanh encoder feeding a categorical head (UAV moves) and a Gaussian
head (continuous controls, state-independent log-std); the critic is a
separate tanh MLP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_2PI = float(np.log(2 * np.pi))


def init_params(obs_dim: int, n_discrete: int, n_continuous: int, rng: np.random.Generator,
                hidden=(64, 64), init_log_std: float = 0.0, head_scale: float = 0.01) -> dict:
    params = {}

    def dense(name, fan_in, fan_out, gain):
        params[f"{name}.W"] = rng.standard_normal((fan_in, fan_out)) * gain / np.sqrt(fan_in)
        params[f"{name}.b"] = np.zeros(fan_out)

    sizes = (obs_dim,) + tuple(hidden)
    for i in range(len(hidden)):
        dense(f"enc{i}", sizes[i], sizes[i + 1], 1.0)
    dense("pi_d", sizes[-1], n_discrete, head_scale)
    dense("pi_mu", sizes[-1], n_continuous, head_scale)
    params["log_std"] = np.full(n_continuous, float(init_log_std))
    for i in range(len(hidden)):
        dense(f"vf{i}", sizes[i], sizes[i + 1], 1.0)
    dense("vf_out", sizes[-1], 1, 1.0)
    return params


def n_hidden(params: dict) -> int:
    return sum(1 for k in params if k.startswith("enc") and k.endswith(".W"))


def obs_dim(params: dict) -> int:
    return params["enc0.W"].shape[0]


def _mlp_forward(params, prefix, x, n):
    acts = [x]
    h = x
    for i in range(n):
        h = np.tanh(h @ params[f"{prefix}{i}.W"] + params[f"{prefix}{i}.b"])
        acts.append(h)
    return h, acts


def _mlp_backward(params, prefix, acts, dh, grads, n):
    for i in reversed(range(n)):
        dz = dh * (1.0 - acts[i + 1] ** 2)
        grads[f"{prefix}{i}.W"] = acts[i].T @ dz
        grads[f"{prefix}{i}.b"] = dz.sum(axis=0)
        dh = dz @ params[f"{prefix}{i}.W"].T
    return dh


@dataclass
class PolicyOutput:
    logits: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray
    value: np.ndarray
    cache: tuple | None = None


def forward_policy(params: dict, obs, keep_cache: bool = False) -> PolicyOutput:
    x = np.asarray(obs, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != obs_dim(params):
        raise ValueError(f"state dimension {x.shape[1]} does not match network input {obs_dim(params)}")
    n = n_hidden(params)
    h, enc_acts = _mlp_forward(params, "enc", x, n)
    logits = h @ params["pi_d.W"] + params["pi_d.b"]
    mean = h @ params["pi_mu.W"] + params["pi_mu.b"]
    log_std = np.broadcast_to(params["log_std"], mean.shape)
    hv, vf_acts = _mlp_forward(params, "vf", x, n)
    value = (hv @ params["vf_out.W"] + params["vf_out.b"])[:, 0]
    cache = (enc_acts, vf_acts) if keep_cache else None
    if single:
        return PolicyOutput(logits[0], mean[0], log_std[0], value[0:1], cache)
    return PolicyOutput(logits, mean, log_std, value, cache)


def backward_policy(params: dict, out: PolicyOutput, d_logits, d_mean, d_log_std, d_value) -> dict:
    """Gradients of a scalar loss given its partials w.r.t. the network outputs
    (batched, as produced by ``forward_policy(..., keep_cache=True)``)."""
    enc_acts, vf_acts = out.cache
    n = n_hidden(params)
    grads = {}
    h = enc_acts[-1]
    grads["pi_d.W"] = h.T @ d_logits
    grads["pi_d.b"] = d_logits.sum(axis=0)
    grads["pi_mu.W"] = h.T @ d_mean
    grads["pi_mu.b"] = d_mean.sum(axis=0)
    grads["log_std"] = np.asarray(d_log_std).reshape(-1, params["log_std"].size).sum(axis=0)
    dh = d_logits @ params["pi_d.W"].T + d_mean @ params["pi_mu.W"].T
    _mlp_backward(params, "enc", enc_acts, dh, grads, n)
    dv = np.asarray(d_value, dtype=float)[:, None]
    hv = vf_acts[-1]
    grads["vf_out.W"] = hv.T @ dv
    grads["vf_out.b"] = dv.sum(axis=0)
    _mlp_backward(params, "vf", vf_acts, dv @ params["vf_out.W"].T, grads, n)
    return grads


# ---------------------------------------------------------------------------
# distributions


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def categorical_entropy(logits):
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


def gaussian_log_density(x, mean, log_std):
    """Sum over the last axis of the diagonal Gaussian log-density."""
    z = (x - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


def gaussian_entropy(log_std):
    return np.sum(log_std + 0.5 * (LOG_2PI + 1.0), axis=-1)
