"""Binary checkpoint format.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header
(sorted keys), then the arrays as contiguous little-endian float64 in header
order.  No timestamps are written, so identical agents give identical files.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .ppo import Adam, Agent

MAGIC = b"RISHPPO\x01"
FORMAT_VERSION = 1


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _arrays(agent: Agent):
    out = []
    for k in sorted(agent.params):
        out.append(("param/" + k, agent.params[k]))
        out.append(("adam_m/" + k, agent.adam.m[k]))
        out.append(("adam_v/" + k, agent.adam.v[k]))
    return out


def save_checkpoint(path, agent: Agent, seed: int, cfg_hash: str, meta: dict | None = None):
    arrays = _arrays(agent)
    header = {
        "format": FORMAT_VERSION,
        "seed": int(seed),
        "config_hash": cfg_hash,
        "adam": {"t": agent.adam.t, "beta1": agent.adam.beta1, "beta2": agent.adam.beta2,
                 "eps": agent.adam.eps},
        "arrays": [[name, list(a.shape)] for name, a in arrays],
        "meta": meta or {},
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(hb)))
        f.write(hb)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(agent, header)``."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + n].decode())
    if header.get("format") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint format {header.get('format')}")
    pos = 16 + n
    store = {}
    for name, shape in header["arrays"]:
        size = int(np.prod(shape)) * 8
        store[name] = np.frombuffer(raw[pos:pos + size], dtype="<f8").reshape(shape).astype(float)
        pos += size
    if pos != len(raw):
        raise ValueError(f"{path}: trailing or missing data")
    params = {k[6:]: v for k, v in store.items() if k.startswith("param/")}
    a = header["adam"]
    adam = Adam(params, a["beta1"], a["beta2"], a["eps"])
    adam.t = a["t"]
    for k in params:
        adam.m[k] = store["adam_m/" + k]
        adam.v[k] = store["adam_v/" + k]
    return Agent(params, adam), header
