"""RIS element states, cascaded BS->RIS->user gains and active-RIS noise."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class RisMode(str, enum.Enum):
    ACTIVE = "active"
    PASSIVE = "passive"


def wrap_phase(theta):
    """Wrap angles into [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True, eq=False)
class RisState:
    phases: np.ndarray
    amplitudes: np.ndarray
    amplification: np.ndarray
    mode: RisMode = RisMode.ACTIVE
    s_max: float = 10.0

    def __post_init__(self):
        for name in ("phases", "amplitudes", "amplification"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "mode", RisMode(self.mode))
        k = self.phases.shape
        if self.amplitudes.shape != k or self.amplification.shape != k:
            raise ValueError("phase, amplitude and amplification vectors differ in length")
        if k[0] == 0:
            return
        if self.phases.min() < -np.pi or self.phases.max() >= np.pi:
            raise ValueError("phase shifts must lie in [-pi, pi)")
        if self.amplitudes.min() <= 0 or self.amplitudes.max() > 1:
            raise ValueError("amplitude coefficients must lie in (0, 1]")
        lo, hi = self.amplification.min(), self.amplification.max()
        if self.mode is RisMode.PASSIVE:
            if lo != 1.0 or hi != 1.0:
                raise ValueError("passive RIS requires unit amplification")
        elif lo < 1 or hi > self.s_max:
            raise ValueError(f"amplification must lie in [1, {self.s_max}]")

    @property
    def k(self) -> int:
        return self.phases.shape[0]

    @property
    def active(self) -> bool:
        return self.mode is RisMode.ACTIVE

    @classmethod
    def identity(cls, k: int, mode=RisMode.ACTIVE, s_max: float = 10.0) -> "RisState":
        return cls(np.zeros(k), np.ones(k), np.ones(k), mode, s_max)


@dataclass(frozen=True)
class DynamicNoiseParams:
    sigma_v2: float

    def __post_init__(self):
        if self.sigma_v2 < 0:
            raise ValueError("dynamic-noise power must be nonnegative")


@dataclass(frozen=True, eq=False)
class CascadeInput:
    h_in: np.ndarray
    h_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h_in", np.asarray(self.h_in, dtype=complex))
        object.__setattr__(self, "h_out", np.asarray(self.h_out, dtype=complex))
        if self.h_in.shape != self.h_out.shape:
            raise ValueError(
                f"cascade length mismatch: {self.h_in.shape} vs {self.h_out.shape}")


def reflection_matrix(s: RisState) -> np.ndarray:
    """Diagonal of the reflection operator, ``p_k a_k exp(j theta_k)``."""
    return s.amplification * s.amplitudes * np.exp(1j * s.phases)


def cascaded_gain(c: CascadeInput, s: RisState) -> complex:
    if c.h_in.shape != s.phases.shape:
        raise ValueError("channel vectors and RIS state differ in length")
    return complex(np.sum(c.h_out * reflection_matrix(s) * c.h_in))


def effective_channel(direct: complex, c: CascadeInput | None, s: RisState | None) -> complex:
    if c is None or s is None or s.k == 0:
        return complex(direct)
    return complex(direct) + cascaded_gain(c, s)


def dynamic_noise_power(h_out, s: RisState, n: DynamicNoiseParams) -> float:
    """Received power of the amplified element noise; zero for a passive RIS."""
    if not s.active:
        return 0.0
    h_out = np.asarray(h_out, dtype=complex)
    return float(n.sigma_v2 * np.sum(np.abs(h_out * s.amplification * s.amplitudes) ** 2))


def phase_align(c: CascadeInput, direct: complex) -> np.ndarray:
    """Per-element phases that rotate every cascade term onto the direct path.

    Elements with a zero-magnitude product get phase 0.
    """
    prod = c.h_out * c.h_in
    theta = np.where(np.abs(prod) > 0, np.angle(direct) - np.angle(prod), 0.0)
    return wrap_phase(theta)
