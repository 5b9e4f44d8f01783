"""Wireless channel samplers: power-law path loss, Rayleigh and Rician fading.

All samplers take an explicit ``numpy.random.Generator`` so that identical
seeds and identical call order give bit-identical realizations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PathLossParams:
    rho0: float = 1e-3
    alpha: float = 2.2

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if not self.alpha >= 2.0:
            raise ValueError(f"path-loss exponent must be >= 2, got {self.alpha}")


@dataclass(frozen=True)
class RicianParams:
    kappa: float = 2.0
    aoa: float = 0.0

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError(f"Rician factor must be nonnegative, got {self.kappa}")
        if not -np.pi / 2 <= self.aoa <= np.pi / 2:
            raise ValueError(f"angle of arrival outside [-pi/2, pi/2]: {self.aoa}")


def path_loss(d, alpha: float):
    """Attenuation divisor ``d**alpha``; channel power scales as rho0 / path_loss."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss undefined for nonpositive distance")
    out = d ** alpha
    return float(out) if out.ndim == 0 else out


def rayleigh(rng: np.random.Generator, shape=()) -> np.ndarray:
    # CN(0, 1): real and imaginary parts each N(0, 1/2)
    if isinstance(shape, int):
        shape = (shape,)
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_rayleigh(rng: np.random.Generator) -> complex:
    return complex(rayleigh(rng))


def los_steering(aoa: float, k_elems: int) -> np.ndarray:
    """Uniform-linear-array steering vector ``exp(j (k-1) pi sin(aoa))``."""
    if k_elems < 1:
        raise ValueError("steering vector needs at least one element")
    k = np.arange(k_elems)
    return np.exp(1j * k * np.pi * np.sin(aoa))


def los_fraction(kappa: float) -> tuple[float, float]:
    """Amplitude weights (LoS, NLoS) for a Rician factor."""
    if np.isinf(kappa):
        return 1.0, 0.0
    return float(np.sqrt(kappa / (1 + kappa))), float(np.sqrt(1 / (1 + kappa)))


def sample_rician(p: RicianParams, k_elems: int, d: float, pl: PathLossParams,
                  rng: np.random.Generator) -> np.ndarray:
    scale = np.sqrt(pl.rho0 / path_loss(d, pl.alpha))
    w_los, w_nlos = los_fraction(p.kappa)
    los = los_steering(p.aoa, k_elems)
    nlos = rayleigh(rng, (k_elems,))
    return scale * (w_los * los + w_nlos * nlos)


def sample_bs_user_channel(d: float, pl: PathLossParams, rng: np.random.Generator) -> complex:
    return complex(np.sqrt(pl.rho0 / path_loss(d, pl.alpha)) * sample_rayleigh(rng))


def arrival_angle(src, dst) -> float:
    """Angle between the array broadside and the direction ``src -> dst``.

    The array axis is the global x axis, so ``sin(angle)`` is the x direction
    cosine of the link.
    """
    v = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        return 0.0
    return float(np.arcsin(np.clip(v[0] / n, -1.0, 1.0)))


def rician_array(scale: np.ndarray, steering: np.ndarray, kappa: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Batch Rician sampler.

    ``scale`` has shape ``(...,)`` (amplitude gains sqrt(rho0/PL)) and
    ``steering`` shape ``(..., K)``; returns ``(..., K)``.
    """
    w_los, w_nlos = los_fraction(kappa)
    nlos = rayleigh(rng, steering.shape)
    return scale[..., None] * (w_los * steering + w_nlos * nlos)


@dataclass(frozen=True)
class ChannelConfig:
    """Link-class parameters.

    Exponent mapping: ``alpha_ris`` for BS<->RIS and RIS<->user links,
    ``alpha_direct`` for BS<->user links.  ``alpha_obstructed`` and
    ``alpha_shadowed`` are carried for overrides but unused by default.
    """

    rho0_db: float = -30.0
    alpha_ris: float = 2.2
    alpha_obstructed: float = 3.0
    alpha_direct: float = 3.3
    alpha_shadowed: float = 3.7
    kappa: float = 2.0
    ris_user_fading: str = "rician"

    def __post_init__(self):
        if self.ris_user_fading not in ("rician", "rayleigh"):
            raise ValueError(f"unknown RIS->user fading model {self.ris_user_fading!r}")
        if self.kappa < 0:
            raise ValueError("Rician factor must be nonnegative")
        for a in (self.alpha_ris, self.alpha_direct, self.alpha_obstructed, self.alpha_shadowed):
            if a < 2.0:
                raise ValueError(f"path-loss exponent must be >= 2, got {a}")

    @property
    def rho0(self) -> float:
        return 10 ** (self.rho0_db / 10)
