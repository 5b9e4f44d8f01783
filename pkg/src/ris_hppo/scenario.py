"""Scenario geometry: base stations, user drops, RIS placement, flight area."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Topology, circumcenter, place_users

REFERENCE_BS_POSITIONS = ((-30.0, 30.0, 20.0), (30.0, 30.0, 20.0), (20.0, -30.0, 20.0))


@dataclass(frozen=True)
class ScenarioConfig:
    bs_positions: tuple = REFERENCE_BS_POSITIONS
    cell_radius: float = 15.0
    edge_radius: float = 35.0
    ris_ground_xy: tuple | None = None
    ris_ground_height: float = 10.0
    uav_start: tuple = (-5.0, 0.0, 40.0)
    flight_area: tuple = (-50.0, 50.0, -50.0, 50.0)
    obstacles: tuple = ()
    d_min: float = 10.0
    placement_seed: int = 7

    def __post_init__(self):
        object.__setattr__(self, "bs_positions", tuple(tuple(map(float, p)) for p in self.bs_positions))
        object.__setattr__(self, "obstacles", tuple(tuple(map(float, p)) for p in self.obstacles))
        object.__setattr__(self, "uav_start", tuple(map(float, self.uav_start)))
        object.__setattr__(self, "flight_area", tuple(map(float, self.flight_area)))
        if self.ris_ground_xy is not None:
            object.__setattr__(self, "ris_ground_xy", tuple(map(float, self.ris_ground_xy)))
        if len(self.bs_positions) < 2:
            raise ValueError("CoMP pairing needs at least two base stations")
        if not 0 < self.cell_radius < self.edge_radius:
            raise ValueError("need 0 < cell_radius < edge_radius")
        x0, x1, y0, y1 = self.flight_area
        if not (x0 < x1 and y0 < y1):
            raise ValueError("flight area must be a nonempty rectangle")
        if self.uav_start[2] <= 0 or self.ris_ground_height <= 0:
            raise ValueError("RIS heights must be positive")

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)


def build_topology(sc: ScenarioConfig, placement_seed: int | None = None) -> Topology:
    """Materialize a topology; users are dropped with ``placement_seed``
    (defaults to the scenario's own seed)."""
    seed = sc.placement_seed if placement_seed is None else placement_seed
    rng = np.random.default_rng(seed)
    bs = np.array(sc.bs_positions)
    users, serving, partner = place_users(bs, rng, sc.cell_radius, sc.edge_radius, sc.flight_area)
    g_xy = circumcenter(bs) if sc.ris_ground_xy is None else np.array(sc.ris_ground_xy)
    ris = np.array([[g_xy[0], g_xy[1], sc.ris_ground_height], list(sc.uav_start)])
    obstacles = np.array(sc.obstacles, dtype=float).reshape(-1, 3)
    return Topology(bs, users, serving, partner, ris, obstacles, sc.d_min, sc.flight_area)


def tiny_scenario(**kw) -> ScenarioConfig:
    """Two-cell layout used for exhaustive-search checks."""
    base = dict(bs_positions=((-30.0, 30.0, 20.0), (30.0, 30.0, 20.0)),
                ris_ground_xy=(0.0, 20.0))
    base.update(kw)
    return ScenarioConfig(**base)
