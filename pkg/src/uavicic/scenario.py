"""Assemble one channel snapshot from a :class:`ScenarioConfig`.

Every random draw comes from its own stream, derived from the master seed,
the snapshot index and a fixed stream id, so changing one stage (say the RB
choice rule) leaves the other stages' draws untouched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelParams,
    ChannelState,
    UavAntenna,
    UlaPattern,
    dbm_to_watt,
    noise_and_residual_ici,
    terrestrial_gains,
    uav_gains,
)
from .config import ScenarioConfig
from .rates import Weights
from .scheduler import RbOccupancy, assign_rbs, compute_ground_sinrs, place_ues
from .topology import HexGrid, NeighborSets, build_grid, neighbor_sets

# stream ids within a snapshot
STREAM_PLACEMENT = 0
STREAM_RB = 1
STREAM_GROUND_LINKS = 2
STREAM_UAV_LINKS = 3


def snapshot_rng(seed: int, snapshot: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(snapshot, stream)))


@dataclass(frozen=True)
class Scenario:
    """Everything the optimisers need for one snapshot."""

    grid: HexGrid
    nsets: NeighborSets
    q: int
    occupancy: RbOccupancy
    channel_state: ChannelState
    weights: Weights
    P_max: float
    uav_xyz: tuple[float, float, float]
    snapshot: int = 0


def channel_params(cfg: ScenarioConfig) -> ChannelParams:
    c, a = cfg.channel, cfg.uav.antenna
    return ChannelParams(
        carrier_freq=c.carrier_freq,
        noise_psd_dbm=c.noise_psd_dbm,
        rb_bandwidth=c.rb_bandwidth,
        bs_antenna=UlaPattern(c.bs_antenna.num_elements, c.bs_antenna.spacing, c.bs_antenna.downtilt_deg),
        uav_antenna=UavAntenna(a.kind, a.half_beamwidth_deg, a.main_gain_const, a.side_gain),
        terrestrial_model=c.terrestrial_model,
        aerial_model=c.aerial_model,
        shadowing=c.shadowing,
        fading=c.fading,
    )


def build_scenario(cfg: ScenarioConfig, snapshot: int = 0, params: ChannelParams | None = None) -> Scenario:
    """Drop UEs, schedule RBs and draw every link for snapshot ``snapshot``."""
    params = channel_params(cfg) if params is None else params
    g, u = cfg.grid, cfg.ues
    grid = build_grid(g.cell_radius, g.tiers, g.bs_height)
    nsets = neighbor_sets(grid, max(u.q, 1))
    tx = float(dbm_to_watt(u.tx_power_dbm))

    ues = place_ues(grid, u.num_ues, snapshot_rng(cfg.seed, snapshot, STREAM_PLACEMENT),
                    per_cell=u.per_cell, height=u.height, tx_power=tx)
    occ = assign_rbs(ues, nsets, u.q, u.num_rbs, snapshot_rng(cfg.seed, snapshot, STREAM_RB),
                     order=u.order, rb_choice=u.rb_choice, num_cells=grid.num_cells)

    ue_xy = np.array([ue.position for ue in ues])
    link = terrestrial_gains(params, ue_xy, u.height, grid.centers, g.bs_height,
                             snapshot_rng(cfg.seed, snapshot, STREAM_GROUND_LINKS))
    G = link.gain  # (K, J)
    ue_of = occ.ue_of
    J, N = ue_of.shape
    H = np.zeros((J, N))
    rows, cols = np.nonzero(ue_of >= 0)
    H[rows, cols] = G[ue_of[rows, cols], rows]
    sigma2 = noise_and_residual_ici(params, occ, G, tx)

    uav_xyz = (float(cfg.uav.xy[0]), float(cfg.uav.xy[1]), float(cfg.uav.height))
    F_tilde = uav_gains(params, uav_xyz, grid.centers, g.bs_height,
                        snapshot_rng(cfg.seed, snapshot, STREAM_UAV_LINKS)).gain
    chan = ChannelState.build(H, F_tilde, sigma2)
    occ = occ.with_gamma(compute_ground_sinrs(occ, chan))
    return Scenario(
        grid=grid,
        nsets=nsets,
        q=u.q,
        occupancy=occ,
        channel_state=chan,
        weights=Weights(cfg.weights.mu_u, cfg.weights.mu_g),
        P_max=float(dbm_to_watt(cfg.uav.p_max_dbm)),
        uav_xyz=uav_xyz,
        snapshot=snapshot,
    )
