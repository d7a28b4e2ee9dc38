"""Rate expressions, all per unit bandwidth (bps/Hz)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LN2 = np.log(2.0)


class AssociationError(ValueError):
    """The UAV was associated to a cell already serving a ground UE on that RB."""


@dataclass(frozen=True)
class Weights:
    mu_u: float = 1.0
    mu_g: float = 1.0

    def __post_init__(self):
        if self.mu_u < 0 or self.mu_g < 0:
            raise ValueError("weights must be non-negative")
        if self.mu_u == 0 and self.mu_g == 0:
            raise ValueError("weights cannot both be zero")


@dataclass(frozen=True)
class RateReport:
    uav_rate: float
    ground_rate: float
    ground_rate_no_uav: float
    weighted: float
    uav_per_rb: np.ndarray = field(repr=False)
    ground_per_rb: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "uav_rate": float(self.uav_rate),
            "ground_rate": float(self.ground_rate),
            "ground_rate_no_uav": float(self.ground_rate_no_uav),
            "weighted": float(self.weighted),
            "uav_per_rb": [float(v) for v in self.uav_per_rb],
            "ground_per_rb": [float(v) for v in self.ground_per_rb],
        }


def _log2_1p(x):
    return np.log1p(x) / LN2


def ground_rate_no_uav(occupancy) -> float:
    if not occupancy.occupied.any():
        return 0.0
    # same summation order as ground_rate_with_uav so p = 0 matches exactly
    per_rb = np.sum(np.where(occupancy.occupied, _log2_1p(occupancy.gamma), 0.0), axis=0)
    return float(per_rb.sum())


def ground_rate_per_rb(gamma, F, occupied, p) -> np.ndarray:
    """Per-RB ground sum-rate with the UAV transmitting ``p`` (length N)."""
    p = np.asarray(p, dtype=float)
    sinr = gamma / (1.0 + p[None, :] * F)
    return np.sum(np.where(occupied, _log2_1p(sinr), 0.0), axis=0)


def ground_rate_with_uav(occupancy, channel_state, p) -> tuple[float, np.ndarray]:
    per_rb = ground_rate_per_rb(occupancy.gamma, channel_state.F, occupancy.occupied, p)
    return float(per_rb.sum()), per_rb


def uav_rate(channel_state, association, p, occupancy=None) -> tuple[float, np.ndarray]:
    """UAV rate given a per-RB serving cell (``-1`` = none).

    With ``occupancy`` supplied, association into a cell that already serves
    a ground UE on that RB raises :class:`AssociationError`.
    """
    p = np.asarray(p, dtype=float)
    j_star = np.asarray(getattr(association, "j_star", association))
    if np.any((j_star < 0) & (p > 0)):
        raise AssociationError("positive power on an RB without a serving cell")
    if occupancy is not None:
        check_association(j_star, occupancy, p)
    N = p.shape[0]
    gains = np.where(j_star >= 0, channel_state.F[np.maximum(j_star, 0), np.arange(N)], 0.0)
    per_rb = _log2_1p(p * gains)
    return float(per_rb.sum()), per_rb


def check_association(association, occupancy, p) -> None:
    """Raise if any powered RB is served by an occupied cell."""
    j = np.asarray(getattr(association, "j_star", association))
    p = np.asarray(p)
    bad = [n for n in range(j.shape[0]) if p[n] > 0 and j[n] >= 0 and occupancy.occupied[j[n], n]]
    if bad:
        raise AssociationError(f"UAV associated to occupied cells on RBs {bad}")


def weighted_objective(weights: Weights, uav: float, ground: float) -> float:
    return weights.mu_u * uav + weights.mu_g * ground


def rate_report(occupancy, channel_state, association, p, weights: Weights) -> RateReport:
    u, u_rb = uav_rate(channel_state, association, p, occupancy)
    g, g_rb = ground_rate_with_uav(occupancy, channel_state, p)
    return RateReport(u, g, ground_rate_no_uav(occupancy), weighted_objective(weights, u, g), u_rb, g_rb)
