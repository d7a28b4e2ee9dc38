"""Clustered, decentralised ICIC.

BSs are grouped into static clusters.  Each cluster head summarises its
cluster per RB with two numbers, an interference price ``V`` and the best
free UAV gain ``W``.  The UAV sees only these aggregates, picks a serving
cluster per RB and solves the priced water-filling problem.  The head of
the chosen cluster then resolves the serving cell locally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .icic import (
    Association,
    IcicSolution,
    PowerAllocation,
    SolveDiagnostics,
    objective_value,
    priced_waterfill,
    surrogate_coeffs,
)
from .rates import LN2, Weights, rate_report


@dataclass(frozen=True)
class ClusterPartition:
    clusters: tuple[tuple[int, ...], ...]
    head: tuple[int, ...]

    def __post_init__(self):
        seen = [j for c in self.clusters for j in c]
        if len(seen) != len(set(seen)):
            raise ValueError("clusters overlap")
        if sorted(seen) != list(range(len(seen))):
            raise ValueError("clusters must cover cells 0..J-1")
        if len(self.head) != len(self.clusters):
            raise ValueError("one head per cluster")
        for h, c in zip(self.head, self.clusters):
            if h not in c:
                raise ValueError(f"head {h} is not a member of its cluster")

    @property
    def M(self) -> int:
        return len(self.clusters)

    @property
    def num_cells(self) -> int:
        return sum(len(c) for c in self.clusters)

    def cluster_of(self) -> np.ndarray:
        out = np.empty(self.num_cells, dtype=int)
        for m, c in enumerate(self.clusters):
            out[list(c)] = m
        return out


@dataclass(frozen=True)
class ClusterReport:
    V: np.ndarray  # (M, N) aggregated interference price per watt
    W: np.ndarray  # (M, N) best unoccupied normalised gain, 0 if none


@dataclass
class MessageLedger:
    """Parameters exchanged between the UAV and the cluster heads.

    Backhaul traffic inside a cluster is free and not counted.
    """

    uplink_params: int = 0
    downlink_params: int = 0
    beacons: int = 0
    rounds: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.uplink_params + self.downlink_params

    def record(self, uplink: int = 0, downlink: int = 0, beacons: int = 0) -> None:
        self.uplink_params += uplink
        self.downlink_params += downlink
        self.beacons += beacons
        self.rounds.append({"uplink": uplink, "downlink": downlink, "beacons": beacons})

    def as_dict(self) -> dict:
        return {
            "uplink_params": self.uplink_params,
            "downlink_params": self.downlink_params,
            "beacons": self.beacons,
            "total": self.total,
            "rounds": [dict(r) for r in self.rounds],
        }


def one_round_bound(M: int, N: int) -> int:
    return 2 * M * N + 2 * N


def make_clusters(grid, cluster_size: int, F_tilde=None) -> ClusterPartition:
    """Tile the grid into clusters of ``cluster_size`` cells.

    Cells are swept row by row in axial order ``(b, a)``, reversing the
    direction on every other row so consecutive cells stay adjacent, and the
    sweep is cut into consecutive chunks; the last chunk may be smaller.  The head of each
    cluster is the member with the largest ``F_tilde`` (ties: lowest id),
    or the lowest id when no gains are given.
    """
    if cluster_size < 1:
        raise ValueError("cluster_size must be >= 1")
    J = grid.num_cells
    ax = grid.axial
    rows: dict[int, list[int]] = {}
    for j in sorted(range(J), key=lambda j: (int(ax[j, 1]), int(ax[j, 0]))):
        rows.setdefault(int(ax[j, 1]), []).append(j)
    order = []
    for i, b in enumerate(sorted(rows)):
        order.extend(rows[b] if i % 2 == 0 else rows[b][::-1])
    size = min(cluster_size, J)
    clusters = tuple(tuple(sorted(order[i : i + size])) for i in range(0, J, size))
    if F_tilde is None:
        heads = tuple(c[0] for c in clusters)
    else:
        F_tilde = np.asarray(F_tilde, dtype=float)
        heads = tuple(c[int(np.argmax(F_tilde[list(c)]))] for c in clusters)
    return ClusterPartition(clusters, heads)


def cluster_report(partition: ClusterPartition, channel_state, occupancy, anchor=None) -> ClusterReport:
    """Per-cluster aggregates ``V`` (sum of prices) and ``W`` (best free gain)."""
    N = occupancy.num_rbs
    anchor = np.zeros(N) if anchor is None else np.asarray(anchor, dtype=float)
    occ = occupancy.occupied
    gamma = occupancy.gamma
    F = channel_state.F
    pf = anchor[None, :] * F
    B = np.where(occ, F * gamma / (LN2 * (1.0 + pf + gamma) * (1.0 + pf)), 0.0)
    free_gain = np.where(occ, 0.0, F)
    V = np.empty((partition.M, N))
    W = np.empty((partition.M, N))
    for m, cells in enumerate(partition.clusters):
        idx = list(cells)
        V[m] = B[idx].sum(axis=0)
        W[m] = free_gain[idx].max(axis=0)
    return ClusterReport(V, W)


def uav_select_and_allocate(report: ClusterReport, weights: Weights, P_max: float):
    """UAV-side step: serving cluster per RB and priced water-filling.

    Returns ``(m_star, gain, power)``.  ``m_star[n]`` is -1 when no cluster
    has a free cell on RB ``n``; such RBs get no power.
    """
    W = np.asarray(report.W, dtype=float)
    m_star = np.argmax(W, axis=0)
    gain = W[m_star, np.arange(W.shape[1])]
    m_star = np.where(gain > 0, m_star, -1)
    price = weights.mu_g * np.asarray(report.V, dtype=float).sum(axis=0)
    p = priced_waterfill(gain, price, weights.mu_u, P_max)
    return m_star, gain, PowerAllocation(p)


def resolve_serving_cells(partition: ClusterPartition, channel_state, occupancy, m_star) -> Association:
    """Head-side step: best free cell inside the chosen cluster."""
    N = occupancy.num_rbs
    free_gain = np.where(occupancy.occupied, -np.inf, channel_state.F)
    j_star = np.full(N, -1, dtype=int)
    for n in range(N):
        m = int(m_star[n])
        if m < 0:
            continue
        cells = np.array(partition.clusters[m])
        j_star[n] = int(cells[np.argmax(free_gain[cells, n])])
    return Association(j_star)


def run_decentralized(
    channel_state,
    occupancy,
    partition: ClusterPartition,
    weights: Weights,
    P_max: float,
    mode: str = "one_round",
    epsilon: float = 1e-6,
    max_rounds: int = 200,
) -> tuple[IcicSolution, MessageLedger]:
    """Decentralised ICIC, either one-round or iterated to convergence.

    One-round: the UAV beacons, every head reports ``V`` and ``W`` at zero
    anchor (``2MN`` uplink), and the UAV returns RB index and cluster for
    each powered RB (``2|N_d|`` downlink).

    Iterative: later rounds re-anchor the prices at the current power.  The
    UAV sends the ``N`` powers to the heads, the heads send ``N`` prices and
    one ground-rate scalar each (``MN + M`` uplink), and the loop stops once
    the objective gains at most ``epsilon``, as in :func:`icic.sca_solve`.
    """
    if mode not in ("one_round", "iterative"):
        raise ValueError("mode must be 'one_round' or 'iterative'")
    M, N = partition.M, occupancy.num_rbs
    ledger = MessageLedger()

    report = cluster_report(partition, channel_state, occupancy, None)
    m_star, gain, power = uav_select_and_allocate(report, weights, P_max)
    ledger.record(uplink=2 * M * N, beacons=1)
    p = power.p

    diag = None
    if mode == "iterative":
        q = objective_value(channel_state, occupancy, gain, weights, np.zeros(N))
        q_new = objective_value(channel_state, occupancy, gain, weights, p)
        trace = [q, q_new]
        best_p, best_q = p, q_new
        converged = q_new - q <= epsilon
        rounds = 1
        q = q_new
        while not converged and rounds < max_rounds:
            rounds += 1
            report = ClusterReport(cluster_report(partition, channel_state, occupancy, p).V, report.W)
            p = uav_select_and_allocate(report, weights, P_max)[2].p
            ledger.record(uplink=M * N + M, downlink=N)
            q_new = objective_value(channel_state, occupancy, gain, weights, p)
            trace.append(q_new)
            if q_new > best_q:
                best_p, best_q = p, q_new
            converged = q_new - q <= epsilon
            q = q_new
        p = best_p
        diag = SolveDiagnostics(rounds, trace, converged, epsilon)

    served = np.where(p > 0, m_star, -1)
    assoc = resolve_serving_cells(partition, channel_state, occupancy, served)
    n_d = int(np.count_nonzero(p > 0))
    ledger.record(downlink=2 * n_d)
    rates = rate_report(occupancy, channel_state, assoc, p, weights)
    scheme = "decentral_one_round" if mode == "one_round" else "decentral_iterative"
    return IcicSolution(scheme, assoc, PowerAllocation(p), rates, diagnostics=diag), ledger


__all__ = [
    "ClusterPartition",
    "ClusterReport",
    "MessageLedger",
    "make_clusters",
    "cluster_report",
    "uav_select_and_allocate",
    "resolve_serving_cells",
    "run_decentralized",
    "one_round_bound",
]
