"""Ground UE placement and RB assignment under the q-tier reuse criterion."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .topology import HexGrid, NeighborSets, point_in_hexagon


@dataclass(frozen=True)
class GroundUe:
    id: int
    serving_cell: int
    position: tuple[float, float]
    height: float = 1.5
    tx_power: float = 0.19952623149688797  # 23 dBm
    rb: int | None = None
    parent: int | None = None  # original UE id for virtual UEs


@dataclass(frozen=True)
class RbOccupancy:
    """Which cell uses which RB, and the resulting ground SINRs.

    ``ue_of[j, n]`` is the UE id transmitting in cell ``j`` on RB ``n`` or -1.
    ``gamma`` is filled in by :func:`compute_ground_sinrs`.
    """

    ue_of: np.ndarray
    ues: tuple[GroundUe, ...] = ()
    blocked: tuple[int, ...] = ()
    gamma: np.ndarray | None = None

    @property
    def occupied(self) -> np.ndarray:
        return self.ue_of >= 0

    @property
    def num_cells(self) -> int:
        return self.ue_of.shape[0]

    @property
    def num_rbs(self) -> int:
        return self.ue_of.shape[1]

    def J_of_n(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.ue_of[:, n] >= 0)

    def Jc_of_n(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.ue_of[:, n] < 0)

    @property
    def N_prime(self) -> np.ndarray:
        """RBs no cell uses."""
        return np.flatnonzero(~self.occupied.any(axis=0))

    def with_gamma(self, gamma) -> "RbOccupancy":
        gamma = np.where(self.occupied, np.asarray(gamma, dtype=float), 0.0)
        return dataclasses.replace(self, gamma=gamma)

    @classmethod
    def from_mask(cls, occupied, gamma=None) -> "RbOccupancy":
        """Synthetic occupancy: one anonymous UE per occupied (j, n)."""
        occupied = np.asarray(occupied, dtype=bool)
        ue_of = np.full(occupied.shape, -1, dtype=int)
        ue_of[occupied] = np.arange(int(occupied.sum()))
        occ = cls(ue_of)
        return occ.with_gamma(gamma) if gamma is not None else occ


def _sample_in_hexagon(rng, radius: float) -> tuple[float, float]:
    h = np.sqrt(3.0) / 2.0 * radius
    while True:
        x = rng.uniform(-radius, radius)
        y = rng.uniform(-h, h)
        if point_in_hexagon((x, y), radius):
            return float(x), float(y)


def place_ues(
    grid: HexGrid,
    K: int,
    rng,
    per_cell=None,
    height: float = 1.5,
    tx_power: float = 0.19952623149688797,
) -> list[GroundUe]:
    """Drop ``K`` UEs uniformly inside their cells.

    Per-cell counts come from ``per_cell`` when given (must sum to K), else
    from a uniform multinomial over the cells.  The UE's serving cell is the
    cell containing it.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    J = grid.num_cells
    if per_cell is not None:
        counts = np.asarray(per_cell, dtype=int)
        if counts.shape != (J,) or counts.sum() != K or (counts < 0).any():
            raise ValueError(f"per-cell UE counts must be {J} non-negative ints summing to K={K}")
    else:
        counts = rng.multinomial(K, np.full(J, 1.0 / J))
    ues = []
    for j, count in enumerate(counts):
        cx, cy = grid.cells[j].center
        for _ in range(int(count)):
            dx, dy = _sample_in_hexagon(rng, grid.cell_radius)
            ues.append(GroundUe(len(ues), j, (cx + dx, cy + dy), height, tx_power))
    return ues


def virtualize_multi_rb_ue(ue: GroundUe, L: int, N: int, first_id: int | None = None) -> list[GroundUe]:
    """Split a UE that needs ``L`` RBs into ``L`` single-RB virtual UEs."""
    if L < 1 or L > N:
        raise ValueError(f"L must lie in [1, N={N}], got {L}")
    if L == 1:
        return [ue]
    base = ue.id if first_id is None else first_id
    return [dataclasses.replace(ue, id=base + i, parent=ue.id, rb=None) for i in range(L)]


def assign_rbs(
    ues,
    nsets: NeighborSets,
    q: int,
    N: int,
    rng=None,
    order: str = "id",
    rb_choice: str = "lowest",
    num_cells: int | None = None,
) -> RbOccupancy:
    """Give each UE one RB that no cell within ``q`` rings (nor its own cell) uses.

    ``order="id"`` handles cells in id order and UEs in placement order;
    ``order="random"`` shuffles the UE order.  ``rb_choice`` picks the lowest
    feasible RB or a uniformly random one.  UEs with no feasible RB end up in
    ``blocked``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if order not in ("id", "random") or rb_choice not in ("lowest", "random"):
        raise ValueError("order must be 'id'|'random' and rb_choice 'lowest'|'random'")
    if (order == "random" or rb_choice == "random") and rng is None:
        raise ValueError("random modes need an rng")
    J = nsets.hex_distance.shape[0] if num_cells is None else num_cells
    conflict = nsets.mask(q) | np.eye(J, dtype=bool)
    ue_of = np.full((J, N), -1, dtype=int)
    used = np.zeros((J, N), dtype=bool)

    ues = list(ues)
    idx = sorted(range(len(ues)), key=lambda i: (ues[i].serving_cell, i))
    if order == "random":
        idx = [idx[i] for i in rng.permutation(len(idx))]

    assigned = {}
    blocked = []
    for i in idx:
        ue = ues[i]
        j = ue.serving_cell
        busy = used[conflict[j]].any(axis=0)
        free = np.flatnonzero(~busy)
        if free.size == 0:
            blocked.append(ue.id)
            continue
        n = int(free[0] if rb_choice == "lowest" else rng.choice(free))
        used[j, n] = True
        ue_of[j, n] = ue.id
        assigned[i] = n
    out = tuple(dataclasses.replace(u, rb=assigned.get(i)) for i, u in enumerate(ues))
    return RbOccupancy(ue_of, out, tuple(sorted(blocked)))


def compute_ground_sinrs(occupancy: RbOccupancy, channel_state, tx_power=None) -> np.ndarray:
    """gamma_j(n) = p_j(n) H_j(n) / sigma_j^2(n) on occupied (j, n), 0 elsewhere.

    Transmit powers come from ``tx_power`` ((J, N) or scalar) or the UEs
    recorded in the occupancy.
    """
    occ = occupancy.occupied
    if tx_power is None:
        by_id = {u.id: u.tx_power for u in occupancy.ues}
        tx = np.zeros(occ.shape)
        for j, n in zip(*np.nonzero(occ)):
            tx[j, n] = by_id[occupancy.ue_of[j, n]]
    else:
        tx = np.broadcast_to(np.asarray(tx_power, dtype=float), occ.shape)
    return np.where(occ, tx * channel_state.H / channel_state.sigma2, 0.0)
