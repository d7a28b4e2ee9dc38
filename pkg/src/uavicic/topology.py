"""Hexagonal cell layout, q-tier neighbourhoods and the UAV's coordination region.

Cells are flat-top hexagons generated in axial coordinates ``(a, b)``.  Cell
index 0 sits at the origin; indices then grow ring by ring, counterclockwise
from the +x axis.  All cell references in this package are these 0-based
indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Axial unit steps in counterclockwise order, flat-top orientation.
_AXIAL_DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


@dataclass(frozen=True)
class Cell:
    id: int
    center: tuple[float, float]
    bs_height: float
    axial: tuple[int, int]
    ring: int


@dataclass(frozen=True)
class HexGrid:
    cell_radius: float
    tiers: int
    cells: tuple[Cell, ...]

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def centers(self) -> np.ndarray:
        """(J, 2) array of BS positions in metres."""
        return np.array([c.center for c in self.cells], dtype=float)

    @cached_property
    def axial(self) -> np.ndarray:
        return np.array([c.axial for c in self.cells], dtype=int)

    @property
    def bs_height(self) -> float:
        return self.cells[0].bs_height

    @cached_property
    def hex_distance(self) -> np.ndarray:
        """(J, J) matrix of ring distances between cells."""
        a = self.axial[:, 0]
        b = self.axial[:, 1]
        da = a[:, None] - a[None, :]
        db = b[:, None] - b[None, :]
        return (np.abs(da) + np.abs(db) + np.abs(da + db)) // 2

    def locate(self, xy) -> int:
        """Index of the cell whose hexagon contains ``xy`` (nearest centre)."""
        d2 = np.sum((self.centers - np.asarray(xy, dtype=float)) ** 2, axis=1)
        return int(np.argmin(d2))

    def contains(self, xy) -> bool:
        """True when ``xy`` lies inside one of the grid's hexagons."""
        j = self.locate(xy)
        return point_in_hexagon(np.asarray(xy, float) - self.centers[j], self.cell_radius)


def axial_to_xy(a: int, b: int, radius: float) -> tuple[float, float]:
    x = radius * 1.5 * a
    y = radius * math.sqrt(3.0) * (b + a / 2.0)
    return x, y


def point_in_hexagon(offset, radius: float) -> bool:
    """Membership test for a flat-top hexagon centred at the origin."""
    x, y = abs(float(offset[0])), abs(float(offset[1]))
    h = math.sqrt(3.0) / 2.0 * radius
    tol = 1e-9 * radius
    return y <= h + tol and math.sqrt(3.0) * x + y <= math.sqrt(3.0) * radius + tol


def _ring(k: int) -> list[tuple[int, int]]:
    if k == 0:
        return [(0, 0)]
    out = []
    # Start at the corner k steps along direction 4 (0, -1) then walk the six sides.
    a, b = k * _AXIAL_DIRECTIONS[4][0], k * _AXIAL_DIRECTIONS[4][1]
    for da, db in _AXIAL_DIRECTIONS:
        for _ in range(k):
            out.append((a, b))
            a, b = a + da, b + db
    return out


def build_grid(cell_radius: float, tiers: int, bs_height: float) -> HexGrid:
    """Generate ``1 + 3 t (t + 1)`` hexagonal cells centred on the origin."""
    if tiers < 0:
        raise ValueError(f"tiers must be >= 0, got {tiers}")
    if cell_radius <= 0:
        raise ValueError(f"cell_radius must be > 0, got {cell_radius}")
    if bs_height <= 0:
        raise ValueError(f"bs_height must be > 0, got {bs_height}")

    cells = []
    for k in range(tiers + 1):
        members = []
        for a, b in _ring(k):
            x, y = axial_to_xy(a, b, cell_radius)
            angle = math.atan2(y, x)
            if angle < -1e-9:
                angle += 2.0 * math.pi
            members.append((max(angle, 0.0), a, b, x, y))
        members.sort()
        for _, a, b, x, y in members:
            cells.append(Cell(len(cells), (x, y), float(bs_height), (a, b), k))
    return HexGrid(float(cell_radius), int(tiers), tuple(cells))


@dataclass(frozen=True)
class NeighborSets:
    """Per-cell sets of cells lying within the first ``q`` rings."""

    hex_distance: np.ndarray
    q_max: int

    def within(self, j: int, q: int) -> frozenset[int]:
        if q > self.q_max:
            raise ValueError(f"q={q} exceeds q_max={self.q_max}")
        d = self.hex_distance[j]
        return frozenset(int(k) for k in np.flatnonzero((d >= 1) & (d <= q)))

    def mask(self, q: int) -> np.ndarray:
        """Boolean (J, J) matrix: ``mask[j, k]`` iff ``k`` in N_j(q)."""
        d = self.hex_distance
        return (d >= 1) & (d <= q)


def neighbor_sets(grid: HexGrid, q_max: int) -> NeighborSets:
    return NeighborSets(grid.hex_distance, int(q_max))


def coverage_radius(half_beamwidth_deg: float, uav_height: float, bs_height: float) -> float:
    """Horizontal radius of the UAV main-lobe footprint at BS height."""
    if half_beamwidth_deg >= 90.0:
        return math.inf
    return (uav_height - bs_height) * math.tan(math.radians(half_beamwidth_deg))


def icic_region(grid: HexGrid, uav_xy, antenna=None, uav_height: float | None = None) -> frozenset[int]:
    """Cells whose BS receives the UAV's signal.

    With no antenna (or an isotropic one) every generated cell is in the
    region.  A directional antenna restricts it to BSs within the main-lobe
    footprint radius.
    """
    everything = frozenset(range(grid.num_cells))
    if antenna is None or antenna.is_isotropic:
        return everything
    if uav_height is None:
        raise ValueError("uav_height is required for a directional antenna")
    r_c = coverage_radius(antenna.half_beamwidth_deg, uav_height, grid.bs_height)
    d = np.hypot(*(grid.centers - np.asarray(uav_xy, float)).T)
    return frozenset(int(j) for j in np.flatnonzero(d <= r_c))
