import itertools

import numpy as np
import pytest

from uavicic.channel import ChannelState
from uavicic.scheduler import (
    GroundUe,
    RbOccupancy,
    assign_rbs,
    compute_ground_sinrs,
    place_ues,
    virtualize_multi_rb_ue,
)
from uavicic.topology import build_grid, neighbor_sets


def pair_check(occ, grid, q):
    """Brute force: co-channel cells are more than q rings apart."""
    d = grid.hex_distance
    for n in range(occ.num_rbs):
        cells = occ.J_of_n(n)
        for j, k in itertools.combinations(cells, 2):
            if d[j, k] <= q:
                return False
    return True


def test_place_ues_inside_serving_cell(rng):
    g = build_grid(500.0, 3, 25.0)
    ues = place_ues(g, 200, rng)
    assert len(ues) == 200
    for u in ues:
        assert g.locate(u.position) == u.serving_cell


def test_place_ues_per_cell_counts(rng):
    g = build_grid(500.0, 2, 25.0)
    ues = place_ues(g, g.num_cells, rng, per_cell=[1] * g.num_cells)
    assert sorted(u.serving_cell for u in ues) == list(range(g.num_cells))
    with pytest.raises(ValueError):
        place_ues(g, 5, rng, per_cell=[1] * g.num_cells)


def test_place_ues_deterministic():
    g = build_grid(500.0, 2, 25.0)
    a = place_ues(g, 10, np.random.default_rng(1))
    b = place_ues(g, 10, np.random.default_rng(1))
    assert a == b


def test_single_ue(rng):
    g = build_grid(500.0, 2, 25.0)
    ues = place_ues(g, 1, rng)
    occ = assign_rbs(ues, neighbor_sets(g, 2), 2, 3)
    assert occ.occupied.sum() == 1


def test_default_scale_reuse_and_constraint(rng):
    g = build_grid(500.0, 5, 25.0)
    ns = neighbor_sets(g, 2)
    for rb_choice in ("lowest", "random"):
        ues = place_ues(g, 60, rng)
        occ = assign_rbs(ues, ns, 2, 30, rng, rb_choice=rb_choice)
        assert not occ.blocked
        assert max(len(occ.J_of_n(n)) for n in range(30)) >= 2
        assert pair_check(occ, g, 2)
        assert all(occ.Jc_of_n(n).size > 0 for n in range(30))


def test_adjacent_cells_get_different_rbs():
    g = build_grid(500.0, 1, 25.0)
    ues = [GroundUe(0, 0, (0.0, 0.0)), GroundUe(1, 1, g.cells[1].center)]
    occ = assign_rbs(ues, neighbor_sets(g, 1), 1, 2)
    assert {u.rb for u in occ.ues} == {0, 1}


def test_full_orthogonality_when_q_covers_grid(rng):
    g = build_grid(500.0, 2, 25.0)
    ues = place_ues(g, 8, rng)
    occ = assign_rbs(ues, neighbor_sets(g, 4), 4, 8)
    assert sorted(u.rb for u in occ.ues) == list(range(8))
    assert occ.N_prime.size == 0


def test_blocked_reported_not_dropped(rng):
    g = build_grid(500.0, 1, 25.0)
    ues = place_ues(g, 5, rng, per_cell=[5, 0, 0, 0, 0, 0, 0])
    occ = assign_rbs(ues, neighbor_sets(g, 1), 1, 3)
    assert len(occ.blocked) == 2
    assert len(occ.ues) == 5
    assert sum(u.rb is not None for u in occ.ues) == 3


def test_virtual_ues():
    ue = GroundUe(7, 0, (0.0, 0.0))
    assert virtualize_multi_rb_ue(ue, 1, 4) == [ue]
    vs = virtualize_multi_rb_ue(ue, 3, 4, first_id=10)
    g = build_grid(500.0, 0, 25.0)
    occ = assign_rbs(vs, neighbor_sets(g, 1), 1, 4)
    assert len({u.rb for u in occ.ues}) == 3
    full = assign_rbs(virtualize_multi_rb_ue(ue, 4, 4, first_id=10), neighbor_sets(g, 1), 1, 4)
    assert full.N_prime.size == 0
    with pytest.raises(ValueError):
        virtualize_multi_rb_ue(ue, 5, 4)


def test_occupancy_partition(rng):
    occ = RbOccupancy.from_mask(rng.random((6, 5)) < 0.5)
    for n in range(5):
        a, b = set(occ.J_of_n(n)), set(occ.Jc_of_n(n))
        assert a | b == set(range(6)) and not a & b
    assert set(occ.N_prime) == {n for n in range(5) if not occ.J_of_n(n).size}


def test_sinr_unit_and_linearity(rng):
    occ = RbOccupancy.from_mask(np.array([[True]]))
    ch = ChannelState.build(np.ones((1, 1)), np.ones(1), np.ones((1, 1)))
    assert compute_ground_sinrs(occ, ch, 1.0)[0, 0] == 1.0
    assert compute_ground_sinrs(occ, ch, 2.0)[0, 0] == 2.0


def test_sinr_term_by_term(rng):
    g = build_grid(500.0, 2, 25.0)
    ues = place_ues(g, 10, rng, tx_power=0.15)
    occ = assign_rbs(ues, neighbor_sets(g, 2), 2, 4)
    J, N = occ.ue_of.shape
    H = rng.uniform(1e-12, 1e-9, (J, N))
    s2 = rng.uniform(1e-15, 1e-13, (J, N))
    ch = ChannelState.build(H, np.ones(J), s2)
    gamma = compute_ground_sinrs(occ, ch)
    for j in range(J):
        for n in range(N):
            expect = 0.15 * H[j, n] / s2[j, n] if occ.ue_of[j, n] >= 0 else 0.0
            assert gamma[j, n] == pytest.approx(expect, rel=1e-12)
