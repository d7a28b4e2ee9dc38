import itertools

import numpy as np
import pytest

from uavicic.channel import ChannelState
from uavicic.icic import (
    InvariantError,
    SurrogateCoeffs,
    altruistic,
    available_rbs_terrestrial,
    egoistic,
    objective_value,
    optimal_association,
    priced_waterfill,
    sca_solve,
    surrogate_coeffs,
    surrogate_solve,
    terrestrial_icic,
    waterfill,
)
from uavicic.rates import LN2, Weights, ground_rate_with_uav, ground_rate_no_uav
from uavicic.scheduler import RbOccupancy
from uavicic.topology import build_grid, neighbor_sets

from conftest import synthetic_instance


def uav_utility(p, F):
    return np.sum(np.log2(1 + p * F))


# -- association -------------------------------------------------------------


def test_association_argmax():
    F = np.array([[1.0], [2.0], [3.0], [9.0]])
    occ = RbOccupancy.from_mask(np.array([[False], [False], [False], [True]]), np.ones((4, 1)))
    a, Fu = optimal_association(ChannelState.from_normalized(F), occ)
    assert a.j_star.tolist() == [2] and Fu.tolist() == [3.0]


def test_association_single_free_cell_and_ties():
    F = np.array([[5.0, 2.0], [1.0, 2.0]])
    occ = RbOccupancy.from_mask(np.array([[True, False], [False, False]]), np.ones((2, 2)))
    a, _ = optimal_association(ChannelState.from_normalized(F), occ)
    assert a.j_star.tolist() == [1, 0]


def test_association_all_occupied_raises():
    occ = RbOccupancy.from_mask(np.ones((2, 1), bool), np.ones((2, 1)))
    with pytest.raises(InvariantError):
        optimal_association(ChannelState.from_normalized(np.ones((2, 1))), occ)


def test_association_brute_force(rng):
    for _ in range(30):
        J, N = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        ch, occ = synthetic_instance(rng, J, N)
        p = rng.uniform(0, 2, N)
        w = Weights(1.0, float(rng.uniform(0, 2)))
        a, Fu = optimal_association(ch, occ)
        best = objective_value(ch, occ, Fu, w, p)
        for assoc in itertools.product(*[occ.Jc_of_n(n) for n in range(N)]):
            Fa = ch.F[list(assoc), np.arange(N)]
            assert objective_value(ch, occ, Fa, w, p) <= best + 1e-12


# -- water-filling -----------------------------------------------------------


def test_waterfill_examples():
    assert waterfill([3.0], 2.5).p.tolist() == [2.5]
    assert waterfill([1.0, 1.0], 2.0).p.tolist() == pytest.approx([1.0, 1.0])
    p = waterfill([4.0, 1.0], 1.0).p
    assert p.tolist() == pytest.approx([0.875, 0.125], abs=1e-14)
    # grid check of the same split
    x = np.linspace(0, 1, 100001)
    u = np.log2(1 + 4 * x) + np.log2(1 + (1 - x))
    assert abs(x[np.argmax(u)] - 0.875) <= 1e-5
    assert waterfill([1.0, 2.0], 0.0).p.tolist() == [0.0, 0.0]
    assert waterfill([1.0, 0.0], 1.0).p.tolist() == [1.0, 0.0]


def test_waterfill_kkt(rng):
    for _ in range(50):
        F = rng.uniform(0.01, 100, 8)
        P = float(rng.uniform(0.01, 5))
        p = waterfill(F, P).p
        assert p.sum() == pytest.approx(P, rel=1e-12)
        level = (p + 1 / F)[p > 0]
        assert np.ptp(level) < 1e-9 * level.max()
        assert np.all(1 / F[p == 0] >= level.max() - 1e-12)


# -- baselines ---------------------------------------------------------------


def test_egoistic_single_rb_and_empty_network(rng):
    ch, occ = synthetic_instance(rng, J=3, N=1)
    assert egoistic(ch, occ, 0.3).power.p.tolist() == [0.3]
    empty = RbOccupancy.from_mask(np.zeros((3, 4), bool), np.zeros((3, 4)))
    ch = ChannelState.from_normalized(rng.uniform(1, 5, (3, 4)))
    e, a = egoistic(ch, empty, 1.0), altruistic(ch, empty, 1.0)
    assert np.array_equal(e.power.p, a.power.p)


def test_altruistic_denied_and_single_free():
    occ = RbOccupancy.from_mask(np.array([[True, False], [False, True]]), np.ones((2, 2)))
    ch = ChannelState.from_normalized(np.full((2, 2), 2.0))
    sol = altruistic(ch, occ, 1.0)
    assert sol.denied and sol.rates.uav_rate == 0.0
    occ = RbOccupancy.from_mask(np.array([[True, False], [False, False]]), np.ones((2, 2)))
    sol = altruistic(ch, occ, 1.0)
    assert not sol.denied
    assert sol.power.p.tolist() == [0.0, 1.0]
    assert sol.rates.ground_rate == sol.rates.ground_rate_no_uav


def test_terrestrial_available_set_brute_force(rng):
    g = build_grid(500.0, 2, 25.0)
    ns = neighbor_sets(g, 2)
    J, N = g.num_cells, 12
    for _ in range(20):
        ch, occ = synthetic_instance(rng, J, N, occ_prob=0.05)
        q = int(rng.integers(0, 3))
        j_u = int(np.argmax(ch.F_tilde))
        protected = {j_u} | {k for k in range(J) if 1 <= g.hex_distance[j_u, k] <= q}
        expect = [n for n in range(N) if protected <= set(occ.Jc_of_n(n).tolist())]
        assert available_rbs_terrestrial(occ, ns, q, j_u).tolist() == expect
        sol = terrestrial_icic(ch, occ, ns, q, 1.0)
        assert sol.denied == (not expect)
        assert np.all(sol.power.p[[n for n in range(N) if n not in expect]] == 0)


def test_terrestrial_blocked_by_neighbor_and_empty_network():
    g = build_grid(500.0, 1, 25.0)
    ns = neighbor_sets(g, 1)
    F = np.ones((7, 2))
    F[0] = 5.0
    mask = np.zeros((7, 2), bool)
    mask[3, 0] = True
    ch = ChannelState.from_normalized(F)
    occ = RbOccupancy.from_mask(mask, np.ones((7, 2)))
    assert available_rbs_terrestrial(occ, ns, 1, 0).tolist() == [1]
    assert available_rbs_terrestrial(occ, ns, 0, 0).tolist() == [0, 1]
    empty = RbOccupancy.from_mask(np.zeros((7, 2), bool), np.zeros((7, 2)))
    t = terrestrial_icic(ch, empty, ns, 1, 1.0)
    assert t.power.p == pytest.approx(egoistic(ch, empty, 1.0).power.p)


# -- surrogate ---------------------------------------------------------------


def test_surrogate_coeff_example():
    occ = RbOccupancy.from_mask(np.array([[True, False], [False, False]]), np.array([[1.0, 0], [0, 0]]))
    ch = ChannelState.from_normalized(np.ones((2, 2)))
    c = surrogate_coeffs(ch, occ, np.zeros(2))
    assert c.B[0] == pytest.approx(1 / (2 * LN2), rel=1e-14)
    assert c.B[0] == pytest.approx(0.7213, abs=5e-5)
    assert c.B[1] == 0.0
    assert c.A == pytest.approx(1.0)


def test_surrogate_b_is_negative_gradient(rng):
    for _ in range(20):
        ch, occ = synthetic_instance(rng, J=5, N=4)
        anchor = rng.uniform(0.01, 2, 4)
        B = surrogate_coeffs(ch, occ, anchor).B
        h = 1e-6
        for n in range(4):
            e = np.zeros(4)
            e[n] = h
            fd = -(ground_rate_with_uav(occ, ch, anchor + e)[0] - ground_rate_with_uav(occ, ch, anchor - e)[0]) / (2 * h)
            if B[n] == 0:
                assert abs(fd) < 1e-8
            else:
                assert fd == pytest.approx(B[n], rel=1e-5)


def test_surrogate_lower_bound(rng):
    for _ in range(30):
        ch, occ = synthetic_instance(rng, J=5, N=4)
        anchor = rng.uniform(0, 2, 4)
        c = surrogate_coeffs(ch, occ, anchor)
        assert ground_rate_with_uav(occ, ch, anchor)[0] == pytest.approx(c.A, abs=1e-9)
        for _ in range(20):
            p = rng.uniform(0, 3, 4)
            lb = c.A - np.sum(c.B * (p - anchor))
            assert ground_rate_with_uav(occ, ch, p)[0] >= lb - 1e-9


def test_priced_waterfill_example():
    p = priced_waterfill([10.0], [1 / LN2], 1.0, 5.0)
    assert p[0] == pytest.approx(0.9, abs=1e-12)
    x = np.linspace(0, 5, 500001)
    s = np.log2(1 + 10 * x) - x / LN2
    assert abs(x[np.argmax(s)] - 0.9) <= 1e-5
    assert priced_waterfill([10.0], [1 / LN2], 1.0, 0.5)[0] == pytest.approx(0.5)


def test_priced_waterfill_zero_prices_is_waterfilling(rng):
    F = rng.uniform(0.5, 10, 5)
    assert priced_waterfill(F, np.zeros(5), 1.0, 2.0) == pytest.approx(waterfill(F, 2.0).p, abs=1e-12)


def test_priced_waterfill_zero_uav_weight():
    coeffs = SurrogateCoeffs(0.0, np.array([0.3, 0.0]), np.zeros(2))
    assert surrogate_solve(np.ones(2), coeffs, Weights(0.0, 1.0), 1.0).p.tolist() == [0.0, 0.0]


def test_priced_waterfill_random_optimality(rng):
    for trial in range(10):
        N = 4
        F = rng.uniform(0.5, 20, N)
        c = rng.uniform(0, 2, N)
        if trial % 2:
            c[0] = 0.0  # mixed branch
        mu_u, P = float(rng.uniform(0.2, 2)), float(rng.uniform(0.1, 3))
        p = priced_waterfill(F, c, mu_u, P)
        assert p.sum() <= P * (1 + 1e-9) and np.all(p >= 0)

        def s(x):
            return mu_u * np.sum(np.log2(1 + x * F), axis=-1) - np.sum(c * x, axis=-1)

        pts = rng.dirichlet(np.ones(N + 1), 10_000)[:, :N] * P
        assert s(p) >= s(pts).max() - 1e-12


# -- SCA ---------------------------------------------------------------------


def test_sca_zero_ground_weight_is_egoistic(rng):
    for _ in range(10):
        ch, occ = synthetic_instance(rng, J=5, N=4)
        w = Weights(1.0, 0.0)
        s, e = sca_solve(ch, occ, w, 1.0), egoistic(ch, occ, 1.0, w)
        assert s.diagnostics.iterations <= 2
        assert abs(s.objective - e.objective) <= 1e-9


def test_sca_zero_uav_weight_gives_zero_power(rng):
    ch, occ = synthetic_instance(rng, J=5, N=4)
    s = sca_solve(ch, occ, Weights(0.0, 1.0), 1.0)
    assert np.all(s.power.p == 0)
    assert s.rates.ground_rate == pytest.approx(ground_rate_no_uav(occ))


def test_sca_monotone_budget_and_association(rng):
    for _ in range(100):
        J, N = int(rng.integers(2, 7)), int(rng.integers(1, 7))
        ch, occ = synthetic_instance(rng, J, N)
        w = Weights(float(rng.uniform(0.1, 2)), float(rng.uniform(0.1, 2)))
        P = float(rng.uniform(0.05, 3))
        s = sca_solve(ch, occ, w, P)
        assert np.all(np.diff(s.diagnostics.objective_trace) >= -1e-12)
        assert s.power.total <= P * (1 + 1e-9)
        assert np.array_equal(s.association.j_star, optimal_association(ch, occ)[0].j_star)


def test_sca_ground_heavy_weights_protect_ground(rng):
    for _ in range(30):
        ch, occ = synthetic_instance(rng, J=4, N=4)
        w = Weights(1.0, float(rng.uniform(1, 3)))
        s, e = sca_solve(ch, occ, w, 1.0), egoistic(ch, occ, 1.0, w)
        assert s.objective >= e.objective - 1e-9
        assert s.rates.ground_rate >= e.rates.ground_rate - 1e-9
        assert s.rates.uav_rate <= e.rates.uav_rate + 1e-9


def test_sca_two_rb_grid_oracle(rng):
    P = 1.0
    g = np.linspace(0, P, 400)
    X, Y = np.meshgrid(g, g, indexing="ij")
    feas = X + Y <= P + 1e-12
    for _ in range(20):
        mask = np.array([[True, False], [False, False]])
        gamma = np.array([[rng.uniform(1, 30), 0.0], [0.0, 0.0]])
        F = rng.uniform(0.5, 20, (2, 2))
        ch, occ = ChannelState.from_normalized(F), RbOccupancy.from_mask(mask, gamma)
        w = Weights(1.0, float(rng.uniform(0.2, 3)))
        s = sca_solve(ch, occ, w, P, epsilon=1e-10, max_iters=5000)
        _, Fu = optimal_association(ch, occ)
        Q = (w.mu_u * (np.log2(1 + X * Fu[0]) + np.log2(1 + Y * Fu[1]))
             + w.mu_g * np.log2(1 + gamma[0, 0] / (1 + X * F[0, 0])))
        assert s.objective >= Q[feas].max() - 1e-6


def test_sca_rejects_bad_epsilon(rng):
    ch, occ = synthetic_instance(rng)
    with pytest.raises(ValueError):
        sca_solve(ch, occ, Weights(), 1.0, epsilon=0.0)
