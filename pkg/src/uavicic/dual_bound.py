"""Lagrangian upper bound on the weighted sum-rate problem.

Relaxing the power budget with a price ``nu`` splits the problem into one
scalar subproblem per RB.  RBs without ground users have a closed form;
the rest are solved globally by outer polyblock approximation (OPA) on the
equivalent two-variable monotone problem ``max z1 z2`` over a normal set.
The outer problem ``min_nu g(nu)`` is convex and is solved by bisection on
the subgradient ``P_max - sum_n p_n(nu)``.

OPA runs in log coordinates: boxes, rays ``delta * z`` and the vertex
update all map one-to-one onto shifts of ``log z``, which keeps utilities
with many interferers representable.
"""
from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .icic import optimal_association, waterfill

LN2 = math.log(2.0)


class OpaError(RuntimeError):
    pass


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class DualSubproblem:
    F_u: float
    gammas: tuple[float, ...]
    Fs: tuple[float, ...]
    nu: float
    mu_u: float = 1.0
    mu_g: float = 1.0
    rb: int = 0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("the dual price nu must be positive")
        if len(self.gammas) != len(self.Fs):
            raise ValueError("gammas and Fs must have equal length")

    def log_ground(self, p: float) -> float:
        """Natural log of the ground factor J(p), price term included."""
        s = -self.nu * p * LN2
        mg = self.mu_g
        for g, f in zip(self.gammas, self.Fs):
            s += mg * math.log1p(g / (1.0 + p * f))
        return s

    def value(self, p):
        """Subproblem objective in bps/Hz (vectorised over ``p``)."""
        p = np.asarray(p, dtype=float)
        v = self.mu_u * np.log1p(p * self.F_u) / LN2 - self.nu * p
        for g, f in zip(self.gammas, self.Fs):
            v = v + self.mu_g * np.log1p(g / (1.0 + p * f)) / LN2
        return v


@dataclass
class Polyblock:
    """Vertex set in log coordinates plus the best feasible point found."""

    vertices: list[tuple[float, float]]
    best_feasible: tuple[float, float] | None = None
    best_log_utility: float = -math.inf
    best_p: float = 0.0

    def utility(self, vertex) -> float:
        return math.exp(vertex[0] + vertex[1])


@dataclass(frozen=True)
class OpaResult:
    p: float
    value: float  # subproblem objective at p, bps/Hz
    upper: float  # certified upper bound on the subproblem optimum, bps/Hz
    utility: float
    iterations: int
    upper_trace: tuple[float, ...] = ()
    feasible_trace: tuple[float, ...] = ()


def opa_upper_power(sub: DualSubproblem) -> float:
    """Largest power the subproblem optimum can use."""
    if sub.F_u <= 0:
        return 0.0
    return max(sub.mu_u / (sub.nu * LN2) - 1.0 / sub.F_u, 0.0)


def opa_initial_box(sub: DualSubproblem, p_hat: float) -> Polyblock:
    l1 = sub.mu_u * math.log1p(p_hat * sub.F_u)
    l2 = sub.mu_g * sum(math.log1p(g) for g in sub.gammas)
    return Polyblock([(l1, l2)])


def _chi(sub: DualSubproblem, log_z1: float) -> float:
    """Smallest power meeting the first slack constraint at ``exp(log_z1)``."""
    if sub.mu_u == 0:
        return 0.0 if log_z1 <= 0 else math.inf
    if sub.F_u <= 0:
        return 0.0 if log_z1 <= 0 else math.inf
    return math.expm1(log_z1 / sub.mu_u) / sub.F_u


def _excess(sub: DualSubproblem, l1: float, l2: float, t: float) -> float:
    """Positive iff the scaled vertex ``(l1 + t, l2 + t)`` is infeasible."""
    p = max(0.0, _chi(sub, l1 + t))
    if math.isinf(p):
        return math.inf
    return l2 + t - sub.log_ground(p)


def _project_log(sub, v, tol=1e-9, max_steps=200):
    """Largest feasible shift ``t = log delta <= 0`` of vertex ``v``.

    Returns ``(t_feasible, t_infeasible, p)`` bracketing the boundary within
    ``tol``; ``p`` witnesses feasibility of ``t_feasible``.  The bracket is
    shrunk by Illinois false position with a bisection fallback, so both
    ends keep their feasibility status throughout.
    """
    l1, l2 = v
    f_b = _excess(sub, l1, l2, 0.0)
    if f_b <= 0:
        return 0.0, 0.0, max(0.0, _chi(sub, l1))
    # delta with delta*z1 <= 1 and delta*z2 <= J(0) is feasible with p = 0
    a = min(-l1, sub.log_ground(0.0) - l2, 0.0)
    f_a = _excess(sub, l1, l2, a)
    while f_a > 0:  # rounding at the corner
        a -= max(tol, 1e-12 * abs(a))
        f_a = _excess(sub, l1, l2, a)
    b = 0.0
    if math.isinf(f_b):
        f_b = 1e300
    side = 0
    width = b - a
    for step in range(max_steps):
        if b - a <= tol:
            break
        if step % 3 == 2 and b - a > 0.5 * width:
            c = 0.5 * (a + b)  # slow progress: bisect
        else:
            c = b - f_b * (b - a) / (f_b - f_a)
            if not a < c < b:
                c = 0.5 * (a + b)
        if step % 3 == 2:
            width = b - a
        f_c = _excess(sub, l1, l2, c)
        if f_c > 0:
            b, f_b = c, min(f_c, 1e300)
            if side == 1:
                f_a *= 0.5
            side = 1
        else:
            a, f_a = c, f_c
            if side == -1:
                f_b *= 0.5
            side = -1
    else:
        raise OpaError("projection failed to converge")
    return a, b, max(0.0, _chi(sub, l1 + a))


def opa_project(sub: DualSubproblem, vertex, tol: float = 1e-9):
    """Scale ``vertex`` towards the origin onto the feasible boundary.

    ``vertex`` is in linear coordinates.  Returns ``(r, delta)`` with
    ``r = delta * vertex`` feasible and ``delta`` maximal within ``tol``.
    """
    z1, z2 = vertex
    if z1 <= 0 or z2 <= 0:
        return (0.0, 0.0), 0.0
    lo, _, _ = _project_log(sub, (math.log(z1), math.log(z2)), tol)
    delta = math.exp(lo)
    return (delta * z1, delta * z2), delta


def opa_iterate(
    sub: DualSubproblem,
    epsilon: float = 1e-6,
    relative: bool = False,
    max_vertices: int = 100_000,
    max_iters: int = 10_000_000,
    delta_tol: float = 1e-9,
) -> OpaResult:
    """Outer polyblock approximation of the RB subproblem.

    Stops when the best vertex utility exceeds the best feasible utility by
    at most ``epsilon`` (or by the fraction ``epsilon`` when ``relative``).
    In two dimensions the polyblock is a staircase: vertices sorted by the
    first coordinate have decreasing second coordinate, and every cut
    replaces a contiguous run of vertices by two new ones.
    """
    p_hat = opa_upper_power(sub)
    block = opa_initial_box(sub, p_hat)
    # both ends of the power range are feasible and seed the incumbent
    for p_end in (0.0, p_hat):
        pt = (sub.mu_u * math.log1p(p_end * sub.F_u), sub.log_ground(p_end))
        if pt[0] + pt[1] > block.best_log_utility:
            block.best_log_utility = pt[0] + pt[1]
            block.best_feasible = pt
            block.best_p = p_end
    if not sub.gammas:
        # concave in p with its maximiser at p_hat, already the incumbent
        u = math.exp(block.best_log_utility)
        v = float(sub.value(p_hat))
        return OpaResult(p_hat, v, v, u, 1, (u,), (u,))
    stairs = list(block.vertices)  # ascending l1, descending l2
    heap = [(-(v[0] + v[1]), v) for v in stairs]
    alive = set(stairs)
    upper_trace, feas_trace = [], []
    it = 0
    while True:
        while heap and heap[0][1] not in alive:
            heapq.heappop(heap)
        if not heap:
            upper = block.best_log_utility
            break
        it += 1
        if it > max_iters:
            raise OpaError(f"OPA exceeded {max_iters} iterations; use a larger epsilon")
        z = heap[0][1]
        upper = z[0] + z[1]
        best = block.best_log_utility
        if best > -math.inf:
            gap = math.expm1(upper - best) if relative else math.exp(upper) - math.exp(best)
            if gap <= epsilon:
                upper_trace.append(math.exp(upper))
                feas_trace.append(math.exp(best))
                break
        t_lo, t_hi, p = _project_log(sub, z, delta_tol)
        r_log = upper + 2.0 * t_lo
        if r_log > block.best_log_utility:
            block.best_log_utility = r_log
            block.best_feasible = (z[0] + t_lo, z[1] + t_lo)
            block.best_p = p
        upper_trace.append(math.exp(upper))
        feas_trace.append(math.exp(block.best_log_utility))
        if t_hi == 0.0:  # the vertex itself is feasible, hence optimal
            upper = block.best_log_utility
            break
        # cut the run of vertices lying strictly above the infeasible point
        r1, r2 = z[0] + t_hi, z[1] + t_hi
        i = bisect.bisect_right(stairs, (r1, math.inf))
        j = i
        while j < len(stairs) and stairs[j][1] > r2:
            j += 1
        run = stairs[i:j]
        new = [(r1, run[0][1]), (run[-1][0], r2)]
        for v in run:
            alive.discard(v)
        keep = []
        for v in new:
            # skip vertices that a neighbour already dominates
            if i > 0 and stairs[i - 1][0] >= v[0] and stairs[i - 1][1] >= v[1]:
                continue
            if j < len(stairs) and stairs[j][0] >= v[0] and stairs[j][1] >= v[1]:
                continue
            if v[0] + v[1] <= block.best_log_utility:
                continue
            keep.append(v)
        stairs[i:j] = keep
        for v in keep:
            alive.add(v)
            heapq.heappush(heap, (-(v[0] + v[1]), v))
        if len(stairs) > max_vertices:
            raise OpaError(f"vertex set exceeded {max_vertices}; use a larger epsilon")
    block.vertices = stairs
    value = float(sub.value(block.best_p))
    upper_bits = max(upper / LN2, value)
    return OpaResult(
        block.best_p, value, upper_bits, math.exp(block.best_log_utility), it,
        tuple(upper_trace), tuple(feas_trace),
    )


def dual_subproblem_solve(sub: DualSubproblem, epsilon: float = 1e-6, relative: bool = False) -> OpaResult:
    """Globally solve one RB's Lagrangian subproblem."""
    p_hat = opa_upper_power(sub)
    if not sub.gammas or p_hat == 0.0:
        p = p_hat
        v = float(sub.value(p))
        return OpaResult(p, v, v, 2.0 ** v, 0)
    return opa_iterate(sub, epsilon, relative=relative)


# ---------------------------------------------------------------------------
# dual function and its minimisation


@dataclass(frozen=True)
class DualEvaluation:
    nu: float
    g: float  # certified upper bound g(nu)
    lagrangian: float  # L(p^D, nu) at the returned powers
    p: np.ndarray
    P_max: float

    @property
    def subgradient(self) -> float:
        return float(self.P_max - self.p.sum())


@dataclass(frozen=True)
class DualResult:
    nu_star: float
    g_value: float
    p: np.ndarray
    evaluations: int
    history: tuple = field(default=(), repr=False)

    def gap_vs(self, primal: float) -> float:
        """Relative gap ``(bound - primal) / bound``."""
        return (self.g_value - primal) / self.g_value if self.g_value else 0.0


def subproblems(channel_state, occupancy, weights, nu: float) -> list[DualSubproblem]:
    _, F_u = optimal_association(channel_state, occupancy)
    occ = occupancy.occupied
    subs = []
    for n in range(occ.shape[1]):
        js = np.flatnonzero(occ[:, n])
        subs.append(
            DualSubproblem(
                float(F_u[n]),
                tuple(float(g) for g in occupancy.gamma[js, n]),
                tuple(float(f) for f in channel_state.F[js, n]),
                float(nu), weights.mu_u, weights.mu_g, n,
            )
        )
    return subs


def dual_function(channel_state, occupancy, weights, nu: float, P_max: float, epsilon: float = 1e-6) -> DualEvaluation:
    """g(nu) plus the per-RB maximisers.

    ``g`` sums the certified per-RB upper bounds, so it never falls below
    the true dual function; ``lagrangian`` is L evaluated at the returned
    powers and lies within the OPA tolerance of it.
    """
    subs = subproblems(channel_state, occupancy, weights, nu)
    return _evaluate(subs, nu, P_max, epsilon)


def _evaluate(subs, nu, P_max, epsilon):
    p = np.zeros(len(subs))
    upper = lag = 0.0
    for s in subs:
        s = DualSubproblem(s.F_u, s.gammas, s.Fs, nu, s.mu_u, s.mu_g, s.rb)
        res = dual_subproblem_solve(s, epsilon, relative=True)
        p[s.rb] = res.p
        upper += res.upper
        lag += res.value
    return DualEvaluation(nu, upper + nu * P_max, lag + nu * P_max, p, P_max)


def dual_minimize(
    channel_state,
    occupancy,
    weights,
    P_max: float,
    epsilon: float = 1e-6,
    nu_rtol: float = 1e-8,
    nu_min: float = 1e-12,
    max_evals: int = 200,
) -> DualResult:
    """Minimise g over nu > 0 by bisection on the subgradient."""
    subs = subproblems(channel_state, occupancy, weights, 1.0)
    history = []

    def ev(nu):
        e = _evaluate(subs, nu, P_max, epsilon)
        history.append((nu, e.g, float(e.p.sum())))
        return e

    F_u = np.array([s.F_u for s in subs])
    if weights.mu_u == 0 or not np.any(F_u > 0) or P_max <= 0:
        # the UAV term never pays off: g is increasing in nu
        e = ev(nu_min)
        return DualResult(nu_min, e.g, e.p, len(history), tuple(history))

    # At the egoistic water level the power caps already fit the budget,
    # so the subgradient there is non-negative.
    p_eg = waterfill(F_u, P_max).p
    k = int(np.argmax(p_eg))
    level = p_eg[k] + 1.0 / F_u[k]
    hi = weights.mu_u / (LN2 * level)
    e_hi = ev(hi)
    best = e_hi
    lo = hi
    e_lo = e_hi
    while e_lo.subgradient > 0:
        lo /= 4.0
        if lo < nu_min:
            raise BracketError(f"no nu >= {nu_min} with total power above the budget")
        e_lo = ev(lo)
        if e_lo.g < best.g:
            best = e_lo
    if lo == hi:
        return DualResult(best.nu, best.g, best.p, len(history), tuple(history))
    while hi / lo - 1.0 > nu_rtol and len(history) < max_evals:
        mid = math.sqrt(lo * hi)
        e = ev(mid)
        if e.g < best.g:
            best = e
        if e.subgradient > 0:
            hi = mid
        else:
            lo = mid
    return DualResult(best.nu, best.g, best.p, len(history), tuple(history))
