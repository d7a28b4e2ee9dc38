"""Centralised interference coordination for the UAV uplink.

Cell association is per-RB best-available-cell; power allocation is either
water-filling (egoistic / altruistic / terrestrial baselines) or the SCA
loop that repeatedly linearises the ground sum-rate and solves the priced
water-filling problem in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .rates import LN2, RateReport, Weights, rate_report


@dataclass(frozen=True)
class Association:
    j_star: np.ndarray  # (N,) serving cell per RB, -1 when unused


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.p))


@dataclass(frozen=True)
class SurrogateCoeffs:
    A: float
    B: np.ndarray
    anchor: np.ndarray


@dataclass
class SolveDiagnostics:
    iterations: int = 0
    objective_trace: list = field(default_factory=list)
    converged: bool = True
    epsilon: float = 0.0

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "objective_trace": [float(q) for q in self.objective_trace],
            "converged": bool(self.converged),
            "epsilon": self.epsilon,
        }


@dataclass(frozen=True)
class IcicSolution:
    scheme: str
    association: Association
    power: PowerAllocation
    rates: RateReport
    diagnostics: SolveDiagnostics | None = None
    denied: bool = False

    @property
    def objective(self) -> float:
        return self.rates.weighted


class InvariantError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# association and water-filling


def optimal_association(channel_state, occupancy) -> tuple[Association, np.ndarray]:
    """Per-RB argmax of F_j(n) over cells free on that RB (ties: lowest id)."""
    occ = occupancy.occupied
    if np.any(occ.all(axis=0)):
        bad = np.flatnonzero(occ.all(axis=0)).tolist()
        raise InvariantError(f"no unoccupied cell on RBs {bad}")
    masked = np.where(occ, -np.inf, channel_state.F)
    j_star = np.argmax(masked, axis=0)
    F_u = masked[j_star, np.arange(masked.shape[1])]
    return Association(j_star.astype(int)), F_u


def waterfill(F, P_max: float) -> PowerAllocation:
    """Maximise sum log2(1 + p_n F_n) s.t. sum p_n <= P_max.

    Channels with ``F_n <= 0`` get no power.  The water level is found
    exactly by sorting the inverse gains.
    """
    F = np.asarray(F, dtype=float)
    p = np.zeros_like(F)
    active = np.flatnonzero(F > 0)
    if P_max <= 0 or active.size == 0:
        return PowerAllocation(p)
    inv = 1.0 / F[active]
    s = np.sort(inv)
    csum = np.cumsum(s)
    k = np.arange(1, s.size + 1)
    levels = (P_max + csum) / k
    # largest active-set size whose level still exceeds its worst inverse gain
    ok = levels > s
    m = int(np.flatnonzero(ok)[-1])
    p[active] = np.maximum(levels[m] - inv, 0.0)
    return PowerAllocation(p)


def _report(scheme, channel_state, occupancy, assoc, p, weights, **kw) -> IcicSolution:
    rates = rate_report(occupancy, channel_state, assoc, p, weights)
    return IcicSolution(scheme, assoc, PowerAllocation(p), rates, **kw)


def egoistic(channel_state, occupancy, P_max: float, weights: Weights = Weights()) -> IcicSolution:
    assoc, F_u = optimal_association(channel_state, occupancy)
    p = waterfill(F_u, P_max).p
    return _report("egoistic", channel_state, occupancy, assoc, p, weights)


def altruistic(channel_state, occupancy, P_max: float, weights: Weights = Weights()) -> IcicSolution:
    """Water-filling restricted to RBs no ground UE uses anywhere."""
    assoc, F_u = optimal_association(channel_state, occupancy)
    free = ~occupancy.occupied.any(axis=0)
    p = waterfill(np.where(free, F_u, 0.0), P_max).p
    return _report("altruistic", channel_state, occupancy, assoc, p, weights, denied=not free.any())


def terrestrial_icic(
    channel_state, occupancy, nsets, q: int, P_max: float, weights: Weights = Weights()
) -> IcicSolution:
    """UAV treated as a ground UE of the strongest BS, obeying the q-tier rule."""
    j_u = int(np.argmax(channel_state.F_tilde))
    available = np.zeros(occupancy.num_rbs, dtype=bool)
    available[available_rbs_terrestrial(occupancy, nsets, q, j_u)] = True
    p = waterfill(np.where(available, channel_state.F[j_u], 0.0), P_max).p
    assoc = Association(np.where(available, j_u, -1).astype(int))
    return _report("terrestrial", channel_state, occupancy, assoc, p, weights, denied=not available.any())


def available_rbs_terrestrial(occupancy, nsets, q: int, j_u: int) -> np.ndarray:
    """RBs free at ``j_u`` and at every cell within ``q`` rings of it."""
    protected = np.array(sorted(nsets.within(j_u, q) | {j_u}), dtype=int)
    return np.flatnonzero(~occupancy.occupied[protected].any(axis=0))


# ---------------------------------------------------------------------------
# SCA


def surrogate_coeffs(channel_state, occupancy, anchor) -> SurrogateCoeffs:
    """Constant ``A`` and per-RB interference prices ``B_n`` at ``anchor``."""
    anchor = np.asarray(anchor, dtype=float)
    occ = occupancy.occupied
    gamma = occupancy.gamma
    F = channel_state.F
    pf = anchor[None, :] * F
    A = float(np.sum(np.where(occ, np.log1p(gamma / (1.0 + pf)), 0.0)) / LN2)
    terms = F * gamma / (LN2 * (1.0 + pf + gamma) * (1.0 + pf))
    B = np.sum(np.where(occ, terms, 0.0), axis=0)
    return SurrogateCoeffs(A, B, anchor.copy())


def priced_waterfill(F_u, price, mu_u: float, P_max: float, floor: float = 0.0) -> np.ndarray:
    """Maximise ``mu_u sum log2(1 + p F_u) - sum price_n p_n`` under the budget.

    ``price`` is the already-weighted per-watt price (``mu_g * B_n``).
    """
    F_u = np.asarray(F_u, dtype=float)
    c = np.asarray(price, dtype=float)
    p = np.zeros_like(F_u)
    active = F_u > floor
    if mu_u <= 0 or P_max <= 0 or not active.any():
        return p
    a = mu_u / LN2
    b = np.where(active, 1.0 / np.where(active, F_u, 1.0), np.inf)

    def alloc(nu):
        with np.errstate(divide="ignore", over="ignore"):
            lvl = a / (c + nu)
        return np.where(active, np.maximum(lvl - b, 0.0), 0.0)

    if not np.any(active & (c <= 0)):
        p_free = alloc(0.0)
        if p_free.sum() <= P_max:
            return p_free

    ca = c[active]
    if np.all(ca == ca[0]):
        # common price: plain water-filling, the level absorbs the price
        return waterfill(np.where(active, F_u, 0.0), P_max).p

    thresholds = a / b[active] - ca  # nu above which RB n switches off
    hi = float(thresholds.max())
    zero_price = active & (c <= 0)
    if zero_price.any():
        lo = float(np.min(a / (P_max + b[zero_price])))
    else:
        lo = 0.0

    def excess(nu):
        return alloc(nu).sum() - P_max

    if excess(lo) <= 0:
        return alloc(lo)
    nu = brentq(excess, lo, hi, xtol=1e-15 * max(hi, 1e-300), rtol=1e-15, maxiter=500)
    p = alloc(nu)
    s = p.sum()
    if s > P_max:
        p *= P_max / s
    return p


def surrogate_solve(F_u, coeffs: SurrogateCoeffs, weights: Weights, P_max: float, floor: float = 0.0) -> PowerAllocation:
    """Closed-form optimum of the linearised (concave) subproblem."""
    price = weights.mu_g * np.asarray(coeffs.B, dtype=float)
    return PowerAllocation(priced_waterfill(F_u, price, weights.mu_u, P_max, floor))


def objective_value(channel_state, occupancy, F_u, weights: Weights, p) -> float:
    p = np.asarray(p, dtype=float)
    uav = float(np.sum(np.log1p(p * F_u))) / LN2
    pf = p[None, :] * channel_state.F
    ground = float(np.sum(np.where(occupancy.occupied, np.log1p(occupancy.gamma / (1.0 + pf)), 0.0))) / LN2
    return weights.mu_u * uav + weights.mu_g * ground


def initial_power(channel_state, occupancy, weights: Weights, P_max: float, init_mode: str = "auto") -> np.ndarray:
    if init_mode == "auto":
        init_mode = "altruistic" if weights.mu_g <= weights.mu_u else "egoistic"
    if init_mode == "zero":
        return np.zeros(occupancy.num_rbs)
    if init_mode == "altruistic":
        return altruistic(channel_state, occupancy, P_max, weights).power.p
    if init_mode == "egoistic":
        return egoistic(channel_state, occupancy, P_max, weights).power.p
    raise ValueError(f"unknown init_mode {init_mode!r}")


def sca_solve(
    channel_state,
    occupancy,
    weights: Weights,
    P_max: float,
    epsilon: float = 1e-6,
    init_mode: str = "auto",
    max_iters: int = 200,
    floor: float = 0.0,
) -> IcicSolution:
    """Successive convex approximation of the weighted sum-rate problem.

    The association is fixed once; each iteration re-prices the ground
    interference at the current power vector and solves the priced
    water-filling problem.  Stops when the true objective improves by no
    more than ``epsilon``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    assoc, F_u = optimal_association(channel_state, occupancy)
    p = initial_power(channel_state, occupancy, weights, P_max, init_mode)
    q = objective_value(channel_state, occupancy, F_u, weights, p)
    trace = [q]
    best_p, best_q = p, q
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        coeffs = surrogate_coeffs(channel_state, occupancy, p)
        p = surrogate_solve(F_u, coeffs, weights, P_max, floor).p
        q_new = objective_value(channel_state, occupancy, F_u, weights, p)
        trace.append(q_new)
        if q_new > best_q:
            best_p, best_q = p, q_new
        if q_new - q <= epsilon:
            converged = True
            break
        q = q_new
    diag = SolveDiagnostics(iterations, trace, converged, epsilon)
    return _report("sca", channel_state, occupancy, assoc, best_p, weights, diagnostics=diag)


__all__ = [
    "Association",
    "PowerAllocation",
    "SurrogateCoeffs",
    "SolveDiagnostics",
    "IcicSolution",
    "optimal_association",
    "waterfill",
    "egoistic",
    "altruistic",
    "terrestrial_icic",
    "surrogate_coeffs",
    "surrogate_solve",
    "priced_waterfill",
    "sca_solve",
    "objective_value",
]
