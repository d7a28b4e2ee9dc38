"""Link gains: ground UE -> BS, UAV -> BS, and per-RB noise plus residual ICI.

All powers are handled in linear watts; dB/dBm values only appear in the
parameter objects and the path-loss table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DIPOLE_PEAK_GAIN = 1.64  # half-wave dipole directivity, linear

# Known fields per path-loss model; anything else in a table file is rejected.
_MODEL_FIELDS = {
    "uma_terrestrial": {
        "los_intercept", "los_dist_coef", "los_far_dist_coef", "bp_coef", "freq_coef",
        "env_height", "nlos_intercept", "nlos_dist_coef", "nlos_hut_coef", "sigma_los",
        "sigma_nlos", "los_d1", "los_d2", "los_c_height", "los_c_scale", "los_c_power",
        "min_distance_2d",
    },
    "uma_aerial": {
        "aerial_min_height", "max_height", "los_certain_height", "los_intercept",
        "los_dist_coef", "freq_coef", "sigma_los_scale", "sigma_los_decay",
        "nlos_intercept", "nlos_dist_a", "nlos_dist_b", "sigma_nlos", "p1_a", "p1_b",
        "d1_a", "d1_b", "d1_min", "min_distance_2d",
    },
    "simplified": {
        "los_ref_loss", "los_exponent", "nlos_ref_loss", "nlos_exponent", "sigma_los",
        "sigma_nlos", "logistic_a", "logistic_b", "min_distance_3d", "min_height",
        "max_height",
    },
}


class PathlossTableError(ValueError):
    pass


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def parse_pathloss_table(text: str) -> dict[str, dict[str, float]]:
    """Parse ``model.field = value`` lines into nested dicts."""
    table: dict[str, dict[str, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PathlossTableError(f"line {lineno}: expected 'model.field = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise PathlossTableError(f"line {lineno}: key {key!r} lacks a model prefix")
        model, fname = key.split(".", 1)
        if model not in _MODEL_FIELDS:
            raise PathlossTableError(f"line {lineno}: unknown model {model!r}")
        if fname not in _MODEL_FIELDS[model]:
            raise PathlossTableError(f"line {lineno}: unknown field {key!r}")
        try:
            table.setdefault(model, {})[fname] = float(value)
        except ValueError:
            raise PathlossTableError(f"line {lineno}: {value!r} is not a number") from None
    for model, fields in table.items():
        missing = _MODEL_FIELDS[model] - fields.keys()
        if missing:
            raise PathlossTableError(f"model {model!r} missing fields: {sorted(missing)}")
    return table


def load_pathloss_table(path: str | Path | None = None) -> dict[str, dict[str, float]]:
    if path is None:
        text = resources.files("uavicic").joinpath("data/pathloss.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_pathloss_table(text)


_DEFAULT_TABLE: dict[str, dict[str, float]] | None = None


def default_table() -> dict[str, dict[str, float]]:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_pathloss_table()
    return _DEFAULT_TABLE


# ---------------------------------------------------------------------------
# antennas


@dataclass(frozen=True)
class UlaPattern:
    num_elements: int = 10
    spacing: float = 0.5  # wavelengths
    downtilt_deg: float = 10.0

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("num_elements must be >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be > 0")


@dataclass(frozen=True)
class UavAntenna:
    kind: str = "isotropic"  # or "directional"
    half_beamwidth_deg: float = 90.0
    main_gain_const: float = 7500.0
    side_gain: float = 0.0

    def __post_init__(self):
        if self.kind not in ("isotropic", "directional"):
            raise ValueError(f"unknown UAV antenna kind {self.kind!r}")
        if not 0.0 < self.half_beamwidth_deg <= 90.0:
            raise ValueError("half_beamwidth_deg must lie in (0, 90]")
        if self.main_gain_const <= 0 or self.side_gain < 0:
            raise ValueError("antenna gains must be positive")

    @property
    def is_isotropic(self) -> bool:
        # a 90 degree half-beamwidth is the downward isotropic limit
        return self.kind == "isotropic" or self.half_beamwidth_deg >= 90.0


def dipole_pattern(elevation_deg):
    """Normalised power pattern of a vertical half-wave dipole (peak 1)."""
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    c = np.cos(el)
    safe = np.where(np.abs(c) > 1e-12, c, 1.0)
    return np.where(np.abs(c) > 1e-12, (np.cos(0.5 * np.pi * np.sin(el)) / safe) ** 2, 0.0)


def array_factor(pattern: UlaPattern, elevation_deg):
    """``|AF|^2 / N`` of the vertical ULA steered to ``-downtilt``; peak N."""
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    steer = math.sin(math.radians(-pattern.downtilt_deg))
    psi = np.pi * 2.0 * pattern.spacing * (np.sin(el) - steer)
    n = pattern.num_elements
    half = 0.5 * psi
    s = np.sin(half)
    with np.errstate(invalid="ignore", divide="ignore"):
        af = np.where(np.abs(s) > 1e-12, (np.sin(n * half) / np.where(np.abs(s) > 1e-12, s, 1.0)) ** 2, float(n * n))
    return af / n


def bs_gain(pattern: UlaPattern, elevation_deg, azimuth_deg=None):
    """Linear BS antenna gain towards ``elevation_deg`` (degrees above horizon).

    The pattern is omnidirectional in azimuth, so ``azimuth_deg`` is accepted
    and ignored.
    """
    return DIPOLE_PEAK_GAIN * dipole_pattern(elevation_deg) * array_factor(pattern, elevation_deg)


def uav_antenna_gain(ant: UavAntenna, horiz_dist, uav_height: float, bs_height: float):
    """UAV antenna gain seen by a BS at horizontal distance ``horiz_dist``."""
    d = np.asarray(horiz_dist, dtype=float)
    if ant.is_isotropic:
        return np.ones_like(d) if d.ndim else 1.0
    if uav_height <= bs_height:
        raise ValueError(
            f"geometry invalid for cone model: UAV height {uav_height} m <= BS height {bs_height} m"
        )
    r_c = (uav_height - bs_height) * math.tan(math.radians(ant.half_beamwidth_deg))
    main = ant.main_gain_const / ant.half_beamwidth_deg**2
    g = np.where(d <= r_c, main, ant.side_gain)
    return g if d.ndim else float(g)


# ---------------------------------------------------------------------------
# path loss


@dataclass(frozen=True)
class ChannelParams:
    carrier_freq: float = 2e9
    noise_psd_dbm: float = -164.0
    rb_bandwidth: float = 180e3
    bs_antenna: UlaPattern = field(default_factory=UlaPattern)
    uav_antenna: UavAntenna = field(default_factory=UavAntenna)
    terrestrial_model: str = "uma_terrestrial"
    aerial_model: str = "uma_aerial"
    table: dict = field(default_factory=default_table, compare=False, repr=False)
    shadowing: bool = True
    fading: bool = True
    los_probability: float | None = None  # overrides every model's LoS probability

    def __post_init__(self):
        if self.rb_bandwidth <= 0 or self.carrier_freq <= 0:
            raise ValueError("rb_bandwidth and carrier_freq must be positive")
        for m in (self.terrestrial_model, self.aerial_model):
            if m not in self.table:
                raise ValueError(f"path-loss model {m!r} not in table")

    @property
    def thermal_noise(self) -> float:
        """Noise power over one RB in watts."""
        return float(dbm_to_watt(self.noise_psd_dbm + 10.0 * math.log10(self.rb_bandwidth)))


class LinkDraw(NamedTuple):
    gain: np.ndarray  # linear power gain
    los: np.ndarray  # bool, LoS state drawn for the link
    clamped: np.ndarray  # bool, distance raised to the model's validity floor


def _uma_terrestrial(c, d2d, h_ut, h_bs, fc):
    clamped = d2d < c["min_distance_2d"]
    d2d = np.maximum(d2d, c["min_distance_2d"])
    d3d = np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)
    f_ghz = fc / 1e9
    d_bp = 4.0 * (h_bs - c["env_height"]) * (h_ut - c["env_height"]) * fc / SPEED_OF_LIGHT
    near = c["los_intercept"] + c["los_dist_coef"] * np.log10(d3d) + c["freq_coef"] * np.log10(f_ghz)
    far = (
        c["los_intercept"]
        + c["los_far_dist_coef"] * np.log10(d3d)
        + c["freq_coef"] * np.log10(f_ghz)
        - c["bp_coef"] * np.log10(d_bp**2 + (h_bs - h_ut) ** 2)
    )
    pl_los = np.where(d2d <= d_bp, near, far)
    pl_nlos = np.maximum(
        pl_los,
        c["nlos_intercept"]
        + c["nlos_dist_coef"] * np.log10(d3d)
        + c["freq_coef"] * np.log10(f_ghz)
        - c["nlos_hut_coef"] * (h_ut - 1.5),
    )
    d1 = c["los_d1"]
    p = np.where(d2d <= d1, 1.0, d1 / d2d + np.exp(-d2d / c["los_d2"]) * (1.0 - d1 / d2d))
    h_ut = np.broadcast_to(h_ut, np.shape(d2d))
    c_h = np.where(
        h_ut > c["los_c_height"],
        (np.maximum(h_ut - c["los_c_height"], 0.0) / c["los_c_scale"]) ** c["los_c_power"],
        0.0,
    )
    p = np.where(d2d <= d1, 1.0, p * (1.0 + c_h * 1.25 * (d2d / 100.0) ** 3 * np.exp(-d2d / 150.0)))
    sig_los = np.full(np.shape(d2d), c["sigma_los"])
    sig_nlos = np.full(np.shape(d2d), c["sigma_nlos"])
    return pl_los, pl_nlos, np.clip(p, 0.0, 1.0), sig_los, sig_nlos, clamped


def _uma_aerial(c, d2d, h_ut, h_bs, fc):
    clamped = d2d < c["min_distance_2d"]
    d2d = np.maximum(d2d, c["min_distance_2d"])
    d3d = np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)
    f_ghz = fc / 1e9
    pl_los = c["los_intercept"] + c["los_dist_coef"] * np.log10(d3d) + c["freq_coef"] * np.log10(f_ghz)
    pl_nlos = (
        c["nlos_intercept"]
        + (c["nlos_dist_a"] - c["nlos_dist_b"] * math.log10(h_ut)) * np.log10(d3d)
        + c["freq_coef"] * np.log10(40.0 * math.pi * f_ghz / 3.0)
    )
    if h_ut > c["los_certain_height"]:
        p = np.ones(np.shape(d2d))
    else:
        p1 = c["p1_a"] * math.log10(h_ut) + c["p1_b"]
        d1 = max(c["d1_a"] * math.log10(h_ut) + c["d1_b"], c["d1_min"])
        p = np.where(d2d <= d1, 1.0, d1 / d2d + np.exp(-d2d / p1) * (1.0 - d1 / d2d))
    sig_los = np.full(np.shape(d2d), c["sigma_los_scale"] * math.exp(-c["sigma_los_decay"] * h_ut))
    sig_nlos = np.full(np.shape(d2d), c["sigma_nlos"])
    return pl_los, pl_nlos, np.clip(p, 0.0, 1.0), sig_los, sig_nlos, clamped


def _simplified(c, d2d, h_ut, h_bs, fc):
    d3d_raw = np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)
    clamped = d3d_raw < c["min_distance_3d"]
    d3d = np.maximum(d3d_raw, c["min_distance_3d"])
    pl_los = c["los_ref_loss"] + 10.0 * c["los_exponent"] * np.log10(d3d)
    pl_nlos = c["nlos_ref_loss"] + 10.0 * c["nlos_exponent"] * np.log10(d3d)
    elev = np.degrees(np.arctan2(np.abs(h_ut - h_bs), d2d))
    a, b = c["logistic_a"], c["logistic_b"]
    p = 1.0 / (1.0 + a * np.exp(-b * (elev - a)))
    sig_los = np.full(np.shape(d2d), c["sigma_los"])
    sig_nlos = np.full(np.shape(d2d), c["sigma_nlos"])
    return pl_los, pl_nlos, p, sig_los, sig_nlos, clamped


_MODELS = {"uma_terrestrial": _uma_terrestrial, "uma_aerial": _uma_aerial, "simplified": _simplified}


def model_terms(params: ChannelParams, model: str, d2d, h_ut: float, h_bs: float):
    """Return (PL_LoS, PL_NLoS, P_LoS, sigma_LoS, sigma_NLoS, clamped) arrays."""
    consts = params.table[model]
    return _MODELS[model](consts, np.asarray(d2d, dtype=float), float(h_ut), float(h_bs), params.carrier_freq)


def _elevation_deg(d2d, h_target, h_bs):
    return np.degrees(np.arctan2(h_target - h_bs, np.asarray(d2d, dtype=float)))


def _draw_links(params, model, d2d, h_ut, h_bs, rng, fading):
    pl_los, pl_nlos, p_los, s_los, s_nlos, clamped = model_terms(params, model, d2d, h_ut, h_bs)
    if params.los_probability is not None:
        p_los = np.full_like(p_los, params.los_probability)
    shape = np.shape(d2d)
    # fixed draw order keeps results independent of which outputs are used
    u = rng.random(shape)
    z = rng.standard_normal(shape)
    h2 = rng.exponential(1.0, shape)
    los = u < p_los
    pl = np.where(los, pl_los, pl_nlos)
    if params.shadowing:
        pl = pl + z * np.where(los, s_los, s_nlos)
    gain = 10.0 ** (-pl / 10.0) * bs_gain(params.bs_antenna, _elevation_deg(d2d, h_ut, h_bs))
    if fading:
        gain = gain * h2
    return gain, los, clamped


def terrestrial_gains(params: ChannelParams, ue_xy, ue_height: float, bs_xy, bs_height: float, rng) -> LinkDraw:
    """(K, J) gains from every ground UE to every BS."""
    ue_xy = np.atleast_2d(np.asarray(ue_xy, dtype=float))
    bs_xy = np.atleast_2d(np.asarray(bs_xy, dtype=float))
    d2d = np.linalg.norm(ue_xy[:, None, :] - bs_xy[None, :, :], axis=2)
    gain, los, clamped = _draw_links(
        params, params.terrestrial_model, d2d, ue_height, bs_height, rng, params.fading
    )
    return LinkDraw(gain, los, clamped)


def _aerial_model_for(params: ChannelParams, height: float) -> str:
    model = params.aerial_model
    consts = params.table[model]
    if model == "uma_aerial":
        if not 1.5 <= height <= consts["max_height"]:
            raise ValueError(f"UAV altitude {height} m outside uma_aerial range [1.5, {consts['max_height']}] m")
        if height <= consts["aerial_min_height"]:
            return "uma_terrestrial"
    elif model == "simplified":
        if not consts["min_height"] <= height <= consts["max_height"]:
            raise ValueError(
                f"UAV altitude {height} m outside simplified range [{consts['min_height']}, {consts['max_height']}] m"
            )
    return model


def uav_gains(params: ChannelParams, uav_xyz, bs_xy, bs_height: float, rng) -> LinkDraw:
    """(J,) frequency-flat UAV -> BS gains, one LoS/NLoS draw per BS.

    When the altitude falls into the ground-UE branch of the aerial model
    (or the terrestrial model is selected outright) the UAV is treated as a
    ground UE, Rayleigh fading included.
    """
    x, y, h = (float(v) for v in uav_xyz)
    bs_xy = np.atleast_2d(np.asarray(bs_xy, dtype=float))
    d2d = np.hypot(bs_xy[:, 0] - x, bs_xy[:, 1] - y)
    model = _aerial_model_for(params, h)
    fading = params.fading and model == "uma_terrestrial"
    gain, los, clamped = _draw_links(params, model, d2d, h, bs_height, rng, fading)
    if not params.uav_antenna.is_isotropic:
        gain = gain * uav_antenna_gain(params.uav_antenna, d2d, h, bs_height)
    return LinkDraw(gain, los, clamped)


def draw_terrestrial_gain(params: ChannelParams, ue_pos, bs_cell, rng) -> float:
    """Single ground-UE link; ``ue_pos`` is ``(x, y, height)``."""
    x, y, h = ue_pos
    return float(terrestrial_gains(params, [(x, y)], h, [bs_cell.center], bs_cell.bs_height, rng).gain[0, 0])


def draw_uav_gain(params: ChannelParams, uav_pos_3d, bs_cell, rng) -> float:
    return float(uav_gains(params, uav_pos_3d, [bs_cell.center], bs_cell.bs_height, rng).gain[0])


# ---------------------------------------------------------------------------
# channel state


def noise_and_residual_ici(params: ChannelParams, occupancy, ue_bs_gains: np.ndarray, tx_power) -> np.ndarray:
    """(J, N) noise plus residual terrestrial ICI.

    ``ue_bs_gains[k, j]`` is UE k's gain to BS j and ``tx_power`` its
    transmit power (scalar or per-UE).  Every co-channel UE served by another
    cell contributes; the scheduler guarantees those cells lie beyond q tiers.
    """
    J, N = occupancy.ue_of.shape
    ue_bs_gains = np.asarray(ue_bs_gains, dtype=float)
    tx = np.broadcast_to(np.asarray(tx_power, dtype=float), (ue_bs_gains.shape[0],))
    sigma2 = np.full((J, N), params.thermal_noise)
    for n in range(N):
        cells = np.flatnonzero(occupancy.ue_of[:, n] >= 0)
        if cells.size < 2:
            continue
        ues = occupancy.ue_of[cells, n]
        rx = tx[ues, None] * ue_bs_gains[ues][:, cells]  # (src UE, victim cell)
        total = rx.sum(axis=0) - np.diag(rx)
        sigma2[cells, n] += total
    return sigma2


@dataclass(frozen=True)
class ChannelState:
    """All link quantities the optimisers consume.

    ``H`` and ``sigma2`` are (J, N); ``F_tilde`` is (J,); ``F`` is the
    normalised UAV gain ``F_tilde / sigma2``.
    """

    H: np.ndarray
    F_tilde: np.ndarray
    sigma2: np.ndarray
    F: np.ndarray

    @classmethod
    def build(cls, H, F_tilde, sigma2) -> "ChannelState":
        H = np.asarray(H, dtype=float)
        F_tilde = np.asarray(F_tilde, dtype=float)
        sigma2 = np.asarray(sigma2, dtype=float)
        return cls(H, F_tilde, sigma2, F_tilde[:, None] / sigma2)

    @classmethod
    def from_normalized(cls, F, H=None) -> "ChannelState":
        """Wrap arbitrary normalised gains (used for synthetic instances).

        Picks ``F_tilde = max_n F[j, n]`` and back-solves ``sigma2``.
        """
        F = np.asarray(F, dtype=float)
        F_tilde = F.max(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma2 = np.where(F > 0, F_tilde[:, None] / np.where(F > 0, F, 1.0), 1.0)
        H = np.ones_like(F) if H is None else np.asarray(H, dtype=float)
        return cls(H, F_tilde, sigma2, F.copy())

    @property
    def num_cells(self) -> int:
        return self.F.shape[0]

    @property
    def num_rbs(self) -> int:
        return self.F.shape[1]
