"""Scenario configuration loaded from YAML.

Unknown keys are rejected and every validation error names the offending
field path, e.g. ``uav.height``.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

ALL_SCHEMES = (
    "egoistic",
    "altruistic",
    "terrestrial",
    "sca",
    "decentral_one_round",
    "decentral_iterative",
)


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class GridConfig:
    cell_radius: float = 500.0
    tiers: int = 5
    bs_height: float = 25.0


@dataclass(frozen=True)
class UeConfig:
    num_ues: int = 60
    height: float = 1.5
    tx_power_dbm: float = 23.0
    q: int = 2
    num_rbs: int = 30
    per_cell: tuple[int, ...] | None = None
    order: str = "id"
    rb_choice: str = "random"


@dataclass(frozen=True)
class AntennaConfig:
    kind: str = "isotropic"
    half_beamwidth_deg: float = 90.0
    main_gain_const: float = 7500.0
    side_gain: float = 0.0


@dataclass(frozen=True)
class UavConfig:
    xy: tuple[float, float] = (150.0, 420.0)
    height: float = 60.0
    p_max_dbm: float = 23.0
    antenna: AntennaConfig = field(default_factory=AntennaConfig)


@dataclass(frozen=True)
class BsAntennaConfig:
    num_elements: int = 10
    spacing: float = 0.5
    downtilt_deg: float = 10.0


@dataclass(frozen=True)
class ChannelConfig:
    carrier_freq: float = 2e9
    noise_psd_dbm: float = -164.0
    rb_bandwidth: float = 180e3
    terrestrial_model: str = "uma_terrestrial"
    aerial_model: str = "uma_aerial"
    shadowing: bool = True
    fading: bool = True
    bs_antenna: BsAntennaConfig = field(default_factory=BsAntennaConfig)


@dataclass(frozen=True)
class WeightsConfig:
    mu_u: float = 1.0
    mu_g: float = 1.0


@dataclass(frozen=True)
class SolverConfig:
    sca_epsilon: float = 1e-6
    sca_max_iters: int = 200
    init_mode: str = "auto"
    dual_epsilon: float = 1e-4  # relative OPA gap per RB
    bound: bool = True
    cluster_size: int = 4
    decentral_epsilon: float = 1e-6


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    snapshots: int = 50
    schemes: tuple[str, ...] = ALL_SCHEMES
    grid: GridConfig = field(default_factory=GridConfig)
    ues: UeConfig = field(default_factory=UeConfig)
    uav: UavConfig = field(default_factory=UavConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"uav.height": 200})``."""
        data = to_dict(self)
        for key, value in changes.items():
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                node = node[p]
            node[parts[-1]] = value
        return from_dict(data)


def _positive(path, value, strict=True):
    if (value <= 0) if strict else (value < 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'non-negative'}, got {value}")


def _coerce(path: str, tp, value):
    """Convert a YAML value to the annotated field type."""
    origin = getattr(tp, "__origin__", None)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}")
        args = tp.__args__
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(f"{path}[{i}]", args[0], v) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(path, f"expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(f"{path}[{i}]", a, v) for i, (a, v) in enumerate(zip(args, value)))
    # optional types: X | None
    args = getattr(tp, "__args__", ())
    if type(None) in args:
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(path, inner, value)
    raise TypeError(f"unsupported annotation {tp!r}")  # pragma: no cover


def _build(cls, data, path: str = ""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    hints = _hints(cls)
    unknown = sorted(set(data) - set(hints))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else str(unknown[0])
        raise ConfigError(where, "unknown key")
    kwargs = {}
    for name, tp in hints.items():
        if name in data:
            sub = f"{path}.{name}" if path else name
            kwargs[name] = _coerce(sub, tp, data[name])
    return cls(**kwargs)


_HINT_CACHE: dict = {}


def _hints(cls):
    if cls not in _HINT_CACHE:
        _HINT_CACHE[cls] = typing.get_type_hints(cls)
    return _HINT_CACHE[cls]


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Range checks that the type coercion cannot express."""
    _positive("seed", cfg.seed, strict=False)
    _positive("snapshots", cfg.snapshots)
    for i, s in enumerate(cfg.schemes):
        if s not in ALL_SCHEMES:
            raise ConfigError(f"schemes[{i}]", f"unknown scheme {s!r}; choose from {', '.join(ALL_SCHEMES)}")
    if len(set(cfg.schemes)) != len(cfg.schemes):
        raise ConfigError("schemes", "duplicate entries")
    g = cfg.grid
    _positive("grid.cell_radius", g.cell_radius)
    _positive("grid.tiers", g.tiers, strict=False)
    _positive("grid.bs_height", g.bs_height)
    u = cfg.ues
    _positive("ues.num_ues", u.num_ues)
    _positive("ues.height", u.height)
    _positive("ues.q", u.q, strict=False)
    _positive("ues.num_rbs", u.num_rbs)
    if u.order not in ("id", "random"):
        raise ConfigError("ues.order", "must be 'id' or 'random'")
    if u.rb_choice not in ("lowest", "random"):
        raise ConfigError("ues.rb_choice", "must be 'lowest' or 'random'")
    num_cells = 1 + 3 * g.tiers * (g.tiers + 1)
    if u.per_cell is not None:
        if len(u.per_cell) != num_cells:
            raise ConfigError("ues.per_cell", f"needs {num_cells} entries, got {len(u.per_cell)}")
        if any(c < 0 for c in u.per_cell) or sum(u.per_cell) != u.num_ues:
            raise ConfigError("ues.per_cell", f"must be non-negative and sum to ues.num_ues={u.num_ues}")
    a = cfg.uav
    _positive("uav.height", a.height)
    if a.antenna.kind not in ("isotropic", "directional"):
        raise ConfigError("uav.antenna.kind", "must be 'isotropic' or 'directional'")
    if not 0 < a.antenna.half_beamwidth_deg <= 90:
        raise ConfigError("uav.antenna.half_beamwidth_deg", "must lie in (0, 90]")
    _positive("uav.antenna.main_gain_const", a.antenna.main_gain_const)
    _positive("uav.antenna.side_gain", a.antenna.side_gain, strict=False)
    if a.antenna.kind == "directional" and a.antenna.half_beamwidth_deg < 90 and a.height <= g.bs_height:
        raise ConfigError("uav.height", "a directional UAV antenna needs the UAV above the BS height")
    c = cfg.channel
    _positive("channel.carrier_freq", c.carrier_freq)
    _positive("channel.rb_bandwidth", c.rb_bandwidth)
    _positive("channel.bs_antenna.num_elements", c.bs_antenna.num_elements)
    _positive("channel.bs_antenna.spacing", c.bs_antenna.spacing)
    for name in ("terrestrial_model", "aerial_model"):
        if getattr(c, name) not in ("uma_terrestrial", "uma_aerial", "simplified"):
            raise ConfigError(f"channel.{name}", "must be uma_terrestrial, uma_aerial or simplified")
    w = cfg.weights
    _positive("weights.mu_u", w.mu_u, strict=False)
    _positive("weights.mu_g", w.mu_g, strict=False)
    if w.mu_u == 0 and w.mu_g == 0:
        raise ConfigError("weights", "mu_u and mu_g cannot both be zero")
    s = cfg.solver
    _positive("solver.sca_epsilon", s.sca_epsilon)
    _positive("solver.sca_max_iters", s.sca_max_iters)
    _positive("solver.dual_epsilon", s.dual_epsilon)
    _positive("solver.cluster_size", s.cluster_size)
    _positive("solver.decentral_epsilon", s.decentral_epsilon)
    if s.init_mode not in ("auto", "zero", "altruistic", "egoistic"):
        raise ConfigError("solver.init_mode", "must be auto, zero, altruistic or egoistic")
    return cfg


def from_dict(data: dict[str, Any] | None) -> ScenarioConfig:
    return validate(_build(ScenarioConfig, data))


def load_config(path: str | Path | None) -> ScenarioConfig:
    """Read a YAML file; ``None`` gives the defaults."""
    if path is None:
        return validate(ScenarioConfig())
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from None
    return from_dict(data)


def to_dict(cfg) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, tuple):
            return [conv(x) for x in v]
        return v

    return conv(cfg)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
