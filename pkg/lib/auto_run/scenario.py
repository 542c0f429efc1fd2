"""
Scenario files: network, sweep, series and simulation settings loaded from JSON.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from lib.analysis.channel import (
    FadingParams,
    nakagami,
    one_sided_gaussian,
    rayleigh,
    rician,
    shadowed_rician,
)
from lib.analysis.metrics import METHODS, METRICS
from lib.analysis.specfun import SeriesConfig
from lib.auto_run.util import SweepPoint, db_to_linear, validate_choice, validate_number, validate_positive_int
from lib.config import DefaultConfig
from lib.errors import ConfigError
from lib.simulation.montecarlo import SimPlan

logger = logging.getLogger(__name__)

ROOT_DIR = Path(__file__).resolve().parents[2]
CONFIG_DIR = ROOT_DIR / "configs"

_NUMBER = r"([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?|inf)"
PRESET_PATTERNS = {
    "rayleigh": re.compile(r"^rayleigh$"),
    "one_sided_gaussian": re.compile(r"^one_sided_gaussian$"),
    "nakagami": re.compile(rf"^nakagami\(\s*m\s*=\s*{_NUMBER}\s*\)$"),
    "rician": re.compile(rf"^rician\(\s*K\s*=\s*{_NUMBER}\s*\)$"),
    "shadowed_rician": re.compile(rf"^shadowed_rician\(\s*K\s*=\s*{_NUMBER}\s*,\s*m\s*=\s*{_NUMBER}\s*\)$"),
}

HOP_NAMES = ("sp", "pq", "pw")
COUNT_FIELDS = ("relays", "receivers", "eavesdroppers", "antennas_rx", "antennas_eve")
SWEEP_VARIABLES = (
    COUNT_FIELDS
    + ("target_rate",)
    + tuple(f"avg_snr_{hop}_db" for hop in HOP_NAMES)
    + tuple(f"{shape}_{hop}" for shape in ("kappa", "mu", "m") for hop in HOP_NAMES)
)
OVERRIDE_KEYS = SWEEP_VARIABLES + ("preset",) + tuple(f"preset_{hop}" for hop in HOP_NAMES)

_TOP_KEYS = {"network", "sweep", "series", "simulation", "notes"}
_NETWORK_KEYS = set(COUNT_FIELDS) | {"preset", "hop_sp", "hop_pq", "hop_pw"}
_HOP_KEYS = {"preset", "kappa", "mu", "m", "avg_snr_db"}
_SWEEP_KEYS = {"variable", "grid", "metrics", "methods", "target_rate", "curves"}
_CURVE_KEYS = {"name", "set"}
_SERIES_KEYS = {"depth", "prune", "max_depth", "expansion", "composition_budget", "surrogate_m"}
_SIMULATION_KEYS = {"trials", "seed", "mode", "block_size"}


@dataclass(frozen=True)
class NetworkConfig:
    """
    Multicast network: P relays, Q receivers with G_Q antennas, W eavesdroppers with G_W antennas.

    Parameters:
        relays (int): Relay count P.
        receivers (int): Receiver count Q.
        eavesdroppers (int): Eavesdropper count W.
        antennas_rx (int): Receiver antenna count G_Q.
        antennas_eve (int): Eavesdropper antenna count G_W.
        hop_sp (FadingParams): Source to relay hop.
        hop_pq (FadingParams): Relay to receiver hop.
        hop_pw (FadingParams): Relay to eavesdropper hop.
        sp_tracks_pq (bool): Source hop average SNR follows the receiver hop's.
    """

    relays: int
    receivers: int
    eavesdroppers: int
    antennas_rx: int
    antennas_eve: int
    hop_sp: FadingParams
    hop_pq: FadingParams
    hop_pw: FadingParams
    sp_tracks_pq: bool = False

    def __post_init__(self) -> None:
        for name in COUNT_FIELDS:
            validate_positive_int(getattr(self, name), f"network.{name}")

    def hop(self, name: str) -> FadingParams:
        return getattr(self, f"hop_{name}")


@dataclass(frozen=True)
class Curve:
    name: str
    overrides: Tuple[Tuple[str, Any], ...] = ()


@dataclass(frozen=True)
class SweepSpec:
    """
    Grid of values for one variable, the metrics and methods to evaluate, and named curves.
    """

    variable: str
    grid: Tuple[float, ...]
    metrics: Tuple[str, ...] = METRICS
    methods: Tuple[str, ...] = (DefaultConfig.DEFAULT_METHOD,)
    target_rate: Optional[float] = None
    curves: Tuple[Curve, ...] = field(default_factory=lambda: (Curve("base"),))

    def __post_init__(self) -> None:
        validate_choice(self.variable, SWEEP_VARIABLES, "sweep.variable")
        if not self.grid:
            raise ConfigError("must not be empty", "sweep.grid")
        for value in self.grid:
            validate_number(value, "sweep.grid")
        steps = [b - a for a, b in zip(self.grid, self.grid[1:])]
        if not (all(step > 0 for step in steps) or all(step < 0 for step in steps)):
            raise ConfigError(f"must be strictly monotone, got {list(self.grid)}", "sweep.grid")
        if self.variable in COUNT_FIELDS:
            for value in self.grid:
                validate_positive_int(value, "sweep.grid")
        if not self.metrics:
            raise ConfigError("must not be empty", "sweep.metrics")
        for metric in self.metrics:
            validate_choice(metric, METRICS, "sweep.metrics")
        if not self.methods:
            raise ConfigError("must not be empty", "sweep.methods")
        for method in self.methods:
            validate_choice(method, METHODS, "sweep.methods")
        needs_rate = "sopm" in self.metrics and self.variable != "target_rate"
        if needs_rate and self.target_rate is None:
            raise ConfigError("is required when sopm is selected", "sweep.target_rate")
        if self.target_rate is not None and not self.target_rate > 0:
            raise ConfigError(f"must be > 0, got {self.target_rate}", "sweep.target_rate")
        if self.variable == "target_rate" and min(self.grid) <= 0:
            raise ConfigError("target rates must be > 0", "sweep.grid")


def parse_preset(text: str, avg_snr: float) -> FadingParams:
    """
    Turn a fading-model name into kappa-mu shadowed parameters.

    Parameters:
        text (str): "rayleigh", "one_sided_gaussian", "nakagami(m=M)", "rician(K=K)" or
            "shadowed_rician(K=K,m=M)".
        avg_snr (float): Linear average SNR.
    Returns:
        FadingParams: Equivalent parameters.
    Raises:
        ConfigError: If the name does not match any preset.
    """
    text = text.strip()
    for name, pattern in PRESET_PATTERNS.items():
        match = pattern.match(text)
        if not match:
            continue
        values = [float(group) for group in match.groups()]
        if name == "rayleigh":
            return rayleigh(avg_snr)
        if name == "one_sided_gaussian":
            return one_sided_gaussian(avg_snr)
        if name == "nakagami":
            return nakagami(values[0], avg_snr)
        if name == "rician":
            return rician(values[0], avg_snr)
        return shadowed_rician(values[0], values[1], avg_snr)
    raise ConfigError(f"unknown preset {text!r}", "preset")


def _reject_unknown(section: Dict[str, Any], allowed, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError("must be a JSON object", where)
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}", where)


def _shadowing(value: Any, key: str) -> float:
    if value is None or (isinstance(value, str) and value.lower() == "inf"):
        return math.inf
    return validate_number(value, key)


def _parse_hop(raw: Dict[str, Any], preset: Optional[str], where: str, fallback_snr: Optional[float]) -> FadingParams:
    _reject_unknown(raw, _HOP_KEYS, where)
    if "avg_snr_db" in raw:
        avg_snr = db_to_linear(validate_number(raw["avg_snr_db"], f"{where}.avg_snr_db"))
    elif fallback_snr is not None:
        avg_snr = fallback_snr
    else:
        raise ConfigError("is required", f"{where}.avg_snr_db")

    preset = raw.get("preset", preset)
    if preset is not None:
        if set(raw) & {"kappa", "mu", "m"}:
            raise ConfigError("give either a preset or kappa/mu/m, not both", where)
        return parse_preset(preset, avg_snr)
    try:
        return FadingParams(
            validate_number(raw.get("kappa"), f"{where}.kappa"),
            validate_number(raw.get("mu"), f"{where}.mu"),
            _shadowing(raw.get("m"), f"{where}.m"),
            avg_snr,
        )
    except ConfigError as exc:
        raise ConfigError(str(exc), where) from exc


def parse_network(raw: Dict[str, Any]) -> NetworkConfig:
    _reject_unknown(raw, _NETWORK_KEYS, "network")
    preset = raw.get("preset")
    hops = {}
    for name in ("pq", "pw"):
        hops[name] = _parse_hop(raw.get(f"hop_{name}", {}), preset, f"network.hop_{name}", None)
    sp_raw = raw.get("hop_sp", {})
    hops["sp"] = _parse_hop(sp_raw, preset, "network.hop_sp", hops["pq"].avg_snr)
    counts = {name: raw.get(name, 1) for name in COUNT_FIELDS}
    return NetworkConfig(
        **counts,
        hop_sp=hops["sp"],
        hop_pq=hops["pq"],
        hop_pw=hops["pw"],
        sp_tracks_pq="avg_snr_db" not in sp_raw,
    )


def apply_override(net: NetworkConfig, key: str, value: Any) -> NetworkConfig:
    """
    Return a copy of the network with one sweep variable or curve override applied.

    Parameters:
        net (NetworkConfig): Base network.
        key (str): One of OVERRIDE_KEYS except target_rate.
        value (Any): New value, in dB for avg_snr_*_db keys.
    Returns:
        NetworkConfig: Updated network.
    Raises:
        ConfigError: If the key is unknown or the value invalid.
    """
    validate_choice(key, OVERRIDE_KEYS, "override")
    if key in COUNT_FIELDS:
        return replace(net, **{key: validate_positive_int(value, key)})
    if key == "preset":
        return replace(
            net,
            **{f"hop_{hop}": parse_preset(value, net.hop(hop).avg_snr) for hop in HOP_NAMES},
        )
    if key.startswith("preset_"):
        hop = key[len("preset_") :]
        return replace(net, **{f"hop_{hop}": parse_preset(value, net.hop(hop).avg_snr)})
    if key.startswith("avg_snr_"):
        hop = key[len("avg_snr_") : -len("_db")]
        linear = db_to_linear(validate_number(value, key))
        updated = replace(net, **{f"hop_{hop}": net.hop(hop).with_avg_snr(linear)})
        if hop == "pq" and net.sp_tracks_pq:
            updated = replace(updated, hop_sp=net.hop_sp.with_avg_snr(linear))
        if hop == "sp":
            updated = replace(updated, sp_tracks_pq=False)
        return updated
    if key == "target_rate":
        raise ConfigError("target_rate is not a network field", "override")
    shape, hop = key.split("_")
    number = _shadowing(value, key) if shape == "m" else validate_number(value, key)
    return replace(net, **{f"hop_{hop}": replace(net.hop(hop), **{shape: number})})


def _parse_curves(raw: Any) -> Tuple[Curve, ...]:
    if raw is None:
        return (Curve("base"),)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("must be a nonempty list", "sweep.curves")
    curves = []
    for index, item in enumerate(raw):
        where = f"sweep.curves[{index}]"
        _reject_unknown(item, _CURVE_KEYS, where)
        overrides = item.get("set", {})
        _reject_unknown(overrides, OVERRIDE_KEYS, f"{where}.set")
        curves.append(Curve(str(item.get("name", f"curve{index}")), tuple(overrides.items())))
    names = [curve.name for curve in curves]
    if len(set(names)) != len(names):
        raise ConfigError("curve names must be unique", "sweep.curves")
    return tuple(curves)


def parse_sweep(raw: Dict[str, Any]) -> SweepSpec:
    _reject_unknown(raw, _SWEEP_KEYS, "sweep")
    if "variable" not in raw or "grid" not in raw:
        raise ConfigError("needs variable and grid", "sweep")
    grid = raw["grid"]
    if not isinstance(grid, list):
        raise ConfigError("must be a list", "sweep.grid")
    target_rate = raw.get("target_rate")
    return SweepSpec(
        variable=raw["variable"],
        grid=tuple(grid),
        metrics=tuple(raw.get("metrics", METRICS)),
        methods=tuple(raw.get("methods", (DefaultConfig.DEFAULT_METHOD,))),
        target_rate=None if target_rate is None else validate_number(target_rate, "sweep.target_rate"),
        curves=_parse_curves(raw.get("curves")),
    )


def parse_series(raw: Dict[str, Any]) -> SeriesConfig:
    _reject_unknown(raw, _SERIES_KEYS, "series")
    return SeriesConfig(**raw)


def parse_simulation(raw: Dict[str, Any], net: NetworkConfig) -> SimPlan:
    _reject_unknown(raw, _SIMULATION_KEYS, "simulation")
    return SimPlan(
        trials=int(raw.get("trials", DefaultConfig.MC_TRIALS)),
        seed=int(raw.get("seed", DefaultConfig.MC_SEED)),
        mode=raw.get("mode", DefaultConfig.MC_MODE),
        net=net,
        block_size=int(raw.get("block_size", DefaultConfig.MC_BLOCK_SIZE)),
    )


def parse_config(document: Dict[str, Any]) -> Tuple[NetworkConfig, SweepSpec, SeriesConfig, SimPlan]:
    _reject_unknown(document, _TOP_KEYS, "config")
    if "network" not in document:
        raise ConfigError("is required", "network")
    net = parse_network(document["network"])
    if "sweep" in document:
        sweep = parse_sweep(document["sweep"])
    else:
        sweep = SweepSpec("avg_snr_pq_db", (_base_snr_db(net),), metrics=("pnsmc", "esmc"))
    for curve in sweep.curves:
        for key, value in curve.overrides:
            if key != "target_rate":
                apply_override(net, key, value)
    return net, sweep, parse_series(document.get("series", {})), parse_simulation(document.get("simulation", {}), net)


def _base_snr_db(net: NetworkConfig) -> float:
    return 10.0 * math.log10(net.hop_pq.avg_snr)


def load_config(path) -> Tuple[NetworkConfig, SweepSpec, SeriesConfig, SimPlan]:
    """
    Load and validate a scenario file.

    Parameters:
        path (str | Path): JSON scenario file; bare names are looked up in configs/.
    Returns:
        Tuple[NetworkConfig, SweepSpec, SeriesConfig, SimPlan]: Validated settings.
    Raises:
        ConfigError: If the file is missing, malformed or violates the schema.
    """
    file_path = Path(path)
    if not file_path.is_file() and (CONFIG_DIR / file_path).is_file():
        file_path = CONFIG_DIR / file_path
    try:
        document = json.loads(file_path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {file_path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {file_path}: {exc}") from exc
    logger.info("Loaded scenario %s", file_path)
    return parse_config(document)


def sweep_points(net: NetworkConfig, sweep: SweepSpec, methods: Optional[Tuple[str, ...]] = None) -> List[SweepPoint]:
    """
    Expand a sweep into points in deterministic order: curve, grid value, metric, method.

    Parameters:
        net (NetworkConfig): Base network.
        sweep (SweepSpec): Sweep definition.
        methods (Optional[Tuple[str, ...]]): Methods overriding the sweep's own.
    Returns:
        List[SweepPoint]: Points to evaluate.
    Raises:
        ConfigError: If an override is invalid.
    """
    points = []
    for curve in sweep.curves:
        curve_net = net
        target_rate = sweep.target_rate
        for key, value in curve.overrides:
            if key == "target_rate":
                target_rate = validate_number(value, "target_rate")
            else:
                curve_net = apply_override(curve_net, key, value)
        for value in sweep.grid:
            if sweep.variable == "target_rate":
                point_net, point_rate = curve_net, float(value)
            else:
                point_net, point_rate = apply_override(curve_net, sweep.variable, value), target_rate
            for metric in sweep.metrics:
                for method in methods or sweep.methods:
                    points.append(
                        SweepPoint(curve.name, sweep.variable, value, metric, method, point_net, point_rate or 1.0)
                    )
    return points
