"""JSON analysis configuration with an explicit units block.

Values in the document are in the units named under ``"units"``; they are
converted to SI once, here. Any scalar leaf can be overridden by a dotted
path (``pump.average_power=12``, ``channels.0.p_dark_count=1e-5``) before
conversion, so overrides use the document's units too.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from scipy import constants

from .device import triplet_generation_rate
from .errors import CoincidenceError, ConfigError
from .specs import ChannelSpec, DetectionBand, DeviceSpec, PumpSpec, SourceSpec

CONFIG_DIR_ENV = "COINCIDENCE_CONFIG_DIR"

UNIT_TABLES = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "wavelength": {"m": 1.0, "um": 1e-6, "nm": 1e-9},
    "photon_energy": {"J": 1.0, "eV": constants.e},
    "bandwidth": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9, "THz": 1e12},
    "rep_rate": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "count_rate": {"Hz": 1.0, "mHz": 1e-3, "kHz": 1e3, "MHz": 1e6},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "nonlinearity": {"1/(W m)": 1.0, "1/(W km)": 1e-3},
}
DEFAULT_UNITS = {kind: next(iter(table)) for kind, table in UNIT_TABLES.items()}

_BAND_FIELDS = {"center_wavelength": "wavelength", "photon_energy": "photon_energy", "fwhm_bandwidth": "bandwidth"}
_PUMP_FIELDS = {
    "photon_energy": "photon_energy",
    "fwhm_bandwidth": "bandwidth",
    "average_power": "power",
    "max_power": "power",
    "rep_rate": "rep_rate",
}
_CHANNEL_PROBS = ("p_avalanche", "p_dark_count", "p_background", "p_path")


def shipped_config_dir():
    return resources.files("coincidence") / "configs"


def find_config(name: Optional[str]) -> Path:
    """Resolve a config path, bare name, or ``None`` (the default config).

    Bare names are looked up in ``$COINCIDENCE_CONFIG_DIR`` and then among the
    shipped configs; ``.json`` may be omitted.
    """
    if name is None:
        name = "default"
    p = Path(name)
    if p.is_file():
        return p
    dirs = []
    if os.environ.get(CONFIG_DIR_ENV):
        dirs.append(Path(os.environ[CONFIG_DIR_ENV]))
    dirs.append(Path(str(shipped_config_dir())))
    for d in dirs:
        for cand in (d / name, d / f"{name}.json"):
            if cand.is_file():
                return cand
    if name == "default":
        return find_config("reference")
    raise ConfigError(f"config {name!r} not found")


def load_document(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def parse_override(text: str):
    """``'a.b=1e-3'`` -> ``('a.b', 0.001)``. Values are JSON, else strings."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _walk(doc, parts, create=False):
    node = doc
    for part in parts:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(f"no list element {part!r}") from None
        elif isinstance(node, dict):
            if part not in node:
                if not create:
                    raise ConfigError(f"unknown parameter path component {part!r}")
                node[part] = {}
            node = node[part]
        else:
            raise ConfigError(f"cannot descend into scalar at {part!r}")
    return node


def get_path(doc: dict, path: str):
    return _walk(doc, path.split("."))


def set_path(doc: dict, path: str, value) -> dict:
    """Return a copy of ``doc`` with the leaf at ``path`` replaced."""
    doc = copy.deepcopy(doc)
    parts = path.split(".")
    parent = _walk(doc, parts[:-1], create=True)
    leaf = parts[-1]
    if isinstance(parent, list):
        try:
            parent[int(leaf)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"no list element {leaf!r} in {path!r}") from None
    elif isinstance(parent, dict):
        parent[leaf] = value
    else:
        raise ConfigError(f"cannot set {path!r}")
    return doc


def check_path(doc: dict, path: str) -> None:
    """Raise ConfigError unless ``path`` names an existing scalar leaf."""
    value = get_path(doc, path)
    if isinstance(value, (dict, list)):
        raise ConfigError(f"{path!r} is not a scalar parameter")


@dataclass(frozen=True)
class Analysis:
    device: Optional[DeviceSpec]
    pump: Optional[PumpSpec]
    bands: tuple
    channels: tuple
    source: SourceSpec
    presets: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict, repr=False)
    source_from_device: bool = False


class _Units:
    def __init__(self, block):
        self.units = dict(DEFAULT_UNITS)
        for kind, unit in (block or {}).items():
            if kind not in UNIT_TABLES:
                raise ConfigError(f"unknown unit kind {kind!r}")
            if unit not in UNIT_TABLES[kind]:
                raise ConfigError(f"unknown {kind} unit {unit!r}; choose from {sorted(UNIT_TABLES[kind])}")
            self.units[kind] = unit

    def si(self, value, kind):
        try:
            return float(value) * UNIT_TABLES[kind][self.units[kind]]
        except (TypeError, ValueError):
            raise ConfigError(f"expected a number for a {kind} value, got {value!r}") from None


def _convert(section: dict, fields: dict, units: _Units, where: str) -> dict:
    out = {}
    for key, value in section.items():
        if key in fields:
            out[key] = units.si(value, fields[key])
        else:
            out[key] = value
    missing = [k for k in fields if k not in section and k != "max_power"]
    if missing:
        raise ConfigError(f"{where}: missing {', '.join(missing)}")
    return out


def _merge(defaults: dict, entry: dict) -> dict:
    """Channel entry over defaults; either dark-count field in ``entry`` replaces both defaults."""
    base = dict(defaults)
    if "p_dark_count" in entry or "dark_count_rate" in entry:
        base.pop("p_dark_count", None)
        base.pop("dark_count_rate", None)
    return {**base, **entry}


def _channel(entry: dict, units: _Units, t_rep: float, band, where: str) -> ChannelSpec:
    entry = dict(entry)
    kwargs = {}
    for key in _CHANNEL_PROBS:
        if key in entry:
            kwargs[key] = entry.pop(key)
    if "dark_count_rate" in entry:
        if "p_dark_count" in kwargs:
            raise ConfigError(f"{where}: give p_dark_count or dark_count_rate, not both")
        kwargs["p_dark_count"] = units.si(entry.pop("dark_count_rate"), "count_rate") * t_rep
    if "dead_time" in entry:
        kwargs["dead_time"] = units.si(entry.pop("dead_time"), "time")
    if entry:
        raise ConfigError(f"{where}: unknown channel fields {sorted(entry)}")
    if "p_avalanche" not in kwargs:
        raise ConfigError(f"{where}: missing p_avalanche")
    return ChannelSpec(**kwargs, band=band)


def build(doc: dict) -> Analysis:
    """Turn a configuration document into SI parameter records."""
    try:
        return _build(doc)
    except ConfigError:
        raise
    except CoincidenceError as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed configuration: {exc!r}") from exc


def _build(doc: dict) -> Analysis:
    units = _Units(doc.get("units"))

    pump = None
    if "pump" in doc:
        p = _convert(doc["pump"], _PUMP_FIELDS, units, "pump")
        p.pop("center_wavelength", None)
        pump = PumpSpec(**{k: p[k] for k in _PUMP_FIELDS if k in p})

    bands = tuple(
        DetectionBand(**{k: v for k, v in _convert(b, _BAND_FIELDS, units, f"bands[{i}]").items() if k in _BAND_FIELDS})
        for i, b in enumerate(doc.get("bands", []))
    )

    device = None
    if "device" in doc:
        d = doc["device"]
        device = DeviceSpec(
            units.si(d["effective_nonlinearity"], "nonlinearity"),
            units.si(d["effective_length"], "length"),
            geometry=dict(d.get("geometry", {})),
        )

    src = dict(doc.get("source", {}))
    if "t_rep" in src:
        t_rep = units.si(src.pop("t_rep"), "time")
    elif pump is not None:
        t_rep = pump.t_rep
    else:
        raise ConfigError("source.t_rep is required when no pump is configured")

    defaults = doc.get("channel_defaults", {})
    entries = doc.get("channels")
    if entries is None:
        count = doc.get("n_channels", len(bands))
        if not count:
            raise ConfigError("no channels configured")
        entries = [{} for _ in range(count)]
    channels = tuple(
        _channel(_merge(defaults, e), units, t_rep, bands[i] if i < len(bands) else None, f"channels[{i}]")
        for i, e in enumerate(entries)
    )

    gen = src.pop("p_gen_noise", None)
    from_device = False
    if "p_arrival" in src:
        p_s = float(src.pop("p_arrival"))
    elif "rate" in src:
        p_s = units.si(src.pop("rate"), "count_rate") * t_rep
    else:
        if device is None or pump is None or len(bands) != 3:
            raise ConfigError("source needs p_arrival, rate, or a device, pump and three bands")
        if pump.t_rep != t_rep:
            raise ConfigError("source.t_rep disagrees with the pump repetition rate")
        p_s = triplet_generation_rate(device, pump, bands).p_s
        from_device = True
    src.pop("from_device", None)
    if src:
        raise ConfigError(f"source: unknown fields {sorted(src)}")
    source = SourceSpec(t_rep, p_s, gen)

    presets = {}
    for name, entry in doc.get("detector_presets", {}).items():
        entry = _merge(defaults, entry)
        presets[name] = tuple(
            _channel(entry, units, t_rep, bands[i] if i < len(bands) else None, f"detector_presets.{name}")
            for i in range(len(channels))
        )

    return Analysis(
        device=device,
        pump=pump,
        bands=bands,
        channels=channels,
        source=source,
        presets=presets,
        simulation=dict(doc.get("simulation", {})),
        sweep=dict(doc.get("sweep", {})),
        document=doc,
        source_from_device=from_device,
    )


def load(name=None, overrides=()) -> Analysis:
    doc = load_document(find_config(name))
    for text in overrides:
        doc = apply_override(doc, *parse_override(text))
    return build(doc)


def apply_override(doc: dict, path: str, value) -> dict:
    """Set a scalar leaf, creating it if absent. Whole sections cannot be replaced."""
    try:
        current = get_path(doc, path)
    except ConfigError:
        current = None
    if isinstance(current, (dict, list)):
        raise ConfigError(f"{path!r} is not a scalar parameter")
    return set_path(doc, path, value)
