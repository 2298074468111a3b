"""Parameter sweeps behind the capacity, regime and design-space curves.

Each sweep returns a list of flat row dicts ready for CSV output.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Sequence

import numpy as np

from . import config as cfgmod
from .channel import channel_capacity
from .device import design_space_sweep, rate_per_watt
from .errors import ConfigError
from .metrics import (
    analyze,
    car,
    cdr,
    inference_ratio,
    min_arrival_probability,
    min_detectable_rate,
    p_acc,
    p_coincidence,
    p_dark,
    snr,
    transfer_elements_full,
    transfer_elements_simple,
)
from .specs import ChannelSpec, SourceSpec


def grid(spec) -> np.ndarray:
    """``{"min", "max", "points", "scale"}`` -> values; a plain list passes through."""
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    try:
        lo, hi, points = float(spec["min"]), float(spec["max"]), int(spec["points"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"bad sweep axis {spec!r}") from None
    scale = spec.get("scale", "linear")
    if points < 2:
        raise ConfigError("a sweep axis needs at least two points")
    if scale == "log":
        if lo <= 0 or hi <= 0:
            raise ConfigError("log axis bounds must be positive")
        return np.logspace(math.log10(lo), math.log10(hi), points)
    if scale != "linear":
        raise ConfigError(f"unknown axis scale {scale!r}")
    return np.linspace(lo, hi, points)


def capacity_curves(ns: Sequence[int], p_a_values, p_d_values) -> list:
    """Capacity of identical n-fold channels under the dark-count-only logic."""
    rows = []
    for n in ns:
        for p_d in p_d_values:
            for p_a in p_a_values:
                t = transfer_elements_simple([ChannelSpec(float(p_a), float(p_d))] * int(n))
                rows.append(
                    {
                        "n": int(n),
                        "p_avalanche": float(p_a),
                        "p_dark_count": float(p_d),
                        "p_c_given_s": t.p_c_given_s,
                        "p_c_given_not_s": t.p_c_given_not_s,
                        "det": t.det,
                        "capacity": channel_capacity(t),
                    }
                )
    return rows


def regime_curves(channels: Sequence[ChannelSpec], source: SourceSpec, p_s_values, tie_noise=True) -> list:
    """SNR, CAR, CDR and the two minimum-arrival branches against arrival probability."""
    rows = []
    pd = p_dark(channels)
    for p_s in p_s_values:
        src = source.with_arrival(float(p_s), tie_noise)
        pc = p_coincidence(channels, src)
        pa = p_acc(channels, src)
        t = transfer_elements_full(channels, src)
        mins = min_arrival_probability(channels, src)
        s, c, d = snr(pc, pa), car(pc, pa, pd), cdr(pc, pa, pd)
        rows.append(
            {
                "p_s": float(p_s),
                "p_c": pc,
                "p_acc": pa,
                "p_dark": pd,
                "snr": s,
                "car": c,
                "cdr": d,
                "ir": inference_ratio(t),
                "snr_over_cdr": s / d if d else math.nan,
                "snr_over_car": s / c if c else math.nan,
                "min_p_s_cdr": mins.cdr_branch,
                "min_p_s_ir": mins.ir_branch,
            }
        )
    return rows


def detector_grid(base: ChannelSpec, n: int, efficiencies, dark_probs, t_rep: float, k_per_watt=None) -> list:
    """Minimum detectable rate over a grid of per-channel efficiency and dark probability."""
    rows = []
    for p_d in dark_probs:
        for eff in efficiencies:
            ch = replace(base, p_avalanche=float(eff), p_dark_count=float(p_d))
            r_min = min_detectable_rate([ch] * n, t_rep)
            row = {"p_avalanche": float(eff), "p_dark_count": float(p_d), "r_min_hz": r_min}
            if k_per_watt:
                row["pump_power_at_r_min_w"] = r_min / k_per_watt
            rows.append(row)
    return rows


def axis_sweep(document: dict, path: str, values, n_target=100, workers: int = 1) -> list:
    """Full analytic report with one configuration leaf varied."""
    cfgmod.check_path(document, path)

    def point(value):
        a = cfgmod.build(cfgmod.set_path(document, path, float(value)))
        row = {path: float(value), "rate_hz": a.source.rate}
        row.update(analyze(a.channels, a.source, n_target).to_dict())
        row["flags"] = ";".join(row["flags"])
        return row

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(point, values))


def figure_rows(kind: str, analysis, workers: int = 1) -> list:
    """Rows for one named figure from a loaded configuration."""
    sw = analysis.sweep
    n_target = sw.get("n_target", 100)
    t_rep = analysis.source.t_rep
    if kind == "capacity":
        spec = sw.get("capacity", {})
        return capacity_curves(
            spec.get("n", [1, 2, 3]),
            grid(spec.get("p_avalanche", {"min": 0, "max": 1, "points": 101})),
            grid(spec.get("p_dark_count", [0.0, 0.01, 0.1])),
        )
    if kind == "regimes":
        return regime_curves(analysis.channels, analysis.source, grid(sw.get("p_s_grid", {"min": 1e-16, "max": 1e-1, "points": 61, "scale": "log"})))
    if kind == "design":
        _need_device(analysis)
        presets = analysis.presets or {"configured": analysis.channels}
        return design_space_sweep(
            analysis.device, analysis.bands, analysis.pump, presets, grid(sw["rate_grid"]), n_target
        )
    if kind == "detectors":
        k = rate_per_watt(analysis.device, analysis.pump, analysis.bands) if analysis.device else None
        return detector_grid(
            analysis.channels[0],
            len(analysis.channels),
            grid(sw.get("efficiency_grid", {"min": 0.05, "max": 1, "points": 20})),
            grid(sw.get("dark_grid", {"min": 1e-8, "max": 1e-4, "points": 9, "scale": "log"})),
            t_rep,
            k,
        )
    if kind == "axis":
        spec = sw.get("axis")
        if not spec or "path" not in spec:
            raise ConfigError("sweep.axis needs a parameter path")
        return axis_sweep(analysis.document, spec["path"], grid(spec), n_target, workers)
    raise ConfigError(f"unknown sweep kind {kind!r}")


FIGURES = ("capacity", "regimes", "design", "detectors", "axis")


def _need_device(analysis):
    if analysis.device is None or analysis.pump is None or len(analysis.bands) != 3:
        raise ConfigError("design sweep needs device, pump and three bands")
