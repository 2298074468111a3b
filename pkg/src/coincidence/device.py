"""Triplet generation rate of a pulsed-pumped waveguide and the detector design space."""
from __future__ import annotations

import math
from dataclasses import replace
from typing import Mapping, NamedTuple, Sequence

from .errors import DomainError
from .metrics import integration_time, min_detectable_rate, system_efficiency
from .specs import ChannelSpec, DetectionBand, DeviceSpec, PumpSpec, SourceSpec, rate_to_probability


class TripletRate(NamedTuple):
    rate: float
    p_s: float


class PumpPower(NamedTuple):
    power: float
    over_cap: bool


def _check_bands(bands: Sequence[DetectionBand]) -> None:
    if len(bands) != 3:
        raise DomainError(f"the triplet rate needs exactly three detection bands, got {len(bands)}")


def rate_per_watt(device: DeviceSpec, pump: PumpSpec, bands: Sequence[DetectionBand]) -> float:
    """Triplet generation rate per watt of average pump power (Hz/W).

    First-order perturbative result for co-polarised modes with negligible
    dispersion inside each Gaussian detection band.
    """
    _check_bands(bands)
    df_p = pump.fwhm_bandwidth
    df = [b.fwhm_bandwidth for b in bands]
    spectral = math.pi**3 * df[0] * df[1] * df[2] / (math.log(2.0) * df_p)
    spectral /= math.sqrt(1.0 + sum((f / df_p) ** 2 for f in df))
    energies = bands[0].photon_energy * bands[1].photon_energy * bands[2].photon_energy
    energies /= 2.0**5 * math.pi**2 * pump.photon_energy**2
    coupling = (device.effective_nonlinearity * device.effective_length) ** 2
    return spectral * energies * coupling


def triplet_generation_rate(device: DeviceSpec, pump: PumpSpec, bands: Sequence[DetectionBand]) -> TripletRate:
    rate = rate_per_watt(device, pump, bands) * pump.average_power
    return TripletRate(rate, rate_to_probability(rate, pump.t_rep))


def pump_power_for_rate(
    device: DeviceSpec, pump_template: PumpSpec, bands: Sequence[DetectionBand], target_rate: float
) -> PumpPower:
    """Average pump power giving ``target_rate``; ``over_cap`` when it exceeds the laser maximum."""
    if not target_rate > 0.0:
        raise DomainError(f"target_rate must be positive, got {target_rate!r}")
    power = target_rate / rate_per_watt(device, pump_template, bands)
    return PumpPower(power, power > pump_template.max_power)


def design_space_sweep(
    device: DeviceSpec,
    bands: Sequence[DetectionBand],
    pump_template: PumpSpec,
    detector_presets: Mapping[str, Sequence[ChannelSpec]],
    rate_grid: Sequence[float],
    n_target: float = 100,
) -> list[dict]:
    """Minimum detectable rate, pump power and integration time per preset and rate.

    Each preset maps a name to its detection channels. Returns one row per
    (preset, rate) point.
    """
    if not detector_presets or len(rate_grid) == 0:
        raise DomainError("design sweep needs at least one preset and one rate")
    t_rep = pump_template.t_rep
    k = rate_per_watt(device, pump_template, bands)
    rows = []
    for name, channels in detector_presets.items():
        r_min = min_detectable_rate(channels, t_rep)
        p_min = r_min / k
        eff = system_efficiency(channels)
        for rate in rate_grid:
            source = SourceSpec.from_rate(rate, t_rep)
            power = rate / k
            rows.append(
                {
                    "preset": name,
                    "rate_hz": rate,
                    "p_s": source.p_arrival,
                    "pump_power_w": power,
                    "over_cap": power > pump_template.max_power,
                    "t_int_s": integration_time(channels, source, n_target),
                    "detectable": rate >= r_min,
                    "system_efficiency": eff,
                    "r_min_hz": r_min,
                    "pump_power_at_r_min_w": p_min,
                    "r_min_flag": "infinite" if math.isinf(r_min) else "",
                }
            )
    return rows


def replicate(channel: ChannelSpec, bands: Sequence[DetectionBand]) -> list[ChannelSpec]:
    """One copy of ``channel`` per detection band."""
    return [replace(channel, band=b) for b in bands]
