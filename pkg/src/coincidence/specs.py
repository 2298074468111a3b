"""Immutable parameter records for the source, detection channels, pump and device.

All quantities are strict SI (seconds, hertz, joules, metres, watts).
Per-cycle occurrence probabilities are dimensionless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from scipy import constants

from .channel import check_probability
from .errors import DomainError

PHOTON_ENERGY_RTOL = 5e-3


def rate_to_probability(rate: float, t_rep: float) -> float:
    """Per-cycle probability of an event occurring at ``rate`` Hz."""
    return rate * t_rep


def probability_to_rate(p: float, t_rep: float) -> float:
    return p / t_rep


def _positive(value, name):
    value = float(value)
    if not value > 0.0 or math.isinf(value):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class DetectionBand:
    center_wavelength: float
    photon_energy: float
    fwhm_bandwidth: float

    def __post_init__(self):
        _positive(self.center_wavelength, "center_wavelength")
        _positive(self.photon_energy, "photon_energy")
        _positive(self.fwhm_bandwidth, "fwhm_bandwidth")

    def photon_energy_mismatch(self) -> float:
        """Relative difference between the stated photon energy and hc/wavelength."""
        expected = constants.h * constants.c / self.center_wavelength
        return abs(self.photon_energy - expected) / expected

    def check_consistency(self, rtol: float = PHOTON_ENERGY_RTOL) -> None:
        mismatch = self.photon_energy_mismatch()
        if mismatch > rtol:
            raise DomainError(
                f"photon energy disagrees with wavelength by {mismatch:.2%} (> {rtol:.2%})"
            )


@dataclass(frozen=True)
class ChannelSpec:
    """One detection channel.

    ``p_path`` is the path *transmission* (probability that a photon reaches
    the detector), not the loss fraction.
    """

    p_avalanche: float
    p_dark_count: float = 0.0
    p_background: float = 0.0
    p_path: float = 1.0
    dead_time: float = 0.0
    band: Optional[DetectionBand] = None

    def __post_init__(self):
        for name in ("p_avalanche", "p_dark_count", "p_background", "p_path"):
            object.__setattr__(self, name, check_probability(getattr(self, name), name))
        dead_time = float(self.dead_time)
        if not dead_time >= 0.0:
            raise DomainError(f"dead_time must be >= 0, got {dead_time!r}")
        object.__setattr__(self, "dead_time", dead_time)

    @property
    def efficiency(self) -> float:
        """Probability that a source photon is registered (path times detector)."""
        return self.p_path * self.p_avalanche

    def dead_cycles(self, t_rep: float) -> int:
        """Dead time as a whole number of repetition periods, rounded up."""
        if self.dead_time == 0.0:
            return 0
        ratio = self.dead_time / t_rep
        # guard against 3.0000000000000004 -> 4
        nearest = round(ratio)
        if abs(ratio - nearest) < 1e-9 * max(1.0, ratio):
            return int(nearest)
        return int(math.ceil(ratio))


@dataclass(frozen=True)
class SourceSpec:
    """Pulsed source: one excitation per ``t_rep``.

    ``p_gen_noise`` is the per-channel probability of a decorrelated source
    photon; it defaults to ``p_arrival``.
    """

    t_rep: float
    p_arrival: float
    p_gen_noise: Optional[float] = None

    def __post_init__(self):
        _positive(self.t_rep, "t_rep")
        object.__setattr__(self, "p_arrival", check_probability(self.p_arrival, "p_arrival"))
        gen = self.p_arrival if self.p_gen_noise is None else self.p_gen_noise
        object.__setattr__(self, "p_gen_noise", check_probability(gen, "p_gen_noise"))

    @classmethod
    def from_rate(cls, rate: float, t_rep: float, p_gen_noise: Optional[float] = None):
        return cls(t_rep, rate_to_probability(rate, t_rep), p_gen_noise)

    @property
    def rate(self) -> float:
        return probability_to_rate(self.p_arrival, self.t_rep)

    def with_arrival(self, p_arrival: float, tie_noise: bool = True) -> "SourceSpec":
        """Copy with a new arrival probability; generation noise follows it if ``tie_noise``."""
        return replace(
            self, p_arrival=p_arrival, p_gen_noise=p_arrival if tie_noise else self.p_gen_noise
        )

    def switched_off(self) -> "SourceSpec":
        return replace(self, p_arrival=0.0, p_gen_noise=0.0)


@dataclass(frozen=True)
class PumpSpec:
    photon_energy: float
    fwhm_bandwidth: float
    average_power: float
    rep_rate: float
    max_power: float = 12e-3

    def __post_init__(self):
        for name in ("photon_energy", "fwhm_bandwidth", "average_power", "rep_rate", "max_power"):
            _positive(getattr(self, name), name)

    @property
    def t_rep(self) -> float:
        return 1.0 / self.rep_rate

    @property
    def over_cap(self) -> bool:
        return self.average_power > self.max_power


@dataclass(frozen=True)
class DeviceSpec:
    effective_nonlinearity: float
    effective_length: float
    # descriptive geometry, carried as metadata only
    geometry: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _positive(self.effective_nonlinearity, "effective_nonlinearity")
        _positive(self.effective_length, "effective_length")
