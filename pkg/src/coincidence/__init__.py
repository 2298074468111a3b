"""Detection limits of n-fold coincidence counting for photon-triplet sources.

Analytic model (:mod:`.metrics`, :mod:`.channel`, :mod:`.device`), a
cycle-accurate Monte Carlo (:mod:`.montecarlo`) and the time-tag estimator
pipeline (:mod:`.tags`).
"""
from .channel import (
    TransferMatrix,
    apply_channel,
    binary_entropy,
    channel_capacity,
    posterior_signal_given_coincidence,
)
from .device import pump_power_for_rate, triplet_generation_rate
from .errors import (
    CoincidenceError,
    ConfigError,
    ConsistencyError,
    DeadTimeSaturationError,
    DomainError,
    NoiseDominatedWarning,
    TagFormatError,
    UndefinedPosteriorError,
)
from .metrics import MetricsReport, RawRates, analyze
from .specs import ChannelSpec, DetectionBand, DeviceSpec, PumpSpec, SourceSpec

__version__ = "0.1.0"
