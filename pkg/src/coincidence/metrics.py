"""Coincidence logic to transfer-matrix elements and derived figures of merit.

Two logics are modelled. In the simple one a channel fires when the signal
is registered or a dark count occurs::

    C_v = A_v S + D_v

In the full one path transmission, background and decorrelated source
photons are added::

    C_v = A_v [L_v (S + S_v) + B_v] + D_v

and the coincidence is ``C = C_1 C_2 ... C_n``. All Bernoulli variables are
independent, so each conditional probability factorises over channels.

Ratios whose denominator vanishes return ``math.inf`` (``nan`` for 0/0)
instead of raising, so sweeps across noiseless corners stay total. Reports
list such entries in ``flags``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

from .channel import (
    TransferMatrix,
    apply_channel,
    channel_capacity,
    posterior_signal_given_coincidence,
)
from .errors import (
    ConsistencyError,
    DeadTimeSaturationError,
    DomainError,
    NoiseDominatedWarning,
    UndefinedPosteriorError,
)
from .specs import ChannelSpec, SourceSpec, probability_to_rate

# relative slack when checking identities that hold exactly in real arithmetic
_ROUNDING = 1e-9


def _require(channels: Sequence[ChannelSpec]) -> Sequence[ChannelSpec]:
    if len(channels) == 0:
        raise DomainError("at least one detection channel is required")
    return channels


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        if num == 0.0:
            return math.nan
        return math.copysign(math.inf, num)
    return num / den


def to_db(ratio: float) -> float:
    if ratio <= 0.0:
        return -math.inf
    return 10.0 * math.log10(ratio)


# --- transfer matrix elements ---------------------------------------------


def transfer_elements_simple(channels: Sequence[ChannelSpec]) -> TransferMatrix:
    """Dark counts and detection efficiency only; path and background are ignored."""
    given_s = 1.0
    given_not_s = 1.0
    for ch in _require(channels):
        d = ch.p_dark_count
        given_s *= (1.0 - d) * ch.p_avalanche + d
        given_not_s *= d
    return TransferMatrix(given_not_s, given_s)


def channel_factors(ch: ChannelSpec, p_gen_noise: float) -> tuple[float, float]:
    """Per-channel firing probabilities ``(given S=1, given S=0)`` under the full logic."""
    a, b, d, l = ch.p_avalanche, ch.p_background, ch.p_dark_count, ch.p_path
    given_s = (1.0 - d) * a * ((1.0 - b) * l + b) + d
    given_not_s = (1.0 - d) * a * ((1.0 - b) * l * p_gen_noise + b) + d
    return given_s, given_not_s


def transfer_elements_full(channels: Sequence[ChannelSpec], source: SourceSpec) -> TransferMatrix:
    given_s = 1.0
    given_not_s = 1.0
    for ch in _require(channels):
        x, y = channel_factors(ch, source.p_gen_noise)
        given_s *= x
        given_not_s *= y
    return TransferMatrix(given_not_s, given_s)


def system_efficiency(channels: Sequence[ChannelSpec]) -> float:
    """Probability that all n photons of one arrival are registered."""
    eff = 1.0
    for ch in _require(channels):
        eff *= ch.efficiency
    return eff


def p_coincidence(channels: Sequence[ChannelSpec], source: SourceSpec) -> float:
    return apply_channel(transfer_elements_full(channels, source), source.p_arrival)


def p_dark(channels: Sequence[ChannelSpec]) -> float:
    """Coincidence probability per cycle with the source switched off."""
    out = 1.0
    for ch in _require(channels):
        d = ch.p_dark_count
        out *= (1.0 - d) * ch.p_avalanche * ch.p_background + d
    return out


def p_acc(channels: Sequence[ChannelSpec], source: SourceSpec) -> float:
    """Probability of a coincidence that is not a fully registered arrival."""
    p_c = p_coincidence(channels, source)
    out = p_c - system_efficiency(channels) * source.p_arrival
    if out < 0.0:
        if out < -_ROUNDING * p_c:
            raise ConsistencyError(f"accidental probability is negative ({out!r})")
        out = 0.0
    return out


def singles_probability(ch: ChannelSpec, source: SourceSpec) -> float:
    """Marginal per-cycle firing probability of one channel, before dead time."""
    x, y = channel_factors(ch, source.p_gen_noise)
    return x * source.p_arrival + y * (1.0 - source.p_arrival)


def p_shifted_accidental(channels: Sequence[ChannelSpec], source: SourceSpec) -> float:
    """Expected n-fold coincidence probability once the channels are decorrelated.

    This is what a non-zero delay bin of a staggered-shift histogram counts,
    the product of the marginal singles probabilities.
    """
    out = 1.0
    for ch in _require(channels):
        out *= singles_probability(ch, source)
    return out


# --- figures of merit -------------------------------------------------------


def car(p_c: float, p_acc: float, p_dark: float) -> float:
    """Coincidence-to-accidental ratio."""
    return _ratio(p_c - p_acc, p_acc - p_dark)


def snr(p_c: float, p_acc: float) -> float:
    return _ratio(p_c - p_acc, p_acc)


def cdr(p_c: float, p_acc: float, p_dark: float) -> float:
    """Coincidence-to-dark ratio."""
    return _ratio(p_c - p_acc, p_dark)


def intrinsic_car(source: SourceSpec, n: int) -> float:
    """CAR of a source seen through detectors with no dark counts or background."""
    return _ratio(source.p_arrival, (1.0 - source.p_arrival) * source.p_gen_noise**n)


def inference_ratio(t: TransferMatrix) -> float:
    """Arrival probability above which a coincidence implies an arrival more often than not."""
    den = t.p_c_given_not_s + t.p_c_given_s
    if den == 0.0:
        return math.nan
    return t.p_c_given_not_s / den


class MinArrival(NamedTuple):
    cdr_branch: float
    ir_branch: float


def min_arrival_probability(channels: Sequence[ChannelSpec], source: SourceSpec) -> MinArrival:
    """Smallest detectable arrival probability, by CDR = 1 and by the inference ratio.

    The inference branch is evaluated with the transfer matrix frozen at
    ``source`` since the generation noise couples it to the arrival probability.
    """
    eff = system_efficiency(channels)
    cdr_branch = _ratio(p_dark(channels), eff)
    if eff == 0.0:
        cdr_branch = math.inf
    return MinArrival(cdr_branch, inference_ratio(transfer_elements_full(channels, source)))


def min_detectable_rate(channels: Sequence[ChannelSpec], t_rep: float) -> float:
    """Dark coincidence rate referred back to the source by the system efficiency."""
    eff = system_efficiency(channels)
    if eff == 0.0:
        return math.inf
    return probability_to_rate(p_dark(channels), t_rep) / eff


def integration_time(channels: Sequence[ChannelSpec], source: SourceSpec, n_target: float = 100) -> float:
    """Approximate acquisition time to register ``n_target`` coincidences."""
    if not n_target >= 1:
        raise DomainError(f"n_target must be >= 1, got {n_target!r}")
    t = transfer_elements_full(channels, source)
    per_cycle = t.det * source.p_arrival + t.p_c_given_not_s
    if per_cycle <= 0.0:
        return math.inf
    return n_target * source.t_rep / per_cycle


# --- dead time and estimators -----------------------------------------------


def deadtime_factor(channels: Sequence[ChannelSpec], raw_singles: Sequence[float]) -> float:
    """Probability that every channel is live, ``prod(1 - R_v T_v)``."""
    if len(raw_singles) != len(_require(channels)):
        raise DomainError("need one raw singles rate per channel")
    out = 1.0
    for ch, rate in zip(channels, raw_singles):
        occupancy = rate * ch.dead_time
        if occupancy >= 1.0:
            raise DeadTimeSaturationError(
                f"dead-time occupancy {occupancy:.3g} >= 1: channel saturated"
            )
        out *= 1.0 - occupancy
    return out


def deadtime_corrected_coincidence(r_c: float, channels: Sequence[ChannelSpec], raw_singles: Sequence[float]) -> float:
    """Raw coincidence rate expected after dead-time loss from a true rate ``r_c``."""
    return r_c * deadtime_factor(channels, raw_singles)


@dataclass(frozen=True)
class RawRates:
    """Rates read from a time-tag acquisition, uncorrected for dead time.

    ``counts`` holds the underlying tallies: ``singles`` (list), ``coincidence``,
    ``accidental_total`` and ``accidental_bins`` (sum over, and number of,
    non-zero delay bins), ``cycles``, and for a dark run ``dark`` and
    ``dark_cycles``.
    """

    singles: tuple
    coincidence: float
    accidental: float
    integration_time: float
    t_rep: float
    dark_coincidence: Optional[float] = None
    counts: dict = field(default_factory=dict)

    @classmethod
    def from_counts(
        cls,
        singles,
        coincidence,
        accidental_bins,
        cycles,
        t_rep,
        dark=None,
        dark_cycles=None,
    ):
        if cycles <= 0:
            raise DomainError("integration requires at least one cycle")
        t_int = cycles * t_rep
        accidental_bins = list(accidental_bins)
        k = len(accidental_bins)
        acc_total = int(sum(accidental_bins))
        counts = {
            "singles": [int(n) for n in singles],
            "coincidence": int(coincidence),
            "accidental_total": acc_total,
            "accidental_bins": k,
            "cycles": int(cycles),
        }
        dark_rate = None
        if dark is not None:
            if not dark_cycles:
                raise DomainError("dark run requires at least one cycle")
            counts["dark"] = int(dark)
            counts["dark_cycles"] = int(dark_cycles)
            dark_rate = dark / (dark_cycles * t_rep)
        return cls(
            singles=tuple(n / t_int for n in singles),
            coincidence=coincidence / t_int,
            accidental=(acc_total / k if k else 0.0) / t_int,
            integration_time=t_int,
            t_rep=t_rep,
            dark_coincidence=dark_rate,
            counts=counts,
        )


def estimate_generation_rate_primitive(raw: RawRates, t: TransferMatrix, channels: Sequence[ChannelSpec]) -> float:
    """Generation rate from the raw coincidence rate and a known transfer matrix.

    Only valid for a noiseless source, where false coincidences equal dark ones.
    """
    if not t.det > 0.0:
        raise DomainError(f"transfer matrix is not invertible for estimation (det={t.det!r})")
    live = deadtime_factor(channels, raw.singles)
    r_false = probability_to_rate(t.p_c_given_not_s, raw.t_rep)
    return (raw.coincidence - r_false * live) / (t.det * live)


def estimate_generation_rate_advanced(raw: RawRates, channels: Sequence[ChannelSpec]) -> float:
    """Generation rate from the excess of zero-delay over non-zero-delay coincidences."""
    eff = system_efficiency(channels)
    if eff == 0.0:
        raise DomainError("system efficiency is zero; generation rate is unobservable")
    live = deadtime_factor(channels, raw.singles)
    excess = raw.coincidence - raw.accidental
    if excess < 0.0:
        sigma = _excess_sigma(raw)
        if sigma == 0.0 or excess < -3.0 * sigma:
            warnings.warn(
                f"coincidence excess {excess:.3g} Hz is negative beyond 3 sigma",
                NoiseDominatedWarning,
                stacklevel=2,
            )
    return excess / (eff * live)


def _excess_sigma(raw: RawRates) -> float:
    c = raw.counts
    if "coincidence" not in c:
        return 0.0
    var = c["coincidence"]
    if c.get("accidental_bins"):
        var += c["accidental_total"] / c["accidental_bins"] ** 2
    return math.sqrt(var) / raw.integration_time


# --- full report -------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    p_s: float
    p_c_given_s: float
    p_c_given_not_s: float
    det: float
    p_c: float
    p_dark: float
    p_acc: float
    car: float
    snr: float
    cdr: float
    ir: float
    capacity: float
    posterior: float
    min_p_s_cdr: float
    min_p_s_ir: float
    r_min: float
    t_int_per_coincidence: float
    n_target: float
    t_int_target: float
    flags: tuple = ()

    @property
    def snr_db(self) -> float:
        return to_db(self.snr)

    @property
    def cdr_db(self) -> float:
        return to_db(self.cdr)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["flags"] = list(self.flags)
        out["snr_db"] = self.snr_db
        out["cdr_db"] = self.cdr_db
        return out


def analyze(channels: Sequence[ChannelSpec], source: SourceSpec, n_target: float = 100) -> MetricsReport:
    """Evaluate every analytic metric for one instrument/source configuration."""
    t = transfer_elements_full(channels, source)
    pc = apply_channel(t, source.p_arrival)
    pd = p_dark(channels)
    pa = p_acc(channels, source)
    try:
        posterior = posterior_signal_given_coincidence(t, source.p_arrival)
    except UndefinedPosteriorError:
        posterior = math.nan
    mins = min_arrival_probability(channels, source)
    per = integration_time(channels, source, 1)
    values = dict(
        p_s=source.p_arrival,
        p_c_given_s=t.p_c_given_s,
        p_c_given_not_s=t.p_c_given_not_s,
        det=t.det,
        p_c=pc,
        p_dark=pd,
        p_acc=pa,
        car=car(pc, pa, pd),
        snr=snr(pc, pa),
        cdr=cdr(pc, pa, pd),
        ir=inference_ratio(t),
        capacity=channel_capacity(t),
        posterior=posterior,
        min_p_s_cdr=mins.cdr_branch,
        min_p_s_ir=mins.ir_branch,
        r_min=min_detectable_rate(channels, source.t_rep),
        t_int_per_coincidence=per,
        n_target=n_target,
        t_int_target=per * n_target,
    )
    flags = tuple(
        f"{name}_{'infinite' if math.isinf(v) else 'undefined'}"
        for name, v in values.items()
        if isinstance(v, float) and not math.isfinite(v)
    )
    return MetricsReport(**values, flags=flags)
