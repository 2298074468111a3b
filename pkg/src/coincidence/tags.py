"""Time-tag streams, n-fold coincidence histograms and source characterization.

Binary tag file layout
----------------------
1. One line of UTF-8 JSON (the header) terminated by ``\\n``. Keys are
   written sorted and without whitespace::

       {"channels": 3, "cycles": 10000000, "format": "coincidence-tags",
        "labels": ["ch1", "ch2", "ch3"], "provenance": {...}, "seed": 1,
        "t_rep": 1e-07, "version": 1}

2. Zero or more 9-byte records, little-endian, no padding::

       offset 0  uint64  cycle index (0 <= cycle < cycles)
       offset 8  uint8   channel id  (0 <= channel < channels)

   Records are strictly increasing in (cycle, channel).

The CSV variant (``.csv`` suffix) holds ``# `` plus the same header JSON on
the first line, ``cycle,channel`` on the second, then one record per line.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NoiseDominatedWarning, TagFormatError
from .metrics import (
    RawRates,
    deadtime_factor,
    estimate_generation_rate_advanced,
    system_efficiency,
    to_db,
)
from .specs import ChannelSpec

FORMAT_NAME = "coincidence-tags"
FORMAT_VERSION = 1
RECORD_DTYPE = np.dtype([("cycle", "<u8"), ("channel", "u1")])
assert RECORD_DTYPE.itemsize == 9


@dataclass(frozen=True)
class TagHeader:
    t_rep: float
    n_channels: int
    labels: tuple
    cycles: int
    seed: Optional[int] = None
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "t_rep": self.t_rep,
            "channels": self.n_channels,
            "labels": list(self.labels),
            "cycles": self.cycles,
            "seed": self.seed,
            "provenance": self.provenance,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TagHeader":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TagFormatError(f"header is not valid JSON: {exc.msg}", "header") from None
        if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
            raise TagFormatError("not a coincidence tag file", "header")
        if doc.get("version") != FORMAT_VERSION:
            raise TagFormatError(f"unsupported version {doc.get('version')!r}", "header")
        try:
            header = cls(
                t_rep=float(doc["t_rep"]),
                n_channels=int(doc["channels"]),
                labels=tuple(doc["labels"]),
                cycles=int(doc["cycles"]),
                seed=doc.get("seed"),
                provenance=doc.get("provenance") or {},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TagFormatError(f"malformed header field: {exc}", "header") from None
        if not header.t_rep > 0 or not 1 <= header.n_channels <= 255 or header.cycles < 0:
            raise TagFormatError("header values out of range", "header")
        if len(header.labels) != header.n_channels:
            raise TagFormatError("label count differs from channel count", "header")
        return header


@dataclass(frozen=True, eq=False)
class TagStream:
    header: TagHeader
    cycle: np.ndarray
    channel: np.ndarray

    def __len__(self):
        return int(self.cycle.size)

    def __eq__(self, other):
        return (
            isinstance(other, TagStream)
            and self.header == other.header
            and np.array_equal(self.cycle, other.cycle)
            and np.array_equal(self.channel, other.channel)
        )

    def channel_cycles(self, v: int) -> np.ndarray:
        return self.cycle[self.channel == v]

    def singles_counts(self) -> list:
        return np.bincount(self.channel, minlength=self.header.n_channels).tolist()

    def rotated(self, offset: int) -> "TagStream":
        """Every tag moved ``offset`` cycles later, wrapping around the acquisition."""
        n = self.header.cycles
        cyc = ((self.cycle.astype(np.int64) + offset) % n).astype(np.uint64)
        order = np.lexsort((self.channel, cyc))
        return TagStream(self.header, cyc[order], self.channel[order])


def _validate_records(header: TagHeader, cyc: np.ndarray, chan: np.ndarray, line0: int = 0, csv_mode=False):
    def where(i):
        return f"line {line0 + i}" if csv_mode else f"record {i}"

    bad = np.flatnonzero(chan >= header.n_channels)
    if bad.size:
        i = int(bad[0])
        raise TagFormatError(
            f"unknown channel {int(chan[i])} (file declares {header.n_channels})", where(i)
        )
    bad = np.flatnonzero(cyc >= np.uint64(max(header.cycles, 0)))
    if bad.size:
        i = int(bad[0])
        raise TagFormatError(f"cycle {int(cyc[i])} beyond declared {header.cycles} cycles", where(i))
    if cyc.size > 1:
        c0, c1 = cyc[:-1], cyc[1:]
        ok = (c1 > c0) | ((c1 == c0) & (chan[1:] > chan[:-1]))
        bad = np.flatnonzero(~ok)
        if bad.size:
            raise TagFormatError("records not strictly sorted by (cycle, channel)", where(int(bad[0]) + 1))


def write_tags(path, tags: TagStream) -> None:
    """Write ``tags`` atomically; a ``.csv`` suffix selects the text variant."""
    path = Path(path)
    _validate_records(tags.header, tags.cycle, tags.channel)
    if path.suffix.lower() == ".csv":
        buf = io.StringIO()
        buf.write("# " + tags.header.to_json() + "\n")
        buf.write("cycle,channel\n")
        for c, v in zip(tags.cycle.tolist(), tags.channel.tolist()):
            buf.write(f"{c},{v}\n")
        payload = buf.getvalue().encode()
    else:
        rec = np.empty(len(tags), dtype=RECORD_DTYPE)
        rec["cycle"] = tags.cycle
        rec["channel"] = tags.channel
        payload = tags.header.to_json().encode() + b"\n" + rec.tobytes()
    _atomic_write(path, payload)


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def read_tags(path) -> TagStream:
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".csv":
        return _read_csv(data.decode())
    nl = data.find(b"\n")
    if nl < 0:
        raise TagFormatError("missing header line", "header")
    header = TagHeader.from_json(data[:nl].decode())
    body = data[nl + 1 :]
    if len(body) % RECORD_DTYPE.itemsize:
        raise TagFormatError(
            f"record section is {len(body)} bytes, not a multiple of {RECORD_DTYPE.itemsize}",
            f"record {len(body) // RECORD_DTYPE.itemsize}",
        )
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    cyc = rec["cycle"].astype(np.uint64)
    chan = rec["channel"].astype(np.uint8)
    _validate_records(header, cyc, chan)
    return TagStream(header, cyc, chan)


def _read_csv(text: str) -> TagStream:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise TagFormatError("missing '# ' header line", "line 1")
    header = TagHeader.from_json(lines[0][2:])
    if len(lines) < 2 or lines[1].strip() != "cycle,channel":
        raise TagFormatError("expected column line 'cycle,channel'", "line 2")
    cyc, chan = [], []
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        try:
            c, v = (int(x) for x in row)
        except ValueError:
            raise TagFormatError(f"malformed record {row!r}", f"line {lineno}") from None
        if c < 0 or not 0 <= v < 256:
            raise TagFormatError(f"malformed record {row!r}", f"line {lineno}")
        cyc.append(c)
        chan.append(v)
    cyc = np.array(cyc, dtype=np.uint64)
    chan_arr = np.array(chan, dtype=np.int64)
    bad = np.flatnonzero(chan_arr >= header.n_channels)
    if bad.size:
        i = int(bad[0])
        raise TagFormatError(
            f"unknown channel {int(chan_arr[i])} (file declares {header.n_channels})", f"line {i + 3}"
        )
    chan_u8 = chan_arr.astype(np.uint8)
    _validate_records(header, cyc, chan_u8, line0=3, csv_mode=True)
    return TagStream(header, cyc, chan_u8)


# --- histogram --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """n-fold coincidence counts per signed cycle delay; delay 0 is the true-coincidence bin."""

    delays: np.ndarray
    counts: np.ndarray
    cycles: int

    @property
    def zero(self) -> int:
        return int(self.counts[self.delays == 0][0])

    @property
    def nonzero(self) -> np.ndarray:
        return self.counts[self.delays != 0]

    def accidental_mean(self) -> float:
        return float(self.nonzero.mean()) if self.nonzero.size else 0.0

    def to_csv(self) -> str:
        out = ["delay,count"]
        out += [f"{d},{c}" for d, c in zip(self.delays.tolist(), self.counts.tolist())]
        return "\n".join(out) + "\n"


def _shifted_coincidences(per_channel, shifts, n_cycles):
    common = None
    for cyc, s in zip(per_channel, shifts):
        if s:
            cyc = np.sort((cyc + s) % n_cycles)
        common = cyc if common is None else np.intersect1d(common, cyc, assume_unique=True)
        if common.size == 0:
            return 0
    return int(common.size)


def histogram(tags: TagStream, max_delay: int) -> CoincidenceHistogram:
    """Staggered-shift n-fold histogram.

    Bin ``d`` counts cycles where every channel fired after channel v's tags
    are rotated by ``v * d`` cycles (wrapping at the acquisition length).
    Distinct shifts per channel decorrelate all channels at once, so non-zero
    bins sample the accidental floor.
    """
    n = tags.header.n_channels
    if n < 2:
        raise DomainError("a coincidence histogram needs at least two channels")
    if max_delay < 1:
        raise DomainError("max_delay must be >= 1")
    n_cycles = tags.header.cycles
    if n_cycles <= 0:
        raise DomainError("tag stream covers zero cycles")
    per_channel = [tags.channel_cycles(v).astype(np.int64) for v in range(n)]
    delays = np.arange(-max_delay, max_delay + 1)
    counts = np.array(
        [_shifted_coincidences(per_channel, [v * d for v in range(n)], n_cycles) for d in delays],
        dtype=np.int64,
    )
    return CoincidenceHistogram(delays, counts, n_cycles)


def extract_raw_rates(
    tags: TagStream, hist: CoincidenceHistogram, integration_time: Optional[float] = None, dark=None
) -> RawRates:
    """Rates from one acquisition; ``dark`` is an optional dark-run histogram."""
    n_cycles = tags.header.cycles
    if n_cycles <= 0:
        raise DomainError("integration requires at least one cycle")
    t_rep = tags.header.t_rep
    expected = n_cycles * t_rep
    if integration_time is not None and not math.isclose(integration_time, expected, rel_tol=1e-12):
        raise DomainError(f"integration time {integration_time} s != cycles * t_rep = {expected} s")
    return RawRates.from_counts(
        singles=tags.singles_counts(),
        coincidence=hist.zero,
        accidental_bins=hist.nonzero.tolist(),
        cycles=n_cycles,
        t_rep=t_rep,
        dark=None if dark is None else dark.zero,
        dark_cycles=None if dark is None else dark.cycles,
    )


# --- characterization ---------------------------------------------------------------


def _binom_var(k: int, n: int) -> float:
    return k * (1.0 - k / n) if n else 0.0


@dataclass(frozen=True)
class Characterization:
    """Generation-rate estimate and noise ratios from a bright and a dark acquisition.

    ``*_err`` are one-sigma binomial errors propagated to first order.
    """

    generation_rate: float
    generation_rate_err: float
    p_s: float
    p_s_err: float
    car: float
    car_err: float
    snr: float
    snr_err: float
    cdr: float
    cdr_err: float
    p_c: float
    p_acc: float
    p_dark: float
    live_fraction: float
    raw: dict
    flags: tuple = ()

    @property
    def snr_db(self) -> float:
        return to_db(self.snr)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["flags"] = list(self.flags)
        out["snr_db"] = self.snr_db
        out["cdr_db"] = to_db(self.cdr)
        return out


def _grad_ratio(num, den, dnum, dden, cov):
    """Value and first-order sigma of num/den given gradients over independent counts."""
    if den == 0.0:
        return (math.nan if num == 0.0 else math.copysign(math.inf, num)), math.nan
    value = num / den
    var = sum(((dn - value * dd) / den) ** 2 * c for dn, dd, c in zip(dnum, dden, cov))
    return value, math.sqrt(var)


def characterize(
    bright: TagStream,
    dark: TagStream,
    channels: Sequence[ChannelSpec],
    max_delay: int = 10,
    significance: float = 3.0,
) -> Characterization:
    """Generation rate, CAR, SNR and CDR from source-on and source-off tag streams.

    ``channels`` supplies the calibrated path transmission, detection
    efficiency and dead time of each channel.
    """
    hb, hd = bright.header, dark.header
    if not math.isclose(hb.t_rep, hd.t_rep, rel_tol=1e-12) or hb.n_channels != hd.n_channels:
        raise ConfigError("bright and dark runs differ in repetition period or channel layout")
    if hb.labels != hd.labels:
        raise ConfigError("bright and dark runs label their channels differently")
    if len(channels) != hb.n_channels:
        raise ConfigError(f"calibration has {len(channels)} channels, tags have {hb.n_channels}")

    hist_b = histogram(bright, max_delay)
    hist_d = histogram(dark, max_delay)
    raw = extract_raw_rates(bright, hist_b, dark=hist_d)
    t_int = raw.integration_time
    t_dark = hd.cycles * hd.t_rep
    nb, nd = hb.cycles, hd.cycles
    k = hist_b.nonzero.size

    n_z = hist_b.zero
    n_acc = float(hist_b.nonzero.sum())
    n_dark = hist_d.zero
    # rates and their variances; accidental rate is the bin mean
    r_z, v_z = n_z / t_int, _binom_var(n_z, nb) / t_int**2
    r_a, v_a = n_acc / k / t_int, _binom_var(n_acc / k, nb) / k / t_int**2
    r_d, v_d = n_dark / t_dark, _binom_var(n_dark, nd) / t_dark**2
    cov = (v_z, v_a, v_d)

    flags = []
    eff = system_efficiency(channels)
    live = deadtime_factor(channels, raw.singles)
    excess = r_z - r_a
    excess_err = math.sqrt(v_z + v_a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseDominatedWarning)
        rate = estimate_generation_rate_advanced(raw, channels)
    rate_err = excess_err / (eff * live)
    if not excess > significance * excess_err:
        flags.append("noise_dominated")

    car, car_err = _grad_ratio(excess, r_a - r_d, (1, -1, 0), (0, 1, -1), cov)
    snr, snr_err = _grad_ratio(excess, r_a, (1, -1, 0), (0, 1, 0), cov)
    cdr, cdr_err = _grad_ratio(excess, r_d, (1, -1, 0), (0, 0, 1), cov)
    for name, v in (("car", car), ("snr", snr), ("cdr", cdr)):
        if not math.isfinite(v):
            flags.append(f"{name}_{'infinite' if math.isinf(v) else 'undefined'}")

    t_rep = hb.t_rep
    return Characterization(
        generation_rate=rate,
        generation_rate_err=rate_err,
        p_s=rate * t_rep,
        p_s_err=rate_err * t_rep,
        car=car,
        car_err=car_err,
        snr=snr,
        snr_err=snr_err,
        cdr=cdr,
        cdr_err=cdr_err,
        p_c=r_z * t_rep,
        p_acc=r_a * t_rep,
        p_dark=r_d * t_rep,
        live_fraction=live,
        raw={
            "singles_hz": list(raw.singles),
            "coincidence_hz": raw.coincidence,
            "accidental_hz": raw.accidental,
            "dark_coincidence_hz": raw.dark_coincidence,
            "integration_time_s": t_int,
            "dark_integration_time_s": t_dark,
            "accidental_bins": k,
            "counts": raw.counts,
        },
        flags=tuple(flags),
    )
