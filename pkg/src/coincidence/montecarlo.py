"""Cycle-by-cycle simulation of the n-fold coincidence logic with dead-time gating.

Each cycle draws the signal S and, for every channel v, the variables
S_v, L_v, B_v, A_v, D_v, then forms ``C_v = A_v [L_v (S + S_v) + B_v] + D_v``.
Every (variable, cycle) pair reads its own counter of ``rng``; stream
``0`` is S and channel v owns streams ``1 + 5 v + k`` for k = S_v, L_v, B_v,
A_v, D_v. Variables whose value cannot change C_v are never drawn, which
saves time without changing any outcome.

Dead time is nonparalyzable and applied to the composite C_v stream, dark
counts included: a retained firing at cycle c blinds the channel for cycles
c+1 ... c+k with k = ceil(T_dt / T_rep).
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .errors import DomainError
from .rng import bernoulli_at, derive_seed, stream_key
from .specs import ChannelSpec, SourceSpec
from .tags import TagHeader, TagStream

MAX_CHANNELS = 16
MAX_CYCLES = 2**63 - 1
CHUNK = 1 << 20

_S_NU, _L, _B, _A, _D = range(5)


def stream_id(channel: Optional[int], variable: int = 0) -> int:
    """RNG stream of the signal (``channel=None``) or of a per-channel variable."""
    if channel is None:
        return 0
    return 1 + 5 * channel + variable


@dataclass(frozen=True)
class RunConfig:
    cycles: int
    seed: int
    source: SourceSpec
    channels: tuple
    emit_tags: bool = False
    start_cycle: int = 0
    labels: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not 1 <= len(self.channels) <= MAX_CHANNELS:
            raise DomainError(f"between 1 and {MAX_CHANNELS} channels are supported")
        if not 1 <= int(self.cycles) or self.start_cycle < 0 or self.start_cycle + self.cycles > MAX_CYCLES:
            raise DomainError("cycles must be >= 1 and the cycle range must fit in 63 bits")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.labels is not None and len(self.labels) != len(self.channels):
            raise DomainError("need one label per channel")

    @property
    def dead_cycles(self) -> np.ndarray:
        return np.array([ch.dead_cycles(self.source.t_rep) for ch in self.channels], dtype=np.int64)

    def channel_labels(self) -> list:
        if self.labels is not None:
            return list(self.labels)
        return [f"ch{i + 1}" for i in range(len(self.channels))]


@dataclass(frozen=True)
class CycleSummary:
    """Tallies from one run. ``raw_*`` counts ignore dead time."""

    cycles: int
    singles: tuple
    raw_singles: tuple
    coincidences: int
    raw_coincidences: int
    signal: int
    signal_detected: int
    raw_signal_detected: int

    def merge(self, other: "CycleSummary") -> "CycleSummary":
        return CycleSummary(
            cycles=self.cycles + other.cycles,
            singles=tuple(a + b for a, b in zip(self.singles, other.singles)),
            raw_singles=tuple(a + b for a, b in zip(self.raw_singles, other.raw_singles)),
            coincidences=self.coincidences + other.coincidences,
            raw_coincidences=self.raw_coincidences + other.raw_coincidences,
            signal=self.signal + other.signal,
            signal_detected=self.signal_detected + other.signal_detected,
            raw_signal_detected=self.raw_signal_detected + other.raw_signal_detected,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["singles"] = list(self.singles)
        out["raw_singles"] = list(self.raw_singles)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@numba.njit(cache=True, nogil=True)
def _run_chunk(keys, probs, n, start, stop, dead, live_at, want_mask, mask, counts):
    # counts: [raw_singles[n], singles[n], raw_coinc, coinc, signal, sig_det, raw_sig_det]
    p_s = probs[0]
    k_s = keys[0]
    for c in range(start, stop):
        cu = np.uint64(c)
        s = bernoulli_at(k_s, cu, p_s)
        all_raw = True
        all_gated = True
        bits = np.uint32(0)
        for v in range(n):
            base = 1 + 5 * v
            photon = s or bernoulli_at(keys[base], cu, probs[base])
            excite = photon and bernoulli_at(keys[base + 1], cu, probs[base + 1])
            if not excite:
                excite = bernoulli_at(keys[base + 2], cu, probs[base + 2])
            fire = excite and bernoulli_at(keys[base + 3], cu, probs[base + 3])
            if not fire:
                fire = bernoulli_at(keys[base + 4], cu, probs[base + 4])
            gated = False
            if fire:
                counts[v] += 1
                if want_mask:
                    bits |= np.uint32(1) << np.uint32(16 + v)
                if c >= live_at[v]:
                    gated = True
                    live_at[v] = c + 1 + dead[v]
                    counts[n + v] += 1
                    if want_mask:
                        bits |= np.uint32(1) << np.uint32(v)
            else:
                all_raw = False
            if not gated:
                all_gated = False
        if all_raw:
            counts[2 * n] += 1
        if all_gated:
            counts[2 * n + 1] += 1
        if s:
            counts[2 * n + 2] += 1
            if all_gated:
                counts[2 * n + 3] += 1
            if all_raw:
                counts[2 * n + 4] += 1
        if want_mask:
            mask[c - start] = bits


def _kernel_inputs(cfg: RunConfig):
    n = len(cfg.channels)
    keys = np.array([stream_key(cfg.seed, i) for i in range(1 + 5 * n)], dtype=np.uint64)
    probs = np.zeros(1 + 5 * n)
    probs[0] = cfg.source.p_arrival
    for v, ch in enumerate(cfg.channels):
        base = stream_id(v)
        probs[base + _S_NU] = cfg.source.p_gen_noise
        probs[base + _L] = ch.p_path
        probs[base + _B] = ch.p_background
        probs[base + _A] = ch.p_avalanche
        probs[base + _D] = ch.p_dark_count
    return keys, probs


def _masks_to_records(mask, offset, n, shift=0):
    idx = np.flatnonzero(mask)
    sub = mask[idx]
    cyc, chan = [], []
    for v in range(n):
        hit = ((sub >> np.uint32(shift + v)) & np.uint32(1)).astype(bool)
        cyc.append(idx[hit].astype(np.uint64) + np.uint64(offset))
        chan.append(np.full(int(hit.sum()), v, dtype=np.uint8))
    cyc = np.concatenate(cyc)
    chan = np.concatenate(chan)
    order = np.lexsort((chan, cyc))
    return cyc[order], chan[order]


def _simulate(cfg: RunConfig, record_raw: bool = False):
    n = len(cfg.channels)
    keys, probs = _kernel_inputs(cfg)
    dead = cfg.dead_cycles
    # channels start live
    live_at = np.full(n, np.iinfo(np.int64).min, dtype=np.int64)
    counts = np.zeros(2 * n + 5, dtype=np.int64)
    want_mask = cfg.emit_tags or record_raw
    mask = np.zeros(CHUNK if want_mask else 1, dtype=np.uint32)
    gated_parts, raw_parts = [], []
    start = cfg.start_cycle
    stop_all = cfg.start_cycle + cfg.cycles
    while start < stop_all:
        stop = min(start + CHUNK, stop_all)
        _run_chunk(keys, probs, n, start, stop, dead, live_at, want_mask, mask, counts)
        if want_mask:
            m = mask[: stop - start]
            if cfg.emit_tags:
                gated_parts.append(_masks_to_records(m, start, n))
            if record_raw:
                raw_parts.append(_masks_to_records(m, start, n, shift=16))
        start = stop
    summary = CycleSummary(
        cycles=int(cfg.cycles),
        singles=tuple(int(x) for x in counts[n : 2 * n]),
        raw_singles=tuple(int(x) for x in counts[:n]),
        raw_coincidences=int(counts[2 * n]),
        coincidences=int(counts[2 * n + 1]),
        signal=int(counts[2 * n + 2]),
        signal_detected=int(counts[2 * n + 3]),
        raw_signal_detected=int(counts[2 * n + 4]),
    )
    return summary, _join(gated_parts), _join(raw_parts)


def _join(parts):
    if not parts:
        return np.zeros(0, dtype=np.uint64), np.zeros(0, dtype=np.uint8)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def simulate(cfg: RunConfig):
    """Run the simulation. Returns ``(CycleSummary, TagStream or None)``.

    Identical ``cfg`` gives bit-identical results. Tag cycle indices are
    relative to ``cfg.start_cycle``.
    """
    summary, (cyc, chan), _ = _simulate(cfg)
    if not cfg.emit_tags:
        return summary, None
    header = TagHeader(
        t_rep=cfg.source.t_rep,
        n_channels=len(cfg.channels),
        labels=tuple(cfg.channel_labels()),
        cycles=int(cfg.cycles),
        seed=int(cfg.seed),
        provenance={"generator": "coincidence.montecarlo", "start_cycle": int(cfg.start_cycle)},
    )
    return summary, TagStream(header, cyc - np.uint64(cfg.start_cycle), chan)


def simulate_sharded(cfg: RunConfig, shards: int, workers: int = 1) -> CycleSummary:
    """Split the cycle range into ``shards`` pieces and merge the tallies.

    Matches :func:`simulate` exactly; only allowed without dead time since
    gating carries state from one cycle to the next.
    """
    if cfg.dead_cycles.any():
        raise DomainError("dead-time gating is sequential; sharding requires zero dead time")
    bounds = np.linspace(0, cfg.cycles, shards + 1).astype(np.int64)
    pieces = [
        RunConfig(int(b - a), cfg.seed, cfg.source, cfg.channels, False, cfg.start_cycle + int(a))
        for a, b in zip(bounds[:-1], bounds[1:])
        if b > a
    ]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda c: simulate(c)[0], pieces))
    out = results[0]
    for r in results[1:]:
        out = out.merge(r)
    return out


def repetition_seeds(seed: int, repetitions: int) -> list:
    return [derive_seed(seed, i) for i in range(repetitions)]


def simulate_repetitions(cfg: RunConfig, repetitions: int, workers: int = 1) -> list:
    """Independent runs of ``cfg`` with seeds derived from ``cfg.seed``."""
    cfgs = [
        RunConfig(cfg.cycles, s, cfg.source, cfg.channels, cfg.emit_tags, cfg.start_cycle, cfg.labels)
        for s in repetition_seeds(cfg.seed, repetitions)
    ]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(simulate, cfgs))


# --- dead-time gate --------------------------------------------------------------


def gate_dead_time(events, dead_cycles: int) -> np.ndarray:
    """Nonparalyzable gate over a per-cycle firing sequence.

    After every retained firing the next ``dead_cycles`` cycles are forced
    silent; firings inside that window are dropped without extending it.
    """
    events = np.asarray(events, dtype=bool)
    if dead_cycles < 0:
        raise DomainError("dead_cycles must be >= 0")
    if dead_cycles == 0:
        return events.copy()
    fired = np.flatnonzero(events)
    out = np.zeros_like(events)
    i = 0
    while i < fired.size:
        c = fired[i]
        out[c] = True
        # skip to the first firing after the blind window
        i = int(np.searchsorted(fired, c + dead_cycles + 1, side="left"))
    return out
