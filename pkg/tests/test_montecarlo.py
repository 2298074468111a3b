import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coincidence.errors import DomainError
from coincidence.metrics import singles_probability, transfer_elements_full
from coincidence.montecarlo import (
    RunConfig,
    gate_dead_time,
    simulate,
    simulate_repetitions,
    simulate_sharded,
    stream_id,
)
from coincidence.specs import ChannelSpec, SourceSpec
from oracles import reference_run, scan_dead_time

T_REP = 1e-7


def cfg(cycles=20_000, seed=3, p_s=0.05, channels=None, **kw):
    channels = channels or [ChannelSpec(0.7, 0.02, 0.03, 0.6, dead_time=2 * T_REP)] * 3
    return RunConfig(cycles, seed, SourceSpec(T_REP, p_s, kw.pop("gen", None)), channels, **kw)


def test_stream_layout():
    assert stream_id(None) == 0
    assert stream_id(0, 0) == 1
    assert stream_id(2, 4) == 15


def test_matches_pure_python_reference():
    c = cfg(cycles=4000, emit_tags=True, start_cycle=17)
    summary, tags = simulate(c)
    raw, gated = reference_run(c.seed, c.source, c.channels, c.cycles, start=17)
    n = len(c.channels)
    assert summary.raw_singles == tuple(sum(v in r for _, r in raw) for v in range(n))
    assert summary.singles == tuple(sum(v in g for g in gated) for v in range(n))
    assert summary.raw_coincidences == sum(len(r) == n for _, r in raw)
    assert summary.coincidences == sum(len(g) == n for g in gated)
    assert summary.signal == sum(s for s, _ in raw)
    assert summary.signal_detected == sum(s and len(g) == n for (s, _), g in zip(raw, gated))
    expected = [(i, v) for i, g in enumerate(gated) for v in sorted(g)]
    assert list(zip(tags.cycle.tolist(), tags.channel.tolist())) == expected


def test_deterministic():
    a = simulate(cfg(emit_tags=True))
    b = simulate(cfg(emit_tags=True))
    assert a[0] == b[0] and a[1] == b[1]
    assert simulate(cfg(seed=4))[0] != a[0]


def test_perfect_source_every_cycle():
    s, _ = simulate(cfg(cycles=5000, p_s=1.0, gen=0.0, channels=[ChannelSpec(1.0)] * 3))
    assert s.coincidences == s.cycles == s.signal == s.signal_detected


def test_source_off_reference_has_no_coincidences():
    s, _ = simulate(cfg(cycles=10**6, p_s=0.0, gen=0.0, channels=[ChannelSpec(0.9, 5e-6, 0.0, 0.1)] * 3))
    assert s.coincidences == 0 and s.signal == 0


def test_counts_invariants():
    s, _ = simulate(cfg())
    assert s.signal_detected <= min(s.signal, s.coincidences)
    assert s.coincidences <= s.raw_coincidences
    assert all(g <= r <= s.cycles for g, r in zip(s.singles, s.raw_singles))


@pytest.mark.parametrize("p", [1e-4, 0.01, 0.3, 0.9])
def test_variable_frequency_convergence(p):
    n = 10**6
    ch = [ChannelSpec(1.0, 0.0, 0.0, 1.0)]
    s, _ = simulate(RunConfig(n, 11, SourceSpec(T_REP, p, 0.0), ch))
    assert abs(s.signal / n - p) <= 5 * math.sqrt(p * (1 - p) / n)
    # a channel that only sees dark counts measures p_D
    s, _ = simulate(RunConfig(n, 12, SourceSpec(T_REP, 0.0, 0.0), [ChannelSpec(0.0, p)]))
    assert abs(s.singles[0] / n - p) <= 5 * math.sqrt(p * (1 - p) / n)


def test_conditional_frequencies_match_transfer_matrix():
    channels = [ChannelSpec(0.8, 0.05, 0.1, 0.7)] * 3
    c = RunConfig(10**6, 5, SourceSpec(T_REP, 0.2, 0.1), channels)
    s, _ = simulate(c)
    t = transfer_elements_full(channels, c.source)
    k1, n1 = s.raw_signal_detected, s.signal
    k0, n0 = s.raw_coincidences - k1, s.cycles - s.signal
    assert abs(k1 / n1 - t.p_c_given_s) <= 3 * math.sqrt(t.p_c_given_s * (1 - t.p_c_given_s) / n1)
    assert abs(k0 / n0 - t.p_c_given_not_s) <= 3 * math.sqrt(t.p_c_given_not_s * (1 - t.p_c_given_not_s) / n0)
    for v, ch in enumerate(channels):
        p = singles_probability(ch, c.source)
        assert abs(s.raw_singles[v] / s.cycles - p) <= 4 * math.sqrt(p * (1 - p) / s.cycles)


def test_sharding_is_exact():
    c = cfg(cycles=300_001, channels=[ChannelSpec(0.7, 0.02, 0.03, 0.6)] * 3)
    whole, _ = simulate(c)
    assert simulate_sharded(c, 7, workers=3) == whole
    with pytest.raises(DomainError):
        simulate_sharded(cfg(), 2)


def test_repetitions_independent_and_reproducible():
    a = simulate_repetitions(cfg(cycles=50_000), 4, workers=2)
    b = simulate_repetitions(cfg(cycles=50_000), 4, workers=1)
    assert [x[0] for x in a] == [x[0] for x in b]
    assert len({x[0].singles for x in a}) == 4


def test_dead_time_reduces_counts_monotonically():
    prev = None
    for k in range(5):
        ch = [ChannelSpec(0.0, 0.1, dead_time=k * T_REP)] * 2
        s, _ = simulate(RunConfig(200_000, 1, SourceSpec(T_REP, 0.0), ch))
        if prev is not None:
            assert s.singles[0] <= prev
        prev = s.singles[0]


def test_config_validation():
    with pytest.raises(DomainError):
        cfg(cycles=0)
    with pytest.raises(DomainError):
        cfg(seed=-1)
    with pytest.raises(DomainError):
        RunConfig(10, 1, SourceSpec(T_REP, 0.1), [])
    with pytest.raises(DomainError):
        cfg(labels=("a",))


# --- dead-time gate -----------------------------------------------------------


def test_gate_identity_and_alternation():
    ev = np.random.default_rng(0).random(100) < 0.5
    assert np.array_equal(gate_dead_time(ev, 0), ev)
    assert gate_dead_time(np.ones(6, bool), 1).tolist() == [True, False] * 3
    with pytest.raises(DomainError):
        gate_dead_time(ev, -1)


@given(st.lists(st.booleans(), max_size=200), st.integers(0, 10))
def test_gate_matches_sequential_scan(events, k):
    assert gate_dead_time(events, k).tolist() == scan_dead_time(events, k)


def test_gate_retained_rate_near_linear_correction():
    ev = np.random.default_rng(1).random(10**6) < 0.1
    kept = gate_dead_time(ev, 2)
    assert kept.tolist() == scan_dead_time(ev.tolist(), 2)
    m = kept.mean()
    # live fraction 1 - m k against the true firing rate
    assert m == pytest.approx(ev.mean() * (1 - 2 * m), rel=0.05)


def test_kernel_gating_matches_gate_function():
    c = cfg(cycles=50_000, channels=[ChannelSpec(0.0, 0.2, dead_time=3 * T_REP)] * 2, emit_tags=True)
    from coincidence.montecarlo import _simulate

    _, (gc, gv), (rc, rv) = _simulate(c, record_raw=True)
    for v in range(2):
        raw = np.zeros(c.cycles, bool)
        raw[rc[rv == v].astype(np.int64)] = True
        gated = np.flatnonzero(gate_dead_time(raw, 3))
        assert np.array_equal(gated, gc[gv == v].astype(np.int64))
