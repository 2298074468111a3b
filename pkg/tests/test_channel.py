import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coincidence.channel import (
    TransferMatrix,
    apply_channel,
    binary_entropy,
    channel_capacity,
    mutual_information,
    posterior_signal_given_coincidence,
)
from coincidence.errors import DomainError, UndefinedPosteriorError
from conftest import prob
from oracles import brute_capacity, mutual_info


def test_binary_entropy_endpoints_and_half():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0


@given(prob)
def test_binary_entropy_symmetric(p):
    assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-12)


@pytest.mark.parametrize("bad", [-0.1, 1.1, math.nan])
def test_rejects_bad_probabilities(bad):
    with pytest.raises(DomainError):
        TransferMatrix(bad, 0.5)
    with pytest.raises(DomainError):
        binary_entropy(bad)


def test_matrix_is_column_stochastic():
    t = TransferMatrix(0.2, 0.7)
    m = t.as_array()
    np.testing.assert_allclose(m.sum(axis=0), 1.0)
    assert t.det == pytest.approx(0.5)


@given(prob, prob)
def test_capacity_bounds(a, b):
    c = channel_capacity(TransferMatrix(a, b))
    assert 0.0 <= c <= 1.0


def test_capacity_identity_and_singular():
    assert channel_capacity(TransferMatrix(0.0, 1.0)) == pytest.approx(1.0, abs=1e-12)
    assert channel_capacity(TransferMatrix(1.0, 0.0)) == pytest.approx(1.0, abs=1e-12)
    assert channel_capacity(TransferMatrix(0.3, 0.3)) == 0.0


@given(st.floats(0.0, 1.0))
def test_symmetric_channel_closed_form(p):
    c = channel_capacity(TransferMatrix(p, 1 - p))
    assert c == pytest.approx(1 - binary_entropy(p), abs=1e-9)


@given(prob, prob)
def test_capacity_matches_numerical_maximum(a, b):
    assert channel_capacity(TransferMatrix(a, b)) == pytest.approx(brute_capacity(a, b, 20_001), abs=1e-7)


def test_capacity_tiny_elements_do_not_overflow():
    c = channel_capacity(TransferMatrix(1e-300, 1e-12))
    assert math.isfinite(c) and c >= 0.0


@given(prob, prob, prob)
def test_mutual_information_below_capacity(a, b, q):
    t = TransferMatrix(a, b)
    assert mutual_information(t, q) == pytest.approx(mutual_info(a, b, q), abs=1e-12)
    assert mutual_information(t, q) <= channel_capacity(t) + 1e-9


def test_apply_channel_and_posterior():
    t = TransferMatrix(0.1, 0.6)
    assert apply_channel(t, 0.5) == pytest.approx(0.35)
    assert posterior_signal_given_coincidence(t, 0.5) == pytest.approx(0.3 / 0.35)


def test_posterior_undefined_when_no_coincidences():
    with pytest.raises(UndefinedPosteriorError):
        posterior_signal_given_coincidence(TransferMatrix(0.0, 0.0), 0.3)
