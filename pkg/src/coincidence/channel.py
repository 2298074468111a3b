"""Binary signal/coincidence channel: transfer matrix, entropy, capacity, posterior.

The channel maps the prior ``(1 - p_S, p_S)`` of a signal arrival to the
probability ``(1 - p_C, p_C)`` of registering a coincidence through a 2x2
column-stochastic matrix::

    [1 - p(C|~S)   1 - p(C|S)]
    [    p(C|~S)       p(C|S)]
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UndefinedPosteriorError


def check_probability(value: float, name: str = "probability") -> float:
    """Return ``value`` as a float, raising DomainError unless it lies in [0, 1]."""
    value = float(value)
    if not 0.0 <= value <= 1.0:  # also rejects NaN
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class TransferMatrix:
    p_c_given_not_s: float
    p_c_given_s: float

    def __post_init__(self):
        object.__setattr__(
            self, "p_c_given_not_s", check_probability(self.p_c_given_not_s, "p_c_given_not_s")
        )
        object.__setattr__(self, "p_c_given_s", check_probability(self.p_c_given_s, "p_c_given_s"))

    @property
    def det(self) -> float:
        return self.p_c_given_s - self.p_c_given_not_s

    def as_array(self) -> np.ndarray:
        a, b = self.p_c_given_not_s, self.p_c_given_s
        return np.array([[1.0 - a, 1.0 - b], [a, b]])


def binary_entropy(p: float) -> float:
    """Entropy in bits of a Bernoulli(p) variable, with 0*log2(0) taken as 0."""
    p = check_probability(p, "p")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def apply_channel(t: TransferMatrix, p_s: float) -> float:
    """Coincidence probability p_C for arrival probability ``p_s``."""
    p_s = check_probability(p_s, "p_s")
    return t.p_c_given_not_s * (1.0 - p_s) + t.p_c_given_s * p_s


def channel_capacity(t: TransferMatrix) -> float:
    """Capacity in bits of the binary asymmetric channel ``t``.

    Closed form for a channel whose matrix does not depend on the prior.
    A singular matrix (``det == 0``) transmits nothing and returns exactly 0.
    """
    a, b = t.p_c_given_not_s, t.p_c_given_s
    det = b - a
    if det == 0.0:
        return 0.0
    ha, hb = binary_entropy(a), binary_entropy(b)
    exponent = -(hb - ha) / det
    # log2(1 + 2**x) without overflow for large x
    cap = float(np.logaddexp2(0.0, exponent)) + (a * hb - b * ha) / det
    # rounding can leave a few ulps below 0 or above 1
    return min(max(cap, 0.0), 1.0)


def mutual_information(t: TransferMatrix, p_s: float) -> float:
    """I(S; C) in bits for prior ``p_s``."""
    p_c = apply_channel(t, p_s)
    return (
        binary_entropy(p_c)
        - (1.0 - p_s) * binary_entropy(t.p_c_given_not_s)
        - p_s * binary_entropy(t.p_c_given_s)
    )


def posterior_signal_given_coincidence(t: TransferMatrix, p_s: float) -> float:
    """p(S|C) by Bayes' rule. A coincidence beats a random guess when this exceeds 1/2."""
    p_c = apply_channel(t, p_s)
    if p_c == 0.0:
        raise UndefinedPosteriorError("posterior undefined: coincidence probability is zero")
    return t.p_c_given_s * p_s / p_c
