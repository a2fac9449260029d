"""Transmitter-side violation events standing in for the receiver-side age
constraint, and the closed-form links between their probabilities.

Deterministic arrivals: the age tail Pr{age > d_D} is upper-bounded by the
frequency of Q > R - psi; the conditional excess is X = Q - R + psi.
Poisson arrivals: Pr{age > d_M} is an affine function of Pr{A > R} with the
no-arrival mass exp(-lam*d_M/tau) as intercept; the excess is X = A - R.
Indicators use strict inequality; ties are non-violations.
"""

from __future__ import annotations

import math


def violation_d(q: float, rate: float, psi: float) -> tuple[bool, float]:
    """Deterministic-arrival violation event and its excess value."""
    if q > rate - psi:
        return True, q - rate + psi
    return False, 0.0


def violation_m(arrivals: float, rate: float) -> tuple[bool, float]:
    """Poisson-arrival violation event and its excess value."""
    if arrivals > rate:
        return True, arrivals - rate
    return False, 0.0


def aoi_bound_d(pr_event: float, d_d: float = None) -> float:
    """Upper bound on Pr{age > d_D} given the measured event frequency.

    The mapping is one-sided: the event frequency itself is the bound.
    """
    if not 0.0 <= pr_event <= 1.0:
        raise ValueError("probability out of range")
    return pr_event

def aoi_prob_m(pr_event: float, lam: float, d_m: float, tau: float) -> float:
    """Pr{age > d_M} for Poisson arrivals given Pr{A > R}."""
    if not 0.0 <= pr_event <= 1.0:
        raise ValueError("probability out of range")
    decay = math.exp(-lam * d_m / tau)
    return decay + pr_event * (1.0 - decay)
