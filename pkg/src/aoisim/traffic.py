"""Packet arrivals, the fluid FCFS queue recursion, short-packet service
errors, and exact per-packet age tracking.

The queue carries real-valued packet units (rates are real); packet
boundaries live on the cumulative-service axis: packet i (0-based, FCFS
order) has departed once the cumulative delivered service reaches i+1
packet units.  Departures are credited at slot end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QueueState:
    q: float = 0.0                   # backlog (packets)
    cumulative_arrivals: float = 0.0
    cumulative_service: float = 0.0  # delivered units (capped by backlog)


def update_queue(state: QueueState, service: float, arrivals: float) -> QueueState:
    """One slot of Q' = max(Q - service, 0) + arrivals."""
    if service < 0 or arrivals < 0:
        raise ValueError("service and arrivals must be nonnegative")
    delivered = min(service, state.q)
    return QueueState(
        q=max(state.q - service, 0.0) + arrivals,
        cumulative_arrivals=state.cumulative_arrivals + arrivals,
        cumulative_service=state.cumulative_service + delivered,
    )


def arrivals_deterministic(slot: int, a: float, tau: float) -> list[float]:
    """Arrival instants i*tau/a falling inside slot [slot*tau, (slot+1)*tau).

    Periodic source at a packets per slot; per-slot counts are 0/1/... and
    average to a.
    """
    if a < 0:
        raise ValueError("arrival rate must be nonnegative")
    if a == 0:
        return []
    lo = math.ceil(slot * a - 1e-12)
    hi = math.ceil((slot + 1) * a - 1e-12)
    return [i * tau / a for i in range(lo, hi)]


def arrivals_poisson(rng, lam: float, slot: int, tau: float):
    """Poisson(lam) count with instants iid uniform inside the slot."""
    if lam < 0:
        raise ValueError("arrival rate must be nonnegative")
    count = int(rng.poisson(lam)) if lam > 0 else 0
    if count == 0:
        return 0, []
    instants = np.sort(rng.uniform(slot * tau, (slot + 1) * tau, size=count))
    return count, instants.tolist()


def fbl_service(rate: float, eps: float, rng) -> float:
    """Whole-slot decode outcome: the full rate with probability 1-eps,
    otherwise nothing."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("block error probability must lie in [0, 1]")
    return 0.0 if rng.random() < eps else rate


class AoiTracker:
    """Incremental age state for one pair.

    Age is measured against the generation instant of the freshest
    delivered packet; before any departure it is the elapsed time since the
    run start.
    """

    def __init__(self, start_time: float = 0.0):
        self.arrival_times: list[float] = []
        self.delivered_watermark = start_time
        self.n_departed = 0
        self.aoi = 0.0

    def add_arrivals(self, instants) -> None:
        if instants:
            if self.arrival_times and instants[0] < self.arrival_times[-1]:
                raise ValueError("arrival instants must be nondecreasing")
            self.arrival_times.extend(instants)

    def has_departures(self) -> bool:
        return self.n_departed > 0


def advance_aoi(tracker: AoiTracker, state: QueueState, now: float) -> float:
    """Update the tracker to the slot boundary at time `now` and return the
    age there.  Call after update_queue for the slot."""
    n = int(math.floor(state.cumulative_service + 1e-9))
    n = min(n, len(tracker.arrival_times))
    if n > tracker.n_departed:
        tracker.delivered_watermark = tracker.arrival_times[n - 1]
        tracker.n_departed = n
    tracker.aoi = now - tracker.delivered_watermark
    return tracker.aoi


def recompute_aoi(arrival_times, departure_times, now: float,
                  start_time: float = 0.0) -> float:
    """From-scratch age at `now` out of full arrival/departure logs.

    Independent of the incremental tracker; used to cross-check it.
    """
    freshest = start_time
    for arr, dep in zip(arrival_times, departure_times):
        if dep <= now and arr > freshest:
            freshest = arr
    return now - freshest
