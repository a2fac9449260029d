"""Per-pair fast-timescale control: virtual queues backing the four
time-average constraints, the drift-plus-penalty rate weight, the KKT
water-filling power solver, and the convex-concave loop used under the
short-packet rate model.

All powers are in watts; weights carry the omega*tau/z packets-per-slot
conversion so the solvers work directly against the spectral log terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import LOG2E, dispersion, inverse_q

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SlotDecision:
    """Outcome of one pair's per-slot power optimization."""
    powers: np.ndarray        # (|N_k|,) watts over the pair's RBs
    rate: float               # packets per slot
    weight: float             # drift-plus-penalty rate weight


@dataclass(frozen=True)
class VirtualQueues:
    vx: float = 0.0   # excess-mean constraint
    vy: float = 0.0   # excess-second-moment constraint
    vr: float = 0.0   # mean-rate stability
    vq: float = 0.0   # violation-frequency constraint
    arrival_model: str = "deterministic"

    def as_tuple(self):
        return self.vx, self.vy, self.vr, self.vq


# -- drift-plus-penalty weights --------------------------------------------

def weight_d(vq: VirtualQueues, q: float, a: float, psi: float,
             eps_k: float, indicator: bool, rate_factor: float) -> float:
    """Rate weight for deterministic arrivals (full EVT-aware form)."""
    w = vq.vr + a + q + vq.vq * eps_k
    if indicator:
        qp = q + psi
        w += -vq.vq + vq.vx + (2.0 * vq.vy + 1.0) * qp + 2.0 * qp ** 3
    return rate_factor * w


def weight_m(vq: VirtualQueues, q: float, a_t: float, e_k: float,
             indicator: bool, rate_factor: float) -> float:
    """Rate weight for Poisson arrivals (full EVT-aware form)."""
    w = vq.vr + a_t + q + vq.vq * e_k
    if indicator:
        w += -vq.vq + vq.vx + (2.0 * vq.vy + 1.0) * a_t + 2.0 * a_t ** 3
    return rate_factor * w


def weight_d_noevt(vq: VirtualQueues, q: float, a: float,
                   eps_k: float, indicator: bool, rate_factor: float) -> float:
    """Deterministic-arrival weight with the excess-moment machinery
    removed (tail-agnostic baseline): only the violation-frequency queue
    reacts to the indicator."""
    w = vq.vr + a + q + vq.vq * eps_k
    if indicator:
        w += -vq.vq
    return rate_factor * w


def weight_m_noevt(vq: VirtualQueues, q: float, a_t: float,
                   e_k: float, indicator: bool, rate_factor: float) -> float:
    w = vq.vr + a_t + q + vq.vq * e_k
    if indicator:
        w += -vq.vq
    return rate_factor * w


# -- virtual-queue recursions ----------------------------------------------

def update_vq_d(vq: VirtualQueues, q: float, r: float, a: float, psi: float,
                h_cap: float, b_cap: float, eps_k: float) -> VirtualQueues:
    """One slot of the deterministic-arrival virtual queues."""
    ind = q > r - psi
    x = q - r + psi if ind else 0.0
    y = x * x
    return replace(
        vq,
        vx=max(vq.vx + (x - h_cap) * ind, 0.0),
        vy=max(vq.vy + (y - b_cap) * ind, 0.0),
        vr=max(vq.vr - r + a, 0.0),
        vq=max(vq.vq + r * ind - r * eps_k, 0.0),
    )


def update_vq_m(vq: VirtualQueues, r: float, a_t: float,
                h_cap: float, b_cap: float, e_k: float) -> VirtualQueues:
    """One slot of the Poisson-arrival virtual queues."""
    ind = a_t > r
    x = a_t - r if ind else 0.0
    y = x * x
    return replace(
        vq,
        vx=max(vq.vx + (x - h_cap) * ind, 0.0),
        vy=max(vq.vy + (y - b_cap) * ind, 0.0),
        vr=max(vq.vr - r + a_t, 0.0),
        vq=max(vq.vq + r * ind - r * e_k, 0.0),
    )


# -- power solvers -----------------------------------------------------------

def waterfill(im: float, gains, v: float, p_max: float,
              noise_plus_i0: float) -> np.ndarray:
    """KKT solution of the per-slot convex problem
    min sum_n V*P_n - im*log2(1 + P_n h_n / noise)  s.t.  P >= 0, sum <= p_max.

    Water level: P_n = max(0, im/((V+zeta) ln2) - noise/h_n), with zeta = 0
    while the budget is slack, otherwise the unique level spending exactly
    p_max (found by the sorted-breakpoint scan, so the budget is met to
    machine precision).  im <= 0 yields all-zero power.
    """
    gains = np.asarray(gains, dtype=float)
    if np.any(gains <= 0):
        raise ValueError("channel gains must be positive")
    if p_max <= 0:
        raise ValueError("power budget must be positive")
    if im <= 0.0:
        return np.zeros_like(gains)
    cost = noise_plus_i0 / gains
    if v > 0.0:
        p = np.maximum(im / (v * LN2) - cost, 0.0)
        if p.sum() <= p_max:
            return p
    # Budget-tight: solve sum_active (w - cost) = p_max for the water level.
    order = np.argsort(cost)
    csort = cost[order]
    cum = np.cumsum(csort)
    m = np.arange(1, len(csort) + 1)
    levels = (p_max + cum) / m
    # Valid active-set size: level above the last included cost and not
    # above the next one.
    ok = levels > csort
    ok[:-1] &= levels[:-1] <= csort[1:]
    idx = int(np.nonzero(ok)[0][-1])
    w = levels[idx]
    return np.maximum(w - cost, 0.0)


def solve_weighted_waterfill(im: float, gains, v_eff, p_max: float,
                             noise_plus_i0: float) -> np.ndarray:
    """Water-filling with a per-RB linear price v_eff (the CCP subproblem):
    P_n = max(0, im/((v_n + zeta) ln2) - noise/h_n) with one multiplier
    zeta >= 0 shared across RBs.

    The budget equation is solved by safeguarded Newton on zeta (the sum is
    convex and decreasing in zeta), bisection steps when Newton leaves the
    bracket.
    """
    gains = np.asarray(gains, dtype=float)
    v_eff = np.broadcast_to(np.asarray(v_eff, dtype=float), gains.shape)
    if im <= 0.0:
        return np.zeros_like(gains)
    cost = noise_plus_i0 / gains

    def powers(zeta):
        return np.maximum(im / ((v_eff + zeta) * LN2) - cost, 0.0)

    if np.all(v_eff > 0):
        p0 = powers(0.0)
        if p0.sum() <= p_max:
            return p0
    zeta_hi = float(np.max(im * gains / (noise_plus_i0 * LN2) - v_eff))
    if zeta_hi <= 0.0:
        return np.zeros_like(gains)
    lo, hi = 0.0, zeta_hi
    zeta = min(zeta_hi, 1.0) if not np.all(v_eff > 0) else 0.0
    for _ in range(200):
        p = powers(zeta)
        resid = p.sum() - p_max
        if abs(resid) <= 1e-12 * p_max:
            break
        if resid > 0:
            lo = zeta
        else:
            hi = zeta
        active = p > 0
        slope = -np.sum(im / ((v_eff[active] + zeta) ** 2 * LN2))
        step = zeta - resid / slope if slope < 0 else None
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        zeta = step
    return powers(zeta)


def _ccp_objective(p, im, gains, v, noise_plus_i0, coef):
    rho = p * gains / noise_plus_i0
    penalty = coef * np.sqrt(rho * (2.0 + rho)) / (1.0 + rho)
    return float(np.sum(v * p - im * np.log2(1.0 + rho) + penalty))


# -- batched solvers (simulator hot path; one row per pair) ------------------

def waterfill_batch(im, gains, usage, v: float, p_max: float,
                    noise_plus_i0: float) -> np.ndarray:
    """Row-wise waterfill over (K, N) gains; non-allocated RBs (usage False)
    and rows with im <= 0 get zero power.  Same KKT solution as
    waterfill(), budget met exactly on tight rows."""
    gains = np.asarray(gains, dtype=float)
    im = np.asarray(im, dtype=float)[:, None]
    cost = np.where(usage, noise_plus_i0 / gains, np.inf)
    active_im = im > 0.0

    if v > 0.0:
        p = np.maximum(im / (v * LN2) - cost, 0.0)
        p[~active_im[:, 0]] = 0.0
        slack = p.sum(axis=1) <= p_max
    else:
        p = np.zeros_like(gains)
        slack = ~active_im[:, 0]

    tight = ~slack & np.isfinite(cost).any(axis=1)
    if not np.any(tight):
        return p
    csort = np.sort(cost[tight], axis=1)
    m = np.arange(1, csort.shape[1] + 1)
    levels = (p_max + np.cumsum(csort, axis=1)) / m
    ok = levels > csort
    ok[:, :-1] &= levels[:, :-1] <= csort[:, 1:]
    ok &= np.isfinite(levels)
    idx = csort.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
    w = levels[np.arange(len(idx)), idx]
    p[tight] = np.maximum(w[:, None] - cost[tight], 0.0)
    return p


def _solve_weighted_batch(im, cost, v_eff, p_max, rows) -> np.ndarray:
    """Per-row shared multiplier for the CCP subproblem on selected rows.

    im: (K, 1); cost, v_eff: (K, N) with inf cost on unusable RBs.
    Returns (K, N) powers (zero rows untouched by `rows` stay zero).
    """
    k, n = cost.shape
    p = np.zeros((k, n))
    if not np.any(rows):
        return p
    imr = im[rows]
    costr = cost[rows]
    vr = v_eff[rows]

    def powers(zeta):
        return np.maximum(imr / ((vr + zeta[:, None]) * LN2) - costr, 0.0)

    with np.errstate(divide="ignore", invalid="ignore"):
        zeta_hi = np.max(np.where(np.isfinite(costr),
                                  imr / (costr * LN2) - vr, -np.inf), axis=1)
    zeta_hi = np.maximum(zeta_hi, 0.0)
    lo = np.zeros_like(zeta_hi)
    hi = zeta_hi.copy()
    zeta = np.zeros_like(zeta_hi)
    p0 = powers(zeta)
    resid = p0.sum(axis=1) - p_max
    done = resid <= 1e-12 * p_max
    zeta = np.where(done, zeta, np.minimum(hi, np.maximum(1e-30, 0.5 * hi)))
    for _ in range(80):
        if np.all(done):
            break
        pr = powers(zeta)
        resid = pr.sum(axis=1) - p_max
        conv = np.abs(resid) <= 1e-12 * p_max
        done |= conv
        over = (resid > 0) & ~done
        lo = np.where(over, zeta, lo)
        hi = np.where(~over & ~done, zeta, hi)
        active = pr > 0
        slope = -np.sum(np.where(active, imr / ((vr + zeta[:, None]) ** 2 * LN2),
                                 0.0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = zeta - resid / slope
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        step = np.where(bad, 0.5 * (lo + hi), newton)
        zeta = np.where(done, zeta, step)
    p[rows] = powers(zeta)
    return p


def ccp_batch(im, gains, usage, v: float, p_max: float, noise_plus_i0: float,
              blocklength: float, block_error: float,
              delta_stop: float = 1e-6, max_iter: int = 30) -> np.ndarray:
    """Row-wise convex-concave iteration; vectorized twin of ccp_solve with
    the uniform feasible start on each pair's allocated RBs."""
    gains = np.asarray(gains, dtype=float)
    im = np.asarray(im, dtype=float)[:, None]
    qinv = inverse_q(block_error)
    if qinv == 0.0:
        return waterfill_batch(im[:, 0], gains, usage, v, p_max, noise_plus_i0)
    coef = im / math.sqrt(blocklength) * LOG2E * qinv
    cost = np.where(usage, noise_plus_i0 / gains, np.inf)
    rows = im[:, 0] > 0.0

    n_alloc = np.maximum(usage.sum(axis=1), 1)
    x = np.where(usage & rows[:, None], p_max / n_alloc[:, None], 0.0)

    def objective(p):
        rho = np.where(usage, p * gains / noise_plus_i0, 0.0)
        pen = coef * np.sqrt(rho * (2.0 + rho)) / (1.0 + rho)
        terms = np.where(usage, v * p - im * np.log2(1.0 + rho) + pen, 0.0)
        return terms.sum(axis=1)

    obj = objective(x)
    live = rows.copy()
    for _ in range(max_iter):
        if not np.any(live):
            break
        rho = np.maximum(x * gains / noise_plus_i0, _RHO_FLOOR)
        grad = -coef / ((1.0 + rho) ** 2 * np.sqrt(rho * (2.0 + rho))) \
            * gains / noise_plus_i0
        x_new = _solve_weighted_batch(im, cost, v - grad, p_max, live)
        x = np.where(live[:, None], x_new, x)
        obj_new = objective(x)
        live &= np.abs(obj - obj_new) > delta_stop * np.maximum(1.0, np.abs(obj))
        obj = obj_new
    return x


# SINR floor for the linearization point: a tangent of the concave penalty
# taken anywhere still majorizes it everywhere, and flooring avoids the
# infinite slope at exactly zero power.
_RHO_FLOOR = 1e-20


def ccp_solve(im: float, gains, v: float, p_max: float, noise_plus_i0: float,
              blocklength: float, block_error: float,
              delta_stop: float = 1e-6, max_iter: int = 30,
              x0=None):
    """Convex-concave iteration for the short-packet power problem.

    Each round linearizes the concave dispersion penalty at the current
    point and solves the resulting water-filling problem with the per-RB
    price v - gradient.  Stops when the true objective improves by less
    than delta_stop (relative) or after max_iter rounds; returns the best
    iterate seen and an info dict with the objective trace and a
    convergence flag.
    """
    gains = np.asarray(gains, dtype=float)
    if im <= 0.0:
        return np.zeros_like(gains), {"converged": True, "objectives": [0.0],
                                      "iterations": 0}
    qinv = inverse_q(block_error)
    coef = im / math.sqrt(blocklength) * LOG2E * qinv
    if coef == 0.0:
        p = waterfill(im, gains, v, p_max, noise_plus_i0)
        obj = _ccp_objective(p, im, gains, v, noise_plus_i0, 0.0)
        return p, {"converged": True, "objectives": [obj], "iterations": 1}

    x = np.asarray(x0, dtype=float) if x0 is not None \
        else np.full_like(gains, p_max / len(gains))
    objs = [_ccp_objective(x, im, gains, v, noise_plus_i0, coef)]
    best_p, best_obj = x, objs[0]
    converged = False
    for _ in range(max_iter):
        rho = np.maximum(x * gains / noise_plus_i0, _RHO_FLOOR)
        grad = -coef / ((1.0 + rho) ** 2 * np.sqrt(rho * (2.0 + rho))) \
            * gains / noise_plus_i0
        x = solve_weighted_waterfill(im, gains, v - grad, p_max, noise_plus_i0)
        obj = _ccp_objective(x, im, gains, v, noise_plus_i0, coef)
        objs.append(obj)
        if obj < best_obj:
            best_p, best_obj = x, obj
        if abs(objs[-2] - obj) <= delta_stop * max(1.0, abs(objs[-2])):
            converged = True
            break
    return best_p, {"converged": converged, "objectives": objs,
                    "iterations": len(objs) - 1}
