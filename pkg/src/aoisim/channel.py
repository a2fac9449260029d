"""Link-level model: three-regime path loss, Rayleigh block fading, and the
two rate models (Shannon and the short-packet normal approximation).

Rates are expressed in packets per slot: the spectral sum over resource
blocks is scaled by omega * tau / z.
"""

from __future__ import annotations

import math

import numpy as np

LOG2E = math.log2(math.e)

# Minimum separation (m) used when geometry degenerates (coincident points,
# vanishing axis offsets in the NLOS product form).
MIN_DISTANCE = 1.0


def _wrap_delta(d: np.ndarray | float, period: float) -> np.ndarray | float:
    """Signed toroidal difference mapped into [-period/2, period/2)."""
    return (np.asarray(d) + period / 2.0) % period - period / 2.0


def path_loss(tx, rx, grid, cfg, tx_road=None, rx_road=None) -> float:
    """Path-loss gain (linear) between two on-lane points.

    Same road: l0 * d2^-alpha.  Perpendicular roads with either endpoint
    within d_intersection of the crossing: l0 * d1^-alpha (weak LOS).
    Anything else, including parallel distinct roads: the non-LOS product
    form l0' * (|dx| * |dy|)^-alpha.  Distances are toroidal and floored at
    MIN_DISTANCE so coincident points stay finite.

    tx_road / rx_road are optional (axis, index) hints; without them the
    roads are inferred from the coordinates (a point near an intersection
    belongs to both roads, and the most line-of-sight classification wins).
    """
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    side = grid.area_side
    tx_roads = [tuple(tx_road)] if tx_road is not None else grid.locate_roads(tx)
    rx_roads = [tuple(rx_road)] if rx_road is not None else grid.locate_roads(rx)
    dx = float(abs(_wrap_delta(tx[0] - rx[0], side)))
    dy = float(abs(_wrap_delta(tx[1] - rx[1], side)))

    if set(tx_roads) & set(rx_roads):
        dist = max(math.hypot(dx, dy), MIN_DISTANCE)
        return cfg.l0 * dist ** (-cfg.alpha)

    for tr in tx_roads:
        for rr in rx_roads:
            if tr[0] == rr[0]:
                continue
            h_road, v_road = (tr, rr) if tr[0] == 0 else (rr, tr)
            cross = np.array([grid.road_coordinate(v_road),
                              grid.road_coordinate(h_road)])
            near = min(_torus_norm(tx - cross, side),
                       _torus_norm(rx - cross, side))
            if near <= cfg.d_intersection:
                dist = max(dx + dy, MIN_DISTANCE)
                return cfg.l0 * dist ** (-cfg.alpha)

    prod = max(dx, MIN_DISTANCE) * max(dy, MIN_DISTANCE)
    return cfg.l0_prime * prod ** (-cfg.alpha)


def _torus_norm(d: np.ndarray, side: float) -> float:
    w = _wrap_delta(d, side)
    return float(np.hypot(w[0], w[1]))


def path_loss_matrix(topo, cfg) -> np.ndarray:
    """(K, K) path-loss gains from every pair's tx to every pair's rx.

    Vectorized twin of path_loss() that uses the topology's own road
    bookkeeping (axis/index per vehicle); entry [i, j] is tx_i -> rx_j and
    the diagonal holds the direct links.
    """
    side = topo.grid.area_side
    half = side / 2.0
    k = topo.k
    pos = topo.positions()
    tx_pos, rx_pos = pos[:k], pos[k:]
    tx_axis, rx_axis = topo.axis[:k], topo.axis[k:]
    tx_road, rx_road = topo.road[:k], topo.road[k:]

    dx = np.abs((tx_pos[:, None, 0] - rx_pos[None, :, 0] + half) % side - half)
    dy = np.abs((tx_pos[:, None, 1] - rx_pos[None, :, 1] + half) % side - half)

    same_road = (tx_axis[:, None] == rx_axis[None, :]) & (
        tx_road[:, None] == rx_road[None, :])
    perp = tx_axis[:, None] != rx_axis[None, :]

    # Crossing point per (tx, rx) combination for perpendicular roads: the
    # vertical road's x paired with the horizontal road's y.
    spacing = topo.grid.block_spacing
    tx_line = tx_road * spacing
    rx_line = rx_road * spacing
    cross_x = np.where(tx_axis[:, None] == 1, tx_line[:, None], rx_line[None, :])
    cross_y = np.where(tx_axis[:, None] == 0, tx_line[:, None], rx_line[None, :])
    ddx = (tx_pos[:, None, 0] - cross_x + half) % side - half
    ddy = (tx_pos[:, None, 1] - cross_y + half) % side - half
    tx_near2 = ddx * ddx + ddy * ddy
    ddx = (rx_pos[None, :, 0] - cross_x + half) % side - half
    ddy = (rx_pos[None, :, 1] - cross_y + half) % side - half
    rx_near2 = ddx * ddx + ddy * ddy
    reach2 = cfg.d_intersection ** 2
    wlos_mask = perp & ((tx_near2 <= reach2) | (rx_near2 <= reach2))

    # One combined power law: LOS/WLOS share l0; NLOS uses the product form.
    d2 = np.maximum(np.sqrt(dx * dx + dy * dy), MIN_DISTANCE)
    d1 = np.maximum(dx + dy, MIN_DISTANCE)
    prod = np.maximum(dx, MIN_DISTANCE) * np.maximum(dy, MIN_DISTANCE)
    dist = np.where(same_road, d2, np.where(wlos_mask, d1, prod))
    coef = np.where(same_road | wlos_mask, cfg.l0, cfg.l0_prime)
    return coef * dist ** (-cfg.alpha)


def sample_fading(rng, shape=None):
    """Unit-mean exponential fading power (Rayleigh envelope), iid."""
    if shape is None:
        return float(rng.exponential(1.0))
    return rng.exponential(1.0, size=shape)


def shannon_rate(powers, gains, cfg, noise_plus_i0=None):
    """Rate in packets per slot over the given RBs.

    powers and gains are aligned 1-D arrays (allocated RBs only, or full
    vectors with zero power elsewhere).  noise_plus_i0 may be a scalar or a
    per-RB array; defaults to N0*omega + cfg.i0.
    """
    powers = np.asarray(powers, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if np.any(powers < 0):
        raise ValueError("negative transmit power")
    if noise_plus_i0 is None:
        noise_plus_i0 = cfg.n0 * cfg.omega + (cfg.i0 or 0.0)
    snr = powers * gains / noise_plus_i0
    spectral = np.log2(1.0 + snr)
    rate = cfg.omega * cfg.tau / cfg.z * float(np.sum(spectral))
    return rate, spectral


def dispersion(rho):
    """Channel dispersion rho(2+rho)/(1+rho)^2 * log2(e)^2."""
    rho = np.asarray(rho, dtype=float)
    return rho * (2.0 + rho) / (1.0 + rho) ** 2 * LOG2E ** 2


def fbl_rate(powers, gains, cfg, blocklength, block_error, noise_plus_i0=None):
    """Normal-approximation rate in packets per slot for short packets.

    Per-RB spectral term: log2(1+rho) - sqrt(V/L) * Qinv(eps) + log2(L)/(2L),
    clamped at zero, and defined as exactly zero when the RB carries no
    power.
    """
    if blocklength < 2:
        raise ValueError("blocklength must be at least 2")
    if not 0.0 < block_error < 1.0:
        raise ValueError("block error probability must lie in (0, 1)")
    powers = np.asarray(powers, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if np.any(powers < 0):
        raise ValueError("negative transmit power")
    if noise_plus_i0 is None:
        noise_plus_i0 = cfg.n0 * cfg.omega + (cfg.i0 or 0.0)
    rho = powers * gains / noise_plus_i0
    qinv = inverse_q(block_error)
    bonus = math.log2(blocklength) / (2.0 * blocklength)
    spectral = np.log2(1.0 + rho) - np.sqrt(dispersion(rho) / blocklength) * qinv + bonus
    spectral = np.where(powers > 0.0, np.maximum(spectral, 0.0), 0.0)
    rate = cfg.omega * cfg.tau / cfg.z * float(np.sum(spectral))
    return rate, spectral


def q_function(x) -> float:
    """Gaussian tail Q(x) = 0.5 * erfc(x / sqrt(2))."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Rational approximation coefficients for the inverse standard-normal CDF
# (Acklam), accurate to ~1.15e-9 before refinement.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def _norm_ppf(p: float) -> float:
    plow, phigh = 0.02425, 1 - 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > phigh:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((( _C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return ((((( _A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def inverse_q(eps: float) -> float:
    """Inverse Gaussian Q function: the x with Q(x) = eps.

    Rational inverse-normal approximation followed by one Newton step on Q,
    giving |Q(x) - eps| well below 1e-9 across the open interval.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("inverse_q argument must lie in (0, 1)")
    x = -_norm_ppf(eps)
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x += (q_function(x) - eps) / pdf
    return x
