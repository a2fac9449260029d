"""Generalized Pareto distribution: CDF, moments, the cap mapping used by
the excess-moment constraints, maximum-likelihood fitting of threshold
exceedances, and a Kolmogorov-Smirnov fit diagnostic.

The parameter domain is scale sigma > 0 and shape xi < 1/2 (finite
variance).  Fitting is offline diagnostics; live control uses fixed caps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

# Below this |xi| the exponential branch is used.
_XI_ZERO = 1e-8
_XI_MAX = 0.499
_MIN_SAMPLES = 30


class FitError(ValueError):
    """Raised when a GPD fit is infeasible (too few or degenerate samples)."""


@dataclass(frozen=True)
class GpdParams:
    sigma: float
    xi: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.xi >= 0.5:
            raise ValueError(f"xi must be below 1/2, got {self.xi}")


def gpd_cdf(x, p: GpdParams):
    """G(x; sigma, xi); continuous in xi at 0 via the exponential branch."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("GPD support starts at 0")
    if abs(p.xi) < _XI_ZERO:
        out = 1.0 - np.exp(-x / p.sigma)
    else:
        base = np.maximum(1.0 + p.xi * x / p.sigma, 0.0)
        out = 1.0 - base ** (-1.0 / p.xi)
    return out if out.ndim else float(out)


def gpd_moments(p: GpdParams) -> tuple[float, float]:
    """(mean, variance); variance is finite on the allowed domain."""
    mean = p.sigma / (1.0 - p.xi)
    var = p.sigma ** 2 / ((1.0 - p.xi) ** 2 * (1.0 - 2.0 * p.xi))
    return mean, var


def hb_caps(sigma_th: float, xi_th: float) -> tuple[float, float]:
    """Mean and second-moment caps implied by parameter thresholds:
    H = sigma/(1-xi), B = 2 sigma^2 / ((1-xi)(1-2xi))."""
    if sigma_th <= 0 or xi_th >= 0.5:
        raise ValueError("need sigma_th > 0 and xi_th < 1/2")
    h = sigma_th / (1.0 - xi_th)
    b = 2.0 * sigma_th ** 2 / ((1.0 - xi_th) * (1.0 - 2.0 * xi_th))
    return h, b


def _neg_loglik(log_sigma: float, xi: float, x: np.ndarray) -> float:
    sigma = math.exp(log_sigma)
    n = x.size
    if abs(xi) < _XI_ZERO:
        return n * log_sigma + float(np.sum(x)) / sigma
    z = 1.0 + xi * x / sigma
    if np.any(z <= 0.0):
        return 1e12
    return n * log_sigma + (1.0 + 1.0 / xi) * float(np.sum(np.log(z)))


def fit_gpd(samples) -> tuple[GpdParams, dict]:
    """Maximum-likelihood GPD fit of positive excess samples.

    Method-of-moments start, then L-BFGS-B over (log sigma, xi) with the
    shape boxed below 1/2.  Returns the estimate and a diagnostics dict
    with the log-likelihood, KS distance, and sample count.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < _MIN_SAMPLES:
        raise FitError(f"need at least {_MIN_SAMPLES} samples, got {x.size}")
    if np.any(x <= 0):
        raise FitError("excess samples must be strictly positive")
    if float(np.ptp(x)) == 0.0:
        raise FitError("degenerate sample: all values identical")

    m = float(np.mean(x))
    s2 = float(np.var(x))
    ratio = m * m / s2
    xi0 = float(np.clip(0.5 * (1.0 - ratio), -5.0, _XI_MAX - 1e-3))
    sigma0 = max(0.5 * m * (ratio + 1.0), 1e-12)

    res = minimize(
        lambda t: _neg_loglik(t[0], t[1], x),
        x0=np.array([math.log(sigma0), xi0]),
        method="L-BFGS-B",
        bounds=[(None, None), (None, _XI_MAX)],
    )
    params = GpdParams(sigma=math.exp(res.x[0]), xi=float(res.x[1]))
    diag = {
        "loglik": -float(res.fun),
        "ks": ks_distance(x, params),
        "n": int(x.size),
        "converged": bool(res.success),
    }
    return params, diag


def ks_distance(samples, p: GpdParams) -> float:
    """Sup-norm distance between the empirical CDF and the GPD CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("need at least one sample")
    cdf = np.asarray(gpd_cdf(x, p))
    n = x.size
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(hi - cdf), np.abs(cdf - lo))))
