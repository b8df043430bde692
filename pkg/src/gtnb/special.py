"""Special functions shared across modules."""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .errors import NumericalError


def regularized_upper_gamma(s, y):
    """Q(s, y) = Gamma(s, y) / Gamma(s) with integrand t^(s-1) e^(-t).

    Accepts scalars or arrays (broadcast). ``s == 0`` gives 0 for ``y > 0``,
    i.e. P(Poisson < 0). Relative accuracy is about 1e-12.
    """
    s_arr = np.asarray(s, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(s_arr < 0) or np.any(y_arr < 0):
        raise ValueError("regularized_upper_gamma needs s >= 0 and y >= 0")
    out = _kernels.upper_gamma_q(s_arr, y_arr)
    if np.isnan(out).any():
        bad = np.argwhere(np.isnan(out))[0]
        sb, yb = np.broadcast_arrays(s_arr, y_arr)
        idx = tuple(bad) if out.ndim else ()
        raise NumericalError(f"incomplete gamma did not converge at s={sb[idx]!r}, y={yb[idx]!r}")
    if out.ndim == 0:
        return float(out)
    return out


def log_binom_pmf(N: int, log_t: float, log1m_t: float, x: np.ndarray) -> np.ndarray:
    """log Bin(N, t)(x) from log t and log(1-t); handles t in {0, 1} via -inf logs."""
    x = np.asarray(x, dtype=np.float64)
    lc = math.lgamma(N + 1) - _kernels._lgamma_vec(x + 1) - _kernels._lgamma_vec(N - x + 1)
    with np.errstate(invalid="ignore"):
        a = np.where(x > 0, x * log_t, 0.0)
        b = np.where(N - x > 0, (N - x) * log1m_t, 0.0)
    return lc + a + b


def log_falling_factorial(L: int, s: int) -> float:
    """log(L! / (L-s)!) for 0 <= s <= L."""
    return math.lgamma(L + 1) - math.lgamma(L - s + 1)
