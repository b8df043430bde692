"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` version for speed and a pure
numpy version that needs nothing beyond numpy. Which one the public
dispatchers call is decided once at import time:

* ``GTNB_DISABLE_NUMBA=1`` (or ``true``/``yes``) forces the numpy path;
* if numba cannot be imported the numpy path is used silently.

Both variants are importable under explicit names (``*_numba``,
``*_numpy``) so tests and the benchmark can compare them directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("GTNB_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - exercised implicitly by whichever branch is live
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

if not HAVE_NUMBA:  # pragma: no cover

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


EPS = 2.220446049250313e-16
FPMIN = 1e-300
MAX_ITER = 100_000

# zeta(2), ..., zeta(40) for the Taylor series of lgamma(1 + s) about s = 0
_ZETA = np.array(
    [
        1.6449340668482264, 1.2020569031595942, 1.0823232337111381,
        1.03692775514337, 1.0173430619844492, 1.008349277381923,
        1.0040773561979444, 1.0020083928260821, 1.000994575127818,
        1.0004941886041194, 1.000246086553308, 1.0001227133475785,
        1.0000612481350588, 1.000030588236307, 1.0000152822594086,
        1.0000076371976379, 1.000003817293265, 1.0000019082127165,
        1.0000009539620338, 1.0000004769329869, 1.0000002384505027,
        1.000000119219926, 1.000000059608189, 1.0000000298035034,
        1.0000000149015549, 1.0000000074507118, 1.000000003725334,
        1.0000000018626598, 1.0000000009313275, 1.0000000004656628,
        1.000000000232831, 1.0000000001164155, 1.0000000000582077,
        1.0000000000291038, 1.000000000014552, 1.000000000007276,
        1.000000000003638, 1.000000000001819, 1.0000000000009095,
    ]
)
EULER_GAMMA = 0.5772156649015329


@njit(cache=True)
def _lgamma1p(s):
    # lgamma(1 + s) without forming 1 + s, which loses digits of tiny s
    if abs(s) >= 0.2:
        return math.lgamma(1.0 + s)
    acc = 0.0
    sk = -s
    for j in range(_ZETA.size):
        sk *= -s
        acc += _ZETA[j] * sk / (j + 2)
    return -EULER_GAMMA * s + acc


# ---------------------------------------------------------------------------
# Regularized upper incomplete gamma Q(s, y) = Gamma(s, y) / Gamma(s)
# ---------------------------------------------------------------------------


_lgamma_ufunc = np.frompyfunc(math.lgamma, 1, 1)


def _lgamma_vec(x):
    return _lgamma_ufunc(x).astype(np.float64)


def _lgamma1p_vec(s):
    s = np.asarray(s, dtype=np.float64)
    out = _lgamma_vec(1.0 + s)
    tiny = np.abs(s) < 0.2
    if tiny.any():
        st = s[tiny]
        powers = (-st[:, None]) ** np.arange(2, _ZETA.size + 2)
        out[tiny] = -EULER_GAMMA * st + (powers * (_ZETA / np.arange(2, _ZETA.size + 2))).sum(axis=1)
    return out


# Stirling series coefficients B_2k / (2k (2k - 1)), k = 1..8
_STIRLING = np.array(
    [
        1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0,
        1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
    ]
)
HALF_LOG_2PI = 0.9189385332046728


@njit(cache=True)
def _log_prefactor(s, y):
    # log(y^s e^-y / Gamma(s)); for large s the s*log(y) and lgamma(s) pieces cancel
    if s < 10.0:
        return s * math.log(y) - y - math.lgamma(s)
    t = (y - s) / s
    corr = 0.0
    inv = 1.0 / s
    inv2 = inv * inv
    for j in range(_STIRLING.size):
        corr += _STIRLING[j] * inv
        inv *= inv2
    return s * (math.log1p(t) - t) + 0.5 * math.log(s) - HALF_LOG_2PI - corr


def _log_prefactor_vec(s, y):
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(s)
    lo = s < 10.0
    if lo.any():
        out[lo] = s[lo] * np.log(y[lo]) - y[lo] - _lgamma_vec(s[lo])
    hi = ~lo
    if hi.any():
        sh, yh = s[hi], y[hi]
        t = (yh - sh) / sh
        inv = 1.0 / sh
        powers = inv[:, None] ** (2 * np.arange(_STIRLING.size) + 1)
        corr = (powers * _STIRLING).sum(axis=1)
        out[hi] = sh * (np.log1p(t) - t) + 0.5 * np.log(sh) - HALF_LOG_2PI - corr
    return out


@njit(cache=True)
def _q_scalar(s, y):
    # nan signals non-convergence or bad input; the wrapper turns it into an error
    if s < 0.0 or y < 0.0 or s != s or y != y:
        return math.nan
    if s == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    if y == math.inf:
        return 0.0
    if y < s + 1.0:
        if s < 1.0:
            # small-s series: Q = (1 - u) + u * sum_{n>=1} (-1)^(n+1) s y^n / (n! (s+n))
            lu = s * math.log(y) - _lgamma1p(s)
            u = math.exp(lu)
            one_minus_u = -math.expm1(lu)
            term = 1.0
            acc = 0.0
            for n in range(1, MAX_ITER):
                term *= -y / n
                d = -term * s / (s + n)
                acc += d
                if abs(d) <= EPS * abs(acc):
                    return one_minus_u + u * acc
            return math.nan
        # P via the power series, Q = 1 - P
        ap = s
        delta = 1.0 / s
        acc = delta
        for _ in range(MAX_ITER):
            ap += 1.0
            delta *= y / ap
            acc += delta
            if abs(delta) < abs(acc) * EPS:
                return 1.0 - acc * math.exp(_log_prefactor(s, y))
        return math.nan
    # modified Lentz continued fraction for Q directly
    b = y + 1.0 - s
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return math.exp(_log_prefactor(s, y)) * h
    return math.nan


@njit(cache=True)
def upper_gamma_q_numba(s, y):
    s = np.ascontiguousarray(s).ravel()
    y = np.ascontiguousarray(y).ravel()
    out = np.empty(s.size)
    for i in range(s.size):
        out[i] = _q_scalar(s[i], y[i])
    return out


def upper_gamma_q_numpy(s, y):
    """Vectorized twin of ``_q_scalar``: same branches, masked iteration."""
    s = np.ascontiguousarray(s, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    out = np.full(s.size, np.nan)
    bad = (s < 0) | (y < 0) | np.isnan(s) | np.isnan(y)
    done = bad.copy()

    m = ~done & (s == 0)
    out[m] = 0.0
    done |= m
    m = ~done & (y == 0)
    out[m] = 1.0
    done |= m
    m = ~done & np.isinf(y)
    out[m] = 0.0
    done |= m

    lower = ~done & (y < s + 1.0)
    small = lower & (s < 1.0)
    series = lower & ~small
    cf = ~done & ~lower

    if small.any():
        ss, yy = s[small], y[small]
        lu = ss * np.log(yy) - _lgamma1p_vec(ss)
        u = np.exp(lu)
        one_minus_u = -np.expm1(lu)
        term = np.ones_like(ss)
        acc = np.zeros_like(ss)
        live = np.ones(ss.size, dtype=bool)
        for n in range(1, MAX_ITER):
            term = np.where(live, term * (-yy / n), term)
            d = np.where(live, -term * ss / (ss + n), 0.0)
            acc += d
            live &= ~(np.abs(d) <= EPS * np.abs(acc))
            if not live.any():
                break
        res = one_minus_u + u * acc
        res[live] = np.nan
        out[small] = res

    if series.any():
        ss, yy = s[series], y[series]
        ap = ss.copy()
        delta = 1.0 / ss
        acc = delta.copy()
        live = np.ones(ss.size, dtype=bool)
        for _ in range(MAX_ITER):
            ap = np.where(live, ap + 1.0, ap)
            delta = np.where(live, delta * yy / ap, 0.0)
            acc += delta
            live &= ~(np.abs(delta) < np.abs(acc) * EPS)
            if not live.any():
                break
        res = 1.0 - acc * np.exp(_log_prefactor_vec(ss, yy))
        res[live] = np.nan
        out[series] = res

    if cf.any():
        ss, yy = s[cf], y[cf]
        b = yy + 1.0 - ss
        c = np.full(ss.size, 1.0 / FPMIN)
        d = 1.0 / b
        h = d.copy()
        live = np.ones(ss.size, dtype=bool)
        for i in range(1, MAX_ITER):
            an = -i * (i - ss)
            b = b + 2.0
            dn = an * d + b
            dn = np.where(np.abs(dn) < FPMIN, FPMIN, dn)
            cn = b + an / c
            cn = np.where(np.abs(cn) < FPMIN, FPMIN, cn)
            dn = 1.0 / dn
            delta = dn * cn
            d = np.where(live, dn, d)
            c = np.where(live, cn, c)
            h = np.where(live, h * delta, h)
            live &= ~(np.abs(delta - 1.0) < EPS)
            if not live.any():
                break
        res = np.exp(_log_prefactor_vec(ss, yy)) * h
        res[live] = np.nan
        out[cf] = res

    return out


# ---------------------------------------------------------------------------
# COMP intruder counts over a batch of bit-packed designs
# ---------------------------------------------------------------------------


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def comp_intruders_numba(rows, defective_mask, nondefective_mask):
    """rows: (B, T, W) uint64. Returns per-design count of intruding items."""
    B, T, W = rows.shape
    out = np.empty(B, dtype=np.int64)
    cleared = np.empty(W, dtype=np.uint64)
    for b in range(B):
        cleared[:] = 0
        for t in range(T):
            positive = False
            for w in range(W):
                if rows[b, t, w] & defective_mask[w]:
                    positive = True
                    break
            if not positive:
                for w in range(W):
                    cleared[w] |= rows[b, t, w]
        g = 0
        for w in range(W):
            g += _popcount64(~cleared[w] & nondefective_mask[w])
        out[b] = g
    return out


def comp_intruders_numpy(rows, defective_mask, nondefective_mask):
    rows = np.asarray(rows, dtype=np.uint64)
    B, T, W = rows.shape
    if T == 0:
        cleared = np.zeros((B, W), dtype=np.uint64)
    else:
        negative = ~((rows & defective_mask).any(axis=2))
        cleared = np.bitwise_or.reduce(np.where(negative[:, :, None], rows, np.uint64(0)), axis=1)
    left = ~cleared & nondefective_mask
    return np.bitwise_count(left).sum(axis=1, dtype=np.int64)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def upper_gamma_q(s, y):
    """Q(s, y) evaluated elementwise with broadcasting; returns a float64 array."""
    s_arr, y_arr = np.broadcast_arrays(np.asarray(s, dtype=np.float64), np.asarray(y, dtype=np.float64))
    shape = s_arr.shape
    if USE_NUMBA:
        out = upper_gamma_q_numba(np.ascontiguousarray(s_arr), np.ascontiguousarray(y_arr))
    else:
        out = upper_gamma_q_numpy(s_arr, y_arr)
    return out.reshape(shape)


def comp_intruders(rows, defective_mask, nondefective_mask):
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    dm = np.ascontiguousarray(defective_mask, dtype=np.uint64)
    nm = np.ascontiguousarray(nondefective_mask, dtype=np.uint64)
    if USE_NUMBA:
        return comp_intruders_numba(rows, dm, nm)
    return comp_intruders_numpy(rows, dm, nm)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
