"""Negative binomial law, its two parameterisations, and moment comparisons."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from ._kernels import _lgamma_vec
from .core import GroupTestInstance
from .errors import DegenerateError

TRUNCATION_TAIL = 1e-12


class Provenance(enum.Enum):
    MOMENT_MATCHED = "moment_matched"
    STEIN_MIXED = "stein_mixed"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class NegBinParams:
    """NB(r, q): pmf Gamma(z+r)/(Gamma(r) z!) q^r (1-q)^z, r real.

    ``log1m_q`` is log(1-q). Fitting routines pass it in exactly because
    1 - q can be far below the resolution of q itself; it is derived from
    q otherwise. With it supplied, q may round to 1.0.
    """

    r: float
    q: float
    provenance: Provenance = Provenance.EXPLICIT
    log1m_q: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"r must be positive and finite, got {self.r}")
        if self.log1m_q is None:
            if not 0.0 < self.q < 1.0:
                raise ValueError(f"q must lie in (0, 1), got {self.q}")
            object.__setattr__(self, "log1m_q", math.log1p(-self.q))
        elif not (0.0 < self.q <= 1.0 and self.log1m_q < 0 and math.isfinite(self.log1m_q)):
            raise ValueError(f"inconsistent q={self.q}, log(1-q)={self.log1m_q}")

    @property
    def log_odds(self) -> float:
        """log((1-q)/q)."""
        return self.log1m_q - math.log(self.q)

    @property
    def mean(self) -> float:
        return self.r * math.exp(self.log_odds)

    @property
    def variance(self) -> float:
        return self.mean / self.q


def nb_logpmf(params: NegBinParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    r, q = params.r, params.q
    lc = _lgamma_vec(z + r) - math.lgamma(r) - _lgamma_vec(z + 1.0)
    return lc + r * math.log(q) + z * params.log1m_q


def nb_pmf(params: NegBinParams, z):
    out = np.exp(nb_logpmf(params, z))
    return float(out) if out.ndim == 0 else out


def nb_falling_moment(params: NegBinParams, s: int) -> float:
    """Gamma(s+r)/Gamma(r) ((1-q)/q)^s."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return 1.0
    r = params.r
    return math.exp(math.lgamma(s + r) - math.lgamma(r) + s * params.log_odds)


def fit_moment_matched(inst: GroupTestInstance) -> NegBinParams:
    """Match the first two falling moments of G.

    With m1 = M_(1)(G) and m2 = M_(2)(G), m2/m1^2 - 1 = expm1(lr) below, so
    r = 1/expm1(lr) and q = 1/(1 + m1 expm1(lr)) without cancellation.
    """
    L, T, p, q0 = inst.L, inst.T, inst.p, inst.q0
    if L < 2:
        raise DegenerateError("moment matching needs n - k >= 2; use a Poisson or Bernoulli model instead")
    lr = math.log((L - 1) / L) + T * (math.log1p(-q0 * p * (2.0 - p)) - 2.0 * math.log1p(-q0 * p))
    d = math.expm1(lr)
    if not d > 0:
        raise DegenerateError(
            f"G is not overdispersed (M2/M1^2 - 1 = {d:.3g} <= 0); the negative binomial fit does not exist, "
            "fall back to a Poisson approximation"
        )
    m1 = exact.falling_moment_G(inst, 1)
    md = m1 * d
    if not md > 0:
        raise DegenerateError(f"E G = {m1:.3g} underflows; G is numerically 0")
    # 1 - q = md / (1 + md)
    return NegBinParams(1.0 / d, 1.0 / (1.0 + md), Provenance.MOMENT_MATCHED, math.log(md) - math.log1p(md))


def second_moment_ratio(inst: GroupTestInstance) -> float:
    """M_(2)(G) / M_(1)(G)^2."""
    L, T, p, q0 = inst.L, inst.T, inst.p, inst.q0
    lr = math.log((L - 1) / L) + T * (math.log1p(-q0 * p * (2.0 - p)) - 2.0 * math.log1p(-q0 * p))
    return math.exp(lr)


@dataclass(frozen=True)
class ComparisonMoments:
    """Falling moment of order ``s`` for G and its four comparison laws."""

    s: int
    G: float
    Z: float
    Y: float
    X: float
    H: float

    def ordered(self, rtol: float = 1e-12) -> bool:
        """X >= Z >= Y >= H up to rounding."""
        slack = 1.0 + rtol
        return self.X * slack >= self.Z and self.Z * slack >= self.Y and self.Y * slack >= self.H


def comparison_row(inst: GroupTestInstance, params: NegBinParams, s: int) -> ComparisonMoments:
    lam = exact.falling_moment_G(inst, 1)
    return ComparisonMoments(
        s=s,
        G=exact.falling_moment_G(inst, s),
        Z=nb_falling_moment(params, s),
        Y=lam**s,
        X=math.factorial(s) * lam**s,  # s! (1/alpha - 1)^s with alpha = 1/(1+lam)
        H=exact.falling_moment_H(inst, s),
    )


def comparison_table(inst: GroupTestInstance, s_max: int) -> list[ComparisonMoments]:
    if s_max < 0:
        raise ValueError("s_max must be non-negative")
    params = fit_moment_matched(inst)
    return [comparison_row(inst, params, s) for s in range(1, s_max + 1)]


@dataclass(frozen=True)
class MomentRatioBounds:
    lower: float
    upper: float
    actual: float
    vacuous: bool

    def holds(self, rtol: float = 1e-10) -> bool:
        return self.lower <= self.actual * (1 + rtol) and self.actual <= self.upper * (1 + rtol)


def moment_ratio_bounds(inst: GroupTestInstance, s: int, params: NegBinParams | None = None) -> MomentRatioBounds:
    """Two-sided bound on M_(s)(G) / M_(s)(Z) for the moment-matched Z.

    The lower bound is reported as 0 (and flagged vacuous) whenever one of
    its factors is non-positive.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    params = fit_moment_matched(inst) if params is None else params
    L, T, p, q0, r = inst.L, inst.T, inst.p, inst.q0, params.r
    a = 1.0 - q0 * p
    C = q0 * (1.0 - q0) / (a * a)

    upper = math.exp(s * (s - 1) * C * p * p * T * a ** (2 - s))

    lead = (L - s) / (L * (1.0 + (s - 1) / (2.0 * r)))
    inner = 1.0 + 0.5 * s * (s - 1) * C * p * p * (1.0 - (s - 2) * (1.0 - 2.0 * q0) * p / (3.0 * a))
    if lead <= 0 or inner <= 0:
        lower, vacuous = 0.0, True
    else:
        lower, vacuous = math.exp(s * math.log(lead) + T * math.log(inner)), False

    mg = exact.falling_moment_G(inst, s)
    actual = mg / nb_falling_moment(params, s) if mg > 0 else 0.0
    return MomentRatioBounds(lower, upper, actual, vacuous)


def kl_bernoulli(v: float, w: float) -> float:
    """D(v || w) = v log(v/w) + (1-v) log((1-v)/(1-w)), natural log."""
    if not (0.0 <= v <= 1.0 and 0.0 < w < 1.0):
        raise ValueError("need 0 <= v <= 1 and 0 < w < 1")
    a = v * math.log(v / w) if v > 0 else 0.0
    b = (1.0 - v) * (math.log1p(-v) - math.log1p(-w)) if v < 1 else 0.0
    return a + b


@dataclass(frozen=True)
class TailBound:
    value: float
    vacuous: bool


def nb_tail_bound(params: NegBinParams, g: float) -> TailBound:
    """P(Z >= g) <= exp(-(g + r) D(g/(g+r) || 1-q)) for g above the mean."""
    if not g > params.mean:
        return TailBound(1.0, True)
    r = params.r
    # D(v || 1-q) with v = g/(g+r), written with log(1-q) and log q directly
    v, lv, l1v = g / (g + r), math.log(g / (g + r)), math.log(r / (g + r))
    kl = v * (lv - params.log1m_q) + (1.0 - v) * (l1v - math.log(params.q))
    return TailBound(min(1.0, math.exp(-(g + r) * max(kl, 0.0))), False)


def nb_truncation_point(params: NegBinParams, tail: float = TRUNCATION_TAIL) -> int:
    """Smallest integer z* above the mean with tail bound P(Z >= z*) < ``tail``."""
    lo = math.floor(params.mean) + 1
    if nb_tail_bound(params, lo).value < tail:
        return lo
    hi = lo
    while nb_tail_bound(params, hi).value >= tail:
        hi = 2 * hi + 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if nb_tail_bound(params, mid).value < tail:
            hi = mid
        else:
            lo = mid
    return hi


def nb_pmf_truncated(params: NegBinParams, tail: float = TRUNCATION_TAIL) -> np.ndarray:
    """pmf on 0..z*-1 where the neglected mass P(Z >= z*) is below ``tail``."""
    return nb_pmf(params, np.arange(nb_truncation_point(params, tail)))


def nb_sf(params: NegBinParams, x: int, tail: float = TRUNCATION_TAIL) -> float:
    """P(Z > x), summed over x+1 .. z* so small tails keep their relative accuracy."""
    if x < 0:
        return 1.0
    zstar = max(nb_truncation_point(params, tail), x + 2)
    return math.fsum(nb_pmf(params, np.arange(x + 1, zstar)))
