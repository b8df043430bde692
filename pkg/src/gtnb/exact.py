"""Exact law of the intruder count G and its falling moments.

G is a binomial mixture: with M0 ~ Bin(T, q0) negative tests, each of the
L = n - k non-defectives is intruding independently with probability
(1-p)^M0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import GroupTestInstance
from .errors import ResourceGuardError
from .special import log_binom_pmf, log_falling_factorial

PMF_GUARD = 10**8
FKG_MAX_L = 4


@dataclass(frozen=True)
class DistributionSummary:
    pmf: np.ndarray
    falling_moments: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.falling_moments[1]) if self.falling_moments.size > 1 else float(np.arange(self.pmf.size) @ self.pmf)


def _log_mixture_weights(inst: GroupTestInstance) -> np.ndarray:
    m = np.arange(inst.T + 1, dtype=np.float64)
    return log_binom_pmf(inst.T, inst.log_q0, math.log1p(-inst.q0), m)


def exact_pmf_G(inst: GroupTestInstance, chunk: int = 256) -> np.ndarray:
    """pmf of G on 0..n-k, summing the T+1 mixture components in log space."""
    L, T = inst.L, inst.T
    if (T + 1) * (L + 1) > PMF_GUARD:
        raise ResourceGuardError(f"(T+1)(n-k+1) = {(T + 1) * (L + 1)} exceeds the guard {PMF_GUARD}")
    g = np.arange(L + 1, dtype=np.float64)
    lw = _log_mixture_weights(inst)
    pmf = np.zeros(L + 1)
    for start in range(0, T + 1, chunk):
        m = np.arange(start, min(start + chunk, T + 1), dtype=np.float64)
        log_t = m * inst.log1m_p  # log (1-p)^m
        with np.errstate(divide="ignore"):
            log1m_t = np.where(m == 0, -np.inf, np.log(-np.expm1(log_t)))
        lb = np.vstack([log_binom_pmf(L, lt, l1, g) for lt, l1 in zip(log_t, log1m_t)])
        pmf += np.exp(lb + lw[start : start + m.size, None]).sum(axis=0)
    return pmf


def falling_moment_G(inst: GroupTestInstance, s: int) -> float:
    """M_(s)(G) = L!/(L-s)! * (1 - q0 (1 - (1-p)^s))^T."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return 1.0
    if s > inst.L:
        return 0.0
    one_minus = -math.expm1(s * inst.log1m_p)  # 1 - (1-p)^s
    return math.exp(log_falling_factorial(inst.L, s) + inst.T * math.log1p(-inst.q0 * one_minus))


def falling_moment_binomial(L: int, t: float, s: int) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if s < 0:
        raise ValueError("s must be non-negative")
    if s == 0:
        return 1.0
    if s > L or t == 0.0:
        return 0.0
    return math.exp(log_falling_factorial(L, s) + s * math.log(t))


def falling_moment_H(inst: GroupTestInstance, s: int) -> float:
    """Falling moment of H ~ Bin(n-k, (1-p q0)^T), the independent-intruders comparison."""
    if s == 0:
        return 1.0
    if s > inst.L:
        return 0.0
    return math.exp(log_falling_factorial(inst.L, s) + s * inst.T * math.log1p(-inst.p * inst.q0))


def falling_moments_from_pmf(pmf: np.ndarray, s_max: int) -> np.ndarray:
    g = np.arange(pmf.size, dtype=np.float64)
    out = np.empty(s_max + 1)
    w = np.array(pmf, dtype=np.float64)
    for s in range(s_max + 1):
        out[s] = w.sum()
        w = w * (g - s)
    return out


def summarize(inst: GroupTestInstance, s_max: int = 4) -> DistributionSummary:
    pmf = exact_pmf_G(inst)
    fm = np.array([falling_moment_G(inst, s) for s in range(s_max + 1)])
    pmf.flags.writeable = False
    fm.flags.writeable = False
    return DistributionSummary(pmf, fm)


def mean_G(inst: GroupTestInstance) -> float:
    return falling_moment_G(inst, 1)


def var_G(inst: GroupTestInstance) -> float:
    """L t (1-t) + L (L-1) Cov(G_i, G_j), t = (1 - q0 p)^T; avoids M2 + M1 - M1^2."""
    L = inst.L
    lt = inst.T * math.log1p(-inst.q0 * inst.p)
    single = math.exp(lt) * -math.expm1(lt)
    return L * single + L * (L - 1) * covariance_Gi_Gj(inst)


def covariance_Gi_Gj(inst: GroupTestInstance) -> float:
    """Cov(G_i, G_j) = (1 - q0(2p - p^2))^T - (1 - q0 p)^(2T)."""
    p, q0, T = inst.p, inst.q0, inst.T
    a = T * math.log1p(-q0 * p * (2.0 - p))
    b = 2.0 * T * math.log1p(-q0 * p)
    # e^a - e^b = e^b (e^(a-b) - 1), keeps precision when the two are close
    return math.exp(b) * math.expm1(a - b)


def _vector_log_probs(inst: GroupTestInstance) -> dict[tuple[int, ...], float]:
    L = inst.L
    lw = _log_mixture_weights(inst)
    out = {}
    for x in itertools.product((0, 1), repeat=L):
        w = sum(x)
        terms = []
        for m in range(inst.T + 1):
            lt = m * inst.log1m_p
            l1 = math.log(-math.expm1(lt)) if m else -math.inf
            if (L - w) and l1 == -math.inf:
                continue
            terms.append(lw[m] + w * lt + ((L - w) * l1 if L - w else 0.0))
        out[x] = np.logaddexp.reduce(terms) if terms else -math.inf
    return out


def check_fkg_bruteforce(inst: GroupTestInstance, slack: float = 1e-12) -> bool:
    """Check P(x v y) P(x ^ y) >= P(x) P(y) over all binary intruder vectors."""
    if inst.L > FKG_MAX_L:
        raise ResourceGuardError(f"FKG enumeration needs n-k <= {FKG_MAX_L}, got {inst.L}")
    lp = _vector_log_probs(inst)
    P = {x: math.exp(v) for x, v in lp.items()}
    for x, y in itertools.product(P, repeat=2):
        join = tuple(max(a, b) for a, b in zip(x, y))
        meet = tuple(min(a, b) for a, b in zip(x, y))
        if P[join] * P[meet] < P[x] * P[y] - slack:
            return False
    return True


def moment_ratio_R(inst: GroupTestInstance, s: int) -> float:
    """R(s) with M_(s)(G) / M_(s)(H) = R(s)^T."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if s <= 1:
        return 1.0
    num = math.log1p(-inst.q0 * -math.expm1(s * inst.log1m_p))
    den = s * math.log1p(-inst.p * inst.q0)
    return math.exp(num - den)
