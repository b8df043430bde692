"""Total-variation bound between G and its Stein-parameterised negative binomial.

The bound has four pieces: a binomial-to-Poisson term for the number of
negative tests, a Poisson-mixture term e^(-T p q0), a gamma tail term and
an integral comparing the law of (1-p)^M' (M' ~ Po(T q0)) with a
Gamma(r, rK) variable. The integral is evaluated on each segment
[(1-p)^(m+1), (1-p)^m], where the first incomplete-gamma argument is the
constant m+1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .core import GroupTestInstance
from .errors import DegenerateError, NumericalError
from .negbin import NegBinParams, Provenance
from .reports import BoundReport
from .special import regularized_upper_gamma

BERRY_ESSEEN = 0.4748
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
MAX_DEPTH = 60
ROUNDOFF = 1e-13
ABS_ROUNDOFF = 4e-16


@dataclass(frozen=True)
class SteinParams:
    mu: float
    sigma2: float
    q: float
    r: float
    K: float
    e1: float  # expm1(T p^2 q0) = 1/r, kept to avoid cancellation downstream
    L: int

    def negbin(self) -> NegBinParams:
        me = self.mu * self.e1  # 1 - q = me / (1 + me)
        return NegBinParams(self.r, self.q, Provenance.STEIN_MIXED, math.log(me) - math.log1p(me))

    @property
    def prefactor(self) -> float:
        """(2-q)/(1-q) * (n-k), written as (n-k)(2 + 1/(mu e1))."""
        return self.L * (2.0 + 1.0 / (self.mu * self.e1))


def stein_params(inst: GroupTestInstance) -> SteinParams:
    """Parameters of the mixed-Poisson surrogate and the matching negative binomial.

    mu = (n-k) e^(-T p q0), sigma2 = mu (1 + mu e1) with e1 = e^(T p^2 q0) - 1,
    which equals the displayed (n-k)^2 (e^(-Tp(2-p)q0) - e^(-2Tpq0)) + mu.
    """
    if inst.T < 1:
        raise DegenerateError("the Stein parameterisation needs T >= 1")
    a = inst.T * inst.p * inst.q0
    e1 = math.expm1(inst.T * inst.p * inst.p * inst.q0)
    mu = inst.L * math.exp(-a)
    if not (mu > 0 and e1 > 0 and math.isfinite(mu * e1)):
        raise DegenerateError(f"Stein parameters degenerate (mu={mu:.3g}, e^(Tp^2q0)-1={e1:.3g})")
    # q may round to 1.0 when mu e1 < 2^-53; the bound only uses mu e1 directly
    q = 1.0 / (1.0 + mu * e1)
    return SteinParams(mu=mu, sigma2=mu * (1.0 + mu * e1), q=q, r=1.0 / e1, K=math.exp(a), e1=e1, L=inst.L)


def alpha_q0(q0: float) -> float:
    if not 0.0 < q0 < 1.0:
        raise ValueError("q0 must lie in (0, 1)")
    num = math.sqrt(1.0 - q0) * (1.0 + 2.0 * q0 * q0 * math.exp(-q0)) + q0 * q0 + (1.0 - q0) ** 2
    return BERRY_ESSEEN * num / math.sqrt(q0 * (1.0 - q0))


def binomial_poisson_term(inst: GroupTestInstance) -> float:
    q0 = inst.q0
    a = q0 / (4.0 * math.sqrt(1.0 - q0))
    b = alpha_q0(q0) / math.sqrt(inst.T) - 0.5 * math.log1p(-q0) / math.sqrt(2.0 * math.pi * math.e)
    return 2.0 * min(a, b)


def gamma_tail_term(sp: SteinParams) -> float:
    """e^(r+1) K^r e^(-K r), in logs."""
    return math.exp(sp.r + 1.0 + sp.r * math.log(sp.K) - sp.K * sp.r)


# ---------------------------------------------------------------------------
# integral term
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegralResult:
    value: float
    segments: int
    kinks: int
    head: float  # length of the neglected interval [0, head]

    @property
    def breakpoints(self) -> int:
        return self.segments + self.kinks


def _gl(f, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """16-point Gauss-Legendre on each [a_i, b_i], evaluating f once on all nodes."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    return half * (f(x) @ _GL_W)


def _adaptive(f, a: float, b: float, tol_density: float, where: str) -> float:
    """Breadth-first adaptive GL16 on [a, b].

    A piece is accepted when halving it changes the estimate by less than
    ``tol_density`` times its width or by less than the round-off floor.
    The integrand lies in [0, 1] and is known to a few ulps, so the floor
    is ``ROUNDOFF`` relative to the estimate plus ``ABS_ROUNDOFF`` per unit
    width; without it, pieces where the integrand is pure noise would be
    bisected forever.
    """
    lo = np.array([a])
    hi = np.array([b])
    coarse = _gl(f, lo, hi)
    total = 0.0
    for _ in range(MAX_DEPTH):
        mid = 0.5 * (lo + hi)
        left = _gl(f, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        n = lo.size
        fine = left[:n] + left[n:]
        floor = ROUNDOFF * np.abs(fine) + ABS_ROUNDOFF * (hi - lo)
        ok = np.abs(fine - coarse) <= np.maximum(tol_density * (hi - lo), floor)
        total += fine[ok].sum()
        if ok.all():
            return total
        keep = ~ok
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        coarse = np.concatenate([left[:n][keep], left[n:][keep]])
    raise NumericalError(f"adaptive quadrature did not converge on {where}")


def stein_integral(inst: GroupTestInstance, sp: SteinParams, tol: float = 1e-8) -> IntegralResult:
    """int_0^1 |Q(ceil(log x / log(1-p)), T q0) - Q(r, K r x)| dx to absolute accuracy ``tol``.

    On segment m the first term is the constant Q(m+1, T q0). The second is
    decreasing in x, so the absolute difference has at most one kink per
    segment; it is located by root finding and the segment split there.
    The head [0, (1-p)^(M+1)] is dropped once its length is below tol/2.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    p, lam = inst.p, inst.T * inst.q0
    lg = inst.log1m_p
    r, kr = sp.r, sp.K * sp.r

    def g(x):
        return _kernels.upper_gamma_q(r, kr * x)

    n_seg = max(1, math.ceil(math.log(tol / 2.0) / lg))
    head = math.exp(n_seg * lg)
    density = 0.5 * tol
    consts = regularized_upper_gamma(np.arange(1, n_seg + 1, dtype=np.float64), lam)

    value = 0.0
    kinks = 0
    for m in range(n_seg):
        hi = 1.0 if m == 0 else math.exp(m * lg)
        lo = math.exp((m + 1) * lg)
        c = float(consts[m])

        def f(x, c=c):
            return np.abs(c - g(x))

        d_lo = float(g(lo)) - c
        d_hi = float(g(hi)) - c
        pieces = [(lo, hi)]
        if d_lo > 0 > d_hi:
            xk = brentq(lambda x: float(g(x)) - c, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
            pieces = [(lo, xk), (xk, hi)]
            kinks += 1
        for a, b in pieces:
            if b > a:
                value += _adaptive(f, a, b, density, f"segment m={m} [{a:.6g}, {b:.6g}]")
    return IntegralResult(value, n_seg, kinks, head)


def stein_bound(inst: GroupTestInstance, tol: float = 1e-6) -> BoundReport:
    """Total-variation bound between G and NB(r, q) with Stein parameters.

    ``tol`` is the absolute accuracy of the total; the integral is computed
    to ``tol`` divided by its prefactor. The total is not clamped to 1.
    """
    sp = stein_params(inst)
    pref = sp.prefactor
    integral = stein_integral(inst, sp, tol=tol / pref)
    terms = {
        "binomial_poisson": binomial_poisson_term(inst),
        "mixture": math.exp(-inst.T * inst.p * inst.q0),
        "gamma_tail": pref * gamma_tail_term(sp),
        "integral": pref * integral.value,
    }
    total = math.fsum(terms.values())
    return BoundReport(
        name="stein_tv",
        total=total,
        terms=terms,
        inputs={"n": inst.n, "k": inst.k, "p": inst.p, "T": inst.T, "r": sp.r, "q": sp.q, "K": sp.K,
                "prefactor": pref, "tol": tol},
        vacuous=total >= 1.0,
        flags=("exceeds_one",) if total >= 1.0 else (),
        integrand_breakpoints=integral.breakpoints,
    )


# ---------------------------------------------------------------------------
# Chernoff-type bounds
# ---------------------------------------------------------------------------


class Side(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


def chernoff_gamma_tail(alpha: float, beta: float, z: float, side: Side | str) -> float:
    """(beta e / alpha)^alpha e^(-beta z) z^alpha for Z ~ Gamma(alpha, rate beta).

    Bounds P(Z > z) when z >= alpha/beta and P(Z < z) when z <= alpha/beta.
    """
    side = Side(side)
    if alpha <= 0 or beta <= 0 or z <= 0:
        raise ValueError("alpha, beta and z must be positive")
    mean = alpha / beta
    if side is Side.UPPER and z < mean:
        raise ValueError(f"upper-tail bound needs z >= alpha/beta = {mean}")
    if side is Side.LOWER and z > mean:
        raise ValueError(f"lower-tail bound needs z <= alpha/beta = {mean}")
    return math.exp(alpha * (1.0 + math.log(beta * z / alpha)) - beta * z)


def m_fn(s: float) -> float:
    """s - log(1+s)."""
    return s - math.log1p(s)


def h_fn(s: float) -> float:
    """(1+s) log(1+s) - s, with h(-1) = 1."""
    if s == -1.0:
        return 1.0
    return (1.0 + s) * math.log1p(s) - s


@dataclass(frozen=True)
class ChernoffIntegralBound:
    value: float
    valid: bool
    pieces: dict
    flags: tuple[str, ...]


def chernoff_integral_bound(inst: GroupTestInstance, sp: SteinParams, eps: float) -> ChernoffIntegralBound:
    """Closed-form upper bound on the Stein integral from concentration inequalities.

    The integral is split at (1 -/+ eps)/K; the middle costs 2 eps/K, the
    outer parts are bounded by tail probabilities of xi' = (1-p)^M' and
    eta' ~ Gamma(r, rK). A piece whose Chernoff condition fails is replaced
    by the trivial value 1 and the result is flagged.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    lam = inst.T * inst.q0
    K, r = sp.K, sp.r
    flags = []

    eta_lower = math.exp(-r * m_fn(-eps))
    eta_upper = math.exp(-r * m_fn(eps))

    # P(xi' <= (1-eps)/K) = P(M' >= y) with y/lam - 1 = (-log(1-eps) - lam m(-p)) / (-lam log(1-p))
    num = -math.log1p(-eps) - lam * m_fn(-inst.p)
    if num > 0:
        xi_lower = math.exp(-lam * h_fn(num / (-lam * inst.log1m_p)))
    else:
        xi_lower = 1.0
        flags.append("xi_lower_condition")

    # P(xi' > (1+eps)/K) <= P(M' < lam - log(1+eps)/p); zero if (1+eps)/K >= 1
    if (1.0 + eps) >= K:
        xi_upper = eta_upper = 0.0
    else:
        xi_upper = math.exp(-lam * h_fn(-math.log1p(eps) / (lam * inst.p)))

    lower_part = max(xi_lower, eta_lower) / K
    upper_part = max(xi_upper, eta_upper)
    middle = 2.0 * eps / K
    pieces = {"middle": middle, "lower": lower_part, "upper": upper_part,
              "xi_lower": xi_lower, "eta_lower": eta_lower, "xi_upper": xi_upper, "eta_upper": eta_upper}
    return ChernoffIntegralBound(middle + lower_part + upper_part, not flags, pieces, tuple(flags))
