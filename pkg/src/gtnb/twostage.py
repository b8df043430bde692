"""Planning and error bounds for two-stage COMP.

Stage one runs COMP with T1 Bernoulli tests; stage two tests every
uncleared item individually. With a budget T the scheme fails exactly when
G > T - T1 - k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from . import exact
from .core import GroupTestInstance
from .errors import DegenerateError
from .negbin import NegBinParams, fit_moment_matched, nb_tail_bound
from .reports import BoundReport

__all__ = [
    "OptimalT1",
    "TwoStagePlan",
    "chebyshev_error_bound",
    "expected_total_tests",
    "linear_regime",
    "nb_tail_error_bound",
    "nb_tail_bound",
    "optimal_T1",
    "plan_two_stage",
    "sparse_regime",
]


class OptimalT1(NamedTuple):
    approx: float  # k e log((n-k)/(k e)), the p = 1/k relaxation
    exact: float  # argmin over real T1 of T1 + k + (n-k)(1 - q0 p)^T1


def optimal_T1(inst: GroupTestInstance) -> OptimalT1:
    n, k, L = inst.n, inst.k, inst.L
    arg = L / (k * math.e)
    if arg < 1.0:
        raise DegenerateError(f"(n-k)/(k e) = {arg:.4g} < 1: individual testing is optimal")
    approx = k * math.e * math.log(arg)
    b = -math.log1p(-inst.q0 * inst.p)  # -log(1 - q0 p) > 0
    # d/dT1 [T1 + L e^(-b T1)] = 0  ->  T1 = log(L b) / b
    ex = max(0.0, math.log(L * b) / b)
    return OptimalT1(approx, ex)


def expected_total_tests(inst: GroupTestInstance, T1: float) -> float:
    """E(T1 + k + G) = T1 + k + (n-k)(1 - q0 p)^T1."""
    if T1 < 0:
        raise ValueError("T1 must be non-negative")
    return T1 + inst.k + inst.L * math.exp(T1 * math.log1p(-inst.q0 * inst.p))


def chebyshev_error_bound(inst: GroupTestInstance, T1: int, T2: int) -> BoundReport:
    """min(1, Var(G) / (T2 - k - E G)^2) for G at T1 stage-one tests."""
    stage1 = inst.with_tests(T1)
    mean = exact.mean_G(stage1)
    var = exact.var_G(stage1)
    gap = T2 - inst.k - mean
    inputs = {"T1": T1, "T2": T2, "mean_G": mean, "var_G": var}
    if gap <= 0:
        return BoundReport("chebyshev", 1.0, {}, inputs, vacuous=True, flags=("T2 - k <= E G",))
    val = var / (gap * gap)
    return BoundReport("chebyshev", min(1.0, val), {"ratio": val}, inputs)


def nb_tail_error_bound(inst: GroupTestInstance, T1: int, T2: int, params: NegBinParams | None = None) -> BoundReport:
    """Large-deviations bound P(Z >= T2 - k) for the moment-matched Z at T1 tests.

    This also covers the failure event G > T2 - k under the approximation.
    """
    stage1 = inst.with_tests(T1)
    g = T2 - inst.k
    inputs = {"T1": T1, "T2": T2, "g": g}
    try:
        params = fit_moment_matched(stage1) if params is None else params
    except DegenerateError as exc:
        return BoundReport("nb_tail", 1.0, {}, inputs, vacuous=True, flags=(str(exc),))
    inputs.update(r=params.r, q=params.q)
    tb = nb_tail_bound(params, g)
    return BoundReport("nb_tail", tb.value, {}, inputs, vacuous=tb.vacuous,
                       flags=("g <= E Z",) if tb.vacuous else ())


@dataclass(frozen=True)
class TwoStagePlan:
    T1: int
    T2: int
    expected_stage2: float
    error_bounds: dict[str, BoundReport] = field(default_factory=dict)
    T1_approx: float | None = None
    T1_exact: float | None = None
    expected_total: float = 0.0
    individual_testing_feasible: bool = False

    def to_dict(self) -> dict:
        return {
            "T1": self.T1,
            "T2": self.T2,
            "T1_approx": self.T1_approx,
            "T1_exact": self.T1_exact,
            "expected_stage2": self.expected_stage2,
            "expected_total": self.expected_total,
            "individual_testing_feasible": self.individual_testing_feasible,
            "error_bounds": {k: v.to_dict() for k, v in self.error_bounds.items()},
        }


def plan_two_stage(inst: GroupTestInstance) -> TwoStagePlan:
    """Split the budget ``inst.T`` into T1 + T2.

    T1 is the integer neighbour of the relaxed optimum with the smaller
    expected total, clamped to [0, T]. When the relaxation is degenerate
    the plan is individual testing (T1 = 0).
    """
    T = inst.T
    if T < inst.k:
        raise ValueError(f"budget T={T} is below k={inst.k}; no plan can succeed")
    try:
        opt = optimal_T1(inst)
        cands = {min(T, max(0, c)) for c in (math.floor(opt.approx), math.ceil(opt.approx))}
        T1 = min(sorted(cands), key=lambda t: expected_total_tests(inst, t))
        approx, ex = opt.approx, opt.exact
    except DegenerateError:
        T1, approx, ex = 0, None, None
    T2 = T - T1
    stage1 = inst.with_tests(T1)
    bounds = {
        "chebyshev": chebyshev_error_bound(inst, T1, T2),
        "nb_tail": nb_tail_error_bound(inst, T1, T2),
    }
    return TwoStagePlan(
        T1=T1,
        T2=T2,
        expected_stage2=inst.k + exact.mean_G(stage1),
        error_bounds=bounds,
        T1_approx=approx,
        T1_exact=ex,
        expected_total=expected_total_tests(inst, T1),
        individual_testing_feasible=T >= inst.n,
    )


def sparse_regime(n: int, theta: float, c: float = 1.0) -> GroupTestInstance:
    """k = round(n^theta), p = 1/k, T = ceil((c / q0) k log n)."""
    k = max(1, round(n**theta))
    p = 1.0 / k
    q0 = math.exp(k * math.log1p(-p))
    return GroupTestInstance(n, k, p, math.ceil(c / q0 * k * math.log(n)))


def linear_regime(n: int, beta: float, c: float = 1.0) -> GroupTestInstance:
    """k = round(beta n), p = 1/k, T = round(c n)."""
    k = max(1, round(beta * n))
    return GroupTestInstance(n, k, 1.0 / k, round(c * n))
