"""Audit record for a computed bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

STEIN_TERMS = ("binomial_poisson", "mixture", "gamma_tail", "integral")


@dataclass(frozen=True)
class BoundReport:
    """A named bound value together with the inputs and sub-terms that produced it.

    ``total`` is the sum of ``terms`` when terms are given. ``vacuous`` marks
    bounds whose preconditions failed and which were replaced by the trivial
    value; ``flags`` carries short machine-readable reasons.
    """

    name: str
    total: float
    terms: dict[str, float] = field(default_factory=dict)
    inputs: dict[str, Any] = field(default_factory=dict)
    vacuous: bool = False
    flags: tuple[str, ...] = ()
    integrand_breakpoints: int = 0

    @property
    def term_binomial_poisson(self) -> float:
        return self.terms["binomial_poisson"]

    @property
    def term_mixture(self) -> float:
        return self.terms["mixture"]

    @property
    def term_gamma_tail(self) -> float:
        return self.terms["gamma_tail"]

    @property
    def term_integral(self) -> float:
        return self.terms["integral"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "total": self.total,
            "terms": dict(self.terms),
            "inputs": dict(self.inputs),
            "vacuous": self.vacuous,
            "flags": list(self.flags),
            "integrand_breakpoints": self.integrand_breakpoints,
        }
