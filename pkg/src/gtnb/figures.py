"""Data behind the figure reproductions, as plain column dictionaries."""

from __future__ import annotations

import numpy as np

from . import exact, twostage
from .core import GroupTestInstance
from .negbin import fit_moment_matched, nb_pmf, nb_sf
from .simulate import Engine, SimulationConfig, failure_from_dist, simulate_G

FIG_N, FIG_K, FIG_P = 500, 10, 0.1
FIGURE2_T = (60, 80, 100, 120)
FIGURE3_T1 = (50, 79, 100, 150)
FIGURE4_T1 = 100
FIGURE4_T2 = tuple(range(15, 81, 5))


def base_instance(T: int) -> GroupTestInstance:
    return GroupTestInstance(FIG_N, FIG_K, FIG_P, T)


def pmf_columns(inst: GroupTestInstance, trials: int, seed: int, engine: Engine = Engine.MIXTURE) -> dict:
    """g, empirical_prob (simulated G) and nb_prob (moment-matched Z) on 0..n-k."""
    dist = simulate_G(SimulationConfig(inst, trials, seed, engine))
    g = np.arange(inst.L + 1)
    return {"g": g, "empirical_prob": dist.probs, "nb_prob": nb_pmf(fit_moment_matched(inst), g)}


def figure2(trials: int, seed: int) -> dict[str, dict]:
    return {f"figure2_T{T}.csv": pmf_columns(base_instance(T), trials, seed + i) for i, T in enumerate(FIGURE2_T)}


def figure3(trials: int, seed: int) -> dict[str, dict]:
    return {f"figure3_T1_{T1}.csv": pmf_columns(base_instance(T1), trials, seed + i) for i, T1 in enumerate(FIGURE3_T1)}


def figure4(trials: int, seed: int) -> dict[str, dict]:
    """Failure probability P(G > T2 - k) against T2 at a fixed first stage."""
    inst = base_instance(FIGURE4_T1)
    dist = simulate_G(SimulationConfig(inst, trials, seed))
    params = fit_moment_matched(inst)
    cols = {k: [] for k in ("T2", "simulated_error", "simulated_se", "nb_exact_tail", "chebyshev_bound", "ld_bound")}
    for T2 in FIGURE4_T2:
        sim = failure_from_dist(dist, inst.k, T2)
        cols["T2"].append(T2)
        cols["simulated_error"].append(sim.rate)
        cols["simulated_se"].append(sim.se)
        cols["nb_exact_tail"].append(nb_sf(params, T2 - inst.k))
        cols["chebyshev_bound"].append(twostage.chebyshev_error_bound(inst, FIGURE4_T1, T2).total)
        cols["ld_bound"].append(twostage.nb_tail_error_bound(inst, FIGURE4_T1, T2, params).total)
    return {"figure4.csv": cols}


def exact_tail(inst: GroupTestInstance, cut: int) -> float:
    """P(G > cut) from the exact law."""
    pmf = exact.exact_pmf_G(inst)
    return float(pmf[max(cut + 1, 0):].sum())


FIGURES = {2: figure2, 3: figure3, 4: figure4}
