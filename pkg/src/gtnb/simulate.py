"""Seeded Monte Carlo for the intruder count G.

Trials are cut into fixed blocks of ``BLOCK`` replicates. Block ``b`` draws
from PCG64 seeded with ``SeedSequence(seed, spawn_key=(b,))``, so the
merged histogram depends only on the configuration, never on how many
workers ran the blocks.
"""

from __future__ import annotations

import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import chi2_contingency

from .core import DefectiveSet, GroupTestInstance, count_intruders_batch, pack_bits

BLOCK = 4096
MATRIX_CHUNK_ENTRIES = 1 << 24  # Bernoulli draws held in memory at once


class Engine(enum.Enum):
    MATRIX = "matrix"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class SimulationConfig:
    inst: GroupTestInstance
    trials: int
    seed: int
    engine: Engine = Engine.MIXTURE

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "engine", Engine(self.engine))


@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    counts: np.ndarray
    trials: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).copy()
        if counts.sum() != self.trials:
            raise ValueError("counts must sum to trials")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def mean(self) -> float:
        return float(np.arange(self.counts.size) @ self.counts) / self.trials

    @property
    def variance(self) -> float:
        g = np.arange(self.counts.size, dtype=np.float64)
        m = self.mean
        return float(((g - m) ** 2) @ self.counts) / self.trials

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("g,count,empirical_prob\n")
        for g, c in enumerate(self.counts):
            buf.write(f"{g},{c},{c / self.trials:.10g}\n")
        return buf.getvalue()

    def __eq__(self, other):
        if not isinstance(other, EmpiricalDist):
            return NotImplemented
        return self.trials == other.trials and np.array_equal(self.counts, other.counts)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _mixture_block(inst: GroupTestInstance, rng: np.random.Generator, size: int) -> np.ndarray:
    m0 = rng.binomial(inst.T, inst.q0, size=size)
    return rng.binomial(inst.L, np.exp(m0 * inst.log1m_p))


def _matrix_block(inst: GroupTestInstance, rng: np.random.Generator, size: int) -> np.ndarray:
    K = DefectiveSet.for_instance(inst)
    if inst.T == 0:
        return np.full(size, inst.L, dtype=np.int64)
    per = max(1, MATRIX_CHUNK_ENTRIES // (inst.T * inst.n))
    out = np.empty(size, dtype=np.int64)
    for start in range(0, size, per):
        b = min(per, size - start)
        dense = rng.random((b, inst.T, inst.n)) < inst.p
        out[start : start + b] = count_intruders_batch(pack_bits(dense), K)
    return out


def _run_block(cfg: SimulationConfig, b: int) -> np.ndarray:
    size = min(BLOCK, cfg.trials - b * BLOCK)
    rng = block_rng(cfg.seed, b)
    fn = _matrix_block if cfg.engine is Engine.MATRIX else _mixture_block
    return np.bincount(fn(cfg.inst, rng, size), minlength=cfg.inst.L + 1)


def simulate_G(cfg: SimulationConfig, workers: int = 1) -> EmpiricalDist:
    """Histogram of G over ``cfg.trials`` replicates."""
    n_blocks = math.ceil(cfg.trials / BLOCK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_block(cfg, b), range(n_blocks)))
    else:
        parts = [_run_block(cfg, b) for b in range(n_blocks)]
    return EmpiricalDist(np.sum(parts, axis=0), cfg.trials)


def empirical_falling_moment(dist: EmpiricalDist, s: int) -> float:
    if s < 0:
        raise ValueError("s must be non-negative")
    g = np.arange(dist.counts.size, dtype=np.float64)
    w = dist.counts.astype(np.float64)
    for j in range(s):
        w = w * (g - j)
    return float(w.sum()) / dist.trials


def tv_distance(a, b, norm_tol: float = 1e-9) -> float:
    """Half the L1 distance between two pmfs on 0, 1, 2, ..."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for name, v in (("a", a), ("b", b)):
        if np.any(v < 0) or abs(math.fsum(v) - 1.0) > norm_tol:
            raise ValueError(f"{name} is not a normalised pmf (sum = {math.fsum(v)!r})")
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    return min(1.0, 0.5 * math.fsum(np.abs(a - b)))


class TwoStageError(NamedTuple):
    failures: int
    rate: float
    se: float


def simulate_two_stage_error(
    inst: GroupTestInstance, T1: int, T2: int, trials: int, seed: int, engine: Engine = Engine.MIXTURE
) -> TwoStageError:
    """Monte Carlo estimate of P(G > T2 - k) with G drawn at T1 stage-one tests."""
    if T1 < 0 or T2 < 0:
        raise ValueError("T1 and T2 must be non-negative")
    dist = simulate_G(SimulationConfig(inst.with_tests(T1), trials, seed, engine))
    return failure_from_dist(dist, inst.k, T2)


def failure_from_dist(dist: EmpiricalDist, k: int, T2: int) -> TwoStageError:
    cut = T2 - k  # failure iff G > cut
    lo = max(cut + 1, 0)
    failures = int(dist.counts[lo:].sum()) if lo < dist.counts.size else 0
    rate = failures / dist.trials
    return TwoStageError(failures, rate, math.sqrt(rate * (1.0 - rate) / dist.trials))


class ChiSquaredResult(NamedTuple):
    statistic: float
    pvalue: float
    dof: int
    bins: int


def chi2_two_sample(a: EmpiricalDist, b: EmpiricalDist, min_count: int = 10) -> ChiSquaredResult:
    """Pearson chi-squared homogeneity test on two histograms.

    Adjacent bins are pooled left to right until each pooled bin holds at
    least ``min_count`` observations across both samples; a short remainder
    is merged into the last bin.
    """
    n = max(a.counts.size, b.counts.size)
    ca = np.pad(a.counts, (0, n - a.counts.size))
    cb = np.pad(b.counts, (0, n - b.counts.size))
    rows_a, rows_b = [], []
    acc_a = acc_b = 0
    for x, y in zip(ca, cb):
        acc_a += int(x)
        acc_b += int(y)
        if acc_a + acc_b >= min_count:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b:
        if rows_a:
            rows_a[-1] += acc_a
            rows_b[-1] += acc_b
        else:
            rows_a.append(acc_a)
            rows_b.append(acc_b)
    if len(rows_a) < 2:
        return ChiSquaredResult(0.0, 1.0, 0, len(rows_a))
    stat, pval, dof, _ = chi2_contingency(np.array([rows_a, rows_b]), correction=False)
    return ChiSquaredResult(float(stat), float(pval), int(dof), len(rows_a))
