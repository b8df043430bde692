"""Problem parameters, Bernoulli designs, test outcomes and decoders.

Rows of a design are stored bit-packed: item ``i`` of test ``t`` is bit
``i % 64`` of word ``i // 64`` in ``rows[t]``. Defectives default to items
``0..k-1``; the model is exchangeable so this loses nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels

WORD = 64


@dataclass(frozen=True)
class GroupTestInstance:
    """Population size ``n``, defectives ``k``, inclusion probability ``p``, tests ``T``."""

    n: int
    k: int
    p: float
    T: int

    def __post_init__(self):
        for name in ("n", "k", "T"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValueError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        object.__setattr__(self, "p", float(self.p))
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got n={self.n}, k={self.k}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"need 0 < p < 1, got p={self.p}")
        if self.T < 0:
            raise ValueError(f"need T >= 0, got T={self.T}")

    @property
    def L(self) -> int:
        """Number of non-defective items."""
        return self.n - self.k

    @property
    def log1m_p(self) -> float:
        return math.log1p(-self.p)

    @property
    def log_q0(self) -> float:
        return self.k * self.log1m_p

    @property
    def q0(self) -> float:
        """Probability that a single test is negative, (1-p)^k."""
        return math.exp(self.log_q0)

    def with_tests(self, T: int) -> "GroupTestInstance":
        return replace(self, T=T)


def n_words(n: int) -> int:
    return (n + WORD - 1) // WORD


def pack_bits(dense: np.ndarray) -> np.ndarray:
    """Pack a boolean array along its last axis into little-endian uint64 words."""
    dense = np.asarray(dense, dtype=bool)
    n = dense.shape[-1]
    w = n_words(n)
    packed = np.packbits(dense, axis=-1, bitorder="little")
    pad = w * 8 - packed.shape[-1]
    if pad:
        packed = np.concatenate([packed, np.zeros(packed.shape[:-1] + (pad,), dtype=np.uint8)], axis=-1)
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, count=n, bitorder="little").astype(bool)


def index_mask(indices: Iterable[int], n: int) -> np.ndarray:
    dense = np.zeros(n, dtype=bool)
    dense[list(indices)] = True
    return pack_bits(dense)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TestMatrix:
    """A T x n binary design with bit-packed rows."""

    __test__ = False  # not a pytest class

    rows: np.ndarray
    n: int

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.uint64)
        if rows.ndim != 2 or rows.shape[1] != n_words(self.n):
            raise ValueError(f"rows must have shape (T, {n_words(self.n)}), got {rows.shape}")
        tail = self.n % WORD
        if tail and rows.size and np.any(rows[:, -1] >> np.uint64(tail)):
            raise ValueError("bits set beyond column n")
        object.__setattr__(self, "rows", _readonly(rows.copy()))

    @classmethod
    def from_dense(cls, dense) -> "TestMatrix":
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2:
            raise ValueError("dense design must be 2-D")
        return cls(pack_bits(dense), dense.shape[1])

    @property
    def T(self) -> int:
        return self.rows.shape[0]

    def to_dense(self) -> np.ndarray:
        if self.T == 0:
            return np.zeros((0, self.n), dtype=bool)
        return unpack_bits(self.rows, self.n)

    def to_text(self) -> str:
        """Row-major '0'/'1' text, one test per line."""
        return "".join("".join("1" if b else "0" for b in row) + "\n" for row in self.to_dense())

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "TestMatrix":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            if n is None:
                raise ValueError("empty text needs an explicit n")
            return cls(np.zeros((0, n_words(n)), dtype=np.uint64), n)
        if any(set(ln) - {"0", "1"} for ln in lines):
            raise ValueError("rows may contain only '0' and '1'")
        width = {len(ln) for ln in lines}
        if len(width) != 1 or (n is not None and width != {n}):
            raise ValueError("ragged rows or width mismatch")
        return cls.from_dense([[c == "1" for c in ln] for ln in lines])

    def __eq__(self, other):
        if not isinstance(other, TestMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash((self.n, self.rows.tobytes()))


@dataclass(frozen=True)
class DefectiveSet:
    members: frozenset
    n: int
    mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        if any(i < 0 or i >= self.n for i in members):
            raise ValueError(f"defective indices must lie in [0, {self.n})")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "mask", _readonly(index_mask(members, self.n)))

    @classmethod
    def first_k(cls, n: int, k: int) -> "DefectiveSet":
        return cls(frozenset(range(k)), n)

    @classmethod
    def for_instance(cls, inst: GroupTestInstance) -> "DefectiveSet":
        return cls.first_k(inst.n, inst.k)

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def complement_mask(self) -> np.ndarray:
        return index_mask(set(range(self.n)) - self.members, self.n)


@dataclass(frozen=True, eq=False)
class OutcomeVector:
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=bool)
        if y.ndim != 1:
            raise ValueError("outcome vector must be 1-D")
        object.__setattr__(self, "y", _readonly(y.copy()))

    @property
    def T(self) -> int:
        return self.y.size

    def __eq__(self, other):
        if not isinstance(other, OutcomeVector):
            return NotImplemented
        return np.array_equal(self.y, other.y)

    def __hash__(self):
        return hash(self.y.tobytes())


@dataclass(frozen=True)
class DecodeResult:
    """Estimated defective set; ``intruders``/``G`` are filled only when scored against the truth."""

    estimate: frozenset
    intruders: frozenset | None = None

    @property
    def G(self) -> int | None:
        return None if self.intruders is None else len(self.intruders)

    def scored(self, K: DefectiveSet) -> "DecodeResult":
        return replace(self, intruders=frozenset(self.estimate - K.members))


def generate_design(inst: GroupTestInstance, seed: int) -> TestMatrix:
    """Draw a T x n Bernoulli(p) design from a PCG64 stream seeded by ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    dense = rng.random((inst.T, inst.n)) < inst.p
    return TestMatrix(pack_bits(dense), inst.n)


def run_tests(X: TestMatrix, K: DefectiveSet) -> OutcomeVector:
    if X.n != K.n:
        raise ValueError(f"design has {X.n} columns but defective set lives in [0, {K.n})")
    return OutcomeVector(np.any(X.rows & K.mask, axis=1))


def _check_dims(X: TestMatrix, y: OutcomeVector):
    if X.T != y.T:
        raise ValueError(f"design has {X.T} tests but outcome vector has {y.T}")


def _cleared_words(X: TestMatrix, y: OutcomeVector) -> np.ndarray:
    negative = X.rows[~y.y]
    if negative.shape[0] == 0:
        return np.zeros(n_words(X.n), dtype=np.uint64)
    return np.bitwise_or.reduce(negative, axis=0)


def _members(words: np.ndarray, n: int) -> frozenset:
    return frozenset(np.flatnonzero(unpack_bits(words, n)).tolist())


def decode_comp(X: TestMatrix, y: OutcomeVector, K: DefectiveSet | None = None) -> DecodeResult:
    """COMP: every item seen in a negative test is cleared, everything else is declared defective."""
    _check_dims(X, y)
    full = index_mask(range(X.n), X.n)
    res = DecodeResult(_members(~_cleared_words(X, y) & full, X.n))
    return res if K is None else res.scored(K)


def decode_dd(X: TestMatrix, y: OutcomeVector, K: DefectiveSet | None = None) -> DecodeResult:
    """DD: an item is defective iff it is the only COMP-uncleared item of some positive test."""
    _check_dims(X, y)
    cleared = _cleared_words(X, y)
    pos = X.rows[y.y] & ~cleared
    if pos.shape[0]:
        single = np.bitwise_count(pos).sum(axis=1) == 1
        found = np.bitwise_or.reduce(pos[single], axis=0) if single.any() else np.zeros(n_words(X.n), np.uint64)
    else:
        found = np.zeros(n_words(X.n), dtype=np.uint64)
    res = DecodeResult(_members(found, X.n))
    return res if K is None else res.scored(K)


def count_intruders_batch(rows: np.ndarray, K: DefectiveSet) -> np.ndarray:
    """G for each design in a (B, T, W) packed batch, via the COMP kernel."""
    nondef = K.complement_mask
    return _kernels.comp_intruders(rows, K.mask, nondef)


class TwoStageOutcome(NamedTuple):
    success: bool
    stage2_items: int


def run_two_stage(inst: GroupTestInstance, K: DefectiveSet | None, T1: int, T2: int, seed: int) -> TwoStageOutcome:
    """COMP with ``T1`` Bernoulli tests, then one individual test per uncleared item.

    Individual tests are noiseless, so stage two succeeds exactly when the
    budget ``T2`` covers every item COMP left standing.
    """
    if T1 < 0 or T2 < 0:
        raise ValueError("T1 and T2 must be non-negative")
    K = DefectiveSet.for_instance(inst) if K is None else K
    stage1 = inst.with_tests(T1)
    X = generate_design(stage1, seed)
    est = decode_comp(X, run_tests(X, K))
    items = len(est.estimate)
    return TwoStageOutcome(items <= T2, items)
