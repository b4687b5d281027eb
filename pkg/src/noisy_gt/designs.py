"""Random test designs.

Seeding: a single root seed; column ``j`` draws from
``np.random.SeedSequence(root, spawn_key=(STREAM_DESIGN, j))``.  Columns are
therefore independent of generation order, and any subset of columns can be
generated on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

STREAM_DESIGN = 0
STREAM_NOISE = 1
STREAM_DEFECTIVES = 2


def derive_seed(root: int, *keys: int) -> int:
    """A 64-bit integer seed derived from ``root`` and a spawn key path."""
    ss = np.random.SeedSequence(root, spawn_key=tuple(keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def column_rng(root: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=(STREAM_DESIGN, j)))


def round_delta(nu: float, n: int, k: int) -> int:
    """Placements per item in the near-constant design: round(nu n / k), at least 1."""
    return max(1, int(round(nu * n / k)))


@dataclass(frozen=True)
class ProblemParams:
    p: int
    k: int
    n: int
    nu: float
    design: str = "bern"
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k < self.p:
            raise ValueError(f"need 1 <= k < p, got k={self.k}, p={self.p}")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.design == "bern":
            if self.nu / self.k > 1:
                raise ValueError(f"bern design needs nu/k <= 1, got {self.nu / self.k}")
        elif self.design == "nc":
            if self.nu * self.n / self.k < 0.5:
                raise ValueError("near-constant design needs round(nu n / k) >= 1")
        else:
            raise ValueError(f"unknown design {self.design!r}")

    @property
    def delta(self) -> int:
        return round_delta(self.nu, self.n, self.k)

    @property
    def theta_hat(self) -> float:
        return math.log(self.k) / math.log(self.p)


@dataclass(frozen=True, eq=False)
class TestMatrix:
    """Column-major placement structure of an n x p binary design.

    ``columns[j]`` is the sorted placement list of item ``j``; for the
    near-constant design it keeps repeated placements.
    """

    __test__ = False  # not a pytest class

    n: int
    p: int
    columns: tuple
    design: str
    nu: float = 0.0
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def supports(self) -> tuple:
        """Distinct tests per item."""
        return tuple(np.unique(c) for c in self.columns)

    @cached_property
    def masks(self) -> tuple:
        """Per-item support as a Python int bitmask over tests (bit i = test i)."""
        out = []
        for s in self.supports:
            m = 0
            for i in s.tolist():
                m |= 1 << i
            out.append(m)
        return tuple(out)

    @cached_property
    def rows(self) -> tuple:
        """Distinct items per test."""
        rows = [[] for _ in range(self.n)]
        for j, s in enumerate(self.supports):
            for i in s.tolist():
                rows[i].append(j)
        return tuple(tuple(r) for r in rows)

    def column_weight(self, j: int) -> int:
        return len(self.supports[j])

    def dense(self) -> np.ndarray:
        X = np.zeros((self.n, self.p), dtype=np.uint8)
        for j, s in enumerate(self.supports):
            X[s, j] = 1
        return X

    def placement_counts(self, items: Iterable[int]) -> np.ndarray:
        """Per-test number of placements from ``items`` (with multiplicity)."""
        counts = np.zeros(self.n, dtype=np.int64)
        for j in items:
            np.add.at(counts, self.columns[j], 1)
        return counts

    def union_mask(self, items: Iterable[int]) -> int:
        m = 0
        masks = self.masks
        for j in items:
            m |= masks[j]
        return m

    def dumps(self) -> str:
        """Text dump: header ``n p design nu seed`` then one line per item."""
        lines = [f"{self.n} {self.p} {self.design} {self.nu!r} {self.seed}"]
        for c in self.columns:
            lines.append(" ".join(str(i) for i in c.tolist()))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TestMatrix":
        lines = text.rstrip("\n").split("\n")
        n, p, design, nu, seed = lines[0].split()
        cols = tuple(
            np.array([int(t) for t in line.split()], dtype=np.int64) for line in lines[1 : 1 + int(p)]
        )
        if len(cols) != int(p):
            raise ValueError(f"dump lists {len(cols)} columns, header says {p}")
        return cls(n=int(n), p=int(p), columns=cols, design=design, nu=float(nu), seed=int(seed))


def from_columns(n: int, columns: Sequence[Sequence[int]], design: str = "custom") -> TestMatrix:
    """Build a matrix from explicit placement lists (hand-made instances)."""
    cols = tuple(np.sort(np.asarray(c, dtype=np.int64)) for c in columns)
    for c in cols:
        if c.size and (c.min() < 0 or c.max() >= n):
            raise ValueError("placement index out of range")
    return TestMatrix(n=n, p=len(cols), columns=cols, design=design)


def _bernoulli_column(rng: np.random.Generator, n: int, q: float) -> np.ndarray:
    w = rng.binomial(n, q)
    return np.sort(rng.choice(n, size=w, replace=False)).astype(np.int64)


def gen_bernoulli(params: ProblemParams, items: Sequence[int] | None = None) -> TestMatrix:
    """i.i.d. Bernoulli(nu/k) design.

    ``items`` restricts generation to a subset of columns; the others are left
    empty.  The generated columns are identical to a full generation.
    """
    if params.design != "bern":
        raise ValueError("params.design must be 'bern'")
    q = params.nu / params.k
    wanted = range(params.p) if items is None else set(items)
    empty = np.zeros(0, dtype=np.int64)
    cols = tuple(
        _bernoulli_column(column_rng(params.seed, j), params.n, q) if j in wanted else empty
        for j in range(params.p)
    )
    return TestMatrix(n=params.n, p=params.p, columns=cols, design="bern", nu=params.nu, seed=params.seed)


def gen_near_constant(params: ProblemParams, items: Sequence[int] | None = None) -> TestMatrix:
    """Each item gets ``Delta`` uniform placements with replacement."""
    if params.design != "nc":
        raise ValueError("params.design must be 'nc'")
    delta = params.delta
    if delta < 1:
        raise ValueError("Delta must be at least 1")
    wanted = range(params.p) if items is None else set(items)
    empty = np.zeros(0, dtype=np.int64)
    cols = tuple(
        np.sort(column_rng(params.seed, j).integers(0, params.n, size=delta)).astype(np.int64)
        if j in wanted
        else empty
        for j in range(params.p)
    )
    return TestMatrix(n=params.n, p=params.p, columns=cols, design="nc", nu=params.nu, seed=params.seed)


def generate(params: ProblemParams, items: Sequence[int] | None = None) -> TestMatrix:
    if params.design == "bern":
        return gen_bernoulli(params, items)
    return gen_near_constant(params, items)


def sample_defectives(p: int, k: int, seed: int) -> tuple[int, ...]:
    """Uniform size-k subset of range(p), sorted."""
    rng = np.random.default_rng(seed)
    return tuple(sorted(int(x) for x in rng.choice(p, size=k, replace=False)))


def design_stats(matrix: TestMatrix, S: Iterable[int]) -> dict:
    """N0, degree-1 test count and repeat-placement defective count for ``S``."""
    S = list(S)
    counts = matrix.placement_counts(S)
    repeat = sum(1 for j in S if len(matrix.columns[j]) != len(matrix.supports[j]))
    return {
        "N0": int(np.sum(counts == 0)),
        "degree1": int(np.sum(counts == 1)),
        "repeat_defectives": repeat,
    }


def touched_tests(matrix: TestMatrix, J: Iterable[int]) -> int:
    """Number of distinct tests containing some item of ``J``."""
    return bin(matrix.union_mask(J)).count("1")
