"""Masking statistics, feasible (C, zeta) pairs and MLE failure certificates.

For a true set S and a subset J of S, swapping J for an outside set J' of the
same size changes the correct-test count by the exact integer identity

    N(s') - N(S) = G1 - G2 - (M_J1 - M_J0),

where ``M_J1 - M_J0 = (1 - 2 zeta) * C * n nu e^{-nu} ell / k`` for the
feasible pair derived from the counts.  A strict positive margin certifies
failure of restricted MLE; conversely every restricted-MLE failure has a
witness with non-negative margin.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .channel import Outcomes, bits_to_mask
from .decoders import (
    ENUMERATION_BUDGET,
    UNIQUE,
    BudgetError,
    count_correct,
    mle_restricted,
    restricted_radius,
    swap_ball_size,
)
from .designs import TestMatrix


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True)
class MaskingStats:
    """Counts for a true set S and J within S.

    M_J: tests with some J item and no item of S minus J, split into negative
    (M_J0) and positive (M_J1) observed outcomes.  N0: defective-free tests,
    split likewise into N00 and N01.  M_prime: tests in M_J where no J item is
    placed more than once (differs from M_J only for the near-constant design).
    """

    M_J: int
    M_J0: int
    M_J1: int
    N0: int
    N00: int
    N01: int
    M_prime: int


@dataclass(frozen=True)
class FeasiblePair:
    """(C, zeta) derived from integer counts.

    ``C = M_J / scale`` with ``scale = n nu e^{-nu} ell / k``; ``zeta`` is the
    exact fraction M_J0 / M_J.  Because scale is irrational in general, C is a
    float, while the products ``C * scale = M_J`` and ``zeta * C * scale =
    M_J0`` are kept as the exact integers that define the pair.
    """

    ell: int
    M_J: int
    M_J0: int
    scale: float

    @property
    def C(self) -> float:
        return self.M_J / self.scale

    @property
    def zeta(self) -> Fraction:
        if self.M_J == 0:
            return Fraction(0)
        return Fraction(self.M_J0, self.M_J)

    @property
    def tilt(self) -> int:
        """(1 - 2 zeta) * C * scale, which equals M_J1 - M_J0 exactly."""
        return self.M_J - 2 * self.M_J0


@dataclass(frozen=True)
class GainCounts:
    G1: int
    G2: int


@dataclass(frozen=True)
class Witness:
    ell: int
    pair: FeasiblePair
    J: tuple
    Jprime: tuple
    G1: int
    G2: int

    @property
    def margin(self) -> int:
        """G1 - G2 - (1 - 2 zeta) C scale; equals N(s') - N(S)."""
        return self.G1 - self.G2 - self.pair.tilt

    def to_record(self) -> dict:
        return {
            "ell": self.ell,
            "C": self.pair.C,
            "zeta": float(self.pair.zeta),
            "J": list(self.J),
            "Jprime": list(self.Jprime),
            "G1": self.G1,
            "G2": self.G2,
            "margin": self.margin,
        }


@dataclass
class FailureCheck:
    sufficient_found: bool
    necessary_holds_on_failure: bool
    restricted_failed: bool
    identity_violations: int
    strict_witnesses: list
    weak_witnesses: list

    @property
    def violations(self) -> int:
        """Number of broken implications plus identity mismatches."""
        bad = self.identity_violations
        if self.sufficient_found and not self.restricted_failed:
            bad += 1
        if not self.necessary_holds_on_failure:
            bad += 1
        return bad


def _y_mask(outcomes) -> int:
    if isinstance(outcomes, Outcomes):
        return outcomes.mask
    return bits_to_mask(outcomes)


def _block_masks(matrix: TestMatrix, ym: int, S: Sequence[int], J: Sequence[int]):
    full = (1 << matrix.n) - 1
    rest = matrix.union_mask(j for j in S if j not in set(J))
    mj = matrix.union_mask(J) & ~rest & full
    n0 = full & ~matrix.union_mask(S)
    return mj, n0, full


def masking_stats(matrix: TestMatrix, outcomes, S: Sequence[int], J: Sequence[int]) -> MaskingStats:
    if not J:
        raise ValueError("J must be nonempty")
    if not set(J) <= set(S):
        raise ValueError("J must be a subset of S")
    ym = _y_mask(outcomes)
    mj, n0, full = _block_masks(matrix, ym, S, J)
    repeated = 0
    for j in J:
        col, sup = matrix.columns[j], matrix.supports[j]
        if len(col) != len(sup):
            vals, cnt = np.unique(col, return_counts=True)
            for i, c in zip(vals, cnt):
                if c > 1:
                    repeated |= 1 << int(i)
    M_J = _popcount(mj)
    M_J1 = _popcount(mj & ym)
    N0 = _popcount(n0)
    N01 = _popcount(n0 & ym)
    return MaskingStats(
        M_J=M_J,
        M_J0=M_J - M_J1,
        M_J1=M_J1,
        N0=N0,
        N00=N0 - N01,
        N01=N01,
        M_prime=_popcount(mj & ~repeated),
    )


def pair_scale(n: int, k: int, nu: float, ell: int) -> float:
    """n nu e^{-nu} ell / k."""
    return n * nu * math.exp(-nu) * ell / k


def derive_feasible_pair(stats: MaskingStats, params, ell: int) -> FeasiblePair:
    """(C, zeta) = (M_J / scale, M_J0 / M_J), or (0, 0) when M_J = 0.

    ``params`` needs ``n``, ``k`` and ``nu`` attributes (e.g. ProblemParams).
    """
    return FeasiblePair(ell=ell, M_J=stats.M_J, M_J0=stats.M_J0, scale=pair_scale(params.n, params.k, params.nu, ell))


def g_counts(matrix: TestMatrix, outcomes, S: Sequence[int], J: Sequence[int], Jprime: Sequence[int]) -> GainCounts:
    """G1: tests in N01 or M_J1 touched by J'; G2: tests in N00 or M_J0 touched by J'."""
    if set(Jprime) & set(S):
        raise ValueError("J' must be disjoint from S")
    if len(J) != len(Jprime):
        raise ValueError("J and J' must have the same size")
    ym = _y_mask(outcomes)
    mj, n0, full = _block_masks(matrix, ym, S, J)
    hit = matrix.union_mask(Jprime) & (mj | n0)
    return GainCounts(G1=_popcount(hit & ym), G2=_popcount(hit & ~ym & full))


@dataclass(frozen=True)
class _Params:
    n: int
    k: int
    nu: float


def check_failure_conditions(
    matrix: TestMatrix,
    outcomes,
    S: Sequence[int],
    radius: int | None = None,
    nu: float | None = None,
    budget: int = ENUMERATION_BUDGET,
    keep: int = 16,
) -> FailureCheck:
    """Enumerate every (J, J') with |J| = |J'| <= radius and audit the failure lemma.

    Also verifies the swap identity against independently computed
    correct-test counts for every pair.
    """
    S = tuple(sorted(S))
    k = len(S)
    if radius is None:
        radius = restricted_radius(k)
    _check = swap_ball_size(matrix.p, k, radius)
    if _check > budget:
        raise BudgetError(f"{_check} swaps exceed the budget of {budget}")
    params = _Params(matrix.n, k, matrix.nu if nu is None else nu)
    outside = [j for j in range(matrix.p) if j not in set(S)]
    base = count_correct(matrix, outcomes, S)
    strict, weak = [], []
    n_strict = 0
    weak_by_ell = dict.fromkeys(range(1, radius + 1), 0)
    bad_identity = 0
    for ell in range(1, radius + 1):
        for J in itertools.combinations(S, ell):
            pair = derive_feasible_pair(masking_stats(matrix, outcomes, S, J), params, ell)
            keep_rest = [j for j in S if j not in J]
            for Jp in itertools.combinations(outside, ell):
                g = g_counts(matrix, outcomes, S, J, Jp)
                w = Witness(ell, pair, J, Jp, g.G1, g.G2)
                delta = count_correct(matrix, outcomes, keep_rest + list(Jp)) - base
                if delta != w.margin:
                    bad_identity += 1
                if w.margin >= 0:
                    weak_by_ell[ell] += 1
                    if len(weak) < keep:
                        weak.append(w)
                    if w.margin > 0:
                        n_strict += 1
                        if len(strict) < keep:
                            strict.append(w)
    res = mle_restricted(matrix, outcomes, S, radius, budget=budget)
    failed = not (res.status == UNIQUE and res.estimate == S)
    if not failed:
        necessary = True
    elif res.status == UNIQUE:
        necessary = weak_by_ell[len(set(S) - set(res.estimate))] > 0
    else:
        necessary = sum(weak_by_ell.values()) > 0
    return FailureCheck(
        sufficient_found=n_strict > 0,
        necessary_holds_on_failure=necessary,
        restricted_failed=failed,
        identity_violations=bad_identity,
        strict_witnesses=strict,
        weak_witnesses=weak,
    )


def enumerate_k_czeta(
    matrix: TestMatrix,
    outcomes,
    S: Sequence[int],
    ell: int,
    nu: float | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> dict:
    """Group the size-ell subsets of S by derived feasible pair; values are group sizes."""
    S = tuple(sorted(S))
    if math.comb(len(S), ell) > budget:
        raise BudgetError(f"C({len(S)}, {ell}) exceeds the budget of {budget}")
    params = _Params(matrix.n, len(S), matrix.nu if nu is None else nu)
    out: dict = {}
    for J in itertools.combinations(S, ell):
        pair = derive_feasible_pair(masking_stats(matrix, outcomes, S, J), params, ell)
        out[pair] = out.get(pair, 0) + 1
    return out


def dump_witnesses(witnesses: Iterable[Witness]) -> str:
    """JSON-lines, one witness per line with keys ell, C, zeta, J, Jprime, G1, G2, margin."""
    return "".join(json.dumps(w.to_record()) + "\n" for w in witnesses)
