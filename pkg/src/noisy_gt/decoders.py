"""Likelihood-count decoders, information-density decoders and a COMP baseline.

Under symmetric noise the likelihood of a candidate set depends only on its
number of correct tests N: ``ln L = N ln(1 - rho) + (n - N) ln rho``.  All
enumerating decoders therefore work with integer counts computed from Python
int bitmasks (``popcount(y XOR OR-of-columns)``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import Outcomes, bits_to_mask
from .designs import TestMatrix, round_delta
from .infomath import log_binomial

ENUMERATION_BUDGET = 2_000_000

UNIQUE = "unique"
TIE = "tie"
NONE_SATISFIED = "none_satisfied"
MULTIPLE_SATISFIED = "multiple_satisfied"


class BudgetError(RuntimeError):
    """The requested enumeration exceeds the candidate budget."""


@dataclass(frozen=True)
class DecodeResult:
    estimate: tuple | None
    status: str
    correct_tests: int | None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.estimate is not None) != (self.status == UNIQUE):
            raise ValueError("estimate must be present exactly when status is 'unique'")

    def success(self, S: Iterable[int]) -> bool:
        return self.status == UNIQUE and self.estimate == tuple(sorted(S))


@dataclass(frozen=True)
class GammaSchedule:
    ell_min: int
    gamma: dict
    delta1: float

    def __getitem__(self, ell: int) -> float:
        return self.gamma[ell]

    @property
    def ells(self) -> list[int]:
        return sorted(self.gamma)


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _ymask(y) -> int:
    if isinstance(y, Outcomes):
        return y.mask
    if isinstance(y, int):
        return y
    return bits_to_mask(np.asarray(y))


def restricted_radius(k: int) -> int:
    """floor(k / ln k), capped at k (k = 1 gives 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return 1
    return min(k, math.floor(k / math.log(k)))


def _check_budget(count: int, budget: int) -> None:
    if count > budget:
        raise BudgetError(f"{count} candidates exceed the budget of {budget}")


def count_correct(matrix: TestMatrix, y, S: Iterable[int]) -> int:
    """Number of tests whose observed outcome matches the noiseless outcome under S."""
    return matrix.n - _popcount(_ymask(y) ^ matrix.union_mask(S))


def log_likelihood(n: int, correct: int, rho: float) -> float:
    """ln(rho^(n - N) (1 - rho)^N), with 0 log 0 := 0."""
    out = 0.0
    if correct:
        out += correct * math.log1p(-rho)
    if n - correct:
        out += (n - correct) * (math.log(rho) if rho > 0 else -math.inf)
    return out


def _argmax_counts(scored: Iterable[tuple[tuple, int]], n: int, cap: int = 8) -> DecodeResult:
    best = -1
    winners: list[tuple] = []
    for s, c in scored:
        if c > best:
            best, winners = c, [s]
        elif c == best:
            winners.append(s)
    if len(winners) == 1:
        return DecodeResult(winners[0], UNIQUE, best)
    return DecodeResult(None, TIE, best, {"tied": winners[:cap], "n_tied": len(winners)})


def mle_exact(matrix: TestMatrix, y, k: int, budget: int = ENUMERATION_BUDGET) -> DecodeResult:
    """Maximum-likelihood decoding by enumeration of all size-k sets.

    Ties for the maximum are reported with status 'tie' and no estimate.
    """
    _check_budget(math.comb(matrix.p, k), budget)
    ym = _ymask(y)
    masks = matrix.masks
    n = matrix.n

    def scored():
        for s in itertools.combinations(range(matrix.p), k):
            m = 0
            for j in s:
                m |= masks[j]
            yield s, n - _popcount(ym ^ m)

    return _argmax_counts(scored(), n)


def swap_ball(p: int, reference: Sequence[int], radius: int) -> Iterable[tuple]:
    """All size-k sets s' with |reference \\ s'| <= radius, as sorted tuples."""
    ref = tuple(sorted(reference))
    outside = [j for j in range(p) if j not in set(ref)]
    for ell in range(0, radius + 1):
        for J in itertools.combinations(ref, ell):
            keep = [j for j in ref if j not in J]
            for Jp in itertools.combinations(outside, ell):
                yield tuple(sorted(keep + list(Jp)))


def swap_ball_size(p: int, k: int, radius: int) -> int:
    return sum(math.comb(k, ell) * math.comb(p - k, ell) for ell in range(0, min(radius, k) + 1))


def mle_restricted(
    matrix: TestMatrix,
    y,
    reference: Sequence[int],
    radius: int | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> DecodeResult:
    """MLE over sets within swap distance ``radius`` of ``reference``.

    ``radius`` defaults to floor(k / ln k).
    """
    k = len(reference)
    if radius is None:
        radius = restricted_radius(k)
    if not 0 <= radius <= k:
        raise ValueError(f"radius must lie in [0, {k}], got {radius}")
    _check_budget(swap_ball_size(matrix.p, k, radius), budget)
    ym = _ymask(y)
    n = matrix.n
    scored = ((s, n - _popcount(ym ^ matrix.union_mask(s))) for s in swap_ball(matrix.p, reference, radius))
    return _argmax_counts(scored, n)


def _miss_probability(matrix: TestMatrix, ell: int, nu: float, k: int, design: str) -> tuple[float, bool]:
    """Per-test probability that none of ``ell`` unseen items hits a test.

    Returns ``(m, surrogate)``; the near-constant value treats tests as
    independent, which they are not, so it is flagged as a surrogate.
    """
    if design == "bern":
        return (1.0 - nu / k) ** ell, False
    if design == "nc":
        delta = round_delta(nu, matrix.n, k)
        return (1.0 - 1.0 / matrix.n) ** (ell * delta), True
    raise ValueError(f"unknown design {design!r}")


def _count_log(count: int, x: float) -> float:
    if count == 0:
        return 0.0
    if x <= 0.0:
        return -math.inf
    return count * math.log(x)


def info_density(
    matrix: TestMatrix,
    y,
    s_dif: Sequence[int],
    s_eq: Sequence[int],
    rho: float,
    nu: float | None = None,
    k: int | None = None,
    design: str | None = None,
    return_surrogate: bool = False,
):
    """ln P(Y | X_dif, X_eq) - ln P(Y | X_eq), in nats.

    Tests covered by ``s_eq`` are positive noiselessly under both hypotheses
    and cancel.  On the remaining tests the numerator is the exact noise
    likelihood and the denominator marginalizes the ``s_dif`` columns with
    per-test miss probability m: exact for the Bernoulli design
    (m = (1 - nu/k)^ell) and a factorized surrogate for the near-constant
    design (m = (1 - 1/n)^(ell Delta)).
    """
    s_dif = list(s_dif)
    s_eq = list(s_eq)
    if not s_dif:
        raise ValueError("s_dif must be nonempty")
    if set(s_dif) & set(s_eq):
        raise ValueError("s_dif and s_eq must be disjoint")
    nu = matrix.nu if nu is None else nu
    design = matrix.design if design is None else design
    if k is None:
        k = len(s_dif) + len(s_eq)
    m, surrogate = _miss_probability(matrix, len(s_dif), nu, k, design)

    full = (1 << matrix.n) - 1
    free = full & ~matrix.union_mask(s_eq)
    hit = matrix.union_mask(s_dif) & free
    ym = _ymask(y)
    a = _popcount(hit & ym)  # hit, positive
    b = _popcount(hit & ~ym)  # hit, negative
    c = _popcount(free & ~hit & ym)  # missed, positive
    d = _popcount(free & ~hit & ~ym)  # missed, negative

    q1 = (1.0 - m) * (1.0 - rho) + m * rho
    q0 = (1.0 - m) * rho + m * (1.0 - rho)
    num = _count_log(a + d, 1.0 - rho) + _count_log(b + c, rho)
    den = _count_log(a + c, q1) + _count_log(b + d, q0)
    if num == -math.inf:
        value = -math.inf
    else:
        value = num - den
    if return_surrogate:
        return value, surrogate
    return value


def gamma_schedule(p: int, k: int, delta1: float = 0.1, ell_min: int | None = None) -> GammaSchedule:
    """gamma_ell = ln C(p-k, ell) + ln(k / delta1) + ln C(k, ell).

    The default range is ell in [1 + floor(k/ln k), k]; ``ell_min`` overrides
    the lower end (useful at small k, where the default range is empty).
    """
    if not 0.0 < delta1 < 1.0 + 1e-15:
        raise ValueError(f"delta1 must lie in (0, 1], got {delta1}")
    if not 1 <= k < p:
        raise ValueError(f"need 1 <= k < p, got k={k}, p={p}")
    if ell_min is None:
        ell_min = 1 + restricted_radius(k) if k > 1 else 1
    if ell_min < 1:
        raise ValueError("ell_min must be >= 1")
    base = math.log(k / delta1)
    gamma = {ell: log_binomial(p - k, ell) + base + log_binomial(k, ell) for ell in range(ell_min, k + 1)}
    return GammaSchedule(ell_min=ell_min, gamma=gamma, delta1=delta1)


def _passes_thresholds(matrix, ym, s, schedule, rho, nu, k, design) -> bool:
    for ell in schedule.ells:
        g = schedule[ell]
        if g == math.inf:
            return False
        if g == -math.inf:
            continue
        for dif in itertools.combinations(s, ell):
            eq = [j for j in s if j not in dif]
            if not info_density(matrix, ym, dif, eq, rho, nu, k, design) >= g:
                return False
    return True


def _accept_result(accepted: list[tuple], matrix: TestMatrix, ym: int, extra: dict) -> DecodeResult:
    diag = dict(extra, n_accepted=len(accepted), accepted=accepted[:8])
    if len(accepted) == 1:
        s = accepted[0]
        return DecodeResult(s, UNIQUE, matrix.n - _popcount(ym ^ matrix.union_mask(s)), diag)
    if not accepted:
        return DecodeResult(None, NONE_SATISFIED, None, diag)
    return DecodeResult(None, MULTIPLE_SATISFIED, None, diag)


def threshold_decoder(
    matrix: TestMatrix,
    y,
    k: int,
    schedule: GammaSchedule | None = None,
    *,
    rho: float,
    nu: float | None = None,
    design: str | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> DecodeResult:
    """Accept s iff the information density clears gamma_ell on every partition.

    With no schedule, all ell in [1, k] are checked with delta1 = 0.1.
    """
    if schedule is None:
        schedule = gamma_schedule(matrix.p, k, ell_min=1)
    nu = matrix.nu if nu is None else nu
    design = matrix.design if design is None else design
    work = math.comb(matrix.p, k) * sum(math.comb(k, ell) for ell in schedule.ells)
    _check_budget(max(work, math.comb(matrix.p, k)), budget)
    ym = _ymask(y)
    accepted = [
        s
        for s in itertools.combinations(range(matrix.p), k)
        if _passes_thresholds(matrix, ym, s, schedule, rho, nu, k, design)
    ]
    return _accept_result(accepted, matrix, ym, {"surrogate": design == "nc"})


def _all_counts(matrix: TestMatrix, ym: int, k: int) -> dict:
    masks = matrix.masks
    out = {}
    for s in itertools.combinations(range(matrix.p), k):
        m = 0
        for j in s:
            m |= masks[j]
        out[s] = matrix.n - _popcount(ym ^ m)
    return out


def _locally_dominant(counts: dict, p: int, s: tuple, radius: int) -> bool:
    cs = counts[s]
    for t in swap_ball(p, s, radius):
        if t != s and counts[t] >= cs:
            return False
    return True


def hybrid_decoder(
    matrix: TestMatrix,
    y,
    k: int,
    schedule: GammaSchedule | None = None,
    *,
    rho: float,
    nu: float | None = None,
    design: str | None = None,
    budget: int = ENUMERATION_BUDGET,
) -> DecodeResult:
    """Accept s iff (i) it strictly beats every s' with 1 <= |s \\ s'| <= floor(k/ln k)
    in likelihood and (ii) the information density clears gamma_ell for every
    partition with ell above that radius.
    """
    radius = restricted_radius(k)
    if schedule is None:
        schedule = gamma_schedule(matrix.p, k, ell_min=radius + 1) if radius < k else GammaSchedule(radius + 1, {}, 0.1)
    nu = matrix.nu if nu is None else nu
    design = matrix.design if design is None else design
    n_sets = math.comb(matrix.p, k)
    _check_budget(n_sets * swap_ball_size(matrix.p, k, radius), budget)
    ym = _ymask(y)
    counts = _all_counts(matrix, ym, k)
    accepted = [
        s
        for s in counts
        if _locally_dominant(counts, matrix.p, s, radius)
        and _passes_thresholds(matrix, ym, s, schedule, rho, nu, k, design)
    ]
    return _accept_result(accepted, matrix, ym, {"surrogate": design == "nc", "radius": radius})


def hybrid_sufficient_conditions(
    matrix: TestMatrix,
    y,
    S: Sequence[int],
    schedule: GammaSchedule | None = None,
    *,
    rho: float,
    nu: float | None = None,
    design: str | None = None,
) -> tuple[bool, bool]:
    """Evaluate the two success conditions for the hybrid decoder at the true set.

    Condition 1: S itself passes both decoder checks.  Condition 2: every
    s~ with |S \\ s~| = ell above the radius has density below gamma_ell on
    the partition (s~ \\ S, s~ & S).  Together they imply the hybrid decoder
    returns S.
    """
    S = tuple(sorted(S))
    k = len(S)
    radius = restricted_radius(k)
    if schedule is None:
        schedule = gamma_schedule(matrix.p, k, ell_min=radius + 1) if radius < k else GammaSchedule(radius + 1, {}, 0.1)
    nu = matrix.nu if nu is None else nu
    design = matrix.design if design is None else design
    ym = _ymask(y)
    counts = _all_counts(matrix, ym, k)
    cond1 = _locally_dominant(counts, matrix.p, S, radius) and _passes_thresholds(
        matrix, ym, S, schedule, rho, nu, k, design
    )
    cond2 = True
    for t in counts:
        ell = len(set(S) - set(t))
        if ell <= radius or ell not in schedule.gamma:
            continue
        dif = [j for j in t if j not in S]
        eq = [j for j in t if j in S]
        if info_density(matrix, ym, dif, eq, rho, nu, k, design) >= schedule[ell]:
            cond2 = False
            break
    return cond1, cond2


def ncomp_scores(matrix: TestMatrix, y) -> np.ndarray:
    """Fraction of each item's tests that are negative (0 for untested items)."""
    yb = np.asarray(y.y if isinstance(y, Outcomes) else y, dtype=np.uint8)
    scores = np.zeros(matrix.p)
    for j, s in enumerate(matrix.supports):
        if s.size:
            scores[j] = 1.0 - yb[s].mean()
    return scores


def ncomp_baseline(matrix: TestMatrix, y, k: int, threshold_fraction: float = 1.0) -> DecodeResult:
    """Noisy COMP: declare the k items with the smallest negative-test fraction.

    Ties are broken by item index.  If any chosen item's score exceeds
    ``threshold_fraction`` the decoder declines with 'none_satisfied'.
    """
    if not 0.0 <= threshold_fraction <= 1.0:
        raise ValueError("threshold_fraction must lie in [0, 1]")
    scores = ncomp_scores(matrix, y)
    order = np.lexsort((np.arange(matrix.p), scores))
    chosen = tuple(sorted(int(j) for j in order[:k]))
    diag = {"scores": [float(scores[j]) for j in chosen]}
    if max(scores[list(chosen)]) > threshold_fraction:
        return DecodeResult(None, NONE_SATISFIED, None, diag)
    return DecodeResult(chosen, UNIQUE, count_correct(matrix, y, chosen), diag)
