"""Scalar information measures and exact small-instance distribution oracles.

Everything is in nats.  The convention ``0 * log(1/0) = 0`` is applied
explicitly rather than relying on floating point limits.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

STIRLING_MAX_N = 64


def _check_prob(name: str, q: float) -> None:
    if not (0.0 <= q <= 1.0) or math.isnan(q):
        raise ValueError(f"{name}={q!r} is not a probability in [0, 1]")


def _xlogy(x: float, y: float) -> float:
    """x * log(y) with 0 * log(anything) := 0."""
    if x == 0.0:
        return 0.0
    return x * math.log(y)


def binary_entropy(q: float) -> float:
    """H2(q) in nats."""
    _check_prob("q", q)
    return -_xlogy(q, q) - _xlogy(1.0 - q, 1.0 - q)


def kl_bernoulli(a: float, b: float, allow_inf: bool = False) -> float:
    """Binary KL divergence D(a || b) in nats.

    When ``b`` sits on the boundary and ``a != b`` the divergence is infinite;
    that raises unless ``allow_inf`` is set, in which case ``math.inf`` is
    returned.
    """
    _check_prob("a", a)
    _check_prob("b", b)
    if (b == 0.0 and a > 0.0) or (b == 1.0 and a < 1.0):
        if allow_inf:
            return math.inf
        raise ValueError(f"D({a} || {b}) is infinite")
    out = 0.0
    if a > 0.0:
        out += a * math.log(a / b)
    if a < 1.0:
        out += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    # rounding can leave a tiny negative value when a ~ b
    return max(out, 0.0)


def star(a: float, b: float) -> float:
    """a * b + (1 - a) * (1 - b)."""
    _check_prob("a", a)
    _check_prob("b", b)
    return a * b + (1.0 - a) * (1.0 - b)


def binomial_pmf(N: int, q: float, t: int) -> float:
    """Exact Bin(N, q) pmf at t, evaluated in log space."""
    _check_prob("q", q)
    if not 0 <= t <= N:
        return 0.0
    if q == 0.0:
        return 1.0 if t == 0 else 0.0
    if q == 1.0:
        return 1.0 if t == N else 0.0
    logp = (
        math.lgamma(N + 1)
        - math.lgamma(t + 1)
        - math.lgamma(N - t + 1)
        + t * math.log(q)
        + (N - t) * math.log1p(-q)
    )
    return math.exp(logp)


def binomial_cdf_tail(N: int, q: float, t: int, side: str) -> float:
    """P(X <= t) for side='lower', P(X >= t) for side='upper', by summation."""
    if side == "lower":
        rng = range(0, t + 1)
    elif side == "upper":
        rng = range(t, N + 1)
    else:
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    return math.fsum(binomial_pmf(N, q, s) for s in rng)


def binomial_tail_bounds(N: int, q: float, t: int, side: str) -> dict:
    """Chernoff tail bound and anti-concentration point bound for Bin(N, q).

    ``chernoff = exp(-N D(t/N || q))`` bounds ``P(X <= t)`` when t <= Nq
    (side='lower') or ``P(X >= t)`` when t >= Nq (side='upper').
    ``anti = exp(-N D(t/N || q)) / sqrt(2N)`` lower-bounds ``P(X = t)``.
    """
    if N < 1 or not 0 <= t <= N:
        raise ValueError(f"need 0 <= t <= N with N >= 1, got N={N}, t={t}")
    _check_prob("q", q)
    mean = N * q
    slack = 1e-12 * max(1.0, mean)
    if side == "lower":
        if t > mean + slack:
            raise ValueError(f"lower tail needs t <= Nq ({t} > {mean})")
    elif side == "upper":
        if t < mean - slack:
            raise ValueError(f"upper tail needs t >= Nq ({t} < {mean})")
    else:
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    expo = N * kl_bernoulli(t / N, q, allow_inf=True)
    chernoff = math.exp(-expo)
    return {"chernoff": chernoff, "anti": chernoff / math.sqrt(2 * N)}


def binomial_coeff_bounds(N: int, k: int) -> tuple[float, float]:
    """Entropy bounds on log C(N, k), returned as (lower, upper) in nats.

    Uses the sharper sqrt(2 pi k (1 - k/N)) form for 1 <= k <= N-1 and the
    cruder sqrt(2N) form at the endpoints.
    """
    if not 0 <= k <= N or N < 1:
        raise ValueError(f"need 0 <= k <= N, got N={N}, k={k}")
    ent = N * binary_entropy(k / N)
    if 1 <= k <= N - 1:
        half_log = 0.5 * math.log(2 * math.pi * k * (1 - k / N))
        upper = ent - half_log
        lower = math.log(math.sqrt(math.pi) / 2) + upper
        return lower, upper
    return ent - 0.5 * math.log(2 * N), ent


def log_binomial(n: int, k: int) -> float:
    """log C(n, k) via log-gamma; -inf outside 0 <= k <= n."""
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


@lru_cache(maxsize=None)
def _stirling_row(n: int) -> tuple[int, ...]:
    if n == 0:
        return (1,)
    prev = _stirling_row(n - 1)
    row = [0] * (n + 1)
    for m in range(1, n + 1):
        left = prev[m] if m < len(prev) else 0
        row[m] = m * left + prev[m - 1]
    return tuple(row)


def stirling2(n: int, m: int) -> int:
    """Stirling number of the second kind, exact, for 0 <= n <= 64."""
    if n < 0 or m < 0:
        raise ValueError("n and m must be non-negative")
    if n > STIRLING_MAX_N:
        raise OverflowError(f"stirling2 is limited to n <= {STIRLING_MAX_N}, got {n}")
    if m > n:
        return 0
    return _stirling_row(n)[m]


def occupancy_pmf(placements: int, n1: int, n2: int, m: int) -> float:
    """P(M = m) for uniform placement with replacement into n1 + n2 tests.

    ``M`` is the number of distinct tests in the n2-block that receive at
    least one of the ``placements`` balls.  Evaluated with exact integers.
    """
    L = placements
    if L < 0 or n1 < 0 or n2 < 0 or n1 + n2 < 1:
        raise ValueError(f"inconsistent counts placements={L}, n1={n1}, n2={n2}")
    if L > STIRLING_MAX_N:
        raise OverflowError(f"exact occupancy limited to placements <= {STIRLING_MAX_N}")
    if m < 0 or m > min(L, n2):
        return 0.0
    n = n1 + n2
    total = 0
    for u in range(0, L - m + 1):
        total += math.comb(L, u) * n1**u * stirling2(L - u, m)
    num = math.comb(n2, m) * math.factorial(m) * total
    return float(Fraction(num, n**L))


def occupancy_upper_bound(placements: int, n1: int, n2: int, m: int) -> float:
    """Upper bound exp(L^2/(4 n1) - L D(m/L || n2/n)) on occupancy_pmf.

    Returns ``inf`` when n1 = 0 (the bound is vacuous there).
    """
    L = placements
    if L < 1:
        raise ValueError("placements must be >= 1")
    if n1 == 0:
        return math.inf
    n = n1 + n2
    expo = L * L / (4 * n1) - L * kl_bernoulli(m / L, n2 / n, allow_inf=True)
    return math.exp(expo)


def hypergeom_pmf(N: int, K: int, n: int, t: int) -> float:
    """C(K, t) C(N-K, n-t) / C(N, n), evaluated in log space."""
    if not (0 <= K <= N and 0 <= n <= N):
        raise ValueError(f"inconsistent counts N={N}, K={K}, n={n}")
    if t < 0 or t > min(K, n) or n - t > N - K:
        return 0.0
    logp = log_binomial(K, t) + log_binomial(N - K, n - t) - log_binomial(N, n)
    return math.exp(logp)


def _log_binom_bounds(N: int, k: int) -> tuple[float, float]:
    if N == 0:
        return 0.0, 0.0
    return binomial_coeff_bounds(N, k)


def hypergeom_bounds(N: int, K: int, n: int, t: int) -> dict:
    """Pointwise bounds on hypergeom_pmf(N, K, n, t).

    ``chernoff = exp(-n D(t/n || K/N))`` dominates the pmf (Hoeffding's
    comparison with sampling with replacement).  ``lower`` combines the
    entropy bounds on the three binomial coefficients.
    """
    if not (0 <= K <= N and 1 <= n <= N):
        raise ValueError(f"inconsistent counts N={N}, K={K}, n={n}")
    if t < 0 or t > min(K, n) or n - t > N - K:
        raise ValueError(f"t={t} outside the support")
    chernoff = math.exp(-n * kl_bernoulli(t / n, K / N, allow_inf=True))
    lo_a, _ = _log_binom_bounds(K, t)
    lo_b, _ = _log_binom_bounds(N - K, n - t)
    _, up_c = _log_binom_bounds(N, n)
    return {"chernoff": chernoff, "lower": math.exp(lo_a + lo_b - up_c)}
