"""Exact asymptotic test-count thresholds for the Bernoulli and near-constant designs.

A threshold is reported as a dimensionless coefficient of ``k ln(p/k)``::

    n* = coeff * k * ln(p/k),   coeff = max(term1, term2)

where ``term1`` is the channel-capacity term and ``term2`` comes from the
(C, zeta) minimax of the defective-side exponent ``f1`` against the
non-defective-side exponent ``f2``.

The functions ``f2`` and ``g`` depend on (C, zeta) only through
``A = C (1 - 2 zeta)``.  The minimax solver uses that: for each ``A`` the
smallest ``f1`` on the line ``C (1 - 2 zeta) = A`` has a closed form, ``f2`` is
increasing in ``A`` above ``2 rho - 1`` and the constrained ``f1`` is
decreasing below ``1 - 2 rho``, so the minimax is the unique crossing of the two
on ``[2 rho - 1, 1 - 2 rho]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .infomath import binary_entropy, kl_bernoulli, star

log = logging.getLogger(__name__)

DESIGNS = ("bern", "nc")
C_MAX_BERN = 50.0
NU_BRACKET = (0.05, 5.0)
MI_REGIME_SWITCH = 0.01


class ConvergenceError(RuntimeError):
    """Raised when a root-finder or optimiser cannot meet its tolerance."""


class BracketError(ConvergenceError):
    """Raised when the optimum of a bracketed search sits on the bracket edge."""


@dataclass(frozen=True)
class MinimaxResult:
    value: float
    C_star: float
    zeta_star: float
    A_star: float


@dataclass(frozen=True)
class ThresholdBreakdown:
    design: str
    theta: float
    rho: float
    nu: float
    term1_coeff: float
    term2_coeff: float
    coeff: float
    C_star: float
    zeta_star: float
    d_star: float
    minimax_value: float
    binding: str

    @property
    def rate_bits(self) -> float:
        return 1.0 / (self.coeff * math.log(2.0))


@dataclass(frozen=True)
class NuOptimum:
    nu_star: float
    rate_star: float
    breakdown: ThresholdBreakdown


@dataclass(frozen=True)
class MutualInfoAsymptotic:
    value_nats: float
    regime: str
    alpha: float


def _check_design(design: str) -> None:
    if design not in DESIGNS:
        raise ValueError(f"design must be one of {DESIGNS}, got {design!r}")


def _check_regime(theta: float, rho: float, nu: float) -> None:
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if not 0.0 < rho < 0.5:
        raise ValueError(f"rho must lie in (0, 0.5), got {rho}")
    if not nu > 0.0:
        raise ValueError(f"nu must be positive, got {nu}")


def _xlogx(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x)


# ---------------------------------------------------------------------------
# exponents


def f1(design: str, C: float, zeta: float, rho: float, nu: float = 1.0) -> float:
    """Defective-side exponent.

    bern: ``C ln C - C + C D(zeta||rho) + 1``;
    nc:   ``e^nu D(C e^-nu || e^-nu) + C D(zeta||rho)``.
    """
    _check_design(design)
    if C < 0 or not 0.0 <= zeta <= 1.0:
        raise ValueError(f"need C >= 0 and zeta in [0, 1], got C={C}, zeta={zeta}")
    div = C * kl_bernoulli(zeta, rho) if C > 0 else 0.0
    if design == "bern":
        return _xlogx(C) - C + div + 1.0
    E = math.exp(nu)
    if C > E * (1 + 1e-12):
        raise ValueError(f"near-constant design needs C <= e^nu = {E}, got {C}")
    c = min(C / E, 1.0)
    return E * kl_bernoulli(c, 1.0 / E) + div


def g(design: str, C: float, zeta: float, d: float, rho: float, nu: float = 1.0) -> float:
    """Non-defective-side exponent at a given ``d``."""
    _check_design(design)
    return _g_A(design, C * (1.0 - 2.0 * zeta), d, rho, nu)


def _g_A(design: str, A: float, d: float, rho: float, nu: float) -> float:
    if design == "bern":
        r = rho * d - A
        if d < 0 or r < -1e-14 * max(1.0, abs(A)):
            raise ValueError(f"bern g needs d >= max(0, A/rho); got d={d}, A={A}")
        r = max(r, 0.0)
        return (
            rho * _xlogx(d)
            + (0.0 if r == 0.0 else r * math.log(r / (1.0 - rho)))
            + 1.0
            - 2.0 * rho * d
            + A
        )
    E = math.exp(nu)
    slack = 1e-12 * max(1.0, E)
    if d < abs(A) - slack or d > E + slack:
        raise ValueError(f"nc g needs |A| <= d <= e^nu; got d={d}, A={A}, e^nu={E}")
    d = min(max(d, abs(A)), E)
    out = E * kl_bernoulli(d / E, 1.0 / E)
    if d > 0:
        inner = min(max(0.5 + A / (2.0 * d), 0.0), 1.0)
        out += d * kl_bernoulli(inner, rho)
    return out


def dg_dd(design: str, C: float, zeta: float, d: float, rho: float, nu: float = 1.0) -> float:
    """Analytic derivative of ``g`` with respect to ``d``."""
    _check_design(design)
    A = C * (1.0 - 2.0 * zeta)
    if design == "bern":
        return rho * math.log(d * (rho * d - A) / (1.0 - rho))
    E = math.exp(nu)
    return math.log(math.sqrt(d * d - A * A) / (2.0 * math.sqrt(rho * (1.0 - rho)))) - math.log(
        (E - d) / (E - 1.0)
    )


def _d_star_A(design: str, A: float, rho: float, nu: float) -> float:
    c = 4.0 * rho * (1.0 - rho)
    root = math.sqrt(A * A + c)
    if design == "bern":
        # A + root, written without cancellation for negative A
        num = A + root if A >= 0 else c / (root - A)
        return num / (2.0 * rho)
    E = math.exp(nu)
    a = (E - 1.0) ** 2 / c
    X = A * A * a + E * E
    # (-E + sqrt(E^2 + (a-1) X)) / (a - 1), rationalised; equals X / (2E) at a = 1
    d = X / (math.sqrt(E * E + (a - 1.0) * X) + E)
    return min(max(d, abs(A)), E)


def d_star(design: str, C: float, zeta: float, rho: float, nu: float = 1.0) -> float:
    """Minimiser of ``g`` over the design-specific ``d`` range."""
    _check_design(design)
    return _d_star_A(design, C * (1.0 - 2.0 * zeta), rho, nu)


def _f2_A(design: str, A: float, rho: float, nu: float) -> float:
    return _g_A(design, A, _d_star_A(design, A, rho, nu), rho, nu)


def f2(design: str, C: float, zeta: float, rho: float, nu: float = 1.0) -> float:
    """``min_d g`` evaluated at the closed-form ``d_star``."""
    _check_design(design)
    return _f2_A(design, C * (1.0 - 2.0 * zeta), rho, nu)


def f2_hat(design: str, C: float, zeta: float, rho: float, nu: float = 1.0) -> float:
    """``f2`` clamped to zero when ``C (1 - 2 zeta) < 2 rho - 1``."""
    if C * (1.0 - 2.0 * zeta) < 2.0 * rho - 1.0:
        return 0.0
    return f2(design, C, zeta, rho, nu)


def minimax_objective(
    design: str, C: float, zeta: float, theta: float, rho: float, nu: float = 1.0
) -> float:
    return max(f1(design, C, zeta, rho, nu) / theta, f2(design, C, zeta, rho, nu))


# ---------------------------------------------------------------------------
# (C, zeta) minimax


def line_argmin_f1(design: str, A: float, rho: float, nu: float = 1.0) -> tuple[float, float]:
    """(C, zeta) minimising ``f1`` subject to ``C (1 - 2 zeta) = A``.

    Writing x = C zeta and y = C (1 - zeta), stationarity gives
    ``x y = rho (1 - rho)`` for bern and ``C = d_star_nc(A)`` for nc.
    """
    _check_design(design)
    if design == "bern":
        C = math.sqrt(A * A + 4.0 * rho * (1.0 - rho))
    else:
        C = _d_star_A("nc", A, rho, nu)
    zeta = min(max((C - A) / (2.0 * C), 0.0), 1.0)
    return C, zeta


def _line_min_f1(design: str, A: float, rho: float, nu: float) -> float:
    C, zeta = line_argmin_f1(design, A, rho, nu)
    return f1(design, C, zeta, rho, nu)


def minimax_czeta(
    design: str,
    theta: float,
    rho: float,
    nu: float = 1.0,
    grid_points: int = 16,
    grid_phase: float = 0.0,
) -> MinimaxResult:
    """``min_{C, zeta} max{f1 / theta, f2}``.

    A coarse scan of ``A`` (offset by ``grid_phase`` in [0, 1)) brackets the
    crossing of ``f1_line(A) / theta`` and ``f2(A)``; Brent's method then
    refines it to machine precision.
    """
    _check_design(design)
    _check_regime(theta, rho, nu)
    lo, hi = 2.0 * rho - 1.0, 1.0 - 2.0 * rho

    def gap(A: float) -> float:
        return _line_min_f1(design, A, rho, nu) / theta - _f2_A(design, A, rho, nu)

    pts = [lo + (i + grid_phase) / grid_points * (hi - lo) for i in range(grid_points)]
    pts = [lo] + [p for p in pts if lo < p < hi] + [hi]
    vals = [gap(p) for p in pts]
    if not (vals[0] > 0 > vals[-1]):
        raise ConvergenceError(f"minimax crossing not bracketed: gap({lo})={vals[0]}, gap({hi})={vals[-1]}")
    for a, b, va, vb in zip(pts, pts[1:], vals, vals[1:]):
        if va > 0 >= vb:
            break
    if vb == 0.0:
        A_star = b
    else:
        try:
            A_star = brentq(gap, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        except RuntimeError as exc:  # pragma: no cover - brentq raises on maxiter
            raise ConvergenceError(str(exc)) from exc
    C_star, zeta_star = line_argmin_f1(design, A_star, rho, nu)
    if design == "bern" and C_star >= C_MAX_BERN:
        log.warning("bern minimiser C*=%g touches the cap %g", C_star, C_MAX_BERN)
    value = max(
        f1(design, C_star, zeta_star, rho, nu) / theta, _f2_A(design, A_star, rho, nu)
    )
    return MinimaxResult(value=value, C_star=C_star, zeta_star=zeta_star, A_star=A_star)


# ---------------------------------------------------------------------------
# thresholds and rates


def capacity_gap(rho: float, nu: float) -> float:
    """H2(e^-nu * rho) - H2(rho), nats per test."""
    return binary_entropy(star(math.exp(-nu), rho)) - binary_entropy(rho)


def threshold_coeff(design: str, theta: float, rho: float, nu: float) -> ThresholdBreakdown:
    _check_design(design)
    _check_regime(theta, rho, nu)
    cap = capacity_gap(rho, nu)
    term1 = 1.0 / cap if cap > 0 else math.inf
    mm = minimax_czeta(design, theta, rho, nu)
    denom = (1.0 - theta) * nu * math.exp(-nu) * mm.value
    term2 = 1.0 / denom if denom > 0 else math.inf
    coeff = max(term1, term2)
    return ThresholdBreakdown(
        design=design,
        theta=theta,
        rho=rho,
        nu=nu,
        term1_coeff=term1,
        term2_coeff=term2,
        coeff=coeff,
        C_star=mm.C_star,
        zeta_star=mm.zeta_star,
        d_star=_d_star_A(design, mm.A_star, rho, nu),
        minimax_value=mm.value,
        binding="capacity" if term1 >= term2 else "minimax",
    )


def rate(design: str, theta: float, rho: float, nu: float) -> float:
    """Asymptotic rate in bits/test implied by ``n* = coeff k ln(p/k)``."""
    return threshold_coeff(design, theta, rho, nu).rate_bits


def optimize_nu(
    design: str,
    theta: float,
    rho: float,
    bracket: tuple[float, float] = NU_BRACKET,
    scan_points: int = 60,
    xtol: float = 1e-7,
) -> NuOptimum:
    """Maximise the rate over ``nu`` in ``bracket``.

    The coefficient is scanned on a uniform grid, golden-section search runs on
    the neighbourhood of the best grid point, and every nu where the capacity
    and minimax terms cross is added as a candidate.
    """
    _check_design(design)
    lo, hi = bracket
    grid = np.linspace(lo, hi, scan_points)
    parts = [threshold_coeff(design, theta, rho, float(v)) for v in grid]
    coeffs = np.array([b.coeff for b in parts])
    i = int(np.argmin(coeffs))
    if i == 0 or i == len(grid) - 1:
        raise BracketError(f"optimal nu sits on the bracket edge {grid[i]:.4g}")

    def coeff_at(v: float) -> float:
        return threshold_coeff(design, theta, rho, v).coeff

    candidates = [float(grid[i])]
    res = minimize_scalar(
        coeff_at,
        bracket=(float(grid[i - 1]), float(grid[i]), float(grid[i + 1])),
        method="golden",
        tol=xtol,
    )
    if lo <= res.x <= hi:
        candidates.append(float(res.x))

    def term_gap(v: float) -> float:
        b = threshold_coeff(design, theta, rho, v)
        return b.term1_coeff - b.term2_coeff

    gaps = [b.term1_coeff - b.term2_coeff for b in parts]
    for j in range(max(i - 2, 0), min(i + 2, len(grid) - 1)):
        if gaps[j] * gaps[j + 1] < 0:
            candidates.append(float(brentq(term_gap, grid[j], grid[j + 1], xtol=1e-12)))

    best = min(candidates, key=coeff_at)
    bd = threshold_coeff(design, theta, rho, best)
    return NuOptimum(nu_star=best, rate_star=bd.rate_bits, breakdown=bd)


# ---------------------------------------------------------------------------
# leading-order mutual information


def mi_small_ell(n: float, k: float, ell: float, rho: float, nu: float) -> float:
    """``(n nu e^-nu ell / k)(1 - 2 rho) ln((1 - rho) / rho)``."""
    return n * nu * math.exp(-nu) * ell / k * (1.0 - 2.0 * rho) * math.log((1.0 - rho) / rho)


def mi_alpha(n: float, alpha: float, rho: float, nu: float) -> float:
    """``n e^{-(1 - alpha) nu} (H2(e^{-alpha nu} * rho) - H2(rho))``."""
    return n * math.exp(-(1.0 - alpha) * nu) * (
        binary_entropy(star(math.exp(-alpha * nu), rho)) - binary_entropy(rho)
    )


def asymptotic_mutual_info(
    design: str,
    n: float,
    k: int,
    ell: int,
    rho: float,
    nu: float,
    switch: float = MI_REGIME_SWITCH,
) -> MutualInfoAsymptotic:
    """Leading-order ``I_ell^n``; both designs share the same formulas."""
    _check_design(design)
    if not 1 <= ell <= k:
        raise ValueError(f"need 1 <= ell <= k, got ell={ell}, k={k}")
    alpha = ell / k
    if alpha > switch:
        return MutualInfoAsymptotic(mi_alpha(n, alpha, rho, nu), "alpha_positive", alpha)
    return MutualInfoAsymptotic(mi_small_ell(n, k, ell, rho, nu), "small_alpha", alpha)
