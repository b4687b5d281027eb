"""Property suites run by ``noisy-gt verify``.

Each check yields a record ``{suite, name, passed, value, detail}``.  The
oracles here are written independently of the solvers they audit: the
minimax oracle is a brute-force zoomed grid over (C, zeta) using vectorized
exponents, and the f2 oracle minimizes g over a dense d-grid.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from . import thresholds as th
from .channel import apply_noise, noiseless_outcomes
from .designs import ProblemParams, design_stats, gen_near_constant, generate, round_delta, sample_defectives
from .events import check_failure_conditions
from .infomath import (
    binomial_cdf_tail,
    binomial_pmf,
    binomial_tail_bounds,
    hypergeom_bounds,
    hypergeom_pmf,
    occupancy_pmf,
    occupancy_upper_bound,
)

SUITES = ("formulas", "events", "distributions")


def _record(suite: str, name: str, passed: bool, value, detail: str = "") -> dict:
    return {"suite": suite, "name": name, "passed": bool(passed), "value": value, "detail": detail}


# ---------------------------------------------------------------------------
# vectorized exponents for the oracles


def _kl_vec(a, b):
    a = np.asarray(a, dtype=float)
    return xlogy(a, a) - xlogy(a, b) + xlogy(1 - a, 1 - a) - xlogy(1 - a, 1 - b)


def f1_vec(design: str, C, zeta, rho: float, nu: float):
    C = np.asarray(C, dtype=float)
    div = C * _kl_vec(zeta, rho)
    if design == "bern":
        return xlogy(C, C) - C + div + 1.0
    E = math.exp(nu)
    return E * _kl_vec(np.minimum(C / E, 1.0), 1.0 / E) + div


def g_vec(design: str, A, d, rho: float, nu: float):
    A = np.asarray(A, dtype=float)
    d = np.asarray(d, dtype=float)
    if design == "bern":
        r = np.maximum(rho * d - A, 0.0)
        return rho * xlogy(d, d) + xlogy(r, r / (1 - rho)) + 1.0 - 2.0 * rho * d + A
    E = math.exp(nu)
    inner = np.clip(0.5 + A / (2.0 * np.where(d > 0, d, 1.0)), 0.0, 1.0)
    return E * _kl_vec(np.clip(d / E, 0.0, 1.0), 1.0 / E) + d * _kl_vec(inner, rho)


def d_star_cased(A: float, rho: float, nu: float) -> float:
    """Near-constant d* in its two-case quadratic-root form, clamped to [|A|, e^nu]."""
    E = math.exp(nu)
    c = 4 * rho * (1 - rho)
    if c == (E - 1) ** 2:
        d = (A * A + E * E) / (2 * E)
    else:
        a = (E - 1) ** 2 / c
        d = (-E + math.sqrt(E * E + (a - 1) * (A * A * a + E * E))) / (a - 1)
    return min(max(d, abs(A)), E)


def f2_grid(design: str, A: float, rho: float, nu: float, points: int = 20001) -> float:
    """min over d of g by a dense grid followed by bounded refinement in the best cell."""
    if design == "bern":
        lo = max(0.0, A / rho)
        hi = lo + 200.0 / rho
        grid = lo + np.concatenate(([0.0], np.geomspace(1e-12, hi - lo, points - 1)))
    else:
        E = math.exp(nu)
        lo, hi = abs(A), E
        grid = np.linspace(lo, hi, points)
    vals = g_vec(design, A, grid, rho, nu)
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best = float(vals[i])
    if b > a:
        res = minimize_scalar(
            lambda x: float(g_vec(design, A, x, rho, nu)), bounds=(a, b), method="bounded",
            options={"xatol": 1e-14 * max(1.0, b)},
        )
        best = min(best, float(res.fun))
    return best


def f2_vec(design: str, C, zeta, rho: float, nu: float):
    """f2 over arrays, with d* from the quadratic-root forms."""
    A = np.asarray(C, dtype=float) * (1 - 2 * np.asarray(zeta, dtype=float))
    c = 4 * rho * (1 - rho)
    root = np.sqrt(A * A + c)
    if design == "bern":
        d = np.where(A >= 0, (A + root) / (2 * rho), c / (root - A) / (2 * rho))
    else:
        E = math.exp(nu)
        a = (E - 1) ** 2 / c
        X = A * A * a + E * E
        d = np.clip(X / (np.sqrt(E * E + (a - 1) * X) + E), np.abs(A), E)
    return g_vec(design, A, d, rho, nu)


def minimax_grid_oracle(
    design: str, theta: float, rho: float, nu: float, points: int = 400, zooms: int = 8, window: int = 20
) -> tuple[float, float, float]:
    """Brute-force min over (C, zeta) of max{f1/theta, f2}, by a zoomed points x points grid.

    C is log-spaced on (1e-4, C_max] (C_max = 50 for bern, e^nu for nc) and
    zeta linear on [1e-6, 1 - 1e-6].  Each zoom re-centres a grid ``2 window``
    cells wide around the current best point.
    """
    c_lo, c_hi = 1e-4, (th.C_MAX_BERN if design == "bern" else math.exp(nu))
    z_lo, z_hi = 1e-6, 1 - 1e-6
    lc_lo, lc_hi = math.log(c_lo), math.log(c_hi)
    best = (math.inf, 0.0, 0.0)
    for _ in range(zooms):
        lcs = np.linspace(lc_lo, lc_hi, points)
        zs = np.linspace(z_lo, z_hi, points)
        LC, Z = np.meshgrid(lcs, zs, indexing="ij")
        C = np.exp(LC)
        obj = np.maximum(f1_vec(design, C, Z, rho, nu) / theta, f2_vec(design, C, Z, rho, nu))
        i, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
        if obj[i, j] < best[0]:
            best = (float(obj[i, j]), float(C[i, j]), float(Z[i, j]))
        dlc = (lc_hi - lc_lo) / (points - 1)
        dz = (z_hi - z_lo) / (points - 1)
        lc_c, z_c = lcs[i], zs[j]
        lc_lo, lc_hi = max(math.log(1e-4), lc_c - window * dlc), min(math.log(c_hi), lc_c + window * dlc)
        z_lo, z_hi = max(1e-6, z_c - window * dz), min(1 - 1e-6, z_c + window * dz)
    return best


def random_feasible_points(design: str, nu: float, size: int, rng: np.random.Generator):
    """Random (C, zeta) with log-uniform C on the design's domain and uniform zeta."""
    c_hi = th.C_MAX_BERN if design == "bern" else math.exp(nu)
    C = np.exp(rng.uniform(math.log(1e-3), math.log(c_hi), size))
    zeta = rng.uniform(1e-6, 1 - 1e-6, size)
    return C, zeta


# ---------------------------------------------------------------------------
# suites


def nc_continuity_check() -> dict:
    """nc d* is continuous across 4 rho (1 - rho) = (e^nu - 1)^2.

    The one-sided limits use the literal two-case formula; the package value
    is checked at and just beside the switch.
    """
    worst = 0.0
    for rho in (0.01, 0.1, 0.2, 0.3):
        nu = math.log(1 + 2 * math.sqrt(rho * (1 - rho)))
        E = math.exp(nu)
        for A in (2 * rho - 1, -0.2, 0.0, 0.3, 1 - 2 * rho):
            boundary = min(max((A * A + E * E) / (2 * E), abs(A)), E)
            for eps in (1e-7, -1e-7):
                worst = max(worst, abs(d_star_cased(A, rho, nu + eps) - boundary))
            for v in (nu, nu + 1e-9, nu - 1e-9):
                worst = max(worst, abs(th.d_star("nc", A, 0.0, rho, v) - boundary))
    return _record("formulas", "nc_d_star_continuity", worst < 1e-6, worst)


def formulas_suite(points: int = 200, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    worst_stat = worst_f2 = 0.0
    for _ in range(points):
        design = th.DESIGNS[int(rng.integers(2))]
        rho = float(rng.uniform(0.005, 0.45))
        nu = float(rng.uniform(0.2, 3.0))
        C, zeta = random_feasible_points(design, nu, 1, rng)
        C, zeta = float(C[0]), float(zeta[0])
        A = C * (1 - 2 * zeta)
        d = th.d_star(design, C, zeta, rho, nu)
        E = math.exp(nu)
        interior = design == "bern" or abs(A) + 1e-9 < d < E - 1e-9
        if interior:
            worst_stat = max(worst_stat, abs(th.dg_dd(design, C, zeta, d, rho, nu)))
        ref = f2_grid(design, A, rho, nu)
        val = th.f2(design, C, zeta, rho, nu)
        worst_f2 = max(worst_f2, abs(val - ref) / max(abs(ref), 1e-12))
    out.append(_record("formulas", "d_star_stationarity", worst_stat < 1e-8, worst_stat, "max |dg/dd(d*)|"))
    out.append(_record("formulas", "f2_vs_dense_grid", worst_f2 < 1e-6, worst_f2, "max relative gap"))

    out.append(nc_continuity_check())

    worst_mm = 0.0
    for design in th.DESIGNS:
        for theta in (0.3, 0.5, 0.8):
            for rho in (0.01, 0.11):
                nu = 1.0
                val = th.minimax_czeta(design, theta, rho, nu).value
                ref = minimax_grid_oracle(design, theta, rho, nu)[0]
                worst_mm = max(worst_mm, abs(val - ref) / ref)
    out.append(_record("formulas", "minimax_vs_grid_oracle", worst_mm < 1e-4, worst_mm))

    cap = 1 - th.binary_entropy(0.01) / math.log(2)
    gaps = [abs(th.optimize_nu(d, 0.05, 0.01).rate_star - cap) for d in th.DESIGNS]
    out.append(_record("formulas", "capacity_plateau", max(gaps) < 1e-3, max(gaps)))
    return out


def events_suite(instances: int = 1000, seed: int = 0) -> list[dict]:
    """Failure-lemma sandwich and swap identity on random desk-scale instances."""
    rng = np.random.default_rng(seed)
    violations = failures = strict = 0
    for t in range(instances):
        design = ("bern", "nc")[t % 2]
        k = int(rng.integers(1, 4))
        p = int(rng.integers(k + 2, 21))
        n = int(rng.integers(6, 31))
        rho = (0.0, 0.1, 0.2)[t % 3]
        pr = ProblemParams(p=p, k=k, n=n, nu=math.log(2), design=design, seed=int(rng.integers(2**32)))
        X = generate(pr)
        S = sample_defectives(p, k, int(rng.integers(2**32)))
        out = apply_noise(noiseless_outcomes(X, S), rho, int(rng.integers(2**32)))
        fc = check_failure_conditions(X, out, S)
        violations += fc.violations
        failures += fc.restricted_failed
        strict += fc.sufficient_found
    return [
        _record(
            "events",
            "failure_lemma_sandwich",
            violations == 0,
            violations,
            f"{instances} instances, {failures} restricted-MLE failures, {strict} with strict witnesses",
        )
    ]


def _occupancy_mc(L: int, n1: int, n2: int, draws: int, rng) -> np.ndarray:
    n = n1 + n2
    tests = rng.integers(0, n, size=(draws, L))
    in_block = tests >= n1
    # distinct block tests per draw: sort and count changes
    vals = np.where(in_block, tests, -1)
    vals.sort(axis=1)
    distinct = (np.diff(vals, axis=1) != 0) & (vals[:, 1:] >= 0)
    m = distinct.sum(axis=1) + (vals[:, 0] >= 0)
    return np.bincount(m, minlength=min(L, n2) + 1) / draws


def distributions_suite(draws: int = 10**6, seed: int = 0, design_seeds: int = 100) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    cases = [(6, 3, 5), (8, 4, 8), (4, 0, 4), (8, 2, 10), (5, 7, 5), (3, 6, 6)]
    worst_norm = worst_tv = 0.0
    bound_ok = True
    for L, n1, n2 in cases:
        pmf = np.array([occupancy_pmf(L, n1, n2, m) for m in range(min(L, n2) + 1)])
        worst_norm = max(worst_norm, abs(pmf.sum() - 1))
        emp = _occupancy_mc(L, n1, n2, draws, rng)
        worst_tv = max(worst_tv, 0.5 * float(np.abs(emp[: len(pmf)] - pmf).sum()))
        for m in range(len(pmf)):
            if pmf[m] > occupancy_upper_bound(L, n1, n2, m) * (1 + 1e-12):
                bound_ok = False
    out.append(_record("distributions", "occupancy_normalization", worst_norm < 1e-10, worst_norm))
    out.append(_record("distributions", "occupancy_vs_monte_carlo", worst_tv < 0.01, worst_tv, "max TV"))
    out.append(_record("distributions", "occupancy_bound_dominates", bound_ok, bound_ok))

    bad = 0
    for N, q in [(10, 0.3), (30, 0.2), (50, 0.05), (100, 0.5), (200, 0.11)]:
        for t in range(N + 1):
            pm = binomial_pmf(N, q, t)
            side = "lower" if t <= N * q else "upper"
            b = binomial_tail_bounds(N, q, t, side)
            tail = binomial_cdf_tail(N, q, t, side)
            if not (b["anti"] <= pm * (1 + 1e-12) and pm <= b["chernoff"] * (1 + 1e-12)):
                bad += 1
            if tail > b["chernoff"] * (1 + 1e-12):
                bad += 1
    out.append(_record("distributions", "binomial_sandwich", bad == 0, bad, "violations"))

    bad = 0
    for N, K, n in [(2000, 736, 20), (500, 184, 30), (200, 74, 10), (60, 22, 30), (12, 5, 6)]:
        for t in range(n + 1):
            pm = hypergeom_pmf(N, K, n, t)
            if pm == 0.0:
                continue
            b = hypergeom_bounds(N, K, n, t)
            if not (b["lower"] <= pm * (1 + 1e-12) and pm <= b["chernoff"] * (1 + 1e-12)):
                bad += 1
    out.append(_record("distributions", "hypergeometric_sandwich", bad == 0, bad, "violations"))

    out.extend(design_statistics_check(design_seeds))
    return out


def design_statistics_check(design_seeds: int = 100) -> list[dict]:
    """Mean degree-1 count and N0/n for nc with k=200, Delta=30, nu=ln 2."""
    nu, k, delta = math.log(2), 200, 30
    n = int(round(delta * k / nu))
    deg1, n0 = [], []
    for s in range(design_seeds):
        pr = ProblemParams(p=k + 1, k=k, n=n, nu=nu, design="nc", seed=s)
        assert round_delta(nu, n, k) == delta
        S = list(range(k))
        X = gen_near_constant(pr, items=S)
        st = design_stats(X, S)
        deg1.append(st["degree1"])
        n0.append(st["N0"] / n)
    rel1 = abs(np.mean(deg1) / (math.exp(-nu) * k * delta) - 1)
    rel0 = abs(np.mean(n0) / math.exp(-nu) - 1)
    return [
        _record("distributions", "degree1_mean", rel1 < 0.03, rel1, "relative gap"),
        _record("distributions", "N0_fraction_mean", rel0 < 0.02, rel0, "relative gap"),
    ]


SUITE_FUNCS: dict[str, Callable[..., list[dict]]] = {
    "formulas": formulas_suite,
    "events": events_suite,
    "distributions": distributions_suite,
}


def run_verify(suite: str = "all", **kwargs) -> list[dict]:
    names = SUITES if suite == "all" else (suite,)
    out = []
    for name in names:
        if name not in SUITE_FUNCS:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITES} or 'all'")
        out.extend(SUITE_FUNCS[name](**kwargs))
    return out
