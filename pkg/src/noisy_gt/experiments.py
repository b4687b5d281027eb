"""Reproducible experiments: threshold tables and decoder Monte Carlo.

Per-trial seeds are derived from a root seed as
``SeedSequence(root, spawn_key=(trial, stream))`` with one stream each for
the design, the noise and the defective set, so trials can run in any order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from scipy.stats import binomtest

from . import thresholds as th
from .channel import apply_noise, noiseless_outcomes
from .decoders import (
    BudgetError,
    count_correct,
    hybrid_decoder,
    mle_exact,
    ncomp_baseline,
    threshold_decoder,
)
from .designs import (
    STREAM_DEFECTIVES,
    STREAM_DESIGN,
    STREAM_NOISE,
    ProblemParams,
    derive_seed,
    generate,
    sample_defectives,
)

THRESHOLD_COLUMNS = (
    "design",
    "theta",
    "rho",
    "nu",
    "term1_coeff",
    "term2_coeff",
    "coeff",
    "rate_bits",
    "C_star",
    "zeta_star",
    "d_star",
    "binding",
    "error",
)

SUMMARY_COLUMNS = (
    "decoder",
    "design",
    "p",
    "k",
    "n",
    "rho",
    "nu",
    "theta_hat",
    "trials",
    "errors",
    "budget_errors",
    "pe",
    "ci_low",
    "ci_high",
)

DECODERS = ("mle", "threshold", "hybrid", "ncomp")


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def rows_to_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r) + "\n" for r in rows)


def threshold_row(design: str, theta: float, rho: float, nu) -> dict:
    """One row of the threshold table; ``nu='opt'`` optimizes the rate over nu."""
    row = {"design": design, "theta": theta, "rho": rho, "nu": nu, "error": ""}
    try:
        if nu == "opt":
            bd = th.optimize_nu(design, theta, rho).breakdown
        else:
            bd = th.threshold_coeff(design, theta, rho, float(nu))
    except (th.ConvergenceError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        nu=bd.nu,
        term1_coeff=bd.term1_coeff,
        term2_coeff=bd.term2_coeff,
        coeff=bd.coeff,
        rate_bits=bd.rate_bits,
        C_star=bd.C_star,
        zeta_star=bd.zeta_star,
        d_star=bd.d_star,
        binding=bd.binding,
    )
    return row


def run_threshold_table(
    thetas: Sequence[float],
    rhos: Sequence[float],
    nus: Sequence,
    designs: Sequence[str] = th.DESIGNS,
) -> list[dict]:
    """Rows over the full (design, rho, nu, theta) grid; solver failures go to the error column."""
    return [
        threshold_row(d, float(t), float(r), nu)
        for d in designs
        for r in rhos
        for nu in nus
        for t in thetas
    ]


@dataclass
class ExperimentConfig:
    params: ProblemParams
    rho: float
    decoders: tuple = ("mle",)
    trials: int = 100
    seed: int = 0
    threshold_fraction: float = 1.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.rho < 0.5:
            raise ValueError(f"rho must lie in [0, 0.5), got {self.rho}")
        for d in self.decoders:
            if d not in DECODERS:
                raise ValueError(f"unknown decoder {d!r}; choose from {DECODERS}")


@dataclass
class SimulationResult:
    records: list = field(default_factory=list)
    summary: list = field(default_factory=list)


def _decode(name: str, X, out, k: int, cfg: ExperimentConfig):
    if name == "mle":
        return mle_exact(X, out, k)
    if name == "threshold":
        return threshold_decoder(X, out, k, rho=cfg.rho)
    if name == "hybrid":
        return hybrid_decoder(X, out, k, rho=cfg.rho)
    return ncomp_baseline(X, out, k, cfg.threshold_fraction)


def run_trial(cfg: ExperimentConfig, trial: int) -> list[dict]:
    """All configured decoders on one seeded instance (shared matrix and noise)."""
    base = cfg.params
    root = cfg.seed
    design_seed = derive_seed(root, trial, STREAM_DESIGN)
    pr = ProblemParams(p=base.p, k=base.k, n=base.n, nu=base.nu, design=base.design, seed=design_seed)
    X = generate(pr)
    S = sample_defectives(base.p, base.k, derive_seed(root, trial, STREAM_DEFECTIVES))
    out = apply_noise(noiseless_outcomes(X, S), cfg.rho, derive_seed(root, trial, STREAM_NOISE))
    recs = []
    for name in cfg.decoders:
        try:
            res = _decode(name, X, out, base.k, cfg)
            status, ok, correct = res.status, res.success(S), res.correct_tests
        except BudgetError:
            status, ok, correct = "budget_error", False, None
        recs.append(
            {
                "trial": trial,
                "seed": design_seed,
                "decoder": name,
                "success": bool(ok),
                "status": status,
                "correct_tests": correct,
                "true_correct_tests": count_correct(X, out, S),
            }
        )
    return recs


def summarize(records: Sequence[dict], cfg: ExperimentConfig) -> list[dict]:
    pr = cfg.params
    rows = []
    for name in cfg.decoders:
        mine = [r for r in records if r["decoder"] == name]
        trials = len(mine)
        errors = sum(1 for r in mine if not r["success"])
        lo, hi = wilson_interval(errors, trials)
        rows.append(
            {
                "decoder": name,
                "design": pr.design,
                "p": pr.p,
                "k": pr.k,
                "n": pr.n,
                "rho": cfg.rho,
                "nu": pr.nu,
                "theta_hat": pr.theta_hat,
                "trials": trials,
                "errors": errors,
                "budget_errors": sum(1 for r in mine if r["status"] == "budget_error"),
                "pe": errors / trials,
                "ci_low": lo,
                "ci_high": hi,
            }
        )
    return rows


def run_simulation(cfg: ExperimentConfig) -> SimulationResult:
    """Monte Carlo estimate of P_e = P[estimate != S] per decoder.

    Ties, none_satisfied and multiple_satisfied all count as errors.
    """
    records = []
    for t in range(cfg.trials):
        records.extend(run_trial(cfg, t))
    return SimulationResult(records=records, summary=summarize(records, cfg))


def nu_sweep(design: str, theta: float, rho: float, nus: Sequence[float]) -> list[dict]:
    return [threshold_row(design, theta, rho, float(v)) for v in nus]


def rate_curve(design: str, rho: float, thetas: Sequence[float], nu="opt") -> list[dict]:
    return [threshold_row(design, float(t), rho, nu) for t in thetas]


def config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["decoders"] = list(cfg.decoders)
    return d
