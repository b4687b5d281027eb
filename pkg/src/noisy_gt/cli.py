"""Command-line interface: ``noisy-gt <subcommand> [flags]``.

Exit codes: 0 success, 1 a verified property failed, 2 bad configuration.
A ``--config`` file holds flat ``key=value`` lines using the flag names
(dashes or underscores); flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import experiments as ex
from . import thresholds as th
from .designs import ProblemParams
from .infomath import (
    binomial_pmf,
    binomial_tail_bounds,
    hypergeom_bounds,
    hypergeom_pmf,
    occupancy_pmf,
    occupancy_upper_bound,
)
from .verify import SUITES, run_verify

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG = 0, 1, 2

CSV_HELP = (
    "threshold CSV columns: " + ",".join(ex.THRESHOLD_COLUMNS) + "; simulation summary columns: "
    + ",".join(ex.SUMMARY_COLUMNS)
)


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    """Comma list ``a,b,c`` or range ``start:stop:count`` (inclusive, linear)."""
    text = str(text).strip()
    if ":" in text:
        a, b, c = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(c))]
    return [float(x) for x in text.split(",") if x]


def _designs(value: str | None) -> list[str]:
    if value in (None, "both", "all"):
        return list(th.DESIGNS)
    if value not in th.DESIGNS:
        raise ConfigError(f"--design must be one of {th.DESIGNS} or 'both'")
    return [value]


def read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; command-line flags win")
    p.add_argument("--design", default=None, help="bern, nc or both")
    p.add_argument("--rho", default=None, help="noise level(s); comma list or start:stop:count")
    p.add_argument("--theta", default=None, help="sparsity exponent(s); comma list or start:stop:count")
    nu = p.add_mutually_exclusive_group()
    nu.add_argument("--nu", default=None, help="design density(ies)")
    nu.add_argument("--nu-opt", action="store_true", default=None, help="optimize nu per row")
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "jsonl"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisy-gt", description=__doc__, epilog=CSV_HELP)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="threshold coefficients and rates over a grid", epilog=CSV_HELP)
    _add_shared(p)

    p = sub.add_parser("nu-sweep", help="threshold breakdown across a nu grid", epilog=CSV_HELP)
    _add_shared(p)
    p.add_argument("--nu-grid", default=None, help="nu values; default 0.1:3:30")

    p = sub.add_parser("rate-curve", help="rate versus theta (nu optimized unless --nu is given)", epilog=CSV_HELP)
    _add_shared(p)

    p = sub.add_parser("simulate", help="decoder Monte Carlo", epilog=CSV_HELP)
    _add_shared(p)
    p.add_argument("--decoder", default=None, help="comma list from " + ",".join(ex.DECODERS))
    p.add_argument("--summary", default=None, help="summary CSV path (default: stderr)")
    p.add_argument("--threshold-fraction", type=float, default=None)

    p = sub.add_parser("verify", help="run property suites; exit 1 on any failure")
    _add_shared(p)
    p.add_argument("--suite", default=None, choices=SUITES + ("all",))
    p.add_argument("--instances", type=int, default=None, help="events suite instance count")

    p = sub.add_parser("pmf-check", help="exact pmfs against their bounds")
    _add_shared(p)
    p.add_argument("--kind", default=None, choices=("occupancy", "binomial", "hypergeom"))
    p.add_argument("--placements", type=int, default=None)
    p.add_argument("--n1", type=int, default=None)
    p.add_argument("--n2", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--draws", type=int, default=None)
    return parser


DEFAULTS = {
    "design": None,
    "rho": "0.01",
    "theta": "0.5",
    "nu": None,
    "nu_opt": False,
    "p": 16,
    "k": 2,
    "n": 40,
    "trials": 100,
    "seed": 0,
    "out": None,
    "format": "csv",
    "nu_grid": "0.1:3:30",
    "decoder": "mle",
    "summary": None,
    "threshold_fraction": 1.0,
    "suite": "all",
    "instances": 1000,
    "kind": "occupancy",
    "placements": 6,
    "n1": 3,
    "n2": 5,
    "N": 30,
    "K": 10,
    "q": 0.2,
    "draws": 8,
}

_INT_KEYS = {"p", "k", "n", "trials", "seed", "instances", "placements", "n1", "n2", "N", "K", "draws"}
_FLOAT_KEYS = {"threshold_fraction", "q"}
_BOOL_KEYS = {"nu_opt"}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    merged = {k: v for k, v in DEFAULTS.items() if hasattr(args, k)}
    if args.config:
        for key, value in read_config(args.config).items():
            if key not in merged:
                raise ConfigError(f"unknown config key {key!r} for '{args.command}'")
            try:
                if key in _INT_KEYS:
                    value = int(value)
                elif key in _FLOAT_KEYS:
                    value = float(value)
                elif key in _BOOL_KEYS:
                    value = value.lower() in ("1", "true", "yes", "on")
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
            merged[key] = value
    for key in merged:
        v = getattr(args, key)
        if v is not None:
            merged[key] = v
    if args.nu is not None:
        merged["nu_opt"] = False
    elif args.nu_opt:
        merged["nu"] = None
    return merged


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _table(rows, columns, cfg) -> str:
    if cfg["format"] == "jsonl":
        return ex.rows_to_jsonl([{c: r.get(c, "") for c in columns} for r in rows])
    return ex.rows_to_csv(rows, columns)


def _nus(cfg) -> list:
    if cfg["nu_opt"] or cfg["nu"] is None:
        return ["opt"]
    return _floats(cfg["nu"])


def cmd_threshold(cfg) -> int:
    rows = ex.run_threshold_table(_floats(cfg["theta"]), _floats(cfg["rho"]), _nus(cfg), _designs(cfg["design"]))
    _emit(_table(rows, ex.THRESHOLD_COLUMNS, cfg), cfg["out"])
    return EXIT_OK


def cmd_nu_sweep(cfg) -> int:
    rows = []
    for d in _designs(cfg["design"]):
        for rho in _floats(cfg["rho"]):
            for theta in _floats(cfg["theta"]):
                rows.extend(ex.nu_sweep(d, theta, rho, _floats(cfg["nu_grid"])))
    _emit(_table(rows, ex.THRESHOLD_COLUMNS, cfg), cfg["out"])
    return EXIT_OK


def cmd_rate_curve(cfg) -> int:
    thetas = _floats(cfg["theta"]) if cfg["theta"] != DEFAULTS["theta"] else _floats("0.05:0.95:19")
    nu = "opt" if cfg["nu_opt"] or cfg["nu"] is None else float(cfg["nu"])
    rows = []
    for d in _designs(cfg["design"]):
        for rho in _floats(cfg["rho"]):
            rows.extend(ex.rate_curve(d, rho, thetas, nu))
    _emit(_table(rows, ex.THRESHOLD_COLUMNS, cfg), cfg["out"])
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    design = cfg["design"] or "bern"
    if design not in th.DESIGNS:
        raise ConfigError("simulate needs a single --design (bern or nc)")
    nu = math.log(2) if cfg["nu"] is None else float(cfg["nu"])
    rhos = _floats(cfg["rho"])
    if len(rhos) != 1:
        raise ConfigError("simulate takes a single --rho")
    params = ProblemParams(p=cfg["p"], k=cfg["k"], n=cfg["n"], nu=nu, design=design, seed=cfg["seed"])
    decoders = tuple(d.strip() for d in str(cfg["decoder"]).split(",") if d.strip())
    exp = ex.ExperimentConfig(
        params=params,
        rho=rhos[0],
        decoders=decoders,
        trials=cfg["trials"],
        seed=cfg["seed"],
        threshold_fraction=cfg["threshold_fraction"],
    )
    res = ex.run_simulation(exp)
    if cfg["format"] == "csv":
        cols = ("trial", "seed", "decoder", "success", "status", "correct_tests", "true_correct_tests")
        _emit(ex.rows_to_csv(res.records, cols), cfg["out"])
    else:
        _emit(ex.rows_to_jsonl(res.records), cfg["out"])
    summary = ex.rows_to_csv(res.summary, ex.SUMMARY_COLUMNS)
    if cfg["summary"]:
        _emit(summary, cfg["summary"])
    else:
        sys.stderr.write(summary)
    return EXIT_OK


def cmd_verify(cfg) -> int:
    suite = cfg["suite"]
    kwargs = {"seed": cfg["seed"]}
    results = []
    for name in (SUITES if suite == "all" else (suite,)):
        extra = dict(kwargs)
        if name == "events":
            extra["instances"] = cfg["instances"]
        results.extend(run_verify(name, **extra))
    text = "".join(json.dumps(r, default=float) + "\n" for r in results)
    _emit(text, cfg["out"])
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_PROPERTY


def cmd_pmf_check(cfg) -> int:
    rows = []
    kind = cfg["kind"]
    if kind == "occupancy":
        L, n1, n2 = cfg["placements"], cfg["n1"], cfg["n2"]
        for m in range(min(L, n2) + 1):
            pm = occupancy_pmf(L, n1, n2, m)
            ub = occupancy_upper_bound(L, n1, n2, m)
            rows.append({"t": m, "pmf": pm, "lower": 0.0, "upper": ub, "ok": pm <= ub * (1 + 1e-12)})
        total = math.fsum(r["pmf"] for r in rows)
        norm_ok = abs(total - 1.0) < 1e-10
    elif kind == "binomial":
        N, q = cfg["N"], cfg["q"]
        for t in range(N + 1):
            pm = binomial_pmf(N, q, t)
            b = binomial_tail_bounds(N, q, t, "lower" if t <= N * q else "upper")
            ok = b["anti"] <= pm * (1 + 1e-12) and pm <= b["chernoff"] * (1 + 1e-12)
            rows.append({"t": t, "pmf": pm, "lower": b["anti"], "upper": b["chernoff"], "ok": ok})
        norm_ok = abs(math.fsum(r["pmf"] for r in rows) - 1.0) < 1e-10
    else:
        N, K, draws = cfg["N"], cfg["K"], cfg["draws"]
        for t in range(max(0, draws - (N - K)), min(K, draws) + 1):
            pm = hypergeom_pmf(N, K, draws, t)
            b = hypergeom_bounds(N, K, draws, t)
            ok = b["lower"] <= pm * (1 + 1e-12) and pm <= b["chernoff"] * (1 + 1e-12)
            rows.append({"t": t, "pmf": pm, "lower": b["lower"], "upper": b["chernoff"], "ok": ok})
        norm_ok = abs(math.fsum(r["pmf"] for r in rows) - 1.0) < 1e-10
    _emit(_table(rows, ("t", "pmf", "lower", "upper", "ok"), cfg), cfg["out"])
    return EXIT_OK if norm_ok and all(r["ok"] for r in rows) else EXIT_PROPERTY


COMMANDS = {
    "threshold": cmd_threshold,
    "nu-sweep": cmd_nu_sweep,
    "rate-curve": cmd_rate_curve,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "pmf-check": cmd_pmf_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"noisy-gt: configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
