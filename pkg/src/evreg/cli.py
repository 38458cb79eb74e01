"""Command-line interface: fit, test, and simulate subcommands.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence
(the report is still written).  ``EVREG_THREADS`` sets the default worker
count for ``simulate``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import svg
from .errors import DataError, EvregError, FormulaError
from .evd import Tail
from .fit import Direction, HypothesisSpec, fit_full
from .hots import STATISTICS, run_tests
from .model import Dataset, ModelSpec, parse_formula
from .sim import exact_critical_values, load_design, pvalue_discrepancy, run_power, run_size

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOCONV = 3

# Maximum January wind speed (m/s) and the minimum temperature (deg C) on the
# day it occurred, alpine tundra station, Niwot Ridge, Colorado, 2001-2010.
NIWOT_ROWS = (
    (2001, -7.40, 33.42),
    (2002, -11.95, 44.04),
    (2003, -17.99, 42.92),
    (2004, -25.63, 42.51),
    (2005, -16.61, 45.75),
    (2006, -10.93, 47.78),
    (2007, -9.21, 43.34),
    (2008, -26.13, 48.69),
    (2009, -20.27, 43.20),
    (2010, -19.00, 43.00),
)

DATASETS = {"niwot": {"columns": ("year", "temperature", "wind"), "rows": NIWOT_ROWS}}


def bundled_dataset(name: str, response: str) -> Dataset:
    try:
        spec = DATASETS[name]
    except KeyError:
        raise DataError(f"unknown bundled dataset {name!r}; available: {sorted(DATASETS)}")
    cols = {c: np.array([row[i] for row in spec["rows"]], dtype=float)
            for i, c in enumerate(spec["columns"])}
    if response not in cols:
        raise DataError(f"dataset {name!r} has no column {response!r}; "
                        f"available: {list(spec['columns'])}")
    y = cols.pop(response)
    return Dataset(response=y, covariates=cols)


def _load_data(args) -> Dataset:
    if args.dataset:
        return bundled_dataset(args.dataset, args.response)
    if not args.data:
        raise FormulaError("either --data or --dataset is required")
    return Dataset.from_csv(args.data, response=args.response)


def _build_model(args) -> ModelSpec:
    return ModelSpec(
        tail=Tail(args.family),
        location=parse_formula(args.location),
        dispersion=parse_formula(args.dispersion),
        dispersion_link=args.dispersion_link,
    )


def _fit_report(model: ModelSpec, result) -> dict:
    names = model.param_names()
    return {
        "theta": {n: float(v) for n, v in zip(names, result.theta)},
        "se": {n: (float(v) if np.isfinite(v) else None)
               for n, v in zip(names, result.se)},
        "loglik": float(result.loglik),
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "grad_norm": float(result.grad_norm),
    }


def _print_fit_text(report: dict, out):
    width = max(len(n) for n in report["theta"])
    print(f"{'parameter':<{width}}  {'estimate':>12}  {'s.e.':>12}", file=out)
    for name, est in report["theta"].items():
        se = report["se"][name]
        se_s = f"{se:12.4f}" if se is not None else " " * 12
        print(f"{name:<{width}}  {est:12.4f}  {se_s}", file=out)
    print(f"log-likelihood {report['loglik']:.6f}   converged {report['converged']}"
          f"   iterations {report['iterations']}", file=out)


def cmd_fit(args) -> int:
    model = _build_model(args)
    data = _load_data(args)
    result = fit_full(model, data)
    report = _fit_report(model, result)
    if args.out == "json":
        json.dump(report, sys.stdout, indent=2)
        print()
    else:
        _print_fit_text(report, sys.stdout)
    return EXIT_OK if result.converged else EXIT_NOCONV


def cmd_test(args) -> int:
    model = _build_model(args)
    data = _load_data(args)
    hyp = HypothesisSpec(param=model.param_index(args.param),
                         null_value=args.null,
                         direction=Direction(args.direction))
    which = STATISTICS if args.stats == "all" else \
        tuple(s.strip() for s in args.stats.split(",") if s.strip())
    unknown = set(which) - set(STATISTICS)
    if unknown:
        raise FormulaError(f"unknown statistics {sorted(unknown)}; available: {STATISTICS}")
    report = run_tests(model, data, hyp, which=which)
    payload = {
        "param": args.param,
        "null": args.null,
        "direction": args.direction,
        "statistics": {"R": report.R, **{k: float(v) for k, v in report.adjusted.items()}},
        "p_values": {k: float(v) for k, v in report.pvalues.items()},
        "unsupported": report.diagnostics.get("unsupported", {}),
        "errors": report.diagnostics.get("errors", {}),
        "near_zero": report.diagnostics.get("near_zero", False),
    }
    if args.out == "json":
        json.dump(payload, sys.stdout, indent=2)
        print()
    else:
        print(f"{'statistic':<10} {'value':>10} {'p-value':>10}")
        for name in ("R",) + tuple(s for s in STATISTICS if s != "R"):
            if name in payload["statistics"]:
                v = payload["statistics"][name]
                p = payload["p_values"][name]
                print(f"{name:<10} {v:>10.4f} {p:>10.4f}")
            elif name in payload["unsupported"]:
                print(f"{name:<10} {'unsupported':>10}   ({payload['unsupported'][name]})")
            elif name in payload["errors"]:
                print(f"{name:<10} {'error':>10}   ({payload['errors'][name]})")
    return EXIT_OK


def _write_csv(path: Path, rows: list[dict], columns: list[str]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt_cell(row[c]) for c in columns])


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def cmd_simulate(args) -> int:
    design = load_design(args.design)
    if args.reps is not None:
        design = replace(design, reps=args.reps)
    if args.seed is not None:
        design = replace(design, seed=args.seed)
    if args.redraw_covariates:
        design = replace(design, redraw_covariates=True)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    threads = args.threads
    summary = {"design": design.to_dict(), "mode": args.mode, "threads_requested": threads}

    if args.mode == "size":
        result = run_size(design, threads=threads)
        rows = result.size_rows()
        _write_csv(outdir / "size.csv", rows,
                   ["statistic", "alpha", "rate", "mc_se", "rejections", "valid", "failures"])
        summary.update({"failures": result.failures, "elapsed_s": result.elapsed,
                        "warning": result.warning})
        files = ["size.csv"]
    elif args.mode == "power":
        if not design.epsilons:
            raise DataError("power mode requires 'epsilons' in the design file")
        cvs, null_run = exact_critical_values(design, reps=args.crit_reps or design.crit_reps,
                                              threads=threads)
        power = run_power(design, design.epsilons, cvs, threads=threads)
        _write_csv(outdir / "power.csv", power["rows"],
                   ["statistic", "alpha", "epsilon", "rate", "rejections", "valid",
                    "critical_value", "failures"])
        cv_rows = [{"statistic": s, "alpha": a, "critical_value": cv}
                   for s, per in cvs.items() for a, cv in per.items()]
        _write_csv(outdir / "critical_values.csv", cv_rows,
                   ["statistic", "alpha", "critical_value"])
        summary.update({"null_failures": null_run.failures, "warning": null_run.warning,
                        "elapsed_s": null_run.elapsed})
        files = ["power.csv", "critical_values.csv"]
    else:  # discrepancy
        out = pvalue_discrepancy(design, threads=threads)
        grid = out["grid"]
        rows = []
        for i, p in enumerate(grid):
            row = {"asymptotic_p": float(p)}
            row.update({s: float(out["curves"][s][i]) for s in design.statistics})
            rows.append(row)
        _write_csv(outdir / "discrepancy.csv", rows,
                   ["asymptotic_p"] + list(design.statistics))
        svg.write_line_svg(outdir / "discrepancy.svg", grid,
                           {s: out["curves"][s] for s in design.statistics},
                           title=f"relative p-value discrepancy, {design.name}",
                           xlabel="asymptotic p-value", ylabel="relative discrepancy")
        summary.update({"failures": out["run"].failures, "elapsed_s": out["run"].elapsed,
                        "warning": out["run"].warning})
        files = ["discrepancy.csv", "discrepancy.svg"]

    summary["files"] = files
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if summary.get("warning"):
        print(f"warning: {summary['warning']}")
    print(f"wrote {', '.join(files)} and summary.json to {outdir}")
    return EXIT_OK


def _default_threads() -> int:
    env = os.environ.get("EVREG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evreg",
        description="Extreme value (Gumbel) regression: fitting, one-sided "
                    "adjusted tests, and Monte Carlo studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_flags(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--data", help="CSV file with a header row")
        src.add_argument("--dataset", choices=sorted(DATASETS),
                         help="bundled dataset name")
        p.add_argument("--response", required=True, help="response column name")
        p.add_argument("--location", required=True,
                       help="location formula, e.g. '1 + temperature'")
        p.add_argument("--dispersion", default="1",
                       help="dispersion formula (default: '1')")
        p.add_argument("--family", choices=["max", "min"], default="max")
        p.add_argument("--dispersion-link", choices=["log", "identity"],
                       default="log", dest="dispersion_link")
        p.add_argument("--out", choices=["json", "text"], default="text")

    p_fit = sub.add_parser("fit", help="maximum likelihood fit")
    add_model_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_test = sub.add_parser("test", help="one-sided tests with adjustments")
    add_model_flags(p_test)
    p_test.add_argument("--param", required=True, help="interest parameter name")
    p_test.add_argument("--null", type=float, required=True, help="null value")
    p_test.add_argument("--direction", choices=["greater", "less"], required=True,
                        help="alternative hypothesis direction")
    p_test.add_argument("--stats", default="all",
                        help="'all' or comma list of " + ",".join(STATISTICS))
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser("simulate", help="Monte Carlo size/power/discrepancy study")
    p_sim.add_argument("--design", required=True, help="design file (key = value)")
    p_sim.add_argument("--mode", choices=["size", "power", "discrepancy"], required=True)
    p_sim.add_argument("--reps", type=int, help="override replicate count")
    p_sim.add_argument("--crit-reps", type=int, dest="crit_reps",
                       help="override null replicates for exact critical values")
    p_sim.add_argument("--seed", type=int, help="override master seed")
    p_sim.add_argument("--threads", type=int, default=_default_threads(),
                       help="worker processes (default: EVREG_THREADS or CPU count)")
    p_sim.add_argument("--redraw-covariates", action="store_true",
                       help="redraw covariates per replicate")
    p_sim.add_argument("--out-dir", required=True, dest="out_dir")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FormulaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EvregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
