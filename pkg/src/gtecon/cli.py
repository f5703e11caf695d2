"""Command-line entry point: ``gtecon {ingest,optimize,run,sweep}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from .config import ConfigError, RunConfig, column_maps
from .harness import SWEEPABLE, baseline_value, optimal_choice, run_scenario, sweep
from .ingest import IncidenceFormat, IncomeFormat, SchemaError, load_incidence_csv, load_income_csv
from .optimize import (
    DomainError,
    InfeasibleError,
    OptimizationRequest,
    SearchSpaceTooLarge,
    exhaustive_search,
    optimize_pool_sizes,
)

log = logging.getLogger("gtecon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class DataError(RuntimeError):
    pass


class UsageError(RuntimeError):
    pass


def _write_table(path: Path, rows: list[dict], fmt: str) -> Path:
    path = path.with_name(f"{path.name}.{fmt}")
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        return path
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _write_manifest(out: Path, cfg: RunConfig, command: str, outputs: list[Path]) -> None:
    manifest = cfg.manifest(command, [p.name for p in outputs])
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_inputs(cfg: RunConfig):
    try:
        prevalence = cfg.load_prevalence()
        incomes = cfg.load_incomes()
    except (SchemaError, OSError) as exc:
        raise DataError(str(exc)) from exc
    if not prevalence:
        raise DataError("no incidence records for the configured locations and dates")
    return prevalence, incomes


def _resolve(args) -> RunConfig:
    overrides = {"seed": args.seed, "format": args.format}
    cfg = RunConfig.load(args.config, overrides)
    return cfg


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


# --- subcommands ------------------------------------------------------------

def cmd_ingest(args) -> int:
    if bool(args.incidence) == bool(args.income):
        raise UsageError("give exactly one of --incidence or --income")
    inc_fmt, income_fmt = IncidenceFormat(), IncomeFormat()
    if args.config:
        inc_cols, income_cols = column_maps(args.config)
        try:
            inc_fmt, income_fmt = IncidenceFormat(**inc_cols), IncomeFormat(**income_cols)
        except TypeError as exc:
            raise ConfigError(f"column mapping: {exc}") from exc
    try:
        if args.incidence:
            _, report = load_incidence_csv(args.incidence, inc_fmt)
        else:
            _, report = load_income_csv(args.income, income_fmt)
    except SchemaError as exc:
        raise DataError(str(exc)) from exc
    text = report.to_json()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_optimize(args) -> int:
    try:
        req = OptimizationRequest(args.k, args.p, n=args.n, s_max=args.s_max, strict_nesting=not args.no_strict)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        result = exhaustive_search(req) if args.exhaustive else optimize_pool_sizes(req)
    except (InfeasibleError, SearchSpaceTooLarge) as exc:
        raise UsageError(str(exc)) from exc
    payload = {
        "k": result.plan.stages,
        "pool_sizes": list(result.plan.pool_sizes),
        "p": req.p,
        "n": req.n,
        "expected_tests": result.expected_tests_at_optimum,
        "per_capita": result.per_capita,
        "method": result.method,
        "individual_dominates": result.individual_dominates,
        "approximate": result.approximate,
    }
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        sizes = ", ".join(map(str, result.plan.pool_sizes))
        print(f"k={payload['k']} s=({sizes}) expected_tests={payload['expected_tests']:.4f} "
              f"per_capita={payload['per_capita']:.6f} method={payload['method']}"
              + (" individual_dominates" if result.individual_dominates else "")
              + (" approximate" if result.approximate else ""))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _resolve(args)
    scenario = cfg.scenario(threads=_threads(args))
    prevalence, incomes = _load_inputs(cfg)
    try:
        results = run_scenario(scenario, prevalence, incomes)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmt = cfg.raw["format"]
    written = [
        _write_table(out / "results", [r.to_row() for r in results], fmt),
        _write_table(out / "optimal_choice", [c.to_row() for c in optimal_choice(results)], fmt),
    ]
    _write_manifest(out, cfg, "run", written)
    log.info("wrote %d result rows to %s", len(results), out)
    return EXIT_OK


def _parse_values(param: str, text: str | None) -> list:
    if text is None:
        return []
    values = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            number = float(token)
        except ValueError as exc:
            raise UsageError(f"--values: not a number: {token!r}") from exc
        values.append(int(number) if param in ("n", "tau0") else number)
    return values


def _label(value) -> str:
    return f"{value:g}" if isinstance(value, float) else str(value)


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    block = cfg.raw.get("sweep") or {}
    param = args.param or block.get("param")
    if param not in SWEEPABLE:
        raise UsageError(f"--param must be one of {', '.join(SWEEPABLE)}, got {param!r}")
    values = _parse_values(param, args.values) if args.values is not None else list(block.get("values") or [])
    if not values:
        raise UsageError("--values must list at least one value")
    scenario = cfg.scenario(threads=_threads(args))
    prevalence, incomes = _load_inputs(cfg)
    with warnings.catch_warnings():
        # Table values of c_v exceed c_l on purpose
        warnings.filterwarnings("ignore", message="outsourcing cost")
        try:
            sets = sweep(scenario, param, values, prevalence, incomes)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmt = cfg.raw["format"]
    written, choices = [], []
    for value, results in sets:
        written.append(_write_table(out / f"sweep_{param}_{_label(value)}", [r.to_row() for r in results], fmt))
        for c in optimal_choice(results):
            choices.append({"param": param, "value": value, **c.to_row()})
    written.append(_write_table(out / f"sweep_{param}_optimal_choice", choices, fmt))
    cfg.raw["sweep"] = {"param": param, "values": values, "baseline": baseline_value(scenario, param)}
    _write_manifest(out, cfg, "sweep", written)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gtecon", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse an incidence or income CSV and print the ingestion report")
    p.add_argument("--incidence", help="seven-day incidence CSV (RKI district layout)")
    p.add_argument("--income", help="income CSV (region, year, monthly_gross_eur, weekly_hours)")
    p.add_argument("--out", help="write the JSON report here as well")
    p.add_argument("--config", help="take column mappings from this run config")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("optimize", help="pool sizes minimizing the expected number of tests")
    p.add_argument("--k", type=int, required=True, help="number of stages (2..5)")
    p.add_argument("--p", type=float, required=True, help="prevalence in (0, 1)")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--s-max", type=int, default=256, dest="s_max")
    p.add_argument("--no-strict", action="store_true", help="drop the divisibility requirement")
    p.add_argument("--exhaustive", action="store_true", help="enumerate all plans instead")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_optimize)

    for name, func, helptext in (("run", cmd_run, "run the Monte Carlo study"),
                                 ("sweep", cmd_sweep, "one-at-a-time sensitivity sweep")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        if name == "sweep":
            p.add_argument("--param", help=f"one of {', '.join(SWEEPABLE)}")
            p.add_argument("--values", help="comma-separated values")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
