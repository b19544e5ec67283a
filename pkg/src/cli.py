from __future__ import annotations

# Command-line entry point: simulate / estimate / asymptotics / mc.
# stdout carries data (JSON), stderr carries diagnostics.

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from src.asymptotics import report_for
from src.config import ConfigError, load_config, resolve_seed
from src.estimator import estimate
from src.excel_io import write_report_workbook
from src.experiment import McExperimentConfig, run_mc, write_mc_artifacts
from src.model_core import MODEL_KINDS
from src.series_io import SeriesFormatError, csv_to_series, path_to_csv
from src.simulator import SimConfig, simulate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, allow_nan=False) + "\n")


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    n = args.length if args.length is not None else cfg.n
    if n is None:
        raise ConfigError("Missing config key 'n' (or pass --length).", key="n")
    seed = resolve_seed(args.seed, cfg.seed)
    series = simulate(SimConfig(model=cfg.model, n=n, seed=seed, subgrid=cfg.subgrid, v0=cfg.v0))
    path = path_to_csv(series, args.out)
    logger.info("Simulated %s observations (seed %s) into %s", series.n, seed, path)
    _emit({"path": str(path), "n": series.n, "seed": seed, "model": cfg.model.kind})
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    series = csv_to_series(args.csv)
    result = estimate(series, args.model)
    _emit(result.to_dict(args.model, zero_outside_gate=args.zero_outside_gate))
    if not result.ok:
        logger.warning("Estimate degenerate: %s", "; ".join(result.reasons))
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_asymptotics(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    report = report_for(cfg.model, args.model)
    payload = report.to_dict()
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    if args.xlsx is not None:
        write_report_workbook(
            args.xlsx,
            {"Asymptotic_S": report.s_frame(), "Asymptotic_R": report.r_frame()},
        )
    _emit(payload)
    return EXIT_OK


def cmd_mc(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    replications = args.replications if args.replications is not None else cfg.replications
    length = args.length if args.length is not None else cfg.length
    if replications is None:
        raise ConfigError("Missing config key 'replications' (or pass --replications).", key="replications")
    if length is None:
        raise ConfigError("Missing config key 'length' (or pass --length).", key="length")
    experiment = McExperimentConfig(
        model=cfg.model,
        n=length,
        replications=replications,
        seed=resolve_seed(args.seed, cfg.seed),
        bins=args.bins if args.bins is not None else cfg.bins,
        workers=args.workers if args.workers is not None else cfg.workers,
        subgrid=cfg.subgrid,
    )
    report = run_mc(experiment)
    written = write_mc_artifacts(report, args.out)
    if args.xlsx is not None:
        tables = {
            "MC_Summary": report.summary,
            "MC_Estimates": report.estimates,
            "Asymptotic_S": report.asymptotics.s_frame(),
        }
        if report.comparison is not None:
            tables["MC_Comparison"] = report.comparison
        written.append(write_report_workbook(args.xlsx, tables))
    payload = report.to_dict()
    payload["artifacts"] = [str(p) for p in written]
    _emit(payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level on stderr.")

    parser = argparse.ArgumentParser(
        prog="bns",
        description="Simulate BNS stochastic volatility models, estimate their parameters and "
        "evaluate the asymptotic covariance of the explicit estimator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Simulate one path into a CSV file.")
    p.add_argument("--config", type=Path, required=True, help="JSON model/simulation config.")
    p.add_argument("--out", type=Path, required=True, help="Output CSV path.")
    p.add_argument("--seed", type=int, default=None, help="Unsigned 64-bit seed (overrides config and BNS_SEED).")
    p.add_argument("--length", type=int, default=None, help="Path length n (overrides config 'n').")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("estimate", parents=[common], help="Estimate theta from a CSV series.")
    p.add_argument("csv", type=Path, help="Series CSV written by 'simulate' or in the same format.")
    p.add_argument("--model", choices=MODEL_KINDS, default="generic", help="Named view of the estimates.")
    p.add_argument(
        "--zero-outside-gate",
        action="store_true",
        help="Report theta_hat = 0 for degenerate samples instead of null.",
    )
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("asymptotics", parents=[common], help="Asymptotic covariance report.")
    p.add_argument("--config", type=Path, required=True, help="JSON model config.")
    p.add_argument("--model", choices=MODEL_KINDS, default=None, help="Parametrization (default: the config's model).")
    p.add_argument("--out", type=Path, default=None, help="Also write the JSON report to this path.")
    p.add_argument("--xlsx", type=Path, default=None, help="Also write s and r as named tables to a workbook.")
    p.set_defaults(handler=cmd_asymptotics)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo experiment with histogram output.")
    p.add_argument("--config", type=Path, required=True, help="JSON model/MC config.")
    p.add_argument("--out", type=Path, required=True, help="Output directory.")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replications", type=int, default=None, help="Number of replications m.")
    p.add_argument("--length", type=int, default=None, help="Observations per replication n.")
    p.add_argument("--bins", type=int, default=None, help="Histogram bins per parameter.")
    p.add_argument("--workers", type=int, default=None, help="Worker processes.")
    p.add_argument("--xlsx", type=Path, default=None, help="Also write report tables to a workbook.")
    p.set_defaults(handler=cmd_mc)

    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (ConfigError, SeriesFormatError, ValueError, OSError) as err:
        logger.error("%s", err)
        return EXIT_INPUT
    except Exception:
        logger.exception("Unexpected failure in '%s'", args.command)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
